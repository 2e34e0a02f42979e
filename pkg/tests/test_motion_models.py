import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from immtrack.core_types import AX, AY, OMEGA, STATE_DIM, THETA, VX, VY, X, Y
from immtrack.motion_models import (
    OMEGA_EPS, ModelKind, MotionModel, ProcessNoise, make_models, process_noise, propagate,
    transition, transition_many,
)

ALL = list(ModelKind)
TURNING = [k for k in ModelKind if k.turning]


def state(**kw):
    s = np.zeros(STATE_DIM)
    s[:3] = (4.5, 1.8, 1.5)
    names = {"x": X, "y": Y, "theta": THETA, "vx": VX, "vy": VY, "omega": OMEGA, "ax": AX, "ay": AY}
    for k, v in kw.items():
        s[names[k]] = v
    return s


def random_state(rng):
    s = np.zeros(STATE_DIM)
    s[:3] = rng.uniform(1, 5, 3)
    s[3:6] = rng.uniform(-20, 20, 3)
    s[THETA] = rng.uniform(-math.pi, math.pi)
    s[VX:VX + 3] = rng.uniform(-10, 10, 3)
    s[OMEGA] = rng.uniform(-1, 1)
    s[AX:AY + 1] = rng.uniform(-3, 3, 2)
    return s


def test_cv_example():
    _, x = transition(MotionModel(ModelKind.CV, 0.1), state(vx=1.0))
    assert x[X] == pytest.approx(0.1)


def test_ca_example():
    _, x = transition(MotionModel(ModelKind.CA, 0.1), state(vx=1.0, ax=1.0))
    assert x[X] == pytest.approx(0.105, abs=1e-12)


def test_ct_zero_turn_limit_matches_cv():
    s = state(vx=1.0, omega=1e-9)
    _, ct = transition(MotionModel(ModelKind.CT, 0.1), s)
    _, cv = transition(MotionModel(ModelKind.CV, 0.1), s)
    np.testing.assert_allclose(ct[[X, Y, VX, VY]], cv[[X, Y, VX, VY]], atol=1e-8)


def test_ctv_quarter_turn_displacement():
    _, x = transition(MotionModel(ModelKind.CTV, 1.0), state(vx=1.0, omega=math.pi / 2))
    assert x[X] == pytest.approx(2 / math.pi, abs=1e-12)
    assert x[Y] == pytest.approx(2 / math.pi, abs=1e-12)
    assert x[THETA] == pytest.approx(math.pi / 2)
    assert (x[VX], x[VY]) == pytest.approx((0.0, 1.0), abs=1e-12)


@pytest.mark.parametrize("kind", TURNING)
def test_taylor_branch_is_continuous(kind):
    # the step across the threshold is the first-order change F * d(omega), nothing more
    md = MotionModel(kind, 0.1)
    w_lo, w_hi = OMEGA_EPS * 0.999, OMEGA_EPS * 1.001
    lo = propagate(md, state(vx=5.0, vy=1.0, theta=0.2, ax=1.0, omega=w_lo))
    hi = propagate(md, state(vx=5.0, vy=1.0, theta=0.2, ax=1.0, omega=w_hi))
    F, _ = transition(md, state(vx=5.0, vy=1.0, theta=0.2, ax=1.0, omega=OMEGA_EPS * 1.001))
    np.testing.assert_allclose(hi - lo, F[:, OMEGA] * (w_hi - w_lo), atol=1e-12)


@pytest.mark.parametrize("kind", [ModelKind.CV, ModelKind.CA])
def test_linear_models_are_exactly_linear(kind):
    rng = np.random.default_rng(1)
    md = MotionModel(kind, 0.1)
    for _ in range(100):
        s = random_state(rng)
        F, x = transition(md, s)
        expected = F @ s
        expected[THETA] = math.atan2(math.sin(expected[THETA]), math.cos(expected[THETA]))
        np.testing.assert_allclose(x, expected, atol=1e-12)


@pytest.mark.parametrize("kind", TURNING)
def test_jacobian_matches_central_differences(kind):
    rng = np.random.default_rng(2)
    md = MotionModel(kind, 0.1)
    step = 1e-6
    for _ in range(100):
        s = random_state(rng)
        F, _ = transition(md, s)
        fd = np.empty_like(F)
        for j in range(STATE_DIM):
            e = np.zeros(STATE_DIM)
            e[j] = step
            d = propagate(md, s + e) - propagate(md, s - e)
            d[THETA] = math.atan2(math.sin(d[THETA]), math.cos(d[THETA]))
            fd[:, j] = d / (2 * step)
        np.testing.assert_allclose(F, fd, rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize("kind", ALL)
def test_dims_unchanged_and_yaw_wrapped(kind):
    rng = np.random.default_rng(3)
    md = MotionModel(kind, 0.5)
    for _ in range(50):
        s = random_state(rng)
        s[OMEGA] *= 8.0
        F, x = transition(md, s)
        assert np.array_equal(x[:3], s[:3])
        np.testing.assert_array_equal(F[:3], np.eye(STATE_DIM)[:3])
        assert -math.pi <= x[THETA] < math.pi


@pytest.mark.parametrize("kind", ALL)
def test_transition_many_matches_single(kind):
    rng = np.random.default_rng(4)
    md = MotionModel(kind, 0.1)
    S = np.stack([random_state(rng) for _ in range(6)])
    O = np.stack([random_state(rng) for _ in range(6)])
    F, x, y = transition_many(md, S, O)
    for k in range(6):
        Fk, xk = transition(md, S[k])
        np.testing.assert_allclose(F if F.ndim == 2 else F[k], Fk, atol=1e-12)
        np.testing.assert_allclose(x[k], xk, atol=1e-12)
        np.testing.assert_allclose(y[k], propagate(md, O[k]), atol=1e-12)


def test_model_validation():
    with pytest.raises(ValueError):
        MotionModel(ModelKind.CV, 0.0)
    with pytest.raises(ValueError):
        ProcessNoise(accel=-1.0)
    assert [m.kind for m in make_models()] == ALL


# --- process noise ----------------------------------------------------------

def test_zero_noise_gives_zero_q():
    q = ProcessNoise(0, 0, 0, 0, 0, 0, 0)
    for kind in ALL:
        assert not process_noise(MotionModel(kind, 0.1, q)).any()


@pytest.mark.parametrize("kind", [ModelKind.CV, ModelKind.CT, ModelKind.CTV])
def test_position_noise_scales_with_dt_cubed(kind):
    q1 = process_noise(MotionModel(kind, 0.1))
    q2 = process_noise(MotionModel(kind, 0.2))
    assert q2[X, X] == pytest.approx(8 * q1[X, X])
    assert q2[X, VX] == pytest.approx(4 * q1[X, VX])
    assert q2[VX, VX] == pytest.approx(2 * q1[VX, VX])


def test_q_psd_for_random_intensities():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        q = ProcessNoise(*rng.uniform(0, 3, 7))
        dt = float(rng.uniform(0.01, 1.0))
        for kind in ALL:
            Q = process_noise(MotionModel(kind, dt, q))
            assert np.array_equal(Q, Q.T)
            assert np.linalg.eigvalsh(Q).min() >= -1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(-9.9, 9.9), st.floats(0.01, 1.0))
def test_turning_prediction_finite_over_turn_rates(omega, dt):
    for kind in TURNING:
        F, x = transition(MotionModel(kind, dt), state(vx=8.0, vy=-2.0, omega=omega, ax=1.0))
        assert np.isfinite(F).all() and np.isfinite(x).all()
