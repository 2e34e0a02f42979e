import math

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from immtrack.core_types import STATE_DIM, THETA, VX, VY, X, Y, Pose2D, ValidationError
from immtrack.imm import DEFAULT_TPM
from immtrack.road_context import (
    ContextMap, ContextVector, activate, blend_tpm, context_likelihood, context_tpm, target_heading,
    to_map_frame,
)


def vec(x, y, heading=0.0, toggle=1.0, tpm_id="default", schedule=()):
    return ContextVector(Pose2D(x, y, heading), (math.cos(heading), math.sin(heading)), toggle, tpm_id, schedule)


def moving(heading, speed=5.0, x=0.0, y=0.0):
    s = np.zeros(STATE_DIM)
    s[X], s[Y], s[THETA] = x, y, heading
    s[VX], s[VY] = speed * math.cos(heading), speed * math.sin(heading)
    return s


def random_tpm(rng, m=5):
    A = rng.random((m, m)) + 0.01
    return A / A.sum(axis=1, keepdims=True)


# --- activation ---------------------------------------------------------------

def test_activate_lone_vector_and_empty_map():
    v = vec(3.0, 4.0)
    assert activate(ContextMap([v]), Pose2D(3.0, 4.0)) == [v]
    assert activate(ContextMap(), Pose2D(0.0, 0.0)) == []


def test_activate_picks_k_nearest():
    rng = np.random.default_rng(0)
    dists = rng.permutation([1.0, 2.0, 3.0, 4.0, 5.0])
    angles = rng.uniform(-math.pi, math.pi, 5)
    vectors = [vec(d * math.cos(a), d * math.sin(a)) for d, a in zip(dists, angles)]
    got = activate(ContextMap(vectors), Pose2D(0.0, 0.0), k=3)
    expected = [v for _, v in sorted(zip(dists, vectors), key=lambda p: p[0])[:3]]
    assert got == expected


def test_activate_respects_radius_and_ties_keep_map_order():
    a, b, c = vec(1.0, 0.0), vec(0.0, 1.0, tpm_id="default", toggle=0.5), vec(20.0, 0.0)
    cmap = ContextMap([a, b, c])
    assert activate(cmap, Pose2D(0.0, 0.0), k=3, radius=15.0) == [a, b]
    assert activate(cmap, Pose2D(0.0, 0.0), k=1) == [a]
    with pytest.raises(ValueError):
        activate(cmap, Pose2D(), k=0)


# --- likelihood ---------------------------------------------------------------

def test_likelihood_examples():
    ctx = vec(0.0, 0.0, heading=0.0)
    assert context_likelihood(moving(0.0), ctx) == pytest.approx(1.0)
    assert context_likelihood(moving(math.pi / 2), ctx) == pytest.approx(0.0, abs=1e-12)
    half = vec(0.0, 0.0, heading=0.0, toggle=0.5)
    assert context_likelihood(moving(math.pi / 3), half) == pytest.approx(0.25)
    # opposing traffic is clipped, not negative
    assert context_likelihood(moving(math.pi), ctx) == 0.0


def test_stopped_target_uses_box_yaw():
    s = moving(0.0, speed=0.0)
    s[THETA] = math.pi / 2
    assert target_heading(s) == pytest.approx(math.pi / 2)
    assert context_likelihood(s, vec(0.0, 0.0, heading=math.pi / 2)) == pytest.approx(1.0)


def test_toggle_schedule_is_piecewise_constant():
    v = vec(0.0, 0.0, toggle=1.0, schedule=((12.0, 0.0), (4.0, 0.5)))
    assert [v.toggle_at(t) for t in (0.0, 3.99, 4.0, 11.9, 12.0, 100.0)] == [1.0, 1.0, 0.5, 0.5, 0.0, 0.0]


@settings(max_examples=200, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi),
       st.sampled_from([0.0, 0.5, 1.0]))
def test_likelihood_rotation_invariant(heading, direction, rot, toggle):
    a = context_likelihood(moving(heading), vec(0.0, 0.0, direction, toggle))
    b = context_likelihood(moving(heading + rot), vec(0.0, 0.0, direction + rot, toggle))
    assert a == pytest.approx(b, abs=1e-9)
    assert 0.0 <= a <= 1.0


# --- blending -----------------------------------------------------------------

def test_blend_examples():
    rng = np.random.default_rng(1)
    A, B = random_tpm(rng), random_tpm(rng)
    cmap = ContextMap([vec(0, 0, tpm_id="a"), vec(1, 0, tpm_id="b")], {"a": A, "b": B})
    a, b = cmap.vectors
    assert np.array_equal(blend_tpm(cmap, [a], [1.0]), A)
    mid = blend_tpm(cmap, [a, b], [0.5, 0.5])
    np.testing.assert_allclose(mid, (A + B) / 2, atol=1e-15)
    np.testing.assert_allclose(mid.sum(axis=1), 1.0, atol=1e-12)
    assert np.array_equal(blend_tpm(cmap, [], []), DEFAULT_TPM)
    assert np.array_equal(blend_tpm(cmap, [a, b], [0.0, 0.0]), DEFAULT_TPM)


def test_red_light_falls_back_to_default():
    rng = np.random.default_rng(2)
    cmap = ContextMap([vec(0, 0, toggle=0.0, tpm_id="a"), vec(2, 0, toggle=0.0, tpm_id="a")], {"a": random_tpm(rng)})
    tpm, active = context_tpm(cmap, moving(0.0), time=0.0)
    assert len(active) == 2
    assert np.array_equal(tpm, DEFAULT_TPM)


def test_blend_rows_stay_stochastic():
    rng = np.random.default_rng(3)
    for _ in range(500):
        n = int(rng.integers(1, 6))
        lib = {f"t{i}": random_tpm(rng) for i in range(n)}
        vectors = [vec(i, 0, tpm_id=f"t{i}") for i in range(n)]
        cmap = ContextMap(vectors, lib)
        w = rng.dirichlet(np.ones(n))
        out = blend_tpm(cmap, vectors, w)
        assert np.abs(out.sum(axis=1) - 1.0).max() <= 1e-9
        assert (out >= 0).all()


def test_context_tpm_weights_by_alignment():
    rng = np.random.default_rng(4)
    A, B = random_tpm(rng), random_tpm(rng)
    # one vector along the travel direction, one at 60 degrees: weights 1 and 0.5 before normalization
    cmap = ContextMap([vec(0, 0, 0.0, tpm_id="a"), vec(1, 0, math.pi / 3, tpm_id="b")], {"a": A, "b": B})
    tpm, _ = context_tpm(cmap, moving(0.0), time=0.0)
    np.testing.assert_allclose(tpm, (2 * A + B) / 3, atol=1e-12)


def test_to_map_frame_rotates_pose_and_velocity():
    s = moving(0.0, speed=2.0, x=1.0, y=0.0)
    out = to_map_frame(s, Pose2D(10.0, 0.0, math.pi / 2))
    assert (out[X], out[Y], out[THETA]) == pytest.approx((10.0, 1.0, math.pi / 2))
    assert (out[VX], out[VY]) == pytest.approx((0.0, 2.0), abs=1e-12)


# --- map document -------------------------------------------------------------

def test_map_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    cmap = ContextMap([vec(1.5, -2.0, 0.7, tpm_id="turn"), vec(0.0, 3.0, schedule=((0.0, 0.0), (5.0, 1.0)))],
                      {"turn": random_tpm(rng)}, models=("CV", "CA", "CT", "CTV", "CTA"))
    path = tmp_path / "map.yaml"
    path.write_text(yaml.safe_dump(cmap.to_dict()))
    back = ContextMap.from_dict(yaml.safe_load(path.read_text()))
    assert back.to_dict() == cmap.to_dict()
    assert back.vectors[1].toggle_at(6.0) == 1.0


@pytest.mark.parametrize("doc", [
    [],
    {"vectors": [{"y": 0.0}]},
    {"vectors": [{"x": 0, "y": 0, "toggle": 0.3}]},
    {"vectors": [{"x": 0, "y": 0, "dir_x": 0, "dir_y": 0}]},
    {"vectors": [{"x": 0, "y": 0, "tpm_id": "missing"}]},
    {"tpm_library": {"bad": [[0.5, 0.6], [0.5, 0.5]]}},
    {"default_tpm": [[1.0, 0.5], [0.0, 1.0]]},
    {"vectors": [{"x": "abc", "y": 0}]},
])
def test_map_validation_errors(doc):
    with pytest.raises(ValidationError):
        ContextMap.from_dict(doc)
