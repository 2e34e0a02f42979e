"""Glue: run trackers on scenarios and compare association metrics across seeds."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .association import Metric
from .evaluation import MotReport, evaluate
from .road_context import ContextMap
from .simulator import DetectionFrame, Scenario, generate
from .track_manager import FrameOutput, Tracker, TrackerConfig

COMPARE_METRICS = (Metric.KF_IOU, Metric.IMM_IOU, Metric.IMM_POSTERIOR)


def run_tracker(frames: Sequence[DetectionFrame], config: TrackerConfig,
                context_map: ContextMap | None = None, audit: bool = False
                ) -> tuple[list[FrameOutput], Tracker]:
    tracker = Tracker(config, context_map if config.use_context else None, audit=audit)
    return tracker.run(frames), tracker


@dataclass
class CompareResult:
    seeds: list[int]
    reports: dict[str, list[MotReport]] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    def column(self, metric: Metric | str, key: str) -> list:
        return [getattr(r, key) for r in self.reports[Metric(metric).value]]

    def format_table(self) -> str:
        cols = ("MOTA", "MOTP", "MT", "ML", "FP", "FN", "IDS", "FRAG")
        lines = ["seed  metric          " + "".join(f"{c:>9}" for c in cols)]
        for k, seed in enumerate(self.seeds):
            for name, reps in self.reports.items():
                r = reps[k]
                vals = "".join(f"{getattr(r, c):9.2f}" if isinstance(getattr(r, c), float)
                               else f"{getattr(r, c):9d}" for c in cols)
                lines.append(f"{seed:<5} {name:<15} {vals}")
        lines.append("")
        lines.append("total metric          " + "".join(f"{c:>9}" for c in cols))
        for name, reps in self.reports.items():
            vals = []
            for c in cols:
                v = [getattr(r, c) for r in reps]
                vals.append(f"{sum(v) / len(v):9.2f}" if isinstance(v[0], float) else f"{sum(v):9d}")
            lines.append(f"{'all':<5} {name:<15} {''.join(vals)}")
        return "\n".join(lines) + "\n"


def compare(scenario, config: TrackerConfig, seeds: Sequence[int],
            metrics: Sequence[Metric] = COMPARE_METRICS, iou_threshold: float = 0.25,
            audit: bool = False) -> CompareResult:
    """Track every seeded variant of ``scenario`` with each metric and evaluate.

    ``scenario`` is either a :class:`Scenario` (the seed then drives detection
    noise only) or a callable ``seed -> Scenario`` that also varies the routes.
    """
    result = CompareResult(list(seeds), {Metric(m).value: [] for m in metrics})
    for seed in seeds:
        sc = scenario(seed) if callable(scenario) else scenario.with_seed(seed)
        truth, frames = generate(sc)
        for m in metrics:
            cfg = config.for_metric(m)
            outputs, tracker = run_tracker(frames, cfg, sc.map, audit=audit)
            result.reports[Metric(m).value].append(evaluate(truth, outputs, iou_threshold))
            result.violations.extend(f"seed {seed} {Metric(m).value}: {v}" for v in tracker.violations)
    return result
