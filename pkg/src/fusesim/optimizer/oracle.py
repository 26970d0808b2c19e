"""Exhaustive search over partitions and memory sizes for small applications."""

from __future__ import annotations

import itertools
from typing import Callable, Iterator, Sequence

from ..model import (
    AppSpec, FusionSetup, PlatformConfig, format_setup, setup_from_partition, singleton_setup,
)
from ..telemetry import MetricsSnapshot
from .heuristic import Objective

MAX_TASKS = 6
MAX_SIZES = 3


class OracleLimitError(ValueError):
    """The application or size list is too large to enumerate."""


def set_partitions(items: Sequence[str]) -> Iterator[list[list[str]]]:
    """Every partition of ``items``, blocks in first-appearance order."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def enumerate_setups(app: AppSpec, sizes: Sequence[int]) -> Iterator[FusionSetup]:
    for parts in set_partitions(sorted(app.tasks)):
        for mem in itertools.product(sizes, repeat=len(parts)):
            yield setup_from_partition(parts, mem)


def brute_force_optimal(app: AppSpec, evaluate: Callable[[FusionSetup], MetricsSnapshot],
                        cfg: PlatformConfig, objective: Objective = Objective(),
                        ) -> tuple[FusionSetup, MetricsSnapshot]:
    """Objective-minimal setup; ``evaluate`` measures one setup in a fresh world.

    Cost decides; within the tolerance the lower median latency wins, then the
    notation string, so the result does not depend on enumeration order.
    """
    sizes = cfg.all_sizes
    if len(app.tasks) > MAX_TASKS or len(sizes) > MAX_SIZES:
        raise OracleLimitError(
            f"oracle handles at most {MAX_TASKS} tasks and {MAX_SIZES} memory sizes "
            f"(got {len(app.tasks)} tasks, {len(sizes)} sizes)")
    scored = [(s, evaluate(s)) for s in enumerate_setups(app, sizes)]
    # weighted scores are normalized by the all-remote setup, as in a campaign
    remote = singleton_setup(app, cfg.default_memory_mb)
    key = format_setup(remote, with_memory=True)
    baseline = next(snap for s, snap in scored if format_setup(s, with_memory=True) == key)

    def value(snap):
        return objective.value(snap, baseline)

    lowest = min(value(snap) for _, snap in scored)
    eps = objective.epsilon
    near = [(s, snap) for s, snap in scored if value(snap) <= lowest + eps * abs(lowest)]
    return min(near, key=lambda p: (p[1].rr_med, value(p[1]),
                                    format_setup(p[0], with_memory=True)))


def gap(heuristic: MetricsSnapshot, optimum: MetricsSnapshot,
        objective: Objective = Objective(), baseline: MetricsSnapshot | None = None) -> float:
    """Heuristic objective divided by the optimum's (1.0 means optimal)."""
    best = objective.value(optimum, baseline)
    return objective.value(heuristic, baseline) / best if best else 1.0


__all__ = ["MAX_SIZES", "MAX_TASKS", "OracleLimitError", "brute_force_optimal",
           "enumerate_setups", "gap", "set_partitions"]
