"""Adaptive optimizer cadence: big metric changes bring the next run closer.

Continuous mode spaces runs by ``base / max(delta, floor)`` requests.  After
``clearance`` consecutive calm runs (delta below ``threshold``) the scheduler
switches to sampling mode, where each ``max_interval`` block triggers a run
with probability ``fraction``.  Any large change restores continuous mode.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from ..model import ConfigError


class CadenceMode(str, Enum):
    CONTINUOUS = "CONTINUOUS"
    SAMPLING = "SAMPLING"


@dataclass
class Csp1Scheduler:
    base_interval: int = 1000
    delta_floor: float = 0.01
    min_interval: int = 500
    max_interval: int = 50_000
    clearance: int = 5
    fraction: float = 0.1
    threshold: float = 0.05
    fixed_interval: int | None = None
    seed: int = 0
    mode: CadenceMode = CadenceMode.CONTINUOUS
    calm_runs: int = 0
    _rng: random.Random = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ConfigError("sampling fraction must be in (0, 1]")
        if self.min_interval > self.max_interval or self.min_interval < 1:
            raise ConfigError("need 1 <= min_interval <= max_interval")
        if self.delta_floor <= 0 or self.clearance < 1:
            raise ConfigError("delta_floor must be > 0 and clearance >= 1")
        self._rng = random.Random(self.seed)

    @classmethod
    def fixed(cls, interval: int = 1000) -> "Csp1Scheduler":
        return cls(fixed_interval=interval)

    def continuous_interval(self, delta: float) -> int:
        raw = round(self.base_interval / max(delta, self.delta_floor))
        return int(min(max(raw, self.min_interval), self.max_interval))

    def next_interval(self, delta: float) -> int:
        """Requests until the next optimizer run, given the last relative change."""
        if delta < 0:
            raise ValueError("delta must be >= 0")
        if self.fixed_interval is not None:
            return self.fixed_interval
        if delta >= self.threshold:
            self.calm_runs = 0
            self.mode = CadenceMode.CONTINUOUS
        else:
            self.calm_runs += 1
            if self.calm_runs >= self.clearance:
                self.mode = CadenceMode.SAMPLING
        if self.mode is CadenceMode.SAMPLING:
            blocks = 1
            while self._rng.random() >= self.fraction:
                blocks += 1
            return blocks * self.max_interval
        return self.continuous_interval(delta)
