"""Simulated FaaS platform: event kernel, instance lifecycle, CPU model, billing."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Generator

from .model import FusionGroup, PlatformConfig, TaskSpec

# float sums like 258.0 + 1.3 must not round up a whole extra billing unit
_CEIL_SLACK = 1e-9


def vcpus_for_memory(memory_mb: float, cfg: PlatformConfig) -> float:
    if memory_mb <= 0:
        raise ValueError("memory_mb must be positive")
    return memory_mb / cfg.vcpu_reference_mb


def task_compute_duration(task: TaskSpec, memory_mb: float, cfg: PlatformConfig) -> float:
    """CPU time scaled by usable vCPUs plus fixed I/O waits, in ms."""
    lanes = min(vcpus_for_memory(memory_mb, cfg), task.parallelism)
    return task.cpu_work / lanes + task.io_ms


# ---------------------------------------------------------------------------
# event kernel

class Signal:
    """One-shot completion a process can wait on."""

    __slots__ = ("fired", "value", "_waiters")

    def __init__(self):
        self.fired = False
        self.value: Any = None
        self._waiters: list[Process] = []


class Process:
    __slots__ = ("gen", "done")

    def __init__(self, gen: Generator):
        self.gen = gen
        self.done = Signal()


class EventQueue:
    """Single simulated timeline; ties are broken by insertion order.

    Processes are generators yielding either a delay in ms or a ``Signal``.
    """

    def __init__(self, start: float = 0.0):
        self.now = start
        self._heap: list[tuple[float, int, Callable, tuple]] = []
        self._seq = itertools.count()

    def schedule(self, at: float, fn: Callable, *args) -> None:
        if at < self.now:
            raise ValueError(f"cannot schedule in the past ({at} < {self.now})")
        heapq.heappush(self._heap, (at, next(self._seq), fn, args))

    def spawn(self, gen: Generator, at: float | None = None) -> Process:
        proc = Process(gen)
        self.schedule(self.now if at is None else at, self._step, proc, None)
        return proc

    def fire(self, signal: Signal, value: Any = None) -> None:
        signal.fired = True
        signal.value = value
        for proc in signal._waiters:
            self.schedule(self.now, self._step, proc, value)
        signal._waiters.clear()

    def _step(self, proc: Process, value: Any) -> None:
        try:
            out = proc.gen.send(value)
        except StopIteration as stop:
            self.fire(proc.done, stop.value)
            return
        if isinstance(out, Signal):
            if out.fired:
                self.schedule(self.now, self._step, proc, out.value)
            else:
                out._waiters.append(proc)
        else:
            if out < 0:
                raise ValueError("negative delay")
            self.schedule(self.now + out, self._step, proc, None)

    def run(self, until: float | None = None) -> None:
        heap = self._heap
        while heap:
            if until is not None and heap[0][0] > until:
                self.now = until
                return
            at, _, fn, args = heapq.heappop(heap)
            self.now = at
            fn(*args)

    @property
    def pending(self) -> int:
        return len(self._heap)


# ---------------------------------------------------------------------------
# instances

class InstanceState(str, Enum):
    COLD_STARTING = "COLD-STARTING"
    IDLE = "IDLE"
    BUSY = "BUSY"


@dataclass(eq=False)
class Instance:
    id: int
    memory_mb: int
    state: InstanceState
    idle_since: float
    generation: int


class Deployment:
    """The function running one fusion group; scales instances without bound."""

    def __init__(self, group: FusionGroup, endpoint: str, cfg: PlatformConfig):
        self.group = group
        self.endpoint = endpoint
        self.cfg = cfg
        self.idle: list[Instance] = []
        self.busy: set[Instance] = set()
        self.generation = 0
        self._ids = itertools.count()
        self.created = 0

    @property
    def instances(self) -> list[Instance]:
        return self.idle + list(self.busy)

    def acquire(self, now: float) -> tuple[Instance, bool, float]:
        """Returns (instance, cold, ready_at); the instance is BUSY afterwards."""
        horizon = now - self.cfg.instance_idle_timeout_s * 1000.0
        while self.idle:
            inst = self.idle.pop()  # most recently released first
            if inst.idle_since >= horizon:
                inst.state = InstanceState.BUSY
                self.busy.add(inst)
                return inst, False, now
        # the rest of the idle list is older still; reap it
        self.idle.clear()
        inst = Instance(next(self._ids), self.group.memory_mb, InstanceState.COLD_STARTING,
                        now, self.generation)
        self.created += 1
        self.busy.add(inst)
        return inst, True, now + self.cfg.platform_cold_init_ms

    def mark_running(self, inst: Instance) -> None:
        inst.state = InstanceState.BUSY

    def release(self, inst: Instance, now: float) -> None:
        self.busy.discard(inst)
        if inst.generation != self.generation:
            return  # flushed while running
        inst.state = InstanceState.IDLE
        inst.idle_since = now
        self.idle.append(inst)

    def flush(self) -> None:
        self.idle.clear()
        self.generation += 1


class Platform:
    """Deployments keyed by (members, memory) so unchanged groups stay warm."""

    def __init__(self, cfg: PlatformConfig):
        self.cfg = cfg
        self._deployments: dict[tuple, Deployment] = {}

    def deployment_for(self, group: FusionGroup) -> Deployment:
        key = group.key
        dep = self._deployments.get(key)
        if dep is None:
            endpoint = f"{'+'.join(key[0])}@{key[1]}"
            dep = Deployment(group, endpoint, self.cfg)
            self._deployments[key] = dep
        return dep

    def flush_all_instances(self) -> None:
        for dep in self._deployments.values():
            dep.flush()


# ---------------------------------------------------------------------------
# billing

@dataclass(frozen=True)
class BillingLine:
    deployment: str
    billed_duration_ms: float
    memory_gb: float
    cost_usd: float
    cold: bool
    trace_id: int = -1
    group_id: str = ""
    execution_id: int = -1


def billed_duration(duration_ms: float, granularity_ms: float) -> float:
    if duration_ms <= 0:
        return 0.0
    return math.ceil(duration_ms / granularity_ms - _CEIL_SLACK) * granularity_ms


def bill(wall_ms: float, cold: bool, memory_mb: float, cfg: PlatformConfig, *,
         deployment: str = "", trace_id: int = -1, group_id: str = "",
         execution_id: int = -1) -> BillingLine:
    """Price one function execution; ``wall_ms`` excludes sandbox init."""
    if wall_ms < 0:
        raise ValueError("wall time must be >= 0")
    duration = wall_ms + (cfg.platform_cold_init_ms if cold and cfg.bill_cold_init else 0.0)
    billed = billed_duration(duration, cfg.billing_granularity_ms)
    memory_gb = memory_mb / 1024.0
    cost = billed / 1000.0 * memory_gb * cfg.price_per_gb_s + cfg.price_per_request
    return BillingLine(deployment, billed, memory_gb, cost, cold, trace_id, group_id, execution_id)
