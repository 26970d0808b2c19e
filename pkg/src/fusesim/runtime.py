"""Fusion handler semantics inside simulated deployments.

A call to a task in the current group is inlined; anything else is handed off
to the callee's home group over the (simulated) network.  Every task execution
emits one ``InvocationRecord``; every function execution one ``BillingLine``.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .model import (
    EXTERNAL, AppSpec, CallEdge, CallMode, ConfigError, FusionGroup, FusionSetup,
    PlatformConfig, require_valid,
)
from .platform import EventQueue, Platform, bill, task_compute_duration
from .telemetry import RequestResult, TraceLog

MAX_CALL_DEPTH = 64
MAX_PRIMING = 16
RR_DECIMALS = 6  # report response times at ns resolution to drop clock drift


class SimulationError(RuntimeError):
    pass


class RequestRejected(ConfigError):
    pass


@dataclass(frozen=True)
class InvocationRecord:
    trace_id: int
    caller: str
    callee: str
    mode: CallMode
    local: bool
    group_id: str
    memory_mb: int
    cold: bool
    start: float
    end: float
    wall_ms: float
    billing_ref: int
    depth: int = 0

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in FIELDS}
        d["mode"] = self.mode.value
        return d


FIELDS = ("trace_id", "caller", "callee", "mode", "local", "group_id", "memory_mb", "cold",
          "start", "end", "wall_ms", "billing_ref", "depth")


class Dispatch(str, Enum):
    LOCAL = "LOCAL"
    REMOTE = "REMOTE"


@dataclass
class ExecutionContext:
    trace_id: int
    group: FusionGroup
    task: str
    depth: int
    entered_at: float
    execution_id: int = -1
    deferred: deque = field(default_factory=deque)


def dispatch_call(ctx: ExecutionContext, edge: CallEdge, setup: FusionSetup) -> tuple[Dispatch, str]:
    """Membership decides: LOCAL if the callee is in the running group, else its home."""
    if edge.callee in ctx.group.members:
        return Dispatch.LOCAL, ctx.group.id
    try:
        return Dispatch.REMOTE, setup.home[edge.callee]
    except KeyError:
        raise ConfigError(f"task {edge.callee} has no home group") from None


class Simulation:
    """One isolated world: a platform, a timeline and the active fusion setup."""

    def __init__(self, app: AppSpec, setup: FusionSetup, cfg: PlatformConfig,
                 setup_id: str = "S-0", start_ms: float = 0.0):
        self.app = app
        self.cfg = cfg
        self.platform = Platform(cfg)
        self.queue = EventQueue(start_ms)
        self.log = TraceLog()
        self._trace_ids = itertools.count()
        self._exec_ids = itertools.count()
        self.set_setup(setup, setup_id)

    def set_setup(self, setup: FusionSetup, setup_id: str) -> None:
        require_valid(setup, self.app)
        self.setup = setup
        self.setup_id = setup_id
        self._groups = {g.id: g for g in setup.groups}

    @property
    def now(self) -> float:
        return self.queue.now

    # -- driving -----------------------------------------------------------

    def submit(self, root: str, arrival: float) -> None:
        if root not in self.app.roots:
            raise RequestRejected(f"{root} is not an externally invocable task")
        self.queue.schedule(arrival, self._start_request, root, arrival)

    def flush_at(self, at: float) -> None:
        self.queue.schedule(at, self.platform.flush_all_instances)

    def run(self) -> TraceLog:
        self.queue.run()
        return self.log

    def run_window(self, arrivals: Iterable[tuple[float, str]], flushes: Iterable[float] = (),
                   offset: float | None = None) -> TraceLog:
        """Replay arrivals (relative to ``offset``) and drain; returns this window's log."""
        if offset is None:
            offset = self.now
        self.log = TraceLog()
        for t in flushes:
            self.flush_at(offset + t)
        for t, root in arrivals:
            self.submit(root, offset + t)
        return self.run()

    # -- processes ---------------------------------------------------------

    def _start_request(self, root: str, arrival: float) -> None:
        trace = next(self._trace_ids)
        group = self._groups[self.setup.home[root]]
        proc = self.queue.spawn(self._function(group, root, EXTERNAL, CallMode.SYNC, trace, 0))
        self.queue.spawn(self._await_response(proc, trace, root, arrival))

    def _await_response(self, proc, trace: int, root: str, arrival: float):
        end = yield proc.done
        self.log.requests.append(RequestResult(trace, root, arrival, round(end - arrival, RR_DECIMALS),
                                              self.setup_id))

    def _function(self, group: FusionGroup, task: str, caller: str, mode: CallMode,
                  trace: int, depth: int):
        cfg = self.cfg
        q = self.queue
        dep = self.platform.deployment_for(group)
        start = q.now
        inst, cold, ready_at = dep.acquire(start)
        if ready_at > start:
            yield ready_at - start
        dep.mark_running(inst)
        run_start = q.now
        overhead = cfg.handler_cold_overhead_ms if cold else cfg.handler_warm_overhead_ms
        if overhead:
            yield overhead
        ctx = ExecutionContext(trace, group, task, depth, start, next(self._exec_ids))
        yield from self._task(ctx, task, depth)
        warm = cfg.handler_warm_overhead_ms
        while ctx.deferred:
            parent, callee, d = ctx.deferred.popleft()
            if warm:
                yield warm
            t0 = q.now
            yield from self._task(ctx, callee, d)
            self._record(ctx, parent, callee, CallMode.ASYNC, True, False, t0, d)
        end = q.now
        line = bill(end - run_start, cold, group.memory_mb, cfg, deployment=dep.endpoint,
                    trace_id=trace, group_id=group.id, execution_id=ctx.execution_id)
        self.log.billing.append(line)
        dep.release(inst, end)
        self._record(ctx, caller, task, mode, False, cold, start, depth)
        return end

    def _task(self, ctx: ExecutionContext, task_id: str, depth: int):
        if depth > MAX_CALL_DEPTH:
            raise SimulationError(f"call depth exceeded {MAX_CALL_DEPTH} (cyclic call graph?)")
        cfg = self.cfg
        q = self.queue
        task = self.app.tasks[task_id]
        busy = task_compute_duration(task, ctx.group.memory_mb, cfg)
        if busy:
            yield busy
        for edge in task.calls:
            where, gid = dispatch_call(ctx, edge, self.setup)
            if where is Dispatch.LOCAL:
                if edge.mode is CallMode.SYNC:
                    if cfg.handler_warm_overhead_ms:
                        yield cfg.handler_warm_overhead_ms
                    t0 = q.now
                    yield from self._task(ctx, edge.callee, depth + 1)
                    self._record(ctx, task_id, edge.callee, CallMode.SYNC, True, False, t0, depth + 1)
                else:
                    ctx.deferred.append((task_id, edge.callee, depth + 1))
                continue
            target = self._groups[gid]
            proc = q.spawn(
                self._function(target, edge.callee, task_id, edge.mode, ctx.trace_id, depth + 1),
                at=q.now + cfg.remote_sync_overhead_ms,
            )
            if edge.mode is CallMode.SYNC:
                yield proc.done
            elif cfg.remote_async_dispatch_ms:
                yield cfg.remote_async_dispatch_ms

    def _record(self, ctx: ExecutionContext, caller: str, callee: str, mode: CallMode,
                local: bool, cold: bool, start: float, depth: int) -> None:
        end = self.queue.now
        self.log.records.append(InvocationRecord(
            ctx.trace_id, caller, callee, mode, local, ctx.group.id, ctx.group.memory_mb, cold,
            start, end, end - start, ctx.execution_id, depth,
        ))


def handle_external_request(root: str, arrival: float, setup: FusionSetup, app: AppSpec,
                            cfg: PlatformConfig, warm: bool = False) -> RequestResult:
    """Run one request in a fresh world and return its result with records.

    With ``warm=True`` identical priming requests run first until one of them
    sees no cold start, so every deployment has enough idle instances even
    where calls overlap.
    """
    sim = Simulation(app, setup, cfg, start_ms=min(arrival, 0.0))
    if warm:
        for _ in range(MAX_PRIMING):
            sim.submit(root, sim.now)
            sim.run()
            cold = sim.log.cold_starts()
            sim.log = TraceLog()
            if not cold:
                break
        arrival = max(arrival, sim.now)
    sim.submit(root, arrival)
    log = sim.run()
    res = log.requests[0]
    return RequestResult(res.trace_id, res.root, res.arrival, res.rr_ms, res.setup_id,
                         records=tuple(log.records), billing=tuple(log.billing))
