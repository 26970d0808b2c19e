"""Invocation log store, call-graph reconstruction and window metrics."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .model import EXTERNAL, CallMode

if TYPE_CHECKING:
    from .platform import BillingLine
    from .runtime import InvocationRecord

PMI = 1e6  # USD per million invocations


class NoDataError(ValueError):
    """A metrics window contains no completed external request."""


@dataclass(frozen=True)
class RequestResult:
    trace_id: int
    root: str
    arrival: float
    rr_ms: float
    setup_id: str = ""
    records: tuple = ()
    billing: tuple = ()


@dataclass
class TraceLog:
    """Append-only store for one simulation window."""

    records: list = field(default_factory=list)
    billing: list = field(default_factory=list)
    requests: list = field(default_factory=list)

    def extend(self, other: "TraceLog") -> None:
        self.records.extend(other.records)
        self.billing.extend(other.billing)
        self.requests.extend(other.requests)

    def trace_costs(self) -> dict[int, float]:
        costs: dict[int, float] = defaultdict(float)
        for line in self.billing:
            costs[line.trace_id] += line.cost_usd
        return costs

    def cold_starts(self, trace_id: int | None = None) -> int:
        return sum(1 for b in self.billing if b.cold and (trace_id is None or b.trace_id == trace_id))


# ---------------------------------------------------------------------------
# call graph

@dataclass
class EdgeStats:
    mode_counts: dict[CallMode, int] = field(default_factory=lambda: defaultdict(int))
    latencies: list[float] = field(default_factory=list)
    local_count: int = 0

    @property
    def count(self) -> int:
        return sum(self.mode_counts.values())

    @property
    def modes(self) -> set[CallMode]:
        return {m for m, c in self.mode_counts.items() if c}

    @property
    def mode(self) -> str:
        modes = self.modes
        return next(iter(modes)).value if len(modes) == 1 else "MIXED"


@dataclass
class NodeStats:
    executions: int = 0
    walls: list[float] = field(default_factory=list)
    cold_count: int = 0
    memory_sizes: set[int] = field(default_factory=set)
    end_offsets: list[float] = field(default_factory=list)

    @property
    def mean_end_offset(self) -> float:
        return float(np.mean(self.end_offsets)) if self.end_offsets else 0.0


@dataclass
class AnnotatedCallGraph:
    nodes: dict[str, NodeStats] = field(default_factory=dict)
    edges: dict[tuple[str, str], EdgeStats] = field(default_factory=dict)

    def callers(self, task: str) -> list[tuple[str, EdgeStats]]:
        return [(c, e) for (c, t), e in self.edges.items() if t == task]

    def callees(self, task: str) -> list[tuple[str, EdgeStats]]:
        return [(t, e) for (c, t), e in self.edges.items() if c == task]

    @property
    def roots(self) -> list[str]:
        return sorted(t for (c, t) in self.edges if c == EXTERNAL)

    def to_records(self) -> dict:
        return {
            "nodes": [
                {"task": n, "executions": s.executions, "cold_count": s.cold_count,
                 "wall_med_ms": float(np.median(s.walls)) if s.walls else None,
                 "memory_sizes": sorted(s.memory_sizes)}
                for n, s in sorted(self.nodes.items())
            ],
            "edges": [
                {"caller": c, "callee": t, "mode": e.mode, "count": e.count,
                 "counts": {m.value: n for m, n in sorted(e.mode_counts.items())},
                 "local_count": e.local_count,
                 "latency_med_ms": float(np.median(e.latencies)) if e.latencies else None}
                for (c, t), e in sorted(self.edges.items())
            ],
        }


def build_call_graph(records: Iterable["InvocationRecord"],
                     arrivals: dict[int, float] | None = None) -> AnnotatedCallGraph:
    """Aggregate records into caller->callee edges; only observed calls appear.

    ``arrivals`` (trace id -> request arrival) lets node stats carry how far
    into the request each task finished; without it the EXTERNAL records are
    used as the trace origin.
    """
    records = list(records)
    if arrivals is None:
        arrivals = {r.trace_id: r.start for r in records if r.caller == EXTERNAL}
    g = AnnotatedCallGraph()
    for r in records:
        node = g.nodes.get(r.callee)
        if node is None:
            node = g.nodes[r.callee] = NodeStats()
        node.executions += 1
        node.walls.append(r.wall_ms)
        node.cold_count += r.cold
        node.memory_sizes.add(r.memory_mb)
        origin = arrivals.get(r.trace_id)
        if origin is not None:
            node.end_offsets.append(r.end - origin)
        edge = g.edges.get((r.caller, r.callee))
        if edge is None:
            edge = g.edges[(r.caller, r.callee)] = EdgeStats()
        edge.mode_counts[r.mode] += 1
        edge.latencies.append(r.wall_ms)
        edge.local_count += r.local
    return g


# ---------------------------------------------------------------------------
# metrics

@dataclass(frozen=True)
class MetricsSnapshot:
    window_id: str
    setup_id: str
    requests: int
    rr_med: float
    rr_p95: float
    mean_cost_pmi: float
    cold_rate: float
    group_cost: dict = field(default_factory=dict)
    group_wall_med: dict = field(default_factory=dict)
    group_memory: dict = field(default_factory=dict)

    @property
    def cost_per_request_usd(self) -> float:
        return self.mean_cost_pmi / PMI

    def to_dict(self) -> dict:
        return {
            "window_id": self.window_id, "setup_id": self.setup_id, "requests": self.requests,
            "rr_med": self.rr_med, "rr_p95": self.rr_p95, "mean_cost_pmi": self.mean_cost_pmi,
            "cold_rate": self.cold_rate, "group_cost": dict(sorted(self.group_cost.items())),
            "group_wall_med": dict(sorted(self.group_wall_med.items())),
            "group_memory": dict(sorted(self.group_memory.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsSnapshot":
        return cls(**d)


def snapshot(log: TraceLog, window_id: str = "w0", setup_id: str = "",
             traces: set[int] | None = None) -> MetricsSnapshot:
    """Window statistics over completed external requests.

    Cost per request sums every billing line of the trace, including
    asynchronous work that finished after the response.
    """
    requests = [r for r in log.requests if traces is None or r.trace_id in traces]
    if not requests:
        raise NoDataError(f"window {window_id} has no completed requests")
    ids = {r.trace_id for r in requests}
    rr = np.array([r.rr_ms for r in requests], dtype=float)
    lines = [b for b in log.billing if b.trace_id in ids]
    total = math.fsum(b.cost_usd for b in lines)
    group_cost: dict[str, float] = defaultdict(float)
    group_walls: dict[str, list[float]] = defaultdict(list)
    group_memory: dict[str, int] = {}
    for b in lines:
        group_cost[b.group_id] += b.cost_usd
    for r in log.records:
        if not r.local and r.trace_id in ids:
            group_walls[r.group_id].append(r.wall_ms)
            group_memory[r.group_id] = r.memory_mb
    entry_cold = {r.trace_id: r.cold for r in log.records
                  if r.caller == EXTERNAL and r.trace_id in ids}
    return MetricsSnapshot(
        window_id=window_id,
        setup_id=setup_id,
        requests=len(requests),
        rr_med=float(np.median(rr)),
        rr_p95=float(np.percentile(rr, 95)),
        mean_cost_pmi=total / len(requests) * PMI,
        cold_rate=sum(entry_cold.values()) / len(requests),
        group_cost=dict(group_cost),
        group_wall_med={g: float(np.median(w)) for g, w in group_walls.items()},
        group_memory=group_memory,
    )


def compare(prev: MetricsSnapshot, cur: MetricsSnapshot) -> float:
    """Largest relative change in cost or median latency between two snapshots."""

    def rel(a: float, b: float) -> float:
        if a == 0:
            return 0.0 if b == 0 else math.inf
        return abs(b - a) / abs(a)

    return max(rel(prev.mean_cost_pmi, cur.mean_cost_pmi), rel(prev.rr_med, cur.rr_med))


# ---------------------------------------------------------------------------
# exports

RECORD_COLUMNS = ("trace_id", "caller", "callee", "mode", "local", "group_id", "memory_mb",
                  "cold", "start", "end", "wall_ms", "billing_ref", "depth")
BILLING_COLUMNS = ("trace_id", "execution_id", "deployment", "group_id", "billed_duration_ms",
                   "memory_gb", "cost_usd", "cold")
SUMMARY_COLUMNS = ("setup_id", "rr_med", "rr_p95", "mean_cost_pmi", "cold_rate")


def csv_text(rows: Iterable[Iterable], header: Iterable[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def records_ndjson(records: Iterable["InvocationRecord"]) -> str:
    return "".join(json.dumps(r.to_dict(), sort_keys=False) + "\n" for r in records)


def records_csv(records: Iterable["InvocationRecord"]) -> str:
    return csv_text(([getattr(r, c).value if c == "mode" else getattr(r, c) for c in RECORD_COLUMNS]
                 for r in records), RECORD_COLUMNS)


def billing_csv(lines: Iterable["BillingLine"]) -> str:
    return csv_text(([getattr(b, c) for c in BILLING_COLUMNS] for b in lines), BILLING_COLUMNS)


def summary_csv(snapshots: Iterable[MetricsSnapshot]) -> str:
    return csv_text(([getattr(s, c) for c in SUMMARY_COLUMNS] for s in snapshots), SUMMARY_COLUMNS)
