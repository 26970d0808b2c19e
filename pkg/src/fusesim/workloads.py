"""Builtin applications (TREE, IOT, WEB) and the OPT / COLD / SCALE load protocols.

The IOT and WEB call graphs are reconstructions: the published material gives
group notations, root counts, database access patterns and which calls are
synchronous, but not full edge lists.  See README for the fixture details.
Work magnitudes are calibration knobs, all overridable through keyword
arguments.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

from .model import AppSpec, CallEdge, CallMode, ConfigError, IOCall, TaskSpec

S, A = CallMode.SYNC, CallMode.ASYNC

PROTOCOLS = ("OPT", "COLD", "SCALE")


def _t(tid, cpu=0.0, par=1, io=(), calls=()):
    return TaskSpec(tid, cpu, par, tuple(io), tuple(CallEdge(c, m) for c, m in calls))


def make_tree_app(light_ms: float = 30.0, heavy_ms: float = 200.0, heavy_parallelism: int = 2) -> AppSpec:
    """Seven-task fan-out tree: a cheap synchronous side and a CPU-heavy asynchronous side."""
    light = dict(cpu=light_ms, par=1)
    heavy = dict(cpu=heavy_ms, par=heavy_parallelism)
    tasks = [
        _t("A", **light, calls=[("B", S), ("C", A)]),
        _t("B", **light, calls=[("D", S), ("E", S)]),
        _t("C", **heavy, calls=[("F", A), ("G", A)]),
        _t("D", **light),
        _t("E", **light),
        _t("F", **heavy),
        _t("G", **heavy),
    ]
    return AppSpec(tasks, ("A",), name="tree")


def make_iot_app(light_ms: float = 5.0, heavy_ms: float = 60.0, db_ms: float = 15.0,
                 heavy_parallelism: int = 1) -> AppSpec:
    """Roadside-sensor analysis: ten tasks, one external entry point.

    Groups linked by synchronous calls: (AS) (CA,DJ) (CS,CSA,CSL) (CT) (CW,I,SE);
    everything between them is asynchronous.
    """
    write = IOCall("db-write", db_ms, 1)
    heavy = dict(cpu=heavy_ms, par=heavy_parallelism)
    tasks = [
        _t("AS", light_ms, io=[write], calls=[("CA", A), ("CS", A), ("CT", A), ("CW", A)]),
        _t("CA", **heavy, calls=[("DJ", S)]),
        _t("DJ", light_ms, io=[write]),
        _t("CS", **heavy, calls=[("CSA", S), ("CSL", S)]),
        _t("CSA", light_ms, io=[write]),
        _t("CSL", light_ms, io=[IOCall("db-read", db_ms, 2), write]),
        _t("CT", **heavy),
        _t("CW", **heavy, calls=[("I", S), ("SE", S)]),
        _t("I", light_ms),
        _t("SE", light_ms, io=[write]),
    ]
    return AppSpec(tasks, ("AS",), name="iot")


WEB_OPERATIONS = ("addCartItem", "frontend", "checkout")


def make_web_app(light_ms: float = 3.0, db_ms: float = 10.0, payment_ms: float = 40.0,
                 email_ms: float = 30.0) -> AppSpec:
    """Web shop with 17 tasks and four user-facing entry points.

    ``listProducts`` is called synchronously by all four entry tasks, so a
    path-optimized setup replicates it into four groups.
    """
    db = IOCall("db", db_ms, 1)
    tasks = [
        _t("frontend", light_ms,
           calls=[("getCart", S), ("listProducts", S), ("getRecommendations", S),
                  ("getShippingQuote", S), ("getAds", S), ("logPageView", A)]),
        _t("addCartItem", light_ms, calls=[("listProducts", S), ("setCart", S),
                                           ("getRecommendations", A), ("trackCartEvent", A)]),
        _t("checkout", light_ms,
           calls=[("getCart", S), ("listProducts", S), ("convertCurrency", S), ("charge", S),
                  ("shipOrder", A), ("sendOrderConfirmation", A), ("emptyCart", A)]),
        _t("getRecommendations", light_ms, calls=[("listProducts", S)]),
        _t("listProducts", light_ms, io=[db]),
        _t("getAds", light_ms, io=[db]),
        _t("getCart", light_ms, io=[db]),
        _t("setCart", light_ms, io=[db]),
        _t("emptyCart", light_ms, io=[db]),
        _t("getShippingQuote", light_ms, calls=[("convertCurrency", S)]),
        _t("convertCurrency", light_ms, io=[db]),
        _t("charge", light_ms, io=[IOCall("payment-gateway", payment_ms)],
           calls=[("recordPayment", A)]),
        _t("recordPayment", light_ms, io=[db]),
        _t("shipOrder", light_ms, io=[db]),
        _t("sendOrderConfirmation", light_ms, io=[IOCall("mail", email_ms)]),
        _t("trackCartEvent", light_ms, io=[db]),
        _t("logPageView", light_ms, io=[db]),
    ]
    return AppSpec(tasks, ("frontend", "addCartItem", "checkout", "getRecommendations"),
                   name="web", operations=WEB_OPERATIONS)


BUILTIN_APPS: dict[str, Callable[..., AppSpec]] = {
    "tree": make_tree_app,
    "iot": make_iot_app,
    "web": make_web_app,
}


def builtin_app(name: str, **overrides) -> AppSpec:
    try:
        factory = BUILTIN_APPS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown builtin app {name!r}; choose from {sorted(BUILTIN_APPS)}") from None
    return factory(**overrides)


# ---------------------------------------------------------------------------
# schedules

@dataclass(frozen=True)
class WorkloadSchedule:
    arrivals: tuple[tuple[float, str], ...]
    protocol: str
    seed: int
    flush_times: tuple[float, ...] = ()

    def __post_init__(self):
        times = [t for t, _ in self.arrivals]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ConfigError("arrivals must be nondecreasing")

    def __len__(self) -> int:
        return len(self.arrivals)

    @property
    def duration_ms(self) -> float:
        return self.arrivals[-1][0] if self.arrivals else 0.0


def _root_cycle(app: AppSpec, seed: int):
    ops = list(app.operations or app.roots)
    if len(ops) > 1:
        random.Random(seed).shuffle(ops)
    i = 0
    while True:
        yield ops[i % len(ops)]
        i += 1


def make_schedule(protocol: str, app: AppSpec, seed: int, *, requests: int = 1000,
                  interval_ms: float = 100.0, batches: int = 100, batch_size: int = 1,
                  batch_spacing_ms: float = 60_000.0, start_rps: float = 5.0,
                  step_rps: float = 5.0, step_s: float = 2.0, max_rps: float = 40.0,
                  duration_s: float = 18.0) -> WorkloadSchedule:
    """Deterministic open-loop arrivals for one protocol.

    OPT   ``requests`` arrivals spaced ``interval_ms`` (one optimizer window).
    COLD  ``batches`` of ``batch_size`` simultaneous requests, instances
          flushed before every batch.
    SCALE rate starts at ``start_rps`` and grows by ``step_rps`` every
          ``step_s`` seconds up to ``max_rps``; runs for ``duration_s``.
    Multi-root apps cycle through their operations in a seed-dependent order.
    """
    protocol = protocol.upper()
    roots = _root_cycle(app, seed)
    if protocol == "OPT":
        arrivals = tuple((i * interval_ms, next(roots)) for i in range(requests))
        return WorkloadSchedule(arrivals, protocol, seed)
    if protocol == "COLD":
        arrivals, flushes = [], []
        for b in range(batches):
            t = b * batch_spacing_ms
            flushes.append(t)
            arrivals.extend((t, next(roots)) for _ in range(batch_size))
        return WorkloadSchedule(tuple(arrivals), protocol, seed, tuple(flushes))
    if protocol == "SCALE":
        arrivals = []
        step_ms = step_s * 1000.0
        t_end = duration_s * 1000.0
        step = 0
        while step * step_ms < t_end:
            rate = min(start_rps + step * step_rps, max_rps)
            gap = 1000.0 / rate
            t0 = step * step_ms
            k = 0
            while t0 + k * gap < min(t0 + step_ms, t_end) - 1e-9:
                arrivals.append((t0 + k * gap, next(roots)))
                k += 1
            step += 1
        return WorkloadSchedule(tuple(arrivals), protocol, seed)
    raise ConfigError(f"unknown protocol {protocol!r}; choose from {PROTOCOLS}")


def scale_rate_at(t_s: float, start_rps: float = 5.0, step_rps: float = 5.0,
                  step_s: float = 2.0, max_rps: float = 40.0) -> float:
    return min(start_rps + int(t_s // step_s) * step_rps, max_rps)


def make_random_app(seed: int, n_tasks: int | None = None, *, max_tasks: int = 5,
                    cpu_range: tuple[float, float] = (50.0, 400.0),
                    async_share: float = 0.4) -> AppSpec:
    """Small random acyclic app: one root, every other task called by an earlier one.

    Edges only point from lower to higher index, so the graph is a DAG; extra
    edges are added with probability 0.3.  Used for oracle comparisons.
    """
    rng = random.Random(seed)
    n = n_tasks or rng.randint(2, max_tasks)
    names = [f"T{i}" for i in range(n)]
    calls: dict[str, list[tuple[str, CallMode]]] = {t: [] for t in names}

    def mode():
        return A if rng.random() < async_share else S

    for i in range(1, n):
        calls[names[rng.randrange(i)]].append((names[i], mode()))
        for j in range(i - 1):
            if rng.random() < 0.3 and all(c != names[i] for c, _ in calls[names[j]]):
                calls[names[j]].append((names[i], mode()))
    tasks = []
    for t in names:
        io = [IOCall("db", round(rng.uniform(0, 20), 1))] if rng.random() < 0.5 else []
        tasks.append(_t(t, round(rng.uniform(*cpu_range), 1), rng.choice((1, 2)), io,
                        sorted(calls[t])))
    return AppSpec(tasks, (names[0],), name=f"random-{seed}")
