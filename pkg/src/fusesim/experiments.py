"""Optimization campaigns and setup comparisons, plus their file artifacts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .config import (
    ExperimentConfig, app_to_dict, platform_to_dict, setup_from_dict, setup_to_dict,
)
from .model import (
    AppSpec, ConfigError, FusionSetup, PlatformConfig, format_setup, single_group_setup,
    singleton_setup,
)
from .optimizer import Csp1Scheduler, Objective, Optimizer
from .runtime import Simulation
from .telemetry import (
    MetricsSnapshot, TraceLog, build_call_graph, compare, csv_text, snapshot, summary_csv,
)
from .workloads import WorkloadSchedule, make_schedule

COMPARISON_SETUPS = ("S-remote", "S-local", "S-path", "S-opt")
REQUEST_COLUMNS = ("trace_id", "setup_id", "root", "arrival", "rr_ms", "cost_usd", "cold_starts")


class MissingPriorError(ConfigError):
    """A COLD/SCALE run needs the setups found by an earlier OPT campaign."""


@dataclass(frozen=True)
class RequestRow:
    trace_id: int
    setup_id: str
    root: str
    arrival: float
    rr_ms: float
    cost_usd: float
    cold_starts: int

    def as_row(self) -> list:
        return [getattr(self, c) for c in REQUEST_COLUMNS]


def request_rows(log: TraceLog, setup_id: str) -> list[RequestRow]:
    costs = log.trace_costs()
    colds: dict[int, int] = {}
    for b in log.billing:
        colds[b.trace_id] = colds.get(b.trace_id, 0) + b.cold
    return [RequestRow(r.trace_id, setup_id, r.root, r.arrival, r.rr_ms, costs.get(r.trace_id, 0.0),
                       colds.get(r.trace_id, 0))
            for r in sorted(log.requests, key=lambda r: r.trace_id)]


def requests_csv(rows: Sequence[RequestRow]) -> str:
    return csv_text((r.as_row() for r in rows), REQUEST_COLUMNS)


# ---------------------------------------------------------------------------
# measuring


def measure(app: AppSpec, setup: FusionSetup, cfg: PlatformConfig, schedule: WorkloadSchedule,
            setup_id: str = "S") -> tuple[MetricsSnapshot, TraceLog]:
    """Run ``schedule`` against ``setup`` in a fresh world."""
    sim = Simulation(app, setup, cfg, setup_id)
    log = sim.run_window(schedule.arrivals, schedule.flush_times, offset=0.0)
    return snapshot(log, setup_id, setup_id), log


def compare_setups(app: AppSpec, setups: Mapping[str, FusionSetup], cfg: PlatformConfig,
                   protocol: str = "OPT", seed: int = 0, **schedule_kw
                   ) -> dict[str, tuple[MetricsSnapshot, TraceLog]]:
    """Each named setup under the identical workload, each in its own world."""
    schedule = make_schedule(protocol, app, seed, **schedule_kw)
    return {name: measure(app, s, cfg, schedule, name) for name, s in setups.items()}


# ---------------------------------------------------------------------------
# campaigns


@dataclass
class Campaign:
    app: AppSpec
    optimizer: Optimizer
    seed: int
    cadence: str
    rows: list[RequestRow] = field(default_factory=list)
    windows: list[int] = field(default_factory=list)

    @property
    def steps(self):
        return self.optimizer.steps

    @property
    def base_setup(self) -> FusionSetup:
        return self.optimizer.steps[0].setup

    @property
    def path_setup(self) -> FusionSetup:
        return self.optimizer.path_setup or self.optimizer.best

    @property
    def final_setup(self) -> FusionSetup:
        return self.optimizer.setups[self.optimizer.state.working_id]

    @property
    def final_snapshot(self) -> MetricsSnapshot:
        return self.optimizer.state.tried[self.optimizer.state.working_id]

    @property
    def base_snapshot(self) -> MetricsSnapshot:
        return self.optimizer.steps[0].snapshot

    def path_sequence(self) -> list[str]:
        return [format_setup(s.setup) for s in self.steps if s.phase.value == "PATH"]

    def to_dict(self) -> dict:
        return {
            "app": self.app.name,
            "application": app_to_dict(self.app),
            "platform": platform_to_dict(self.optimizer.cfg),
            "seed": self.seed,
            "cadence": self.cadence,
            "window_requests": self.windows,
            "steps": self.optimizer.log(),
            "base_setup": setup_to_dict(self.base_setup),
            "path_setup": setup_to_dict(self.path_setup),
            "opt_setup": setup_to_dict(self.final_setup),
            "path_notation": format_setup(self.path_setup, with_memory=True),
            "opt_notation": format_setup(self.final_setup, with_memory=True),
        }


def run_campaign(app: AppSpec, cfg: PlatformConfig, objective: Objective = Objective(),
                 seed: int = 0, cadence: str = "fixed", window_requests: int = 1000,
                 initial: FusionSetup | None = None, interval_ms: float = 100.0) -> Campaign:
    """Optimize from ``initial`` (all-remote by default) on one simulated timeline.

    Every window replays the OPT arrival pattern against the current setup and
    drains before the optimizer looks at it; unchanged deployments stay warm
    from one window to the next.
    """
    initial = initial or singleton_setup(app, cfg.default_memory_mb)
    opt = Optimizer(app, initial, cfg, objective)
    sim = Simulation(app, initial, cfg, opt.current.setup_id)
    sched = (Csp1Scheduler(base_interval=window_requests, seed=seed) if cadence == "csp1"
             else Csp1Scheduler.fixed(window_requests))
    camp = Campaign(app, opt, seed, cadence)
    setup: FusionSetup | None = initial
    size = window_requests
    prev: MetricsSnapshot | None = None
    while setup is not None:
        sid = opt.current.setup_id
        sim.set_setup(setup, sid)
        schedule = make_schedule("OPT", app, seed, requests=size, interval_ms=interval_ms)
        log = sim.run_window(schedule.arrivals)
        snap = snapshot(log, sid, sid)
        camp.rows.extend(request_rows(log, sid))
        camp.windows.append(size)
        setup = opt.observe(snap, build_call_graph(log.records))
        size = sched.next_interval(0.0 if prev is None else compare(prev, snap))
        prev = snap
    return camp


# ---------------------------------------------------------------------------
# experiment runner


def load_prior(path: Path, app: AppSpec) -> dict[str, FusionSetup]:
    if not path.exists():
        raise MissingPriorError(
            f"no prior campaign at {path}; run the OPT protocol for app {app.name!r} first "
            f"(it writes campaign.json) or set prior_campaign")
    try:
        doc = json.loads(path.read_text())
    except ValueError as exc:
        raise ConfigError(f"unreadable prior campaign {path}: {exc}") from None
    if doc.get("app") != app.name:
        raise MissingPriorError(
            f"prior campaign {path} is for app {doc.get('app')!r}, not {app.name!r}; "
            f"run the OPT protocol for {app.name!r} first")
    try:
        return {"S-path": setup_from_dict(doc["path_setup"], app),
                "S-opt": setup_from_dict(doc["opt_setup"], app)}
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"unreadable prior campaign {path}: missing {exc}") from None


def comparison_setups(app: AppSpec, cfg: PlatformConfig, prior: Mapping[str, FusionSetup]
                      ) -> dict[str, FusionSetup]:
    return {
        "S-remote": singleton_setup(app, cfg.default_memory_mb),
        "S-local": single_group_setup(app, cfg.default_memory_mb),
        "S-path": prior["S-path"],
        "S-opt": prior["S-opt"],
    }


def run_experiment(exp: ExperimentConfig) -> dict[str, Path]:
    """Run one configured experiment and write its artifacts; returns written paths."""
    app = exp.resolve_app()
    cfg = exp.platform
    out = exp.output_dir
    proto = exp.protocol.lower()
    written: dict[str, Path] = {}

    def write(name: str, text: str) -> None:
        p = out / name
        p.write_text(text)
        written[name] = p

    if exp.protocol == "OPT":
        camp = run_campaign(app, cfg, exp.objective, exp.seed, exp.cadence, exp.window_requests)
        out.mkdir(parents=True, exist_ok=True)
        write("campaign.json", json.dumps(camp.to_dict(), indent=2) + "\n")
        write(f"{proto}_requests.csv", requests_csv(camp.rows))
        write(f"{proto}_summary.csv", summary_csv(s.snapshot for s in camp.steps))
        return written

    prior = load_prior(exp.prior_path, app)
    results = compare_setups(app, comparison_setups(app, cfg, prior), cfg, exp.protocol, exp.seed)
    out.mkdir(parents=True, exist_ok=True)
    rows = [row for name, (_, log) in results.items() for row in request_rows(log, name)]
    write(f"{proto}_requests.csv", requests_csv(rows))
    write(f"{proto}_summary.csv", summary_csv(snap for snap, _ in results.values()))
    return written
