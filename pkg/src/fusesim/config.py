"""YAML/JSON loading for apps, setups, platform settings and experiments.

JSON documents are valid YAML, so one loader serves both.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .model import (
    AppSpec, CallEdge, ConfigError, FusionGroup, FusionSetup, IOCall, PlatformConfig, TaskSpec,
    parse_setup_notation,
)
from .optimizer import Objective
from .workloads import BUILTIN_APPS, PROTOCOLS, builtin_app


def load_document(source: str | Path | Mapping) -> Any:
    if isinstance(source, Mapping):
        return dict(source)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON ({exc})") from None


def _require_mapping(doc: Any, what: str) -> dict:
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{what} must be a mapping")
    return dict(doc)


def _check_keys(doc: Mapping, allowed: set[str], what: str) -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"{what}: unknown key(s) {', '.join(unknown)}")


# ---------------------------------------------------------------------------
# application

def app_from_dict(doc: Any) -> AppSpec:
    doc = _require_mapping(doc, "app")
    _check_keys(doc, {"name", "roots", "operations", "tasks"}, "app")
    tasks = []
    for i, t in enumerate(doc.get("tasks") or []):
        t = _require_mapping(t, f"task #{i}")
        _check_keys(t, {"id", "cpu_work", "parallelism", "io", "calls"}, f"task #{i}")
        if "id" not in t:
            raise ConfigError(f"task #{i} has no id")
        try:
            io = tuple(IOCall(str(x["service"]), float(x["latency_ms"]), int(x.get("count", 1)))
                       for x in t.get("io") or [])
            calls = tuple(CallEdge(str(c["callee"]), str(c.get("mode", "SYNC")).upper())
                          for c in t.get("calls") or [])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"task {t['id']}: malformed io/calls entry ({exc})") from None
        tasks.append(TaskSpec(str(t["id"]), float(t.get("cpu_work", 0.0)),
                              int(t.get("parallelism", 1)), io, calls))
    if not tasks:
        raise ConfigError("app has no tasks")
    return AppSpec(tasks, tuple(doc.get("roots") or ()), name=str(doc.get("name", "app")),
                   operations=tuple(doc.get("operations") or ()))


def app_to_dict(app: AppSpec) -> dict:
    return {
        "name": app.name,
        "roots": list(app.roots),
        "operations": list(app.operations),
        "tasks": [
            {"id": t.id, "cpu_work": t.cpu_work, "parallelism": t.parallelism,
             "io": [{"service": x.service, "latency_ms": x.latency_ms, "count": x.count}
                    for x in t.io_calls],
             "calls": [{"callee": c.callee, "mode": c.mode.value} for c in t.calls]}
            for t in app.tasks.values()
        ],
    }


def resolve_app(ref: Any, overrides: Mapping | None = None) -> AppSpec:
    """Builtin name, path to an app document, or an inline mapping."""
    if isinstance(ref, str) and ref.lower() in BUILTIN_APPS:
        return builtin_app(ref, **dict(overrides or {}))
    if overrides:
        raise ConfigError("app_overrides only apply to builtin apps")
    if isinstance(ref, (str, Path)):
        return app_from_dict(load_document(ref))
    return app_from_dict(ref)


# ---------------------------------------------------------------------------
# setups

def setup_from_dict(doc: Any, app: AppSpec | None = None) -> FusionSetup:
    """A notation string, or ``{groups: [{id, members, memory_mb}], home: {...}}``."""
    if isinstance(doc, str):
        return parse_setup_notation(doc, app)
    doc = _require_mapping(doc, "setup")
    _check_keys(doc, {"groups", "home"}, "setup")
    groups = []
    for g in doc.get("groups") or []:
        g = _require_mapping(g, "group")
        try:
            groups.append(FusionGroup(str(g["id"]), frozenset(g["members"]),
                                      int(g.get("memory_mb", 128))))
        except KeyError as exc:
            raise ConfigError(f"group is missing {exc}") from None
    home = dict(doc.get("home") or {})
    if not home:
        for grp in groups:
            for t in sorted(grp.members):
                home.setdefault(t, grp.id)
    return FusionSetup(tuple(groups), home)


def setup_to_dict(setup: FusionSetup) -> dict:
    return {
        "groups": [{"id": g.id, "members": sorted(g.members), "memory_mb": g.memory_mb}
                   for g in setup.groups],
        "home": dict(sorted(setup.home.items())),
    }


# ---------------------------------------------------------------------------
# platform

_PLATFORM_FIELDS = {f.name for f in dataclasses.fields(PlatformConfig)}


def platform_from_dict(doc: Any) -> PlatformConfig:
    if doc is None:
        return PlatformConfig()
    if isinstance(doc, (str, Path)):
        doc = load_document(doc)
    doc = _require_mapping(doc, "platform")
    _check_keys(doc, _PLATFORM_FIELDS, "platform")
    try:
        return PlatformConfig(**doc)
    except TypeError as exc:
        raise ConfigError(f"platform: {exc}") from None


def platform_to_dict(cfg: PlatformConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["memory_sizes_mb"] = list(cfg.memory_sizes_mb)
    return d


def objective_from_dict(doc: Any) -> Objective:
    if doc is None:
        return Objective()
    if isinstance(doc, str):
        return Objective(mode=doc.upper())
    doc = _require_mapping(doc, "objective")
    _check_keys(doc, {"mode", "alpha", "epsilon"}, "objective")
    try:
        return Objective(mode=str(doc.get("mode", "MIN_COST_TIEBREAK_RR")).upper(),
                         alpha=float(doc.get("alpha", 0.5)),
                         epsilon=float(doc.get("epsilon", 0.01)))
    except ValueError as exc:
        raise ConfigError(f"objective: {exc}") from None


# ---------------------------------------------------------------------------
# experiments

CADENCES = ("fixed", "csp1")


@dataclass
class ExperimentConfig:
    app: Any = "tree"
    protocol: str = "OPT"
    platform: PlatformConfig = field(default_factory=PlatformConfig)
    objective: Objective = field(default_factory=Objective)
    cadence: str = "fixed"
    seed: int = 0
    output_dir: Path = Path("out")
    app_overrides: dict = field(default_factory=dict)
    window_requests: int = 1000
    prior_campaign: Path | None = None

    def __post_init__(self):
        self.protocol = str(self.protocol).upper()
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}; choose from {PROTOCOLS}")
        if self.cadence not in CADENCES:
            raise ConfigError(f"unknown cadence {self.cadence!r}; choose from {CADENCES}")
        if self.window_requests < 1:
            raise ConfigError("window_requests must be >= 1")
        self.output_dir = Path(self.output_dir)
        if self.prior_campaign is not None:
            self.prior_campaign = Path(self.prior_campaign)

    def resolve_app(self) -> AppSpec:
        return resolve_app(self.app, self.app_overrides)

    @property
    def prior_path(self) -> Path:
        return self.prior_campaign or self.output_dir / "campaign.json"


_EXPERIMENT_KEYS = {"app", "protocol", "platform", "objective", "cadence", "seed", "output_dir",
                    "app_overrides", "window_requests", "prior_campaign"}


def experiment_from_dict(doc: Any, base_dir: Path | None = None) -> ExperimentConfig:
    doc = _require_mapping(doc, "experiment")
    _check_keys(doc, _EXPERIMENT_KEYS, "experiment")
    base = base_dir or Path(".")

    def rel(p):
        return None if p is None else (base / p if not Path(p).is_absolute() else Path(p))

    app = doc.get("app", "tree")
    if isinstance(app, str) and app.lower() not in BUILTIN_APPS:
        app = rel(app)
    platform = doc.get("platform")
    if isinstance(platform, str):
        platform = rel(platform)
    try:
        seed = int(doc.get("seed", 0))
        window = int(doc.get("window_requests", 1000))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"experiment: {exc}") from None
    return ExperimentConfig(
        app=app,
        protocol=doc.get("protocol", "OPT"),
        platform=platform_from_dict(platform),
        objective=objective_from_dict(doc.get("objective")),
        cadence=str(doc.get("cadence", "fixed")).lower(),
        seed=seed,
        output_dir=rel(doc.get("output_dir", "out")),
        app_overrides=dict(doc.get("app_overrides") or {}),
        window_requests=window,
        prior_campaign=rel(doc.get("prior_campaign")),
    )


def load_experiment(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return experiment_from_dict(load_document(path), path.parent)
