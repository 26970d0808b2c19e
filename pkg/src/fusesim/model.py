"""Shared domain types: tasks, applications, fusion groups and setups.

A *fusion setup* says which tasks are deployed together (fusion groups), how
much memory each group's function gets, and which group receives remote calls
for a task (its *home*).  Setups round-trip through the compact notation
``(A,B)-(C)``; an optional ``@<MB>`` suffix per group carries memory sizes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

EXTERNAL = "EXTERNAL"


class ConfigError(ValueError):
    """An application, setup or platform configuration is unusable."""


class NotationError(ConfigError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class CallMode(str, Enum):
    SYNC = "SYNC"
    ASYNC = "ASYNC"


@dataclass(frozen=True)
class IOCall:
    service: str
    latency_ms: float
    count: int = 1

    @property
    def total_ms(self) -> float:
        return self.latency_ms * self.count


@dataclass(frozen=True)
class CallEdge:
    callee: str
    mode: CallMode = CallMode.SYNC

    def __post_init__(self):
        object.__setattr__(self, "mode", CallMode(self.mode))


@dataclass(frozen=True)
class TaskSpec:
    id: str
    cpu_work: float = 0.0
    parallelism: int = 1
    io_calls: tuple[IOCall, ...] = ()
    calls: tuple[CallEdge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "io_calls", tuple(self.io_calls))
        object.__setattr__(self, "calls", tuple(self.calls))
        if self.cpu_work < 0:
            raise ConfigError(f"task {self.id}: cpu_work must be >= 0")
        if self.parallelism < 1:
            raise ConfigError(f"task {self.id}: parallelism must be >= 1")
        for io in self.io_calls:
            if io.latency_ms < 0 or io.count < 0:
                raise ConfigError(f"task {self.id}: negative I/O latency or count")
        for edge in self.calls:
            if edge.callee == self.id:
                raise ConfigError(f"task {self.id} calls itself")

    @property
    def io_ms(self) -> float:
        return sum(io.total_ms for io in self.io_calls)


@dataclass(frozen=True)
class AppSpec:
    tasks: Mapping[str, TaskSpec]
    roots: tuple[str, ...]
    name: str = "app"
    # roots driven by the default workload; empty means all roots
    operations: tuple[str, ...] = ()

    def __post_init__(self):
        if not isinstance(self.tasks, Mapping):
            tasks = {}
            for t in self.tasks:
                if t.id in tasks:
                    raise ConfigError(f"duplicate task id {t.id}")
                tasks[t.id] = t
            object.__setattr__(self, "tasks", tasks)
        object.__setattr__(self, "roots", tuple(self.roots))
        object.__setattr__(self, "operations", tuple(self.operations))
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not self.roots:
            out.append("app has no roots")
        for key, task in self.tasks.items():
            if key != task.id:
                out.append(f"task key {key!r} does not match id {task.id!r}")
        for r in self.roots:
            if r not in self.tasks:
                out.append(f"root {r} is not a task")
        for r in self.operations:
            if r not in self.roots:
                out.append(f"operation {r} is not a root")
        for task in self.tasks.values():
            for edge in task.calls:
                if edge.callee not in self.tasks:
                    out.append(f"task {task.id} calls unknown task {edge.callee}")
        return out

    @property
    def task_ids(self) -> list[str]:
        return list(self.tasks)

    def __getitem__(self, task_id: str) -> TaskSpec:
        return self.tasks[task_id]


@dataclass(frozen=True)
class FusionGroup:
    id: str
    members: frozenset[str]
    memory_mb: int = 128

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))

    @property
    def key(self) -> tuple[tuple[str, ...], int]:
        """Deployment identity: same members and memory means same function."""
        return tuple(sorted(self.members)), self.memory_mb


@dataclass(frozen=True)
class FusionSetup:
    groups: tuple[FusionGroup, ...]
    home: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "home", dict(self.home))

    def group(self, group_id: str) -> FusionGroup:
        for g in self.groups:
            if g.id == group_id:
                return g
        raise KeyError(group_id)

    @property
    def group_ids(self) -> list[str]:
        return [g.id for g in self.groups]

    def groups_of(self, task: str) -> list[FusionGroup]:
        return [g for g in self.groups if task in g.members]

    def home_group(self, task: str) -> FusionGroup:
        return self.group(self.home[task])

    def with_memory(self, memory: Mapping[str, int]) -> "FusionSetup":
        groups = tuple(
            replace(g, memory_mb=memory[g.id]) if g.id in memory else g for g in self.groups
        )
        return FusionSetup(groups, self.home)

    def memory_map(self) -> dict[str, int]:
        return {g.id: g.memory_mb for g in self.groups}

    def notation(self, with_memory: bool = True) -> str:
        return format_setup(self, with_memory=with_memory)

    def __str__(self) -> str:
        return self.notation()


@dataclass(frozen=True)
class PlatformConfig:
    memory_sizes_mb: tuple[int, ...] = (768, 1024, 1536, 1650, 2048, 3000, 4096, 6144)
    default_memory_mb: int = 128
    vcpu_reference_mb: float = 1650.0
    remote_sync_overhead_ms: float = 50.0
    remote_async_dispatch_ms: float = 10.0
    handler_warm_overhead_ms: float = 1.3
    handler_cold_overhead_ms: float = 36.6
    platform_cold_init_ms: float = 250.0
    instance_idle_timeout_s: float = 600.0
    price_per_gb_s: float = 1.6667e-5
    price_per_request: float = 2e-7
    billing_granularity_ms: float = 1.0
    bill_cold_init: bool = False

    def __post_init__(self):
        object.__setattr__(self, "memory_sizes_mb", tuple(int(m) for m in self.memory_sizes_mb))
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        sizes = self.memory_sizes_mb
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            out.append("memory_sizes_mb must be strictly increasing")
        if any(m <= 0 for m in sizes):
            out.append("memory sizes must be positive")
        if self.default_memory_mb not in sizes and self.default_memory_mb != 128:
            out.append(f"default_memory_mb {self.default_memory_mb} not a configured size")
        for name in (
            "vcpu_reference_mb", "remote_sync_overhead_ms", "remote_async_dispatch_ms",
            "handler_warm_overhead_ms", "handler_cold_overhead_ms", "platform_cold_init_ms",
            "instance_idle_timeout_s", "price_per_gb_s", "price_per_request",
        ):
            if getattr(self, name) < 0:
                out.append(f"{name} must be >= 0")
        if self.vcpu_reference_mb <= 0:
            out.append("vcpu_reference_mb must be > 0")
        if self.billing_granularity_ms <= 0:
            out.append("billing_granularity_ms must be > 0")
        return out

    @property
    def all_sizes(self) -> tuple[int, ...]:
        """Every size a group may run at: the configured list plus the default."""
        return tuple(sorted(set(self.memory_sizes_mb) | {self.default_memory_mb}))


# ---------------------------------------------------------------------------
# notation

_NAME = re.compile(r"[A-Za-z0-9_.:]+")


def parse_setup_notation(text: str, app: AppSpec | None = None,
                         default_memory_mb: int = 128) -> FusionSetup:
    """Parse ``(A,B)-(C)`` (optionally ``(A,B)@128-(C)@1024``) into a setup.

    Groups get ids ``g0, g1, ...`` left to right and every task's home is the
    first group that contains it.  With an ``app`` the result must cover every
    task and use only known names.
    """
    pos = 0
    n = len(text)
    groups: list[FusionGroup] = []

    def skip_ws():
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def expect(ch: str):
        nonlocal pos
        skip_ws()
        if pos >= n or text[pos] != ch:
            found = repr(text[pos]) if pos < n else "end of input"
            raise NotationError(f"expected {ch!r}, found {found}", pos)
        pos += 1

    skip_ws()
    if pos >= n:
        raise NotationError("empty setup notation", 0)
    while True:
        group_pos = pos
        expect("(")
        members: list[str] = []
        while True:
            skip_ws()
            m = _NAME.match(text, pos)
            if not m:
                if not members and pos < n and text[pos] == ")":
                    raise NotationError("empty group", group_pos)
                raise NotationError("expected task name", pos)
            name = m.group(0)
            if app is not None and name not in app.tasks:
                raise NotationError(f"unknown task {name!r}", pos)
            if name in members:
                raise NotationError(f"task {name!r} repeated in group", pos)
            members.append(name)
            pos = m.end()
            skip_ws()
            if pos < n and text[pos] == ",":
                pos += 1
                continue
            break
        expect(")")
        memory = default_memory_mb
        skip_ws()
        if pos < n and text[pos] == "@":
            pos += 1
            m = re.compile(r"\d+").match(text, pos)
            if not m:
                raise NotationError("expected memory size after '@'", pos)
            memory = int(m.group(0))
            pos = m.end()
        groups.append(FusionGroup(f"g{len(groups)}", frozenset(members), memory))
        skip_ws()
        if pos >= n:
            break
        expect("-")

    home: dict[str, str] = {}
    for g in groups:
        for t in sorted(g.members):
            home.setdefault(t, g.id)
    if app is not None:
        missing = [t for t in app.tasks if t not in home]
        if missing:
            raise NotationError(f"task(s) {', '.join(missing)} in no group", len(text))
    return FusionSetup(tuple(groups), home)


def _group_sort_key(g: FusionGroup) -> tuple:
    members = sorted(g.members)
    return (members[0], members, g.memory_mb, g.id)


def canonical_groups(setup: FusionSetup) -> list[FusionGroup]:
    return sorted(setup.groups, key=_group_sort_key)


def format_setup(setup: FusionSetup, with_memory: bool = False) -> str:
    parts = []
    for g in canonical_groups(setup):
        s = "(" + ",".join(sorted(g.members)) + ")"
        if with_memory:
            s += f"@{g.memory_mb}"
        parts.append(s)
    return "-".join(parts)


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Violation:
    kind: str
    task: str | None = None
    group: str | None = None

    def __str__(self) -> str:
        args = ",".join(x for x in (self.task, self.group) if x is not None)
        return f"{self.kind}({args})"


def MissingTask(task: str) -> Violation:
    return Violation("MissingTask", task)


def HomeNotMember(task: str, group: str) -> Violation:
    return Violation("HomeNotMember", task, group)


def validate_setup(setup: FusionSetup, app: AppSpec,
                   cfg: PlatformConfig | None = None) -> list[Violation]:
    out: list[Violation] = []
    seen_ids: set[str] = set()
    covered: set[str] = set()
    for g in setup.groups:
        if g.id in seen_ids:
            out.append(Violation("DuplicateGroupId", group=g.id))
        seen_ids.add(g.id)
        if not g.members:
            out.append(Violation("EmptyGroup", group=g.id))
        for t in sorted(g.members):
            if t not in app.tasks:
                out.append(Violation("UnknownTask", t, g.id))
        covered |= g.members
        if cfg is not None and g.memory_mb not in cfg.all_sizes:
            out.append(Violation("InvalidMemory", str(g.memory_mb), g.id))
    for t in app.tasks:
        if t not in covered:
            out.append(MissingTask(t))
            continue
        gid = setup.home.get(t)
        if gid is None:
            out.append(Violation("MissingHome", t))
        elif gid not in seen_ids:
            out.append(Violation("UnknownHomeGroup", t, gid))
        elif t not in setup.group(gid).members:
            out.append(HomeNotMember(t, gid))
    for t in sorted(set(setup.home) - set(app.tasks)):
        out.append(Violation("UnknownTask", t, setup.home[t]))
    return out


def require_valid(setup: FusionSetup, app: AppSpec, cfg: PlatformConfig | None = None) -> None:
    problems = validate_setup(setup, app, cfg)
    if problems:
        raise ConfigError("invalid fusion setup: " + ", ".join(map(str, problems)))


# ---------------------------------------------------------------------------
# common setups

def singleton_setup(app: AppSpec, memory_mb: int = 128) -> FusionSetup:
    """Every task in its own group: all calls are remote."""
    groups = tuple(FusionGroup(f"g{i}", frozenset([t]), memory_mb) for i, t in enumerate(app.tasks))
    return FusionSetup(groups, {t: f"g{i}" for i, t in enumerate(app.tasks)})


def single_group_setup(app: AppSpec, memory_mb: int = 128) -> FusionSetup:
    """All tasks fused into one function: every call is local."""
    return FusionSetup((FusionGroup("g0", frozenset(app.tasks), memory_mb),),
                       {t: "g0" for t in app.tasks})


def setup_from_partition(parts: Sequence[Iterable[str]], memory: Sequence[int]) -> FusionSetup:
    groups = tuple(FusionGroup(f"g{i}", frozenset(p), m) for i, (p, m) in enumerate(zip(parts, memory)))
    home = {t: g.id for g in groups for t in g.members}
    return FusionSetup(groups, home)
