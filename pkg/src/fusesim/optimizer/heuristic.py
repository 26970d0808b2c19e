"""Two-phase fusion heuristic: path optimization, then per-group memory sweep.

The optimizer is a state machine driven between measurement windows: it is
shown the snapshot and call graph of the setup that was just measured and
answers with the next setup to deploy, or ``None`` once it is stable.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from ..model import (
    EXTERNAL, AppSpec, CallMode, ConfigError, FusionGroup, FusionSetup, PlatformConfig,
    format_setup, require_valid,
)
from ..telemetry import AnnotatedCallGraph, MetricsSnapshot

# ---------------------------------------------------------------------------
# objective


class ObjectiveMode(str, Enum):
    MIN_COST_TIEBREAK_RR = "MIN_COST_TIEBREAK_RR"
    WEIGHTED = "WEIGHTED"


class Decision(str, Enum):
    BASE = "base"
    ACCEPT = "accept"
    KEEP = "keep"  # neutral within tolerance: explored further but not the incumbent
    REVERT = "revert"
    TRIAL = "trial"  # infra sweep window, judged per group afterwards
    FINAL = "final"


class Verdict(str, Enum):
    BETTER = "better"
    NEUTRAL = "neutral"
    WORSE = "worse"


@dataclass(frozen=True)
class Objective:
    mode: ObjectiveMode = ObjectiveMode.MIN_COST_TIEBREAK_RR
    alpha: float = 0.5
    epsilon: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "mode", ObjectiveMode(self.mode))
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("objective alpha must be within [0, 1]")
        if self.epsilon < 0:
            raise ConfigError("objective epsilon must be >= 0")

    def value(self, snap: MetricsSnapshot, baseline: MetricsSnapshot | None = None) -> float:
        """Scalar to minimize; cost in $pmi, or the weighted sum normalized by ``baseline``.

        Without a baseline a weighted score is relative to the snapshot itself
        and therefore always 1; callers comparing setups must pass one.
        """
        if self.mode is ObjectiveMode.MIN_COST_TIEBREAK_RR:
            return snap.mean_cost_pmi
        if baseline is None:
            baseline = snap
        return (self.alpha * _ratio(snap.mean_cost_pmi, baseline.mean_cost_pmi)
                + (1 - self.alpha) * _ratio(snap.rr_med, baseline.rr_med))

    def judge(self, candidate: MetricsSnapshot, incumbent: MetricsSnapshot,
              baseline: MetricsSnapshot | None = None) -> Verdict:
        eps = self.epsilon
        if self.mode is ObjectiveMode.WEIGHTED:
            return _cmp(self.value(candidate, baseline), self.value(incumbent, baseline), eps)
        by_cost = _cmp(candidate.mean_cost_pmi, incumbent.mean_cost_pmi, eps)
        if by_cost is not Verdict.NEUTRAL:
            return by_cost
        return _cmp(candidate.rr_med, incumbent.rr_med, eps)


def _ratio(a: float, b: float) -> float:
    return a / b if b else (0.0 if a == 0 else math.inf)


def _cmp(cand: float, inc: float, eps: float) -> Verdict:
    if cand < inc - eps * abs(inc):
        return Verdict.BETTER
    if cand > inc + eps * abs(inc):
        return Verdict.WORSE
    return Verdict.NEUTRAL


def accept_or_revert(candidate: MetricsSnapshot, incumbent: MetricsSnapshot,
                     objective: Objective = Objective(),
                     baseline: MetricsSnapshot | None = None) -> Decision:
    """Strict improvement beyond the tolerance is accepted; anything else reverts."""
    if objective.judge(candidate, incumbent, baseline) is Verdict.BETTER:
        return Decision.ACCEPT
    return Decision.REVERT


# ---------------------------------------------------------------------------
# path optimization


def _edge_kinds(graph: AnnotatedCallGraph) -> tuple[dict[str, list[str]], set[str]]:
    """Only-sync adjacency and the set of entry tasks (called externally or async)."""
    sync: dict[str, list[str]] = {}
    entries: set[str] = set()
    for (caller, callee), stats in sorted(graph.edges.items()):
        modes = stats.modes
        if caller == EXTERNAL or CallMode.ASYNC in modes:
            entries.add(callee)
        if caller != EXTERNAL and modes == {CallMode.SYNC}:
            sync.setdefault(caller, []).append(callee)
    return sync, entries


def sync_closure(entry: str, sync: Mapping[str, list[str]]) -> dict[str, int]:
    """Tasks reachable from ``entry`` over only-sync edges, with BFS depth."""
    depth = {entry: 0}
    todo = deque([entry])
    while todo:
        t = todo.popleft()
        for c in sync.get(t, ()):
            if c not in depth:
                depth[c] = depth[t] + 1
                todo.append(c)
    return depth


def _depth_from_roots(graph: AnnotatedCallGraph) -> dict[str, int]:
    """Hop distance from an external caller over observed edges of any mode."""
    adj: dict[str, list[str]] = {}
    for caller, callee in sorted(graph.edges):
        adj.setdefault(caller, []).append(callee)
    return {t: d - 1 for t, d in sync_closure(EXTERNAL, adj).items() if t != EXTERNAL}


def _anchor_key(t: str, root_depth: dict[str, int]) -> tuple:
    return (root_depth.get(t, math.inf), t)


class _Draft:
    """Mutable working copy of a setup used to build one candidate."""

    def __init__(self, setup: FusionSetup):
        self.members = {g.id: set(g.members) for g in setup.groups}
        self.memory = {g.id: g.memory_mb for g in setup.groups}
        self.home = dict(setup.home)

    def new_group(self, members: set[str], memory: int) -> str:
        used = {int(g[1:]) for g in self.members if g[1:].isdigit() and g[0] == "g"}
        n = 0
        while n in used:
            n += 1
        gid = f"g{n}"
        self.members[gid] = set(members)
        self.memory[gid] = memory
        return gid

    def build(self) -> FusionSetup:
        homes = set(self.home.values())
        groups = tuple(
            FusionGroup(gid, frozenset(m), self.memory[gid])
            for gid, m in self.members.items() if m and gid in homes
        )
        return FusionSetup(groups, self.home)


def path_candidates(graph: AnnotatedCallGraph, setup: FusionSetup, app: AppSpec | None = None,
                    default_memory_mb: int = 128) -> list[tuple[str, FusionSetup]]:
    """All single-move repairs of ``setup`` in priority order.

    Fusion moves (a task called only synchronously is missing from an entry's
    group) come first, deepest in the sync chain and latest finishing first.
    Eviction moves (an asynchronously called task shares a group with another
    entry, or a group carries a task nobody there calls synchronously) follow.
    """
    sync, entries = _edge_kinds(graph)
    closures = {e: sync_closure(e, sync) for e in sorted(entries)}
    root_depth = _depth_from_roots(graph)

    def offset(t: str) -> float:
        node = graph.nodes.get(t)
        return node.mean_end_offset if node else 0.0

    moves: list[tuple[tuple, str, FusionSetup]] = []

    # fusion: bring each sync-closure member into the entry's home group
    for e, depth in closures.items():
        gid = setup.home.get(e)
        if gid is None:
            continue
        group = setup.group(gid)
        for t, d in depth.items():
            if t == e or t in group.members:
                continue
            draft = _Draft(setup)
            draft.members[gid].add(t)
            if t not in entries:
                old = draft.home[t]
                draft.home[t] = gid
                if old != gid and not _required(t, old, draft, closures):
                    draft.members[old].discard(t)
            key = (0, -d, -offset(t), t, e)
            moves.append((key, f"fuse {t} into group of {e}", draft.build()))

    # eviction: at most one entry homed per group (the anchor)
    by_home: dict[str, list[str]] = {}
    for e in entries:
        if e in setup.home:
            by_home.setdefault(setup.home[e], []).append(e)
    for gid, homed in sorted(by_home.items()):
        if len(homed) < 2:
            continue
        anchor = min(homed, key=lambda t: _anchor_key(t, root_depth))
        for e in sorted(homed, key=lambda t: _anchor_key(t, root_depth)):
            if e == anchor:
                continue
            draft = _Draft(setup)
            new = draft.new_group({e}, default_memory_mb)
            draft.home[e] = new
            if not _required(e, gid, draft, closures):
                draft.members[gid].discard(e)
            key = (1, -root_depth.get(e, 0), e, "")
            moves.append((key, f"evict {e} from group of {anchor}", draft.build()))

    # eviction: members their group never calls synchronously
    for g in setup.groups:
        for t in sorted(g.members):
            draft = _Draft(setup)
            if _required(t, g.id, draft, closures):
                continue
            if draft.home[t] == g.id:
                if t in entries:
                    continue  # an entry may live alone in its home
                targets = [h for h in sorted(draft.members)
                           if h != g.id and _required(t, h, draft, closures)]
                if targets:
                    draft.home[t] = targets[0]
                    draft.members[targets[0]].add(t)
                else:
                    draft.home[t] = draft.new_group({t}, default_memory_mb)
            draft.members[g.id].discard(t)
            key = (2, t, g.id, "")
            moves.append((key, f"remove {t} from {g.id}", draft.build()))

    moves.sort(key=lambda m: m[0])
    out, seen = [], {format_setup(setup)}
    for _, label, cand in moves:
        note = format_setup(cand)
        if note in seen:
            continue
        seen.add(note)
        if app is not None:
            require_valid(cand, app)
        out.append((label, cand))
    return out


def _required(task: str, gid: str, draft: _Draft, closures: Mapping[str, dict[str, int]]) -> bool:
    """True if an entry homed in ``gid`` reaches ``task`` synchronously."""
    for e, closure in closures.items():
        if task in closure and draft.home.get(e) == gid and e in draft.members.get(gid, ()):
            return True
    return False


def path_step(graph: AnnotatedCallGraph, current: FusionSetup,
              blocked: frozenset[str] | set[str] = frozenset(),
              default_memory_mb: int = 128) -> FusionSetup | None:
    """Next single-move candidate not in ``blocked`` (notations), or None when done."""
    for _, cand in path_candidates(graph, current, default_memory_mb=default_memory_mb):
        if format_setup(cand) not in blocked:
            return cand
    return None


def path_fixpoint_violations(graph: AnnotatedCallGraph, setup: FusionSetup) -> list[str]:
    """Only-sync edges that cross groups and only-async edges inside a group."""
    out = []
    for (caller, callee), stats in sorted(graph.edges.items()):
        if caller == EXTERNAL or caller not in setup.home:
            continue
        # every group executing the caller must inline its sync callees
        groups = setup.groups_of(caller)
        if stats.modes == {CallMode.SYNC}:
            for g in groups:
                if callee not in g.members and _executes(caller, g, setup, graph):
                    out.append(f"sync {caller}->{callee} crosses out of {format_members(g)}")
        elif stats.modes == {CallMode.ASYNC}:
            home = setup.home_group(caller)
            if callee in home.members and setup.home.get(callee) == home.id:
                out.append(f"async {caller}->{callee} stays inside {format_members(home)}")
    return out


def _executes(task: str, group: FusionGroup, setup: FusionSetup, graph: AnnotatedCallGraph) -> bool:
    sync, entries = _edge_kinds(graph)
    for e in entries:
        if setup.home.get(e) == group.id and task in sync_closure(e, sync):
            return True
    return False


def format_members(g: FusionGroup) -> str:
    return "(" + ",".join(sorted(g.members)) + ")"


# ---------------------------------------------------------------------------
# infrastructure optimization


def infra_sweep_plan(path_setup: FusionSetup, cfg: PlatformConfig) -> list[dict[str, int]]:
    """Measurement windows; each assigns one untried size to every group at once."""
    sizes = cfg.all_sizes
    if not sizes:
        raise ConfigError("no memory sizes configured")
    remaining = {g.id: [m for m in sizes if m != g.memory_mb] for g in path_setup.groups}
    windows = max((len(v) for v in remaining.values()), default=0)
    plan = []
    for k in range(windows):
        plan.append({gid: ms[k] for gid, ms in remaining.items() if k < len(ms)})
    return plan


@dataclass(frozen=True)
class GroupTrial:
    memory_mb: int
    cost_per_request: float
    wall_med: float


def group_trials(snap: MetricsSnapshot) -> dict[str, GroupTrial]:
    n = max(snap.requests, 1)
    return {
        gid: GroupTrial(snap.group_memory[gid], snap.group_cost.get(gid, 0.0) / n,
                        snap.group_wall_med.get(gid, 0.0))
        for gid in snap.group_memory
    }


def infra_select(trials: Mapping[str, list[GroupTrial]], setup: FusionSetup,
                 objective: Objective = Objective()) -> FusionSetup:
    """Per group: cheapest size; near-ties go to the faster, then the smaller size.

    A group that never ran as a function (all its tasks inlined elsewhere)
    has no trials and keeps its memory.
    """
    choice: dict[str, int] = {}
    for g in setup.groups:
        ts = trials.get(g.id)
        if not ts:
            continue
        best = min(t.cost_per_request for t in ts)
        near = [t for t in ts if t.cost_per_request <= best + objective.epsilon * abs(best)]
        choice[g.id] = min(near, key=lambda t: (t.wall_med, t.memory_mb)).memory_mb
    return setup.with_memory(choice)


# ---------------------------------------------------------------------------
# state machine


class Phase(str, Enum):
    PATH = "PATH"
    INFRA = "INFRA"
    STABLE = "STABLE"


@dataclass
class CampaignStep:
    setup_id: str
    setup: FusionSetup
    phase: Phase
    snapshot: MetricsSnapshot | None = None
    decision: Decision | None = None
    note: str = ""

    @property
    def notation(self) -> str:
        return format_setup(self.setup, with_memory=True)

    def to_dict(self) -> dict:
        return {
            "setup_id": self.setup_id,
            "notation": self.notation,
            "phase": self.phase.value,
            "decision": self.decision.value if self.decision else None,
            "note": self.note,
            "snapshot": self.snapshot.to_dict() if self.snapshot else None,
        }


@dataclass
class OptimizerState:
    phase: Phase = Phase.PATH
    tried: dict[str, MetricsSnapshot] = field(default_factory=dict)
    best_id: str = ""
    working_id: str = ""
    pending_sweep: list[dict[str, int]] = field(default_factory=list)
    blocked: set[str] = field(default_factory=set)
    trials: dict[str, list[GroupTrial]] = field(default_factory=dict)
    path_id: str = ""


class Optimizer:
    """Fusion optimizer; call ``observe`` after each window of the current setup."""

    def __init__(self, app: AppSpec, initial: FusionSetup, cfg: PlatformConfig,
                 objective: Objective = Objective(), max_steps: int | None = None):
        require_valid(initial, app, cfg)
        self.app = app
        self.cfg = cfg
        self.objective = objective
        self.state = OptimizerState()
        self.steps: list[CampaignStep] = [CampaignStep("S-0", initial, Phase.PATH, note="initial")]
        self.setups: dict[str, FusionSetup] = {"S-0": initial}
        # generous bound: fusion moves are per (task, entry) and evictions per (task, group)
        n = len(app.tasks)
        self.max_steps = max_steps or (4 * n * n + len(cfg.all_sizes) + 8)

    @property
    def phase(self) -> Phase:
        return self.state.phase

    @property
    def current(self) -> CampaignStep:
        return self.steps[-1]

    @property
    def best(self) -> FusionSetup:
        return self.setups[self.state.best_id or "S-0"]

    @property
    def path_setup(self) -> FusionSetup | None:
        return self.setups.get(self.state.path_id) if self.state.path_id else None

    @property
    def baseline(self) -> MetricsSnapshot | None:
        return self.state.tried.get("S-0")

    def _push(self, setup: FusionSetup, phase: Phase, note: str) -> FusionSetup:
        sid = f"S-{len(self.steps)}"
        self.steps.append(CampaignStep(sid, setup, phase, note=note))
        self.setups[sid] = setup
        return setup

    def observe(self, snap: MetricsSnapshot, graph: AnnotatedCallGraph) -> FusionSetup | None:
        """Record the measured window and return the next setup to deploy."""
        st = self.state
        step = self.current
        if step.snapshot is not None:
            raise RuntimeError(f"{step.setup_id} was already observed")
        step.snapshot = snap
        st.tried[step.setup_id] = snap
        if len(self.steps) > self.max_steps:
            raise RuntimeError("optimizer failed to converge within its step bound")

        if st.phase is Phase.PATH:
            if not st.best_id:
                step.decision = Decision.BASE
                st.best_id = st.working_id = step.setup_id
            else:
                verdict = self.objective.judge(snap, st.tried[st.best_id], self.baseline)
                if verdict is Verdict.BETTER:
                    step.decision = Decision.ACCEPT
                    st.best_id = st.working_id = step.setup_id
                elif verdict is Verdict.NEUTRAL:
                    step.decision = Decision.KEEP
                    st.working_id = step.setup_id
                else:
                    step.decision = Decision.REVERT
                    st.blocked.add(format_setup(step.setup))
            working = self.setups[st.working_id]
            for label, cand in path_candidates(graph, working,
                                               default_memory_mb=self.cfg.default_memory_mb):
                note = format_setup(cand)
                if note not in st.blocked and note not in self._seen_notations():
                    return self._push(cand, Phase.PATH, label)
            return self._start_infra()

        if st.phase is Phase.INFRA:
            if st.pending_sweep:
                step.decision = Decision.TRIAL
                self._collect(snap)
                st.pending_sweep.pop(0)
                if st.pending_sweep:
                    return self._push_trial()
                chosen = infra_select(st.trials, self.setups[st.path_id], self.objective)
                return self._push(chosen, Phase.INFRA, "selected sizes")
            # the selected setup's own window
            ref = st.tried[st.path_id]
            verdict = self.objective.judge(snap, ref, self.baseline)
            if verdict is Verdict.WORSE:
                step.decision = Decision.REVERT
                final_id = st.path_id
            else:
                step.decision = Decision.FINAL
                final_id = step.setup_id
            best_snap = st.tried[st.best_id]
            if self.objective.judge(st.tried[final_id], best_snap, self.baseline) is not Verdict.WORSE:
                st.best_id = final_id
            st.working_id = final_id
            st.phase = Phase.STABLE
            return None
        return None

    def _seen_notations(self) -> set[str]:
        return {format_setup(s.setup) for s in self.steps}

    def _start_infra(self) -> FusionSetup | None:
        st = self.state
        st.path_id = st.working_id
        st.phase = Phase.INFRA
        path = self.setups[st.path_id]
        st.trials = {gid: [t] for gid, t in group_trials(st.tried[st.path_id]).items()}
        st.pending_sweep = infra_sweep_plan(path, self.cfg)
        if not st.pending_sweep:
            st.phase = Phase.STABLE
            return None
        return self._push_trial()

    def _push_trial(self) -> FusionSetup:
        st = self.state
        path = self.setups[st.path_id]
        window = st.pending_sweep[0]
        return self._push(path.with_memory(window), Phase.INFRA,
                          "sweep " + ",".join(f"{g}@{m}" for g, m in sorted(window.items())))

    def _collect(self, snap: MetricsSnapshot) -> None:
        for gid, trial in group_trials(snap).items():
            self.state.trials.setdefault(gid, []).append(trial)

    def log(self) -> list[dict]:
        return [s.to_dict() for s in self.steps]
