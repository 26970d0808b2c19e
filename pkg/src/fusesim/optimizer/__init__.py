from .csp1 import CadenceMode, Csp1Scheduler
from .heuristic import (
    CampaignStep, Decision, Objective, ObjectiveMode, Optimizer, OptimizerState, Phase, Verdict,
    accept_or_revert, infra_select, infra_sweep_plan, path_candidates, path_fixpoint_violations,
    path_step, sync_closure,
)
from .oracle import OracleLimitError, brute_force_optimal, enumerate_setups, set_partitions

__all__ = [
    "CadenceMode", "CampaignStep", "Csp1Scheduler", "Decision", "Objective", "ObjectiveMode",
    "Optimizer", "OptimizerState", "OracleLimitError", "Phase", "Verdict", "accept_or_revert",
    "brute_force_optimal", "enumerate_setups", "infra_select", "infra_sweep_plan",
    "path_candidates", "path_fixpoint_violations", "path_step", "set_partitions", "sync_closure",
]
