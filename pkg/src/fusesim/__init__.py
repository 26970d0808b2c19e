"""Discrete-event FaaS simulator with a feedback-driven function-fusion optimizer."""

from .model import (
    EXTERNAL, AppSpec, CallEdge, CallMode, ConfigError, FusionGroup, FusionSetup, IOCall,
    PlatformConfig, TaskSpec, format_setup, parse_setup_notation, single_group_setup,
    singleton_setup, validate_setup,
)
from .runtime import Simulation, handle_external_request
from .telemetry import MetricsSnapshot, build_call_graph, snapshot
from .workloads import builtin_app, make_schedule

__version__ = "0.1.0"

__all__ = [
    "EXTERNAL", "AppSpec", "CallEdge", "CallMode", "ConfigError", "FusionGroup", "FusionSetup",
    "IOCall", "MetricsSnapshot", "PlatformConfig", "Simulation", "TaskSpec", "build_call_graph",
    "builtin_app", "format_setup", "handle_external_request", "make_schedule",
    "parse_setup_notation", "single_group_setup", "singleton_setup", "snapshot", "validate_setup",
]
