import pytest

from fusesim.model import AppSpec, CallEdge, CallMode, PlatformConfig, TaskSpec

ZERO = dict(handler_warm_overhead_ms=0.0, handler_cold_overhead_ms=0.0, platform_cold_init_ms=0.0,
            remote_sync_overhead_ms=0.0, remote_async_dispatch_ms=0.0)


def quiet_cfg(**kw) -> PlatformConfig:
    """Platform with every fixed overhead switched off unless given."""
    return PlatformConfig(**{**ZERO, **kw})


def chain_app(n: int, cpu: float = 10.0, mode: CallMode = CallMode.SYNC) -> AppSpec:
    """T0 -> T1 -> ... -> T{n-1}, all calls in ``mode``."""
    names = [f"T{i}" for i in range(n)]
    tasks = [TaskSpec(t, cpu, 1, (), (CallEdge(names[i + 1], mode),) if i + 1 < n else ())
             for i, t in enumerate(names)]
    return AppSpec(tasks, ("T0",), name=f"chain{n}")


def pair_app(a_cpu: float, b_cpu: float, mode: CallMode = CallMode.SYNC) -> AppSpec:
    return AppSpec([TaskSpec("A", a_cpu, 1, (), (CallEdge("B", mode),)), TaskSpec("B", b_cpu)],
                   ("A",), name="pair")


@pytest.fixture
def cfg() -> PlatformConfig:
    return PlatformConfig()
