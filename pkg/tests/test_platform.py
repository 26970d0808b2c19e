import math

import pytest
from hypothesis import given, strategies as st

from fusesim.model import FusionGroup, IOCall, PlatformConfig, TaskSpec
from fusesim.platform import (
    Deployment, EventQueue, Platform, bill, billed_duration, task_compute_duration,
    vcpus_for_memory,
)


def test_vcpus():
    cfg = PlatformConfig()
    assert vcpus_for_memory(1650, cfg) == 1.0
    assert vcpus_for_memory(128, cfg) == pytest.approx(0.0776, abs=5e-5)
    assert vcpus_for_memory(128, cfg) == pytest.approx(0.08, rel=0.10)
    assert vcpus_for_memory(3300, cfg) == 2.0
    with pytest.raises(ValueError):
        vcpus_for_memory(0, cfg)


def test_compute_duration():
    cfg = PlatformConfig()
    assert task_compute_duration(TaskSpec("t", 100, 1), 1650, cfg) == 100
    assert task_compute_duration(TaskSpec("t", 100, 2), 3300, cfg) == 50
    io = TaskSpec("t", 0, 1, (IOCall("db", 20, 2),))
    for m in cfg.all_sizes:
        assert task_compute_duration(io, m, cfg) == 40


@given(st.floats(1, 1000), st.integers(1, 4), st.sampled_from(PlatformConfig().all_sizes),
       st.sampled_from(PlatformConfig().all_sizes))
def test_compute_monotone_in_memory(work, par, m1, m2):
    cfg = PlatformConfig()
    lo, hi = sorted((m1, m2))
    t = TaskSpec("t", work, par)
    assert task_compute_duration(t, hi, cfg) <= task_compute_duration(t, lo, cfg)
    if lo < hi and vcpus_for_memory(lo, cfg) < par:
        assert task_compute_duration(t, hi, cfg) < task_compute_duration(t, lo, cfg)


def test_billing_examples():
    cfg = PlatformConfig(price_per_request=0.0)
    assert bill(1000, False, 1024, cfg).cost_usd == pytest.approx(1.6667e-5)
    full = PlatformConfig()
    assert bill(0, False, 512, full).cost_usd == full.price_per_request
    assert billed_duration(1001, 1.0) == 1001
    assert billed_duration(1000.2, 1.0) == 1001
    assert billed_duration(258.0 + 1.3 - 0.3, 1.0) == 259  # float noise does not round up


@given(st.floats(0, 1e5), st.sampled_from(PlatformConfig().all_sizes))
def test_billing_oracle(wall, mem):
    cfg = PlatformConfig()
    line = bill(wall, False, mem, cfg)
    billed = math.ceil(wall - 1e-9) if wall > 0 else 0
    expect = billed / 1000 * mem / 1024 * cfg.price_per_gb_s + cfg.price_per_request
    assert line.billed_duration_ms == billed
    assert line.cost_usd == pytest.approx(expect, rel=1e-12)


def test_cold_init_billing_flag():
    off = bill(100, True, 1024, PlatformConfig())
    on = bill(100, True, 1024, PlatformConfig(bill_cold_init=True))
    assert off.billed_duration_ms == 100 and on.billed_duration_ms == 350


def test_event_queue_orders_by_time_then_insertion():
    q = EventQueue()
    seen = []
    q.schedule(5, seen.append, "b")
    q.schedule(1, seen.append, "a")
    q.schedule(5, seen.append, "c")
    q.run()
    assert seen == ["a", "b", "c"] and q.now == 5
    with pytest.raises(ValueError):
        q.schedule(1, seen.append, "late")


def test_processes_wait_on_each_other():
    q = EventQueue()
    out = []

    def child():
        yield 10
        return "done"

    def parent():
        proc = q.spawn(child())
        v = yield proc.done
        out.append((q.now, v))

    q.spawn(parent())
    q.run()
    assert out == [(10, "done")]


def test_deployment_lifecycle():
    cfg = PlatformConfig()
    dep = Deployment(FusionGroup("g", {"A"}), "A@128", cfg)
    inst, cold, ready = dep.acquire(0)
    assert cold and ready == 250
    inst2, cold2, _ = dep.acquire(1)  # first still busy
    assert cold2 and inst2 is not inst
    dep.release(inst, 300)
    again, cold3, ready3 = dep.acquire(400)
    assert again is inst and not cold3 and ready3 == 400
    dep.release(again, 500)
    dep.flush()
    assert dep.acquire(600)[1]
    dep.flush()
    dep.flush()  # no-op on empty pools


def test_idle_timeout_reaps():
    cfg = PlatformConfig(instance_idle_timeout_s=1)
    dep = Deployment(FusionGroup("g", {"A"}), "A@128", cfg)
    inst, _, _ = dep.acquire(0)
    dep.release(inst, 10)
    assert dep.acquire(2000)[1]


def test_flush_while_busy_discards_on_release():
    dep = Deployment(FusionGroup("g", {"A"}), "A@128", PlatformConfig())
    inst, _, _ = dep.acquire(0)
    dep.flush()
    dep.release(inst, 5)
    assert dep.idle == []


def test_platform_keys_deployments_by_members_and_memory():
    p = Platform(PlatformConfig())
    a = p.deployment_for(FusionGroup("g0", {"A", "B"}, 128))
    assert p.deployment_for(FusionGroup("g7", {"B", "A"}, 128)) is a
    assert p.deployment_for(FusionGroup("g0", {"A", "B"}, 1024)) is not a
