"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import filecmp
import time

import pytest
from hypothesis import given, settings, strategies as st

from fusesim.config import ExperimentConfig
from fusesim.experiments import compare_setups, comparison_setups, measure, run_campaign, run_experiment
from fusesim.model import (
    AppSpec, CallEdge, PlatformConfig, TaskSpec, format_setup, parse_setup_notation,
    single_group_setup, singleton_setup,
)
from fusesim.optimizer import CadenceMode, Csp1Scheduler, brute_force_optimal
from fusesim.optimizer.oracle import gap
from fusesim.runtime import handle_external_request
from fusesim.workloads import builtin_app, make_random_app, make_schedule

from conftest import chain_app

_campaigns: dict = {}


def campaign(name):
    if name not in _campaigns:
        t0 = time.perf_counter()
        camp = run_campaign(builtin_app(name), PlatformConfig(), seed=0)
        _campaigns[name] = (camp, time.perf_counter() - t0)
    return _campaigns[name]


@pytest.fixture
def report(capsys):
    def emit(n, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {n:>2}] {'PASS' if ok else 'FAIL'}  {title}  {detail}")
        assert ok, f"criterion {n}: {title} {detail}"
    return emit


def test_c01_tree_structure(report):
    camp, secs = campaign("tree")
    seq = camp.path_sequence()
    final = format_setup(camp.final_setup)
    expected = ["(A)-(B)-(C)-(D)-(E)-(F)-(G)", "(A,E)-(B)-(C)-(D)-(F)-(G)",
                "(A,D,E)-(B)-(C)-(F)-(G)", "(A,B,D,E)-(C)-(F)-(G)"]
    ok = seq == expected and final == "(A,B,D,E)-(C)-(F)-(G)" and secs < 10
    report(1, "TREE path sequence and final groups", ok,
           f"seq={' -> '.join(seq)} final={final} runtime={secs:.2f}s")


def test_c02_tree_infra_shape(report):
    camp, _ = campaign("tree")
    mem = {format_setup(parse_setup_notation("(" + ",".join(sorted(g.members)) + ")")): g.memory_mb
           for g in camp.final_setup.groups}
    smallest = PlatformConfig().all_sizes[0]
    ok = mem["(A,B,D,E)"] == smallest and mem["(F)"] > smallest and mem["(G)"] > smallest
    report(2, "TREE light group smallest, heavy async groups larger", ok,
           camp.final_setup.notation())


def test_c03_iot_io_bound_smallest(report):
    camp, _ = campaign("iot")
    at_min = sum(g.memory_mb == 128 for g in camp.final_setup.groups)
    report(3, "IOT groups at 128MB", at_min >= 4 and len(camp.final_setup.groups) == 5,
           f"{at_min}/5 {camp.final_setup.notation()}")


def test_c04_web_infra_degenerate(report):
    camp, _ = campaign("web")
    path = format_setup(camp.path_setup, with_memory=True)
    final = format_setup(camp.final_setup, with_memory=True)
    report(4, "WEB infra-optimized equals path-optimized", path == final, final)


@pytest.mark.parametrize("name", ["tree", "iot", "web"])
def test_c05_directional_improvement(report, name):
    camp, _ = campaign(name)
    base, final = camp.base_snapshot, camp.final_snapshot
    cost_cut = 1 - final.mean_cost_pmi / base.mean_cost_pmi
    rr_cut = 1 - final.rr_med / base.rr_med
    ok = cost_cut >= 0.15 and rr_cut >= 0.0
    report(5, f"{name.upper()} cost -15% and rr not worse", ok,
           f"cost {base.mean_cost_pmi:.3f}->{final.mean_cost_pmi:.3f} $pmi ({cost_cut:.1%}), "
           f"rr_med {base.rr_med:.1f}->{final.rr_med:.1f} ms ({rr_cut:.1%})")


@pytest.mark.parametrize("name", ["tree", "iot"])
def test_c06_cold_orderings(report, name):
    camp, _ = campaign(name)
    app, cfg = camp.app, PlatformConfig()
    setups = comparison_setups(app, cfg, {"S-path": camp.path_setup, "S-opt": camp.final_setup})
    res = {k: snap for k, (snap, _) in compare_setups(app, setups, cfg, "COLD", 0).items()}
    costs = {k: s.mean_cost_pmi for k, s in res.items()}
    ok = (res["S-local"].rr_med >= 4 * res["S-opt"].rr_med
          and max(costs, key=costs.get) == "S-remote")
    report(6, f"{name.upper()}-COLD local 4x slower than opt, remote costliest", ok,
           " ".join(f"{k}: rr {s.rr_med:.0f}ms ${s.mean_cost_pmi:.2f}" for k, s in res.items()))


def test_c07_cold_cascade(report):
    cfg = PlatformConfig()
    counts = []
    for n in range(1, 6):
        app = chain_app(n)
        split = handle_external_request("T0", 0, singleton_setup(app), app, cfg)
        fused = handle_external_request("T0", 0, single_group_setup(app), app, cfg)
        counts.append((n, sum(b.cold for b in split.billing), sum(b.cold for b in fused.billing)))
    ok = all(s == n and f == 1 for n, s, f in counts)
    report(7, "cold starts: n split, 1 fused", ok, str(counts))


_db_cases = []


@given(a=st.floats(0, 500), b=st.floats(1, 500), overhead=st.floats(0, 100),
       mem=st.sampled_from(PlatformConfig().all_sizes), fee=st.sampled_from([0.0, 2e-7]))
@settings(max_examples=1000, deadline=None, derandomize=True)
def _double_billing_case(a, b, overhead, mem, fee):
    app = AppSpec([TaskSpec("A", a, calls=[CallEdge("B")]), TaskSpec("B", b)], ("A",))
    cfg = PlatformConfig(remote_sync_overhead_ms=overhead, price_per_request=fee)
    split = handle_external_request("A", 0, singleton_setup(app, mem), app, cfg, warm=True)
    fused = handle_external_request("A", 0, single_group_setup(app, mem), app, cfg, warm=True)
    c_split = sum(x.cost_usd for x in split.billing)
    c_fused = sum(x.cost_usd for x in fused.billing)
    _db_cases.append(1)
    assert c_split >= c_fused
    if overhead > 0:
        assert c_split > c_fused


def test_c08_double_billing(report):
    _db_cases.clear()
    failure = None
    try:
        _double_billing_case()
    except AssertionError as exc:
        failure = exc
    report(8, "split sync pair never cheaper than fused", failure is None and len(_db_cases) >= 1000,
           f"{len(_db_cases)} cases" + (f" counterexample: {failure}" if failure else ""))


@pytest.mark.slow
def test_c09_oracle_proximity(report):
    cfg = PlatformConfig(memory_sizes_mb=(128, 1024, 2048))
    t0 = time.perf_counter()
    gaps = []
    for seed in range(50):
        app = make_random_app(seed)
        sched = make_schedule("OPT", app, seed, requests=20, interval_ms=1000)
        _, best = brute_force_optimal(app, lambda s: measure(app, s, cfg, sched)[0], cfg)
        camp = run_campaign(app, cfg, seed=seed, window_requests=20, interval_ms=1000)
        heur = measure(app, camp.final_setup, cfg, sched)[0]
        gaps.append((gap(heur, best), seed))
    secs = time.perf_counter() - t0
    worst, worst_seed = max(gaps)
    report(9, "heuristic within 1.10x of exhaustive optimum", worst <= 1.10 and secs < 300,
           f"{len(gaps)} apps, worst gap {worst:.4f} (seed {worst_seed}), {secs:.0f}s")


@pytest.mark.slow
def test_c10_determinism(report, tmp_path):
    def run_all(root):
        for name in ("tree", "iot", "web"):
            for proto in ("OPT", "COLD", "SCALE"):
                run_experiment(ExperimentConfig(app=name, protocol=proto, seed=4,
                                                output_dir=root / name))
    run_all(tmp_path / "a")
    run_all(tmp_path / "b")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.*"))
    csvs = [f for f in files if f.suffix == ".csv"]
    same = [filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False) for f in files]
    report(10, "identical seeds give byte-identical outputs", all(same) and len(csvs) == 18,
           f"{sum(same)}/{len(files)} files identical ({len(csvs)} CSVs)")


def test_c11_csp1(report):
    s = Csp1Scheduler()
    modes = []
    for _ in range(5):
        s.next_interval(0.0)
        modes.append(s.mode)
    engaged = modes[:4] == [CadenceMode.CONTINUOUS] * 4 and modes[4] is CadenceMode.SAMPLING
    s.next_interval(0.05)
    reset = s.mode is CadenceMode.CONTINUOUS and s.calm_runs == 0
    fixed = Csp1Scheduler.fixed()
    intervals = {fixed.next_interval(d) for d in (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 3.0)}
    report(11, "CSP-1 sampling engages, resets, fixed override", engaged and reset and intervals == {1000},
           f"modes={[m.value for m in modes]} reset={reset} fixed={sorted(intervals)}")


def test_c12_overhead_accounting(report):
    cfg = PlatformConfig()
    app = AppSpec([TaskSpec("A", 123.4)], ("A",))
    setup = singleton_setup(app, 1650)
    compute = 123.4  # one vCPU at the reference size
    warm = handle_external_request("A", 0, setup, app, cfg, warm=True).rr_ms - compute
    cold = handle_external_request("A", 0, setup, app, cfg).rr_ms - compute
    ok = round(warm, 3) == 1.3 and round(cold, 3) == round(36.6 + 250.0, 3)
    report(12, "warm +1.3ms, cold +36.6ms+init", ok, f"warm +{warm:.3f}ms cold +{cold:.3f}ms")
