import json
from pathlib import Path

import pytest

from fusesim.cli import main
from fusesim.config import (
    app_from_dict, app_to_dict, experiment_from_dict, load_experiment, platform_from_dict,
    platform_to_dict, setup_from_dict, setup_to_dict,
)
from fusesim.experiments import MissingPriorError, run_experiment
from fusesim.model import ConfigError, PlatformConfig, format_setup
from fusesim.workloads import make_iot_app, make_web_app

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_app_round_trip():
    for app in (make_iot_app(), make_web_app()):
        again = app_from_dict(app_to_dict(app))
        assert again == app


def test_app_errors():
    with pytest.raises(ConfigError):
        app_from_dict({"tasks": []})
    with pytest.raises(ConfigError):
        app_from_dict({"roots": ["A"], "tasks": [{"id": "A", "colour": 1}]})
    with pytest.raises(ConfigError):
        app_from_dict({"roots": ["A"], "tasks": [{"id": "A", "calls": [{"mode": "SYNC"}]}]})
    with pytest.raises(ConfigError):
        app_from_dict([1, 2])


def test_setup_round_trip():
    s = setup_from_dict("(A,B)@128-(B,C)@1024")
    again = setup_from_dict(json.loads(json.dumps(setup_to_dict(s))))
    assert again == s and again.home["B"] == "g0"


def test_platform_round_trip_and_errors():
    cfg = PlatformConfig(remote_sync_overhead_ms=20)
    assert platform_from_dict(platform_to_dict(cfg)) == cfg
    with pytest.raises(ConfigError):
        platform_from_dict({"warp_speed": 9})
    with pytest.raises(ConfigError):
        platform_from_dict({"memory_sizes_mb": [2048, 1024]})


def test_experiment_validation():
    with pytest.raises(ConfigError):
        experiment_from_dict({"protocol": "BURST"})
    with pytest.raises(ConfigError):
        experiment_from_dict({"cadence": "hourly"})
    with pytest.raises(ConfigError):
        experiment_from_dict({"objective": {"alpha": 3}})


def test_shipped_configs_load():
    for path in sorted(CONFIGS.glob("*-*.yaml")):
        if path.name == "custom-app.yaml":
            continue
        exp = load_experiment(path)
        exp.resolve_app()


def write_yaml(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_run_opt_then_cold(tmp_path, capsys):
    cfg = write_yaml(tmp_path, "e.yaml", "app: tree\nprotocol: OPT\nwindow_requests: 100\n"
                                         "output_dir: out\n")
    assert main(["run", str(cfg)]) == 0
    camp = json.loads((tmp_path / "out" / "campaign.json").read_text())
    assert camp["path_notation"].startswith("(A,B,D,E)@128")
    cold = write_yaml(tmp_path, "c.yaml", "app: tree\nprotocol: COLD\noutput_dir: out\n")
    assert main(["run", str(cold)]) == 0
    summary = (tmp_path / "out" / "cold_summary.csv").read_text().splitlines()
    assert [line.split(",")[0] for line in summary[1:]] == ["S-remote", "S-local", "S-path", "S-opt"]


def test_missing_prior(tmp_path, capsys):
    cold = write_yaml(tmp_path, "c.yaml", "app: iot\nprotocol: SCALE\noutput_dir: empty\n")
    assert main(["run", str(cold)]) == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "missing_prior" and "OPT" in err["message"]
    with pytest.raises(MissingPriorError):
        run_experiment(load_experiment(cold))


def test_config_error_exit_code(tmp_path, capsys):
    bad = write_yaml(tmp_path, "bad.yaml", "app: tree\nprotocol: NOPE\n")
    assert main(["run", str(bad)]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "config"
    assert main(["run", str(tmp_path / "absent.yaml")]) == 2


def test_compare_prints_summary(capsys):
    assert main(["compare", "--app", "tree", "--setup", "(A,B,D,E)-(C)-(F)-(G)",
                 "--setup", "(A,B,C,D,E,F,G)", "--protocol", "cold"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "setup_id,rr_med,rr_p95,mean_cost_pmi,cold_rate" and len(lines) == 3


def test_oracle_cli(tmp_path, capsys):
    app = write_yaml(tmp_path, "app.yaml", (CONFIGS / "custom-app.yaml").read_text())
    assert main(["oracle", "--app", str(app), "--sizes", "128,1024", "--requests", "5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert format_setup(setup_from_dict(out["notation"])).startswith("(")
    assert main(["oracle", "--app", "web", "--sizes", "128"]) == 4


def test_validate_cli(capsys):
    assert main(["validate", "--app", "tree", "--setup", "(A,B,D,E)-(C)-(F)-(G)"]) == 0
    assert main(["validate", "--app", "tree", "--setup", "(A,B)-(C)"]) == 2
    assert main(["validate", "--experiment", str(CONFIGS / "custom-opt.yaml")]) == 0
    assert main(["validate"]) == 2


def test_custom_experiment_runs(tmp_path):
    exp = load_experiment(CONFIGS / "custom-opt.yaml")
    exp.output_dir = tmp_path
    exp.window_requests = 100
    written = run_experiment(exp)
    assert set(written) == {"campaign.json", "opt_requests.csv", "opt_summary.csv"}
