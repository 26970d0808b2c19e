"""Command line entry point: ``fusesim run|compare|oracle|validate``.

Exit codes: 0 success, 2 configuration error, 3 missing prior OPT campaign,
4 oracle size limit.  Errors are printed to stderr as one JSON object with an
``error`` category and a ``message``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import (
    load_document, load_experiment, objective_from_dict, platform_from_dict, resolve_app,
    setup_from_dict, setup_to_dict,
)
from .experiments import MissingPriorError, compare_setups, measure, run_experiment
from .model import ConfigError, PlatformConfig, format_setup, validate_setup
from .optimizer import OracleLimitError, brute_force_optimal
from .telemetry import summary_csv
from .workloads import PROTOCOLS, make_schedule

EXIT_OK, EXIT_CONFIG, EXIT_PRIOR, EXIT_ORACLE = 0, 2, 3, 4


def _platform(args) -> PlatformConfig:
    cfg = platform_from_dict(args.platform) if args.platform else PlatformConfig()
    if getattr(args, "sizes", None):
        try:
            sizes = sorted({int(x) for x in args.sizes.split(",") if x.strip()})
        except ValueError:
            raise ConfigError(f"--sizes must be comma-separated integers, got {args.sizes!r}") from None
        if not sizes:
            raise ConfigError("--sizes is empty")
        cfg = replace(cfg, memory_sizes_mb=tuple(sizes), default_memory_mb=sizes[0])
    return cfg


def _overrides(pairs: list[str] | None) -> dict:
    out = {}
    for p in pairs or []:
        key, sep, val = p.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {p!r}")
        try:
            out[key] = float(val) if "." in val else int(val)
        except ValueError:
            raise ConfigError(f"--set {key}: {val!r} is not a number") from None
    return out


def cmd_run(args) -> int:
    exp = load_experiment(args.config)
    if args.seed is not None:
        exp.seed = args.seed
    if args.output_dir is not None:
        exp.output_dir = Path(args.output_dir)
    written = run_experiment(exp)
    print(json.dumps({"status": "ok", "protocol": exp.protocol,
                      "outputs": {k: str(v) for k, v in written.items()}}))
    return EXIT_OK


def cmd_compare(args) -> int:
    app = resolve_app(args.app, _overrides(args.set))
    cfg = _platform(args)
    setups = {}
    for i, text in enumerate(args.setup):
        setups[f"S{i}:{text}"] = setup_from_dict(text, app)
    results = compare_setups(app, setups, cfg, args.protocol, args.seed)
    sys.stdout.write(summary_csv(snap for snap, _ in results.values()))
    return EXIT_OK


def cmd_oracle(args) -> int:
    app = resolve_app(args.app, _overrides(args.set))
    cfg = _platform(args)
    objective = objective_from_dict(args.objective)
    schedule = make_schedule("OPT", app, args.seed, requests=args.requests,
                             interval_ms=args.interval_ms)
    best, snap = brute_force_optimal(app, lambda s: measure(app, s, cfg, schedule)[0], cfg, objective)
    print(json.dumps({"notation": format_setup(best, with_memory=True),
                      "setup": setup_to_dict(best), "snapshot": snap.to_dict()}, indent=2))
    return EXIT_OK


def cmd_validate(args) -> int:
    checked = []
    if args.experiment:
        exp = load_experiment(args.experiment)
        exp.resolve_app()
        checked.append("experiment")
    cfg = PlatformConfig()
    if args.platform:
        cfg = platform_from_dict(args.platform)
        checked.append("platform")
    app = None
    if args.app:
        app = resolve_app(args.app)
        checked.append("app")
    for text in args.setup or []:
        if app is None:
            raise ConfigError("--setup needs --app to validate against")
        doc = load_document(text) if Path(text).is_file() else text
        problems = validate_setup(setup_from_dict(doc, app), app, cfg)
        if problems:
            raise ConfigError("invalid fusion setup: " + ", ".join(map(str, problems)))
        checked.append("setup")
    if not checked:
        raise ConfigError("nothing to validate; pass --experiment, --app, --platform or --setup")
    print(json.dumps({"status": "ok", "checked": checked}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fusesim", description="FaaS function-fusion simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config (YAML or JSON)")
    run.add_argument("config", help="experiment config path")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--output-dir", help="override the config output directory")
    run.set_defaults(func=cmd_run)

    def app_args(sp):
        sp.add_argument("--app", required=True, help="builtin app (tree, iot, web) or app config path")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="builtin app parameter, e.g. heavy_ms=300 (repeatable)")
        sp.add_argument("--platform", help="platform config path")
        sp.add_argument("--seed", type=int, default=0)

    cmp_ = sub.add_parser("compare", help="measure setups under one protocol; prints summary CSV")
    app_args(cmp_)
    cmp_.add_argument("--setup", action="append", required=True,
                      help="setup notation such as '(A,B)@128-(C)@1024' (repeatable)")
    cmp_.add_argument("--protocol", default="OPT", type=str.upper, choices=PROTOCOLS)
    cmp_.set_defaults(func=cmd_compare)

    orc = sub.add_parser("oracle", help="exhaustive optimum for a small app")
    app_args(orc)
    orc.add_argument("--sizes", help="comma-separated memory sizes (at most 3), e.g. 128,1024,2048")
    orc.add_argument("--objective", type=str.upper, default="MIN_COST_TIEBREAK_RR",
                     choices=("MIN_COST_TIEBREAK_RR", "WEIGHTED"))
    orc.add_argument("--requests", type=int, default=50)
    orc.add_argument("--interval-ms", type=float, default=1000.0)
    orc.set_defaults(func=cmd_oracle)

    val = sub.add_parser("validate", help="check config files without running anything")
    val.add_argument("--experiment", help="experiment config path")
    val.add_argument("--app", help="builtin app name or app config path")
    val.add_argument("--platform", help="platform config path")
    val.add_argument("--setup", action="append", help="setup notation or setup config path")
    val.set_defaults(func=cmd_validate)
    return p


def _fail(category: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": category, "message": message}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissingPriorError as exc:
        return _fail("missing_prior", str(exc), EXIT_PRIOR)
    except OracleLimitError as exc:
        return _fail("oracle_limit", str(exc), EXIT_ORACLE)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
