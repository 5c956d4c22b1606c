"""Command line entry point: ``pmfrontier run|validate|report``."""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import Experiment, RunConfig, parse_config, schema_help, serialize
from .errors import ConfigError

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_ERROR = 0, 1, 2, 3

EXPERIMENT_HELP = {
    Experiment.SIMULATE: "solve from the initial data; mass, support and front series",
    Experiment.BARRIERS: "integrate the barrier system; trajectory and closed-form bands",
    Experiment.SANDWICH_SUB: "solver run from the sub barrier; Q <= P <= P_M",
    Experiment.SANDWICH_SUP: "solver run from the sup barrier; P below it, support radius bounds",
    Experiment.DECAY: "power-law fit of max_{B_R}(P_M - P) over a long run",
    Experiment.PME_CONVERGE: "porous-medium run against the Barenblatt profile over h, h/2, h/4",
    Experiment.FRONTIER_DIAG: "semi-harmonicity, Darcy, Lipschitz, nondegeneracy and cone checks",
}


def _epilog() -> str:
    exps = "\n".join(f"  {e.value:<14} {EXPERIMENT_HELP[e]}" for e in Experiment)
    return f"experiments:\n{exps}\n\nconfig keys:\n{schema_help()}\n\nenvironment:\n  PMFRONTIER_OUT overrides [run] output_dir"


def _load(path: str) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    cfg = parse_config(text)
    env = os.environ.get("PMFRONTIER_OUT")
    return cfg.with_output_dir(env) if env else cfg


def _print_config_error(exc: ConfigError) -> None:
    for key, line, reason in exc.problems:
        where = f"line {line}" if line is not None else "config"
        print(f"error: {where}: {key}: {reason}", file=sys.stderr)


def _job(cfg: RunConfig, exp: Experiment):
    from .dispatch import Dispatcher

    o = Dispatcher(cfg).execute(exp, Path(cfg.run.output_dir))
    return o.experiment, o.checks, o.error


def cmd_run(args) -> int:
    try:
        cfg = _load(args.config)
    except ConfigError as exc:
        _print_config_error(exc)
        return EXIT_CONFIG
    root = Path(cfg.run.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.txt").write_text(serialize(cfg), encoding="utf-8", newline="")
    if args.jobs > 1 and len(cfg.run.experiments) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_job, [cfg] * len(cfg.run.experiments), cfg.run.experiments))
    else:
        from .dispatch import dispatch

        results = [(o.experiment, o.checks, o.error) for o in dispatch(cfg, root)]
    status = EXIT_OK
    for exp, checks, error in results:
        if error is not None:
            print(f"ERROR {exp.value}: {error}")
            status = EXIT_ERROR
            continue
        for name, ok, detail in checks:
            print(f"{'PASS' if ok else 'FAIL'} {exp.value}.{name}: {detail}")
            if not ok and status == EXIT_OK:
                status = EXIT_CHECKS
    return status


def cmd_validate(args) -> int:
    try:
        cfg = _load(args.config)
    except ConfigError as exc:
        _print_config_error(exc)
        return EXIT_CONFIG
    print(f"ok: {', '.join(e.value for e in cfg.run.experiments)}")
    if args.canonical:
        print(serialize(cfg), end="")
    return EXIT_OK


def cmd_report(args) -> int:
    root = Path(args.dir)
    summaries = sorted(root.glob("*/summary.txt"))
    if not summaries:
        print(f"no experiment summaries under {root}", file=sys.stderr)
        return EXIT_ERROR
    status = EXIT_OK
    for path in summaries:
        text = path.read_text(encoding="utf-8")
        print(text, end="" if text.endswith("\n") else "\n")
        if (path.parent / "failure.txt").exists():
            status = EXIT_ERROR
        elif any(line.startswith("FAIL ") for line in text.splitlines()) and status == EXIT_OK:
            status = EXIT_CHECKS
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pmfrontier", description="Barrier, solver and free-boundary experiments.",
                                epilog=_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiments named in a config", epilog=_epilog(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    r.add_argument("config")
    r.add_argument("--jobs", type=int, default=1, help="run independent experiments in parallel processes")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="parse a config and check every gate without computing")
    v.add_argument("config")
    v.add_argument("--canonical", action="store_true", help="print the canonical serialized config")
    v.set_defaults(func=cmd_validate)
    s = sub.add_parser("report", help="print the summaries under an output directory")
    s.add_argument("dir")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
