"""Run every shipped config and print one line per experiment.

    python3 scripts/reproduce_all.py [--out DIR] [--jobs N] [names ...]

Artifacts land in ``DIR/<config name>/<experiment>/``.  The exit status is
the worst CLI status over all configs.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

from pmfrontier import io
from pmfrontier.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent
ORDER = ("barriers", "pme", "standard", "sandwich_sup", "decay")


def parse_args(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", default=list(ORDER), help="config names without .cfg")
    ap.add_argument("--out", default=str(ROOT / "out"), help="root directory for all artifacts")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes per config")
    return ap.parse_args(argv)


def run_one(name: str, out: Path, jobs: int) -> int:
    os.environ["PMFRONTIER_OUT"] = str(out / name)
    start = time.perf_counter()
    status = cli_main(["run", "--jobs", str(jobs), str(ROOT / "configs" / f"{name}.cfg")])
    print(f"== {name}: status {status} in {time.perf_counter() - start:.1f} s")
    for summary in sorted((out / name).glob("*/summary.txt")):
        print("   " + "\n   ".join(summary.read_text(encoding="utf-8").splitlines()))
    return status


def collect(out: Path) -> list[tuple[str, str]]:
    rows = []
    for rep in sorted(out.glob("*/*/report.txt")):
        rows.append((f"{rep.parent.parent.name}/{rep.parent.name}", io.read_report(rep).get("status", "?")))
    for fail in sorted(out.glob("*/*/failure.txt")):
        rows.append((f"{fail.parent.parent.name}/{fail.parent.name}", "error"))
    return rows


def main(argv=None) -> int:
    args = parse_args(argv)
    out = Path(args.out)
    worst = 0
    for name in args.names:
        worst = max(worst, run_one(name, out, args.jobs))
    print("\nexperiment status")
    for where, status in collect(out):
        print(f"  {where:<32} {status}")
    return worst


if __name__ == "__main__":
    sys.exit(main())
