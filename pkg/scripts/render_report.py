#!/usr/bin/env python
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

# Add project root to sys.path for "src" package
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.utils.fs import read_json  # noqa: E402
from src.viz.report import render_report  # noqa: E402


def main() -> None:
    ap = argparse.ArgumentParser(description="Re-render report.html from an existing run directory")
    ap.add_argument("--out", required=True, help="Run directory where summary.json lives")
    args = ap.parse_args()

    out_root = Path(args.out)
    summary = read_json(out_root / "summary.json")
    if not summary:
        raise SystemExit("summary.json not found. Run scripts/run_experiment.py first.")
    tables = sorted(p.name for p in out_root.glob("*.csv"))
    render_report(out_root, summary, tables)
    print(f"Report written to {out_root / 'report.html'}")


if __name__ == "__main__":
    main()
