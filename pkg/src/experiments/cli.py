from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from src.errors import ConfigError, LabError
from src.experiments.config import EXPERIMENTS, KERNELS_SELFTEST, ExperimentConfig, config_from_table
from src.utils.config import load_toml
from src.utils.logging import setup_logger


EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_FAIL = 2

USAGE = f"usage: run_experiment.py {{{','.join(EXPERIMENTS)}}} [--config PATH] [--seed U64] [--out DIR] [--threads N] [--replicas M]"


def build_parser(experiment: str) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog=f"run_experiment.py {experiment}", description=f"Run the {experiment} experiment")
    ap.add_argument("--config", help="TOML experiment file (optional for kernels-selftest)")
    ap.add_argument("--seed", type=int, help="Base seed (unsigned 64-bit), overrides the config")
    ap.add_argument("--out", help="Output directory, overrides [output] dir")
    ap.add_argument("--threads", type=int, help="Worker processes for replica parallelism")
    ap.add_argument("--replicas", type=int, help="Replica count M, overrides the config")
    ap.add_argument("--backend", choices=["native", "numpy"], help="Eigensolver backend")
    ap.add_argument("--log-level", default="INFO", help="Logger level (DEBUG, INFO, WARNING)")
    ap.add_argument("--status-json", help="Optional status.json path to write progress")
    return ap


def _status_writer(path: Optional[str]):
    if not path:
        return None

    def write_status(stage: str, pct: float, extra: Dict) -> None:
        try:
            data = {
                "stage": stage,
                "percent": float(pct),
                "extra": extra or {},
                "done": stage == "done",
                "timestamp": time.time(),
            }
            p = Path(path)
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(json.dumps(data, default=str), encoding="utf-8")
        except Exception:
            pass

    return write_status


def resolve_config(experiment: str, args: argparse.Namespace) -> ExperimentConfig:
    overrides = {"seed": args.seed, "replicas": args.replicas, "threads": args.threads, "backend": args.backend, "out": args.out}
    if args.config is None:
        if experiment != KERNELS_SELFTEST:
            raise ConfigError(f"{experiment} needs --config")
        return config_from_table({"experiment": experiment}, **overrides)
    table, src = load_toml(args.config)
    declared = table.get("experiment", experiment)
    if declared != experiment:
        raise src.error("experiment", f"config is for {declared!r}, not {experiment!r}")
    return config_from_table({**table, "experiment": experiment}, src, **overrides)


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Exit 0 when every criterion passes, 2 on an acceptance failure and 1 on any error."""
    args_in: List[str] = list(sys.argv[1:] if argv is None else argv)
    if not args_in or args_in[0] in ("-h", "--help"):
        print(USAGE, file=sys.stderr)
        return EXIT_ERROR if not args_in else EXIT_PASS
    experiment = args_in[0]
    if experiment not in EXPERIMENTS:
        print(f"unknown subcommand {experiment!r}\n{USAGE}", file=sys.stderr)
        return EXIT_ERROR
    try:
        args = build_parser(experiment).parse_args(args_in[1:])
    except SystemExit as e:
        return EXIT_PASS if e.code == 0 else EXIT_ERROR

    logger = setup_logger(args.log_level)
    try:
        cfg = resolve_config(experiment, args)
    except ConfigError as e:
        logger.error(f"[config] {e}")
        return EXIT_ERROR

    # imported here so that --help and config errors stay fast
    from src.pipeline import run_experiment

    try:
        summary = run_experiment(cfg, progress_cb=_status_writer(args.status_json))
    except (LabError, ValueError) as e:
        logger.error(f"[{experiment}] {type(e).__name__}: {e}")
        return EXIT_ERROR
    return EXIT_PASS if summary["passed"] else EXIT_FAIL
