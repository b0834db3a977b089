from __future__ import annotations

from pathlib import Path
from typing import Any, Callable, Dict, Optional

from src.experiments import config as C
from src.experiments.config import ExperimentConfig
from src.experiments.covariance import run_covariance
from src.experiments.dbm_runs import run_dbm_coupling, run_dbm_relaxation, run_hard_edge
from src.experiments.girko import run_girko_regimes
from src.experiments.logdet import run_logdet_field
from src.experiments.overlaps import run_overlap_decay
from src.experiments.runner import ExperimentResult, make_manifest
from src.experiments.variance_split import run_variance_split
from src.experiments.wick import run_wick
from src.kernels.selftest import run_selftest
from src.utils.fs import ensure_dir, write_json, write_table
from src.utils.logging import attach_run_log, detach_run_log, setup_logger
from src.viz.report import render_report


logger = setup_logger()

Runner = Callable[..., ExperimentResult]


def _selftest(cfg: ExperimentConfig, progress_cb=None) -> ExperimentResult:
    return ExperimentResult(cfg.experiment, run_selftest(cfg.seed))


RUNNERS: Dict[str, Runner] = {
    C.COVARIANCE: run_covariance,
    C.VARIANCE_SPLIT: run_variance_split,
    C.WICK: run_wick,
    C.OVERLAPS: run_overlap_decay,
    C.GIRKO: run_girko_regimes,
    C.LOGDET_FIELD: run_logdet_field,
    C.DBM_COUPLING: run_dbm_coupling,
    C.DBM_RELAXATION: run_dbm_relaxation,
    C.HARD_EDGE: run_hard_edge,
    C.KERNELS_SELFTEST: _selftest,
}


def run_experiment(
    cfg: ExperimentConfig,
    progress_cb: Optional[Callable[[str, float, Dict], None]] = None,
) -> Dict[str, Any]:
    """Run one experiment and write summary.json, manifest.json, config.json, one CSV per table, run.log and report.html."""
    out_root = ensure_dir(cfg.output.dir)

    def _progress(stage: str, pct: float, extra: Optional[Dict] = None) -> None:
        try:
            if progress_cb:
                progress_cb(stage, float(max(0.0, min(100.0, pct))), extra or {})
        except Exception:
            pass

    manifest = make_manifest(cfg.experiment, cfg.seed, cfg.to_json())
    manifest.replicas = cfg.replicas
    logger.info(f"[{cfg.experiment}] seed={cfg.seed} replicas={cfg.replicas} threads={cfg.threads} config={manifest.config_hash}")
    _progress("start", 0.0, {"experiment": cfg.experiment})

    run_log = attach_run_log(out_root / "run.log")
    try:
        result = RUNNERS[cfg.experiment](cfg, progress_cb=progress_cb)
    finally:
        detach_run_log(run_log)
    manifest.excluded = result.excluded

    _progress("writing", 95.0, {})
    table_files = []
    for name, rows in result.tables.items():
        path = write_table(out_root / f"{name}.csv", rows)
        table_files.append(path.name)

    # the timestamp lives only in manifest.json so reruns give byte-identical result files
    summary = {
        "experiment": cfg.experiment,
        "manifest": manifest.to_json(with_timestamp=False),
        "criteria": [c.to_json() for c in result.criteria],
    }
    if result.extra:
        summary["extra"] = result.extra
    write_json(out_root / "summary.json", summary)
    write_json(out_root / "manifest.json", manifest.to_json())
    write_json(out_root / "config.json", cfg.to_json())
    render_report(out_root, summary, table_files)

    n_pass = sum(c.passed for c in result.criteria)
    level = logger.info if result.passed else logger.warning
    level(f"[{cfg.experiment}] {n_pass}/{len(result.criteria)} criteria pass; results in {Path(out_root)}")
    for c in result.criteria:
        if not c.passed:
            logger.warning(f"[{cfg.experiment}] FAIL {c.name}: estimate={c.estimate} predicted={c.predicted} z={c.z}")
    _progress("done", 100.0, {"passed": result.passed})
    summary["passed"] = result.passed
    return summary
