from __future__ import annotations

import json

import pytest

from src.experiments.cli import EXIT_ERROR, EXIT_PASS, cli_main
from src.experiments.config import parse_config
from src.pipeline import run_experiment
from src.utils.fs import read_table


def test_usage_and_unknown_subcommand():
    assert cli_main([]) == EXIT_ERROR
    assert cli_main(["--help"]) == EXIT_PASS
    assert cli_main(["spectral-gap"]) == EXIT_ERROR


def test_config_errors_exit_one(tmp_path):
    assert cli_main(["covariance"]) == EXIT_ERROR
    assert cli_main(["covariance", "--config", str(tmp_path / "absent.toml")]) == EXIT_ERROR
    cfg = tmp_path / "girko.toml"
    cfg.write_text('experiment = "girko"\n', encoding="utf-8")
    # declared experiment does not match the subcommand
    assert cli_main(["covariance", "--config", str(cfg)]) == EXIT_ERROR


def test_selftest_writes_outputs(tmp_path):
    out = tmp_path / "selftest"
    status = tmp_path / "status.json"
    code = cli_main(["kernels-selftest", "--out", str(out), "--status-json", str(status)])
    assert code == EXIT_PASS
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["experiment"] == "kernels-selftest"
    assert "timestamp" not in summary["manifest"]
    assert all(c["pass"] for c in summary["criteria"])
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert "timestamp" in manifest
    assert (out / "report.html").exists()
    assert (out / "run.log").exists()
    assert json.loads(status.read_text(encoding="utf-8"))["done"] is True


def test_selftest_summary_is_reproducible(tmp_path):
    out = tmp_path / "run"
    assert cli_main(["kernels-selftest", "--out", str(out), "--seed", "0"]) == EXIT_PASS
    first = (out / "summary.json").read_bytes()
    assert cli_main(["kernels-selftest", "--out", str(out), "--seed", "0"]) == EXIT_PASS
    assert (out / "summary.json").read_bytes() == first


@pytest.mark.slow
def test_small_covariance_run(tmp_path):
    text = f"""experiment = "covariance"
seed = 11
replicas = 40
z_threshold = 6.0

[ensemble]
N = 16

[[functions]]
id = "b"
kind = "bump"
width = 0.3

[[pairs]]
f = "b"
g = "b"
s = 0.0
t = 0.1

[output]
dir = "{(tmp_path / 'cov').as_posix()}"
write_samples = true
"""
    cfg = parse_config(text)
    summary = run_experiment(cfg)
    out = tmp_path / "cov"
    assert len(summary["criteria"]) == 1
    assert summary["manifest"]["replicas"] == 40
    table = read_table(out / "covariance.csv")
    assert list(table["kernel"])[0]
    assert table.shape[0] == 1
    assert any((out / "spectra").glob("r00000_t*.bin"))
    assert (out / "config.json").exists()


@pytest.mark.slow
def test_small_wick_run_with_controls(tmp_path):
    text = f"""experiment = "wick"
seed = 5
replicas = 60

[ensemble]
N = 12

[[functions]]
id = "b"
kind = "bump"
width = 0.3

[wick]
function = "b"
time = 0.0
n_resamples = 50
controls = true

[output]
dir = "{(tmp_path / 'wick').as_posix()}"
"""
    summary = run_experiment(parse_config(text))
    names = [c["name"] for c in summary["criteria"]]
    assert "gaussian control accepted" in names
    assert "chi-square control rejected" in names
    table = read_table(tmp_path / "wick" / "cumulants.csv")
    assert set(table["sample"]) == {"b", "control-gaussian", "control-chi2"}


@pytest.mark.slow
def test_small_logdet_run(tmp_path):
    text = f"""experiment = "logdet-field"
seed = 29
replicas = 40

[ensemble]
N = 12

[logdet]
points = [[0.0, 0.0], [0.3, 0.0]]
s = 0.0
t = 0.1

[output]
dir = "{(tmp_path / 'logdet').as_posix()}"
"""
    summary = run_experiment(parse_config(text))
    # two points at distinct times give all four ordered pairs
    assert len(summary["criteria"]) == 4
    table = read_table(tmp_path / "logdet" / "logdet_field.csv")
    assert table.shape[0] == 4


def _run(tmp_path, name: str, body: str) -> dict:
    text = body + f'\n[output]\ndir = "{(tmp_path / name).as_posix()}"\n'
    summary = run_experiment(parse_config(text))
    assert summary["criteria"]
    assert (tmp_path / name / "summary.json").exists()
    return summary


BUMP = """
[[functions]]
id = "b"
kind = "bump"
width = 0.3
"""


@pytest.mark.slow
def test_small_variance_split_run(tmp_path):
    body = f"""experiment = "variance-split"
seed = 3
replicas = 12

[ensemble]
N = 12
{BUMP}
[variance_split]
function = "b"
s = 0.0
t = 0.2
inner = 4
"""
    summary = _run(tmp_path, "vs", body)
    assert [c["name"].split(" ")[0] for c in summary["criteria"]] == ["V1", "V2", "V1+V2"]
    assert read_table(tmp_path / "vs" / "variance_split.csv").shape[0] == 3


@pytest.mark.slow
def test_small_girko_run(tmp_path):
    body = f"""experiment = "girko"
seed = 23
replicas = 8
{BUMP}
[quadrature]
girko_resolution = 16

[girko]
function = "b"
sizes = [8, 12]
z1 = [0.0, 0.0]
z2 = [0.5, 0.0]
"""
    summary = _run(tmp_path, "girko", body)
    names = [c["name"] for c in summary["criteria"]]
    assert "trace correlation at z1, eta vs 2 eta (control)" in names
    table = read_table(tmp_path / "girko" / "girko.csv")
    assert list(table["N"]) == [8, 12]


@pytest.mark.slow
def test_small_overlaps_run(tmp_path):
    body = """experiment = "overlaps"
seed = 17
replicas = 6
backend = "numpy"

[ensemble]
N = 12

[[functions]]
id = "f"
kind = "bump"
width = 0.3

[[functions]]
id = "g"
kind = "bump"
center = [0.2, 0.0]
width = 0.3

[overlaps]
f = "f"
g = "g"
window_steps = 2
"""
    summary = _run(tmp_path, "overlaps", body)
    assert any(c["name"] == "eigenpair exclusion rate" for c in summary["criteria"])
    assert (tmp_path / "overlaps" / "overlap_window.csv").exists()


@pytest.mark.slow
def test_small_hard_edge_run(tmp_path):
    body = """experiment = "hard-edge"
seed = 41
replicas = 10

[ensemble]
N = 8

[hard_edge]
z_list = [[0.0, 0.0], [0.5, 0.0]]
"""
    summary = _run(tmp_path, "hard_edge", body)
    # two KS checks and one decorrelation check
    assert len(summary["criteria"]) == 3
    assert read_table(tmp_path / "hard_edge" / "hard_edge.csv").shape[0] == 2


SMALL_DBM = """
[dbm]
N = 8
dt = 1e-3
i_max = 3
route_N = 4
route_t = 0.1
route_replicas = 8
propagator_N = 6
propagator_t = 0.01
advection_N = 4
advection_replicas = 4
local_law_t = 0.01
"""


@pytest.mark.slow
def test_small_dbm_coupling_run(tmp_path):
    body = f"""experiment = "dbm-coupling"
seed = 31
replicas = 4
{SMALL_DBM}times = [0.02]
"""
    summary = _run(tmp_path, "coupling", body)
    names = [c["name"] for c in summary["criteria"]]
    assert "SDE vs matrix route KS (smallest particle)" in names
    assert "driver bracket rate <= 1" in names
    route = read_table(tmp_path / "coupling" / "route_comparison.csv")
    assert route["ks_limit"].iloc[0] == pytest.approx(0.05)
    assert (tmp_path / "coupling" / "coupling_gaps.csv").exists()


@pytest.mark.slow
def test_small_dbm_relaxation_run(tmp_path):
    body = f"""experiment = "dbm-relaxation"
seed = 37
replicas = 4
{SMALL_DBM}times = [0.005, 0.01, 0.02, 0.04]
"""
    summary = _run(tmp_path, "relaxation", body)
    names = [c["name"] for c in summary["criteria"]]
    assert "shifted data rejected" in names
    assert summary["manifest"]["excluded"] == 0
    assert read_table(tmp_path / "relaxation" / "relaxation.csv").shape[0] == 3 * 4


def test_dbm_relaxation_without_replicas_exits_with_error(tmp_path):
    cfg = tmp_path / "relax.toml"
    cfg.write_text(
        f'experiment = "dbm-relaxation"\nreplicas = 0\n{SMALL_DBM}times = [0.01, 0.02]\n', encoding="utf-8"
    )
    assert cli_main(["dbm-relaxation", "--config", str(cfg), "--out", str(tmp_path / "out")]) == EXIT_ERROR
