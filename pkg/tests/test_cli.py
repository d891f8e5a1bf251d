import hashlib
import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from kickedrotor.cli import main
from kickedrotor.core import EnsembleSpec, SimParams, save_config
from kickedrotor.engine import log_times


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def _check_digests(out):
    man = _manifest(out)
    for name, digest in man["artifacts"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    # nothing but declared artifacts and the manifest, no stray temp files
    assert {p.name for p in out.iterdir()} == set(man["artifacts"]) | {"manifest.json"}
    return man


def _write_config(path, **changes):
    p = SimParams(K=5.0, kbar=2.89, n_kicks=60, basis_half_width=128).replace(**changes)
    save_config(path, p, EnsembleSpec(12, seed=4))
    return path


def test_classical_run_writes_manifest_last(tmp_path):
    out = tmp_path / "o"
    assert main(["classical", "--K", "8", "--steps", "20", "--n-traj", "200", "--out", str(out)]) == 0
    man = _check_digests(out)
    assert set(man["artifacts"]) == {"classical.csv", "summary.json"}
    assert man["command"] == "classical"
    assert man["seeds"] == {"seed": 0, "threads": 1}
    newest = max(out.iterdir(), key=lambda p: p.stat().st_mtime_ns)
    assert newest.name == "manifest.json"
    header = (out / "classical.csv").read_text().splitlines()[0]
    assert header == "step [kicks],mean_L2 [dimensionless]"


def test_common_flags_work_either_side_of_subcommand(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--seed", "3", "classical", "--K", "8", "--steps", "30", "--n-traj", "50",
                 "--out", str(a)]) == 0
    assert main(["classical", "--K", "8", "--steps", "30", "--n-traj", "50", "--seed", "3",
                 "--out", str(b)]) == 0
    assert (a / "classical.csv").read_bytes() == (b / "classical.csv").read_bytes()
    assert _manifest(a)["seeds"]["seed"] == 3


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("KR_OUT_DIR", str(tmp_path / "env"))
    assert main(["classical", "--K", "8", "--steps", "30", "--n-traj", "50"]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()


def test_evolve_is_identical_across_thread_counts(tmp_path):
    cfg = _write_config(tmp_path / "c.json")
    outs = []
    for threads in (1, 3):
        out = tmp_path / f"t{threads}"
        assert main(["evolve", "--config", str(cfg), "--threads", str(threads), "--out", str(out)]) == 0
        _check_digests(out)
        outs.append(out)
    for name in ("series.csv", "dist.csv", "summary.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    summary = json.loads((outs[0] / "summary.json").read_text())
    assert summary["fgp_applicable"] is True
    assert {"xi_sites", "p2_final", "beta_final", "shape"} <= set(summary)


def test_evolve_csv_round_trips_exactly(tmp_path):
    cfg = _write_config(tmp_path / "c.json")
    out = tmp_path / "o"
    assert main(["evolve", "--config", str(cfg), "--out", str(out)]) == 0
    data = np.loadtxt(out / "series.csv", delimiter=",", skiprows=1)
    from kickedrotor.core import load_config
    from kickedrotor.engine import run_ensemble
    params, spec, _ = load_config(cfg)
    ref = run_ensemble(params, spec)
    assert np.array_equal(data[:, 1], ref.p2)
    assert np.array_equal(data[:, 0], ref.times)


@pytest.mark.parametrize("argv", [
    ["classical"],
    ["classical", "--K", "8", "--bogus"],
    ["nonexistent"],
    ["classical", "--K", "8", "--threads", "0"],
])
def test_usage_errors_exit_two(tmp_path, argv):
    out = tmp_path / "o"
    assert main(argv + ["--out", str(out)]) == 2
    assert not out.exists()


def test_invalid_config_exits_two_without_artifacts(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"params": {"K": -1.0, "kbar": 2.89}}))
    out = tmp_path / "o"
    assert main(["evolve", "--config", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()
    assert main(["evolve", "--config", str(tmp_path / "missing.json"), "--out", str(out)]) == 2


def test_pole_in_hopping_integral_exits_two(tmp_path):
    out = tmp_path / "o"
    assert main(["anderson-map", "--K", str(math.pi * 2.0), "--kbar", "2.0", "--out", str(out)]) == 2
    assert not out.exists()


def test_runtime_failure_exits_three_without_artifacts(tmp_path):
    cfg = _write_config(tmp_path / "c.json", K=30.0, kbar=1.0, basis_half_width=64)
    out = tmp_path / "o"
    assert main(["evolve", "--config", str(cfg), "--out", str(out)]) == 3
    assert not out.exists()


def test_unwritable_output_exits_three(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["classical", "--K", "8", "--steps", "30", "--n-traj", "50",
                 "--out", str(blocker / "sub")]) == 3


def test_anderson_map_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["anderson-map", "--K", "4", "--kbar", "2.89", "--half-width", "20",
                 "--r-max", "5", "--m-small", "48", "--out", str(out)]) == 0
    man = _check_digests(out)
    assert set(man["artifacts"]) == {"onsite.csv", "hopping.csv", "oracle.json"}
    onsite = np.loadtxt(out / "onsite.csv", delimiter=",", skiprows=1)
    assert onsite.shape == (41, 2)
    assert onsite[20, 0] == 0 and onsite[20, 1] == 0.0  # E_0 = 0 at omega = 0
    hop = (out / "hopping.csv").read_text().splitlines()
    assert hop[1].split(",")[0] == "-5"  # integer column printed as int
    oracle = json.loads((out / "oracle.json").read_text())
    assert oracle["median_interior_residual"] < 1e-6


def test_scaling_from_curve_file(tmp_path):
    t = log_times(1000)
    t = t[t >= 10].astype(float)
    rows = []
    for d in (-1.7, -1.2, -0.8, -0.5, -0.3, 0.3, 0.5, 0.8, 1.2, 1.7):
        y = abs(d) ** -1.6 * t ** (-1 / 3)
        lam = y**2 / (1 + y**2) if d < 0 else 1 + 1 / y
        rows += [(4.7 + d, tt, v) for tt, v in zip(t, lam * t ** (2 / 3))]
    src = tmp_path / "curves.csv"
    src.write_text("K,t,p2\n" + "\n".join(",".join(repr(float(x)) for x in r) for r in rows) + "\n")
    out = tmp_path / "o"
    assert main(["scaling", "--curves", str(src), "--K-c", "4.7", "--bootstrap", "0",
                 "--out", str(out)]) == 0
    _check_digests(out)
    fit = json.loads((out / "fit.json").read_text())
    assert fit["nu"] == pytest.approx(1.6, abs=1e-3)
    assert main(["scaling", "--curves", str(src), "--K-c", "bogus", "--out", str(tmp_path / "x")]) == 2


def test_collapse_command(tmp_path):
    out = tmp_path / "o"
    assert main(["collapse", "--K", "6.3", "--epsilon", "0.42", "--times", "30,100",
                 "--members", "4", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert set(rep["pairwise_l1"]) == {"30-100"}
    assert main(["collapse", "--times", "100", "--out", str(tmp_path / "x")]) == 2


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "reproduce" in capsys.readouterr().out


@pytest.mark.skipif(shutil.which("kr") is None, reason="console script not installed")
def test_console_script(tmp_path):
    res = subprocess.run(["kr", "classical", "--K", "7", "--steps", "30", "--n-traj", "20",
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    res = subprocess.run(["kr", "classical", "--K", "-1", "--out", str(tmp_path / "p")],
                         capture_output=True, text=True)
    assert res.returncode == 2
