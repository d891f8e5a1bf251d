"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Heavy engine runs are module-scoped fixtures shared between the criteria and
the related spot checks. The whole module takes roughly 20-30 minutes on one
core.
"""

import json
import math

import numpy as np
import pytest

from kickedrotor import anderson, experiments as ex
from kickedrotor.classical import classical_diffusion
from kickedrotor.cli import main
from kickedrotor.core import EnsembleSpec, SimParams
from kickedrotor.engine import evolve, run_ensemble
from kickedrotor.scaling import (
    TWO_D_ALPHA,
    TransportCurve,
    critical_collapse,
    exponent_at,
    finite_time_scaling,
    one_d_p_loc,
    two_d_localization_law,
)

pytestmark = pytest.mark.slow

KBAR = ex.KBAR


def _check(label, value, ok, target):
    return (f"{label}={value:.4g} (target {target})", bool(ok))


def report(capsys, number, title, checks):
    passed = all(ok for _, ok in checks)
    parts = "; ".join(f"{text} {'ok' if ok else 'MISS'}" for text, ok in checks)
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title}: {parts}"
    with capsys.disabled():
        print("\n" + line)
    assert passed, line


# --- shared runs ----------------------------------------------------------------

@pytest.fixture(scope="module")
def fig3_run():
    return ex.fig3(seed=0)


@pytest.fixture(scope="module")
def fig4_run():
    return ex.fig4(seed=0)


@pytest.fixture(scope="module")
def collapse_data():
    out = {}
    for label, point in (("critical", ex.NOMINAL_CRITICAL_POINT), ("localized", ex.LOCALIZED_POINT),
                         ("measured", ex.CRITICAL_POINT)):
        out[label] = ex.collapse_runs(point, (100, 300, 1000), seed=0, n_members=500)
    return out


@pytest.fixture(scope="module")
def two_d_data():
    eps = (0.0, 0.2, 0.4, 0.6, 0.8)
    runs = ex.two_d_runs(eps, seed=0, n_members=200, n_kicks=1000)
    p2_sat, late = [], []
    for s in runs:
        tail = s.times >= s.times[-1] * 10**-0.3
        p2_sat.append(float(np.mean(s.p2[tail])))
        late.append(exponent_at(TransportCurve(5.34, s.times, s.p2), window=1.0))
    return np.array(eps), np.array(p2_sat), np.array(late)


@pytest.fixture(scope="module")
def path_scaling():
    Ks = np.round(np.arange(5.0, 8.01, 0.25), 3)
    curves = ex.path_curves(Ks, seed=0, n_members=500, n_kicks=1000)
    fitted = finite_time_scaling(curves, K_c="fit", n_bootstrap=200, seed=0)
    return curves, fitted


# --- criteria -------------------------------------------------------------------

def test_criterion_01_dynamical_localization(capsys, fig3_run):
    beta = fig3_run.summary["beta_last_decade"]
    alpha = fig3_run.summary["shape"]["alpha"]
    report(capsys, 1, "dynamical localization, K=7.2, 200 members, 200 kicks, M=1024", [
        _check("beta(last decade)", beta, beta < 0.1, "< 0.1"),
        _check("alpha", alpha, abs(alpha - 1.0) <= 0.15, "1 +- 0.15"),
    ])


def test_criterion_02_three_regimes(capsys, fig4_run):
    loc, crit, dif = fig4_run.summary["regimes"]
    report(capsys, 2, "three regimes at t=1e3, 500 members", [
        _check("localized beta", loc["beta"], loc["beta"] < 1 / 3, "< 1/3"),
        _check("localized alpha", loc["shape"]["alpha"], abs(loc["shape"]["alpha"] - 1) <= 0.2, "1 +- 0.2"),
        _check("critical beta", crit["beta"], abs(crit["beta"] - 2 / 3) <= 0.1, "2/3 +- 0.1"),
        _check("critical alpha", crit["shape"]["alpha"], abs(crit["shape"]["alpha"] - 1.5) <= 0.2, "1.5 +- 0.2"),
        _check("diffusive beta", dif["beta"], abs(dif["beta"] - 1) <= 0.1, "1 +- 0.1"),
        _check("diffusive alpha", dif["shape"]["alpha"], abs(dif["shape"]["alpha"] - 2) <= 0.25, "2 +- 0.25"),
    ])


def test_criterion_03_floquet_oracle(capsys):
    checks = []
    for K in (2.0, 4.0):
        rep = anderson.floquet_oracle(K, KBAR, 0.0, M_small=64)
        checks += [
            _check(f"K={K:g} max||lambda|-1|", rep.unimodularity, rep.unimodularity < 1e-10, "< 1e-10"),
            _check(f"K={K:g} median residual", rep.median_residual, rep.median_residual < 1e-6, "< 1e-6"),
            _check(f"K={K:g} |t0|", abs(rep.t0), abs(rep.t0) < 1e-12, "< 1e-12"),
        ]
    kappa = 0.05
    t = anderson.hopping_coefficients(kappa)
    for r in (1, -1):
        rel = abs(t[(r,)] / (kappa / 4) - 1)
        checks.append(_check(f"t_{r:+d} rel. error vs kappa/4", rel, rel < 0.01, "< 1%"))
    report(capsys, 3, "FGP oracle, kbar=2.89, M_small=64", checks)


def test_criterion_04_quantum_resonance(capsys):
    K = 3.0
    s = evolve(SimParams(K=K, kbar=4 * math.pi, n_kicks=50, basis_half_width=256),
               sampling=np.arange(51))
    n = np.arange(1, 51)
    rel = float(np.max(np.abs(s.p2[1:] / (K**2 * n**2 / 2) - 1)))
    report(capsys, 4, "quantum resonance, kbar=4pi, beta=0, K=3", [
        _check("max rel. error n<=50", rel, rel < 1e-8, "< 1e-8"),
    ])


def test_criterion_05_classical_correspondence(capsys):
    K = 10.0
    est = classical_diffusion(K, n_traj=10_000, n_steps=200, seed=0)
    t = np.arange(1, 6)
    D_q = {}
    for kbar in (0.5, KBAR):
        s = run_ensemble(SimParams(K=K, kbar=kbar, n_kicks=5, basis_half_width=512),
                         EnsembleSpec(64, seed=0), sampling=t, keep_members=False)
        D_q[kbar] = float(np.mean(s.p2 / (2 * t)))
    rel_cl = abs(est.D / (K**2 / 4) - 1)
    rel_q = abs(D_q[0.5] / est.D - 1)
    report(capsys, 5, f"classical correspondence, K=10 (D_q at kbar=2.89: {D_q[KBAR]:.4g})", [
        _check("classical D", est.D, rel_cl <= 0.2, "K^2/4 = 25 +- 20%"),
        _check("quantum D (kbar=0.5) / classical D - 1", rel_q, rel_q <= 0.3, "<= 30%"),
    ])


def test_criterion_06_synthetic_scaling(capsys):
    from kickedrotor.engine import log_times

    t = log_times(1000)
    t = t[t >= 10].astype(float)
    K_c, nu = 4.7, 1.6
    curves = []
    for d in (-1.7, -1.2, -0.8, -0.5, -0.3, 0.3, 0.5, 0.8, 1.2, 1.7):
        y = abs(d) ** -nu * t ** (-1 / 3)
        lam = y**2 / (1 + y**2) if d < 0 else 1 + 1 / y
        curves.append(TransportCurve(K_c + d, t, lam * t ** (2 / 3)))
    res = finite_time_scaling(curves, K_c=K_c, n_bootstrap=0)
    s_loc, s_dif = res.branch_slopes["localized"], res.branch_slopes["diffusive"]
    report(capsys, 6, "finite-time scaling, planted nu=1.60", [
        _check("nu", res.nu, abs(res.nu - 1.6) <= 0.05, "1.60 +- 0.05"),
        _check("localized slope", s_loc, abs(s_loc / 2 - 1) <= 0.1, "2 +- 10%"),
        _check("diffusive slope", s_dif, abs(s_dif / -1 - 1) <= 0.1, "-1 +- 10%"),
    ])


def test_criterion_07_physical_scaling(capsys, path_scaling):
    curves, res = path_scaling
    lo, hi = np.percentile(res.bootstrap_nu, [5, 95]) if len(res.bootstrap_nu) else (math.nan,) * 2
    report(capsys, 7, f"finite-time scaling on the path, {len(curves)} K values, 500 members, t=1e3 "
                      f"(K_c fitted {res.K_c:.3f}, nu_err {res.nu_err:.3g}, bootstrap 5-95% "
                      f"{lo:.3g}-{hi:.3g}, skipped K {[float(res.Ks[i]) for i in res.skipped]})", [
        _check("K values", len(curves), len(curves) >= 10, ">= 10"),
        _check("nu", res.nu, 1.4 <= res.nu <= 1.8, "[1.4, 1.8]"),
    ])


def test_criterion_08_critical_collapse(capsys, collapse_data):
    _, crit = collapse_data["critical"]
    _, loc = collapse_data["localized"]
    l1 = critical_collapse([d for d in crit if d[0] in (300, 1000)]).max_l1
    rep_loc = critical_collapse(loc)
    near, far = rep_loc.pairwise[(100, 300)], rep_loc.pairwise[(100, 1000)]
    report(capsys, 8, f"critical collapse at (K, eps)={ex.NOMINAL_CRITICAL_POINT}, 500 members", [
        _check("critical L1(300, 1000)", l1, l1 < 0.1, "< 0.1"),
        _check("localized L1(100, 1000)", far, far >= 0.1, "collapse fails (>= 0.1)"),
        _check("localized L1 growth 100-1000 vs 100-300", far / near, far > near, "> 1"),
    ])


def test_criterion_09_two_d_law(capsys, two_d_data):
    eps, p2_sat, late = two_d_data
    rep = two_d_localization_law(eps[:4], p2_sat[:4], 5.34, KBAR)
    report(capsys, 9, f"2D law, K=5.34, eps=0..0.6, t=1e3 (late beta {np.round(late[:4], 3).tolist()})", [
        _check("R^2", rep.r2, rep.r2 > 0.95, "> 0.95"),
        _check("slope / 2 (pi/sqrt32)(K/kbar)^2", rep.slope_ratio, abs(rep.slope_ratio - 1) <= 0.4,
               "1 +- 40%"),
    ])


def test_criterion_10_transfer_matrix(capsys):
    xi = {}
    for W in (0.5, 1.0, 2.0):
        xi[W], _ = anderson.transfer_matrix_xi(anderson.BoxDisorder(W, seed=0))
    scaled = np.array([xi[W] * W**2 for W in xi])
    spread = float(scaled.max() / scaled.min() - 1)
    checks = [_check("max/min of xi W^2 - 1", spread, spread <= 0.2, "<= 20%")]
    for W in (1.0, 2.0):
        xd = anderson.diagonalization_xi(anderson.BoxDisorder(W, seed=0))
        rel = abs(xd / xi[W] - 1)
        checks.append(_check(f"W={W:g} diagonalization/transfer - 1", rel, rel <= 0.25, "<= 25%"))
    report(capsys, 10, f"1D transfer matrix at band centre (xi W^2 = {np.round(scaled, 2).tolist()})",
           checks)


def _artifacts(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "manifest.json"}


def test_criterion_11_determinism(capsys, tmp_path, fig4_run):
    checks = []
    # library: the localized fig4 run again with three threads
    again = ex.fig4(seed=0, threads=3, points=(ex.LOCALIZED_POINT,))
    name = "distribution_K4_eps0.35"
    same = (again.tables[name].data.tobytes() == fig4_run.tables[name].data.tobytes()
            and again.tables["series"].data.tobytes() == fig4_run.tables["series"].data[:, :2].tobytes())
    checks.append((f"fig4 localized run, threads 1 vs 3 identical: {same}", same))
    # CLI: every data artifact of two acceptance recipes
    for argv in (["reproduce", "fig3"],
                 ["collapse", "--K", "6.3", "--epsilon", "0.55", "--members", "64"]):
        outs = []
        for threads in (1, 2):
            out = tmp_path / f"{argv[0]}-{threads}"
            assert main(argv + ["--threads", str(threads), "--seed", "0", "--out", str(out)]) == 0
            outs.append(_artifacts(out))
        same = outs[0] == outs[1] and len(outs[0]) > 0
        checks.append((f"kr {argv[0]} artifacts ({len(outs[0])} files), threads 1 vs 2 identical: {same}",
                       same))
    report(capsys, 11, "determinism across thread counts", checks)


# --- related spot checks on the same runs -----------------------------------------

def test_measured_critical_point_collapses_and_grows_as_t_two_thirds(collapse_data):
    s, dists = collapse_data["measured"]
    assert critical_collapse([d for d in dists if d[0] in (300, 1000)]).max_l1 < 0.1
    beta = exponent_at(TransportCurve(ex.CRITICAL_POINT[0], s.times, s.p2), window=0.5)
    assert beta == pytest.approx(2 / 3, abs=0.1)


def test_two_d_law_extends_to_eps_0_8(two_d_data):
    eps, p2_sat, _ = two_d_data
    rep = two_d_localization_law(eps, p2_sat, 5.34, KBAR)
    assert rep.r2 > 0.95
    assert rep.predicted_slope == pytest.approx(2 * TWO_D_ALPHA * (5.34 / KBAR) ** 2)


def test_one_d_saturation_matches_localization_scale(two_d_data):
    # expected: <p^2>_sat at eps = 0 within a factor 2 of p_loc^2 = (K^2 / 4 kbar)^2
    _, p2_sat, _ = two_d_data
    ratio = p2_sat[0] / one_d_p_loc(5.34, KBAR) ** 2
    assert 0.5 <= ratio <= 2.0, f"<p^2>_sat / p_loc^2 = {ratio:.3g}"


def test_wegner_consistency_on_the_path(path_scaling):
    _, res = path_scaling
    joint = math.hypot(res.nu_localized_err, res.nu_diffusive_err)
    assert abs(res.nu_localized - res.nu_diffusive) <= 2 * joint, (
        f"nu_loc={res.nu_localized:.3g}+-{res.nu_localized_err:.2g}, "
        f"nu_dif={res.nu_diffusive:.3g}+-{res.nu_diffusive_err:.2g}")


def test_scaling_is_reproducible_for_a_seed(path_scaling):
    curves, res = path_scaling
    again = finite_time_scaling(curves, K_c="fit", n_bootstrap=5, seed=0)
    first = finite_time_scaling(curves, K_c="fit", n_bootstrap=5, seed=0)
    assert again.nu == res.nu
    assert np.array_equal(again.bootstrap_nu, first.bootstrap_nu)


def test_crossing_estimate_on_the_path(path_scaling):
    curves, res = path_scaling
    crossing = finite_time_scaling(curves, K_c=None, n_bootstrap=0)
    # fitted and crossing estimates bracket the same transition
    assert abs(crossing.K_c - res.K_c) < 0.3
    summary = json.loads(json.dumps(res.summary(), default=float))
    assert summary["K_c"] == pytest.approx(res.K_c)
