"""Transport exponents, finite-time scaling and distribution-shape analysis.

Curves are ``<p^2>(t)`` sampled on log-spaced integer times. Near the 3-D
transition the natural scaling variable is ``Lambda = t^(-2/3) <p^2>`` as a
function of ``t^(-1/3)``: curves for different ``K`` collapse onto one
function of ``xi(K) t^(-1/3)`` after a horizontal shift by ``ln xi(K)`` in
log-log coordinates, and ``xi(K)`` diverges at ``K_c`` with exponent ``nu``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, special
from scipy.interpolate import PchipInterpolator

from .core import KRError

BETA_CRITICAL = 2.0 / 3.0
TWO_D_ALPHA = math.pi / math.sqrt(32.0)


class WindowTooNarrow(KRError):
    pass


class NoOverlap(KRError):
    pass


class BranchAssignmentAmbiguous(KRError):
    pass


class FitDiverged(KRError):
    pass


class NotSaturated(KRError):
    def __init__(self, indices: Sequence[int], betas: Sequence[float]):
        self.indices = list(indices)
        self.betas = list(betas)
        super().__init__(f"runs {self.indices} not saturated (late exponents {self.betas})")


class CellError(KRError):
    def __init__(self, cell: tuple[int, int], error: Exception):
        self.cell = cell
        self.error = error
        super().__init__(f"cell {cell}: {error}")


@dataclass
class TransportCurve:
    """``<p^2>(t)`` for one point of a parameter path.

    ``p2_members`` (members x times) enables bootstrap resampling.
    """

    K: float
    times: np.ndarray
    p2: np.ndarray
    n_members: int = 1
    p2_members: np.ndarray | None = None
    epsilon: float | None = None
    params_hash: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.p2 = np.asarray(self.p2, dtype=float)
        if self.times.shape != self.p2.shape:
            raise ValueError("times and p2 differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(self.p2 <= 0):
            raise ValueError("<p^2> must be positive")

    @classmethod
    def from_series(cls, K: float, series, params=None) -> "TransportCurve":
        h = ""
        if params is not None:
            blob = json.dumps(params.to_dict(), sort_keys=True).encode()
            h = hashlib.sha256(blob).hexdigest()[:16]
        return cls(K, series.times, series.p2, series.n_members, series.p2_members,
                   getattr(params, "epsilon", None), h)

    def window(self, t_min: float = 0.0, t_max: float = math.inf) -> "TransportCurve":
        sel = (self.times >= t_min) & (self.times <= t_max)
        pm = None if self.p2_members is None else self.p2_members[:, sel]
        return TransportCurve(self.K, self.times[sel], self.p2[sel], self.n_members, pm,
                              self.epsilon, self.params_hash)


# --- transport exponent --------------------------------------------------------

def _loglog_slope(t, y):
    lt, ly = np.log(t), np.log(y)
    A = np.vstack([lt, np.ones_like(lt)]).T
    return float(np.linalg.lstsq(A, ly, rcond=None)[0][0])


def beta_transport(curve: TransportCurve, window: float = 0.5, min_samples: int = 5):
    """Local exponent ``d ln<p^2> / d ln t`` by sliding log-log regression.

    ``window`` is the span in decades. Returns ``(t_centre, beta)`` for every
    sample whose centred window lies inside the data.

    Raises
    ------
    WindowTooNarrow
        If no window holds ``min_samples`` points.
    """
    lt = np.log10(curve.times)
    centres, betas = [], []
    for c in lt:
        lo, hi = c - window / 2, c + window / 2
        if lo < lt[0] - 1e-12 or hi > lt[-1] + 1e-12:
            continue
        sel = (lt >= lo - 1e-12) & (lt <= hi + 1e-12)
        if sel.sum() < min_samples:
            continue
        centres.append(10 ** c)
        betas.append(_loglog_slope(curve.times[sel], curve.p2[sel]))
    if not betas:
        raise WindowTooNarrow(f"no {window}-decade window holds {min_samples} samples")
    return np.array(centres), np.array(betas)


def exponent_at(curve: TransportCurve, t_eval: float | None = None, window: float = 0.5,
                min_samples: int = 5) -> float:
    """Exponent from the trailing ``window`` decades ending at ``t_eval`` (default: last sample)."""
    t_eval = curve.times[-1] if t_eval is None else t_eval
    sel = (curve.times <= t_eval * (1 + 1e-12)) & (curve.times >= t_eval * 10 ** -window * (1 - 1e-12))
    if sel.sum() < min_samples:
        raise WindowTooNarrow(f"{sel.sum()} samples in the last {window} decades before t={t_eval}")
    return _loglog_slope(curve.times[sel], curve.p2[sel])


# --- phase diagram -----------------------------------------------------------

@dataclass
class PhaseDiagram:
    epsilons: np.ndarray
    Ks: np.ndarray
    beta: np.ndarray  # shape (len(epsilons), len(Ks))
    t_eval: float
    critical_line: list[tuple[float, float]]

    def rows(self):
        for i, e in enumerate(self.epsilons):
            for j, k in enumerate(self.Ks):
                yield float(e), float(k), float(self.beta[i, j])


def critical_line(epsilons, Ks, beta, level: float = BETA_CRITICAL):
    """For each ``epsilon`` row, ``K`` values where ``beta`` crosses ``level`` (linear interpolation)."""
    out = []
    for i, e in enumerate(epsilons):
        b = beta[i]
        for j in range(len(Ks) - 1):
            lo, hi = b[j] - level, b[j + 1] - level
            if lo == 0:
                out.append((float(e), float(Ks[j])))
            elif lo * hi < 0:
                k = Ks[j] + (Ks[j + 1] - Ks[j]) * lo / (lo - hi)
                out.append((float(e), float(k)))
    return out


def phase_diagram(epsilons, Ks, params, spec, t_eval: int | None = None, window: float = 0.5,
                  threads: int = 1) -> PhaseDiagram:
    """``beta`` at ``t_eval`` on an ``(epsilon, K)`` grid from ensemble runs.

    ``params`` supplies every other parameter; ``t_eval`` defaults to
    ``params.n_kicks``.
    """
    from .engine import run_ensemble

    epsilons = np.asarray(epsilons, dtype=float)
    Ks = np.asarray(Ks, dtype=float)
    t_eval = params.n_kicks if t_eval is None else int(t_eval)
    beta = np.empty((len(epsilons), len(Ks)))
    for i, e in enumerate(epsilons):
        for j, k in enumerate(Ks):
            p = params.replace(K=float(k), epsilon=float(e), n_kicks=t_eval)
            try:
                s = run_ensemble(p, spec, threads=threads, keep_members=False)
                beta[i, j] = exponent_at(TransportCurve(k, s.times, s.p2), t_eval, window)
            except KRError as exc:
                raise CellError((i, j), exc) from exc
    return PhaseDiagram(epsilons, Ks, beta, t_eval, critical_line(epsilons, Ks, beta))


# --- finite-time scaling ------------------------------------------------------

@dataclass
class SideFit:
    nu: float
    a: float          # cutoff in ln xi = c - nu ln(a + |K - K_c|)
    c: float
    cov: np.ndarray | None = None

    @property
    def b(self) -> float:
        return math.exp(-self.c / self.nu)

    @property
    def alpha_cutoff(self) -> float:
        return self.a * self.b

    def xi(self, K, K_c):
        return np.exp(self.c - self.nu * np.log(self.a + np.abs(np.asarray(K) - K_c)))


@dataclass
class ScalingResult:
    """Output of :func:`finite_time_scaling`.

    The cutoff form ``xi = [alpha_cutoff + b |K - K_c|]^(-nu)`` is stored per
    side as ``ln xi = c - nu ln(a + |K - K_c|)`` with ``alpha_cutoff = a b``.
    """

    K_c: float
    Ks: np.ndarray
    branch: np.ndarray            # -1 localized, +1 diffusive
    late_beta: np.ndarray
    ln_xi: np.ndarray
    u: list[np.ndarray]           # ln t^(-1/3) per curve
    ln_lambda: list[np.ndarray]
    localized: SideFit | None
    diffusive: SideFit | None
    nu: float
    nu_err: float
    nu_localized_err: float
    nu_diffusive_err: float
    collapse_residual: float
    branch_slopes: dict[str, float]
    bootstrap_nu: np.ndarray = field(default_factory=lambda: np.empty(0))
    skipped: list[int] = field(default_factory=list)  # curves too close to K_c to place

    @property
    def nu_localized(self) -> float:
        return self.localized.nu if self.localized else math.nan

    @property
    def nu_diffusive(self) -> float:
        return self.diffusive.nu if self.diffusive else math.nan

    def summary(self) -> dict:
        def side(f):
            if f is None:
                return None
            return {"nu": f.nu, "alpha_cutoff": f.alpha_cutoff, "b": f.b, "a": f.a, "c": f.c}
        return {
            "K_c": self.K_c, "nu": self.nu, "nu_err": self.nu_err,
            "nu_localized": self.nu_localized, "nu_localized_err": self.nu_localized_err,
            "nu_diffusive": self.nu_diffusive, "nu_diffusive_err": self.nu_diffusive_err,
            "localized_fit": side(self.localized), "diffusive_fit": side(self.diffusive),
            "collapse_residual": self.collapse_residual, "branch_slopes": self.branch_slopes,
            "Ks": self.Ks.tolist(), "ln_xi": self.ln_xi.tolist(),
            "branch": self.branch.tolist(), "late_beta": self.late_beta.tolist(),
            "n_bootstrap": int(len(self.bootstrap_nu)),
        }


def lambda_curve(times, p2):
    """``(ln t^(-1/3), ln Lambda)`` with ``Lambda = t^(-2/3) <p^2>``."""
    lt = np.log(np.asarray(times, dtype=float))
    return -lt / 3.0, np.log(np.asarray(p2, dtype=float)) - 2.0 * lt / 3.0


def crossing_K(Ks, betas, level: float = BETA_CRITICAL) -> float:
    """Where late-time ``beta`` crosses ``level`` along the path (first sign change)."""
    order = np.argsort(Ks)
    k, b = np.asarray(Ks)[order], np.asarray(betas)[order] - level
    for j in range(len(k) - 1):
        if b[j] == 0:
            return float(k[j])
        if b[j] * b[j + 1] < 0:
            return float(k[j] + (k[j + 1] - k[j]) * b[j] / (b[j] - b[j + 1]))
    raise BranchAssignmentAmbiguous("late-time exponents never cross the critical value")


class _Spline:
    def __init__(self, u, y):
        order = np.argsort(u)
        self.u = u[order]
        self.y = y[order]
        self.f = PchipInterpolator(self.u, self.y, extrapolate=False)
        self.lo, self.hi = self.u[0], self.u[-1]


def _mismatch(placed: _Spline, new: _Spline, d: float, n: int = 96, min_overlap: float = 0.0):
    # new curve shifted right by d relative to placed one
    lo = max(placed.lo, new.lo + d)
    hi = min(placed.hi, new.hi + d)
    if hi - lo <= min_overlap:
        return math.inf
    w = np.linspace(lo, hi, n)
    diff = new.f(np.clip(w - d, new.lo, new.hi)) - placed.f(np.clip(w, placed.lo, placed.hi))
    return float(np.mean(diff * diff))


def match_shift(placed: _Spline, new: _Spline, min_overlap_frac: float = 0.2,
                n_grid: int = 241) -> tuple[float, float]:
    """Relative horizontal shift minimising the mean squared log-mismatch.

    Returns ``(d, mismatch)``: ``new`` must move right by ``d`` to overlay
    ``placed``.

    Raises
    ------
    NoOverlap
        If the curves share no range of ``ln Lambda``.
    """
    if min(placed.y.max(), new.y.max()) < max(placed.y.min(), new.y.min()):
        raise NoOverlap("curves share no Lambda range")
    span = min(placed.hi - placed.lo, new.hi - new.lo)
    min_ov = min_overlap_frac * span
    d_lo = placed.lo - new.hi + min_ov
    d_hi = placed.hi - new.lo - min_ov
    grid = np.linspace(d_lo, d_hi, n_grid)
    vals = np.array([_mismatch(placed, new, d, min_overlap=min_ov * 0.999) for d in grid])
    if not np.isfinite(vals).any():
        raise NoOverlap("no admissible overlap")
    k = int(np.nanargmin(vals))
    step = grid[1] - grid[0]
    res = optimize.minimize_scalar(
        lambda d: _mismatch(placed, new, d, min_overlap=min_ov * 0.999),
        bounds=(max(d_lo, grid[k] - step), min(d_hi, grid[k] + step)), method="bounded",
        options={"xatol": 1e-10})
    if res.fun <= vals[k]:
        return float(res.x), float(res.fun)
    return float(grid[k]), float(vals[k])


def _branch_shifts(splines: list[_Spline], order: list[int]):
    """Shifts along one branch, ``order`` starting at the curve nearest ``K_c``.

    Leading curves that share no ``Lambda`` range with their outward
    neighbour are too close to critical for their shift to be resolved; they
    are skipped and returned in ``skipped``.
    """
    skipped = []
    while len(order) > 1:
        try:
            match_shift(splines[order[0]], splines[order[1]])
            break
        except NoOverlap:
            skipped.append(order[0])
            order = order[1:]
    shifts = {order[0]: 0.0}
    resid = []
    for prev, cur in zip(order[:-1], order[1:]):
        d, m = match_shift(splines[prev], splines[cur])
        shifts[cur] = shifts[prev] + d
        resid.append(m)
    return shifts, resid, skipped


def _fit_sides(K_side: dict, ln_xi: dict, K_c, shared_nu: bool, rng, n_starts: int = 12):
    """Least-squares fit of ``ln xi = c_s - nu_s ln(a_s + |K - K_c|)`` per side.

    ``K_c`` is either a number (held fixed) or a ``(lo, hi)`` interval in which
    it is fitted jointly. Returns ``(fits, K_c)``.
    """
    sides = [s for s in ("loc", "dif") if s in K_side and len(K_side[s]) >= 3]
    if not sides:
        return {}, (K_c if np.isscalar(K_c) else math.nan)
    n_nu = 1 if shared_nu else len(sides)
    fit_kc = not np.isscalar(K_c)

    def unpack(p):
        kc = p[-1] if fit_kc else K_c
        out = {}
        for i, s in enumerate(sides):
            nu = p[0] if shared_nu else p[i]
            la, c = p[n_nu + 2 * i], p[n_nu + 2 * i + 1]
            out[s] = (nu, math.exp(la), c)
        return out, kc

    def resid(p):
        sides_p, kc = unpack(p)
        r = []
        for s, (nu, a, c) in sides_p.items():
            r.append(ln_xi[s] - (c - nu * np.log(a + np.abs(K_side[s] - kc))))
        return np.concatenate(r)

    best = None
    for _ in range(n_starts):
        kc0 = rng.uniform(*K_c) if fit_kc else K_c
        p0 = list(rng.uniform(0.5, 3.0, size=n_nu))
        lo = [0.05] * n_nu
        hi = [20.0] * n_nu
        for s in sides:
            x = np.abs(K_side[s] - kc0)
            scale = float(np.min(x[x > 0])) if np.any(x > 0) else 0.1
            p0 += [math.log(scale * rng.uniform(1e-3, 2.0)), float(np.mean(ln_xi[s]))]
            lo += [-30.0, -np.inf]
            hi += [5.0, np.inf]
        if fit_kc:
            p0.append(kc0)
            lo.append(K_c[0])
            hi.append(K_c[1])
        try:
            sol = optimize.least_squares(resid, p0, bounds=(lo, hi), x_scale="jac",
                                         xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=4000)
        except (ValueError, FloatingPointError):
            continue
        if not np.isfinite(sol.cost):
            continue
        if best is None or sol.cost < best.cost:
            best = sol
    if best is None:
        raise FitDiverged("cutoff fit failed from every start")
    try:
        J = best.jac
        dof = max(1, J.shape[0] - J.shape[1])
        cov = np.linalg.pinv(J.T @ J) * (2 * best.cost / dof)
    except np.linalg.LinAlgError:
        cov = None
    sides_p, kc = unpack(best.x)
    fits = {}
    for i, (s, (nu, a, c)) in enumerate(sides_p.items()):
        j = 0 if shared_nu else i
        fits[s] = SideFit(nu, a, c, None if cov is None else np.array([[cov[j, j]]]))
    return fits, float(kc)


def _asymptotic_slope(z, y, side: str, tail: float):
    """Slope of the collapsed branch over its far end (smallest ``z``)."""
    order = np.argsort(z)
    z, y = z[order], y[order]
    cut = z[0] + tail * (z[-1] - z[0])
    sel = z <= cut
    if sel.sum() < 3:
        return math.nan
    return float(np.polyfit(z[sel], y[sel], 1)[0])


def _scaling_core(curves, K_c, window_decades, tail, rng, fit_nu=True):
    Ks = np.array([c.K for c in curves], dtype=float)
    late = np.array([exponent_at(c, window=window_decades) for c in curves])
    fit_kc = isinstance(K_c, str)
    if fit_kc and K_c != "fit":
        raise ValueError("K_c must be a number, None or 'fit'")
    K_ref = crossing_K(Ks, late) if (K_c is None or fit_kc) else float(K_c)
    branch = np.where(late > BETA_CRITICAL, 1, np.where(late < BETA_CRITICAL, -1, 0))
    if np.any(branch == 0):
        raise BranchAssignmentAmbiguous(f"curve K={Ks[branch == 0][0]} sits exactly at beta_c")
    splines, us, ys = [], [], []
    for c in curves:
        u, y = lambda_curve(c.times, c.p2)
        splines.append(_Spline(u, y))
        us.append(u)
        ys.append(y)
    ln_xi = np.full(len(curves), np.nan)
    residuals = []
    skipped = []
    z_by_side = {}
    for side, sgn in (("loc", -1), ("dif", 1)):
        idx = [i for i in np.argsort(np.abs(Ks - K_ref)) if branch[i] == sgn]
        if not idx:
            continue
        shifts, res, skip = _branch_shifts(splines, idx)
        residuals += res
        skipped += skip
        idx = [i for i in idx if i not in skip]
        for i, s in shifts.items():
            ln_xi[i] = s
        z_by_side[side] = (np.concatenate([us[i] + ln_xi[i] for i in idx]),
                           np.concatenate([ys[i] for i in idx]))
    slopes = {}
    for side, name in (("loc", "localized"), ("dif", "diffusive")):
        if side in z_by_side:
            slopes[name] = _asymptotic_slope(*z_by_side[side], side, tail)
    fits = {}
    nu = math.nan
    K_fit = K_ref
    if fit_nu:
        placed = np.isfinite(ln_xi)
        K_side = {s: Ks[(branch == g) & placed] for s, g in (("loc", -1), ("dif", 1))}
        lxi = {s: ln_xi[(branch == g) & placed] for s, g in (("loc", -1), ("dif", 1))}
        if fit_kc:
            if not (len(K_side["loc"]) and len(K_side["dif"])):
                raise BranchAssignmentAmbiguous("fitting K_c needs curves on both sides")
            lo, hi = float(K_side["loc"].max()), float(K_side["dif"].min())
            if lo >= hi:
                raise BranchAssignmentAmbiguous("localized and diffusive curves interleave in K")
            shared, K_fit = _fit_sides(K_side, lxi, (lo, hi), True, rng)
            fits, _ = _fit_sides(K_side, lxi, K_fit, False, rng)
        else:
            fits, _ = _fit_sides(K_side, lxi, K_ref, False, rng)
            shared, _ = _fit_sides(K_side, lxi, K_ref, True, rng)
        if shared:
            nu = next(iter(shared.values())).nu
    return {
        "Ks": Ks, "K_c": K_fit, "branch": branch, "late": late, "ln_xi": ln_xi,
        "u": us, "y": ys, "fits": fits, "nu": nu,
        "residual": float(np.mean(residuals)) if residuals else math.nan,
        "slopes": slopes, "skipped": sorted(skipped),
    }


def finite_time_scaling(curves: Sequence[TransportCurve], K_c: float | str | None = None,
                        window_decades: float = 0.5, n_bootstrap: int = 200, seed: int = 0,
                        tail: float = 0.15, fix_K_c_in_bootstrap: bool = False) -> ScalingResult:
    """Critical exponent from the horizontal collapse of ``Lambda`` curves.

    Steps: form ``Lambda``; classify each curve by its late-time exponent
    (above or below 2/3); on each branch, starting from the curve nearest
    ``K_c``, find the shift ``ln xi`` of every next curve by least-squares
    overlap with its placed neighbour; fit ``ln xi`` with the cutoff form on
    each side and with a shared ``nu``. ``K_c`` defaults to the crossing of
    the late-time exponent with 2/3; ``K_c="fit"`` fits it jointly with the
    shared ``nu`` between the innermost localized and diffusive curves.

    Uncertainties come from ``n_bootstrap`` resamples of ensemble members
    when every curve carries ``p2_members``, otherwise from the fit
    covariance.

    Raises
    ------
    NoOverlap, BranchAssignmentAmbiguous, FitDiverged
    """
    curves = sorted(curves, key=lambda c: c.K)
    if len(curves) < 8:
        raise ValueError("finite-time scaling needs at least 8 curves")
    t0 = curves[0].times
    for c in curves:
        if c.times.shape != t0.shape or np.any(c.times != t0):
            raise ValueError("curves must share a common time grid")
    rng = np.random.default_rng(seed)
    core = _scaling_core(curves, K_c, window_decades, tail, rng)
    fits = core["fits"]
    loc, dif = fits.get("loc"), fits.get("dif")

    boot = []
    boot_loc, boot_dif = [], []
    if n_bootstrap > 0 and all(c.p2_members is not None for c in curves):
        brng = np.random.default_rng(seed + 1)
        Kc_boot = core["K_c"] if fix_K_c_in_bootstrap else K_c
        for _ in range(n_bootstrap):
            resampled = []
            for c in curves:
                n = c.p2_members.shape[0]
                pick = brng.integers(0, n, size=n)
                resampled.append(TransportCurve(c.K, c.times, c.p2_members[pick].mean(axis=0), n))
            try:
                r = _scaling_core(resampled, Kc_boot, window_decades, tail, brng)
            except KRError:
                continue
            boot.append(r["nu"])
            boot_loc.append(r["fits"]["loc"].nu if "loc" in r["fits"] else math.nan)
            boot_dif.append(r["fits"]["dif"].nu if "dif" in r["fits"] else math.nan)

    def spread(vals, fit):
        vals = np.asarray(vals, dtype=float)
        vals = vals[np.isfinite(vals)]
        if len(vals) >= 2:
            return float(np.std(vals, ddof=1))
        if fit is not None and fit.cov is not None:
            return float(math.sqrt(max(fit.cov[0, 0], 0.0)))
        return math.nan

    nu_err = spread(boot, None)
    if not math.isfinite(nu_err):
        errs = [spread([], f) for f in (loc, dif) if f is not None]
        nu_err = float(np.min(errs)) if errs else math.nan
    return ScalingResult(
        K_c=core["K_c"], Ks=core["Ks"], branch=core["branch"], late_beta=core["late"],
        ln_xi=core["ln_xi"], u=core["u"], ln_lambda=core["y"], localized=loc, diffusive=dif,
        nu=core["nu"], nu_err=nu_err, nu_localized_err=spread(boot_loc, loc),
        nu_diffusive_err=spread(boot_dif, dif), collapse_residual=core["residual"],
        branch_slopes=core["slopes"], bootstrap_nu=np.asarray(boot, dtype=float),
        skipped=core["skipped"],
    )


# --- critical state ---------------------------------------------------------

@dataclass
class CollapseReport:
    times: list[int]
    max_l1: float
    pairwise: dict[tuple[int, int], float]
    q: np.ndarray
    rescaled: list[np.ndarray]


def rescale_distribution(t, p, Pi, density: bool = False, exponent: float = 1 / 3):
    """``(q, rho)`` with ``q = p t^-1/3`` and ``rho(q) = t^1/3 rho_p(p)``.

    ``Pi`` are class probabilities on the uniform grid ``p`` unless
    ``density`` is set.
    """
    p = np.asarray(p, dtype=float)
    Pi = np.asarray(Pi, dtype=float)
    rho = Pi if density else Pi / (p[1] - p[0])
    scale = float(t) ** exponent
    return p / scale, rho * scale


def critical_collapse(distributions, density: bool = False, n_grid: int = 4001) -> CollapseReport:
    """Maximum pairwise L1 distance between rescaled distributions.

    ``distributions`` is a sequence of ``(t, p, Pi)``. Each is rescaled by
    :func:`rescale_distribution`, linearly interpolated on a common ``q``
    grid (zero outside its support) and compared by ``int |rho_1 - rho_2| dq``.
    """
    resc = [rescale_distribution(t, p, Pi, density) for t, p, Pi in distributions]
    q_max = max(np.max(np.abs(q)) for q, _ in resc)
    q = np.linspace(-q_max, q_max, n_grid)
    dens = [np.interp(q, qq, rr, left=0.0, right=0.0) for qq, rr in resc]
    times = [int(t) for t, _, _ in distributions]
    pair = {}
    for i in range(len(dens)):
        for j in range(i + 1, len(dens)):
            pair[(times[i], times[j])] = float(np.trapezoid(np.abs(dens[i] - dens[j]), q))
    return CollapseReport(times, max(pair.values()) if pair else 0.0, pair, q, dens)


# --- distribution shape ---------------------------------------------------------

@dataclass
class ShapeFit:
    alpha: float
    s: float
    length: float
    goodness: float   # Kullback-Leibler divergence data || model (0 is perfect)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def _model_probs(p, alpha, length, bin_width):
    if bin_width is None:
        logw = -np.abs(p / length) ** alpha
        w = np.exp(logw - logw.max())
        return w / w.sum()
    half = bin_width / 2
    # integrate each half-bin separately so the cusp at p = 0 sits on a node boundary
    mass = np.zeros_like(p)
    for a, b in ((p - half, p), (p, p + half)):
        mid, rad = (a + b) / 2, (b - a) / 2
        nodes = mid[:, None] + rad[:, None] * _GL_X[None, :]
        mass += rad * (np.exp(-np.abs(nodes / length) ** alpha) @ _GL_W)
    return mass / mass.sum()


def fit_distribution_shape(p, Pi, bin_width: float | None = None, p_max: float | None = None) -> ShapeFit:
    """Maximum-likelihood fit of ``Pi(p) ~ exp(-|p|^alpha / s)``.

    ``Pi`` are probabilities at the points ``p`` (normalised over the given
    points). With ``bin_width`` each point stands for the bin
    ``[p - w/2, p + w/2]`` and the model is integrated over it.

    Raises
    ------
    FitDiverged
        If the optimiser fails or ``alpha`` leaves ``[0.2, 6]``.
    """
    p = np.asarray(p, dtype=float)
    Pi = np.asarray(Pi, dtype=float)
    if p_max is not None:
        sel = np.abs(p) <= p_max
        p, Pi = p[sel], Pi[sel]
    Pi = np.clip(Pi, 0, None)
    Pi = Pi / Pi.sum()
    width0 = math.sqrt(float(np.sum(Pi * p * p))) or 1.0

    def nll(theta):
        alpha, length = math.exp(theta[0]), math.exp(theta[1])
        q = _model_probs(p, alpha, length, bin_width)
        return -float(np.sum(Pi * np.log(np.maximum(q, 1e-300))))

    best = None
    for a0 in (0.8, 1.5, 2.2):
        res = optimize.minimize(nll, [math.log(a0), math.log(width0)], method="Nelder-Mead",
                                options={"xatol": 1e-9, "fatol": 1e-13, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
    alpha, length = math.exp(best.x[0]), math.exp(best.x[1])
    if not best.success or not (0.2 <= alpha <= 6.0):
        raise FitDiverged(f"shape fit ended at alpha={alpha:.3g} ({best.message})")
    q = _model_probs(p, alpha, length, bin_width)
    nz = Pi > 0
    kl = float(np.sum(Pi[nz] * np.log(Pi[nz] / np.maximum(q[nz], 1e-300))))
    return ShapeFit(alpha, length ** alpha, length, kl)


def stretched_exponential_probs(p, alpha, s, bin_width: float | None = None):
    """Normalised probabilities of ``exp(-|p|^alpha / s)`` at (or binned around) ``p``."""
    return _model_probs(np.asarray(p, dtype=float), alpha, s ** (1 / alpha), bin_width)


# --- two-dimensional localization -------------------------------------------------

@dataclass
class TwoDLawReport:
    epsilons: np.ndarray
    ln_p2: np.ndarray
    slope: float
    intercept: float
    r2: float
    predicted_slope: float
    K: float
    kbar: float

    @property
    def slope_ratio(self) -> float:
        return self.slope / self.predicted_slope

    def to_dict(self) -> dict:
        return {"epsilons": self.epsilons.tolist(), "ln_p2_sat": self.ln_p2.tolist(),
                "slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "predicted_slope": self.predicted_slope, "slope_ratio": self.slope_ratio,
                "K": self.K, "kbar": self.kbar}


def two_d_localization_law(epsilons, p2_sat, K: float, kbar: float, late_betas=None,
                           saturation_beta: float = 0.1) -> TwoDLawReport:
    """Linear fit of ``ln <p^2>_sat`` against ``epsilon``.

    The prediction for the slope is ``2 alpha (K/kbar)^2`` with
    ``alpha = pi / sqrt(32)`` (the localisation length, hence ``p_loc``,
    grows as ``exp(alpha epsilon (K/kbar)^2)`` and ``<p^2>`` as its square).

    Raises
    ------
    NotSaturated
        If any ``late_betas`` entry is ``>= saturation_beta``.
    """
    eps = np.asarray(epsilons, dtype=float)
    y = np.log(np.asarray(p2_sat, dtype=float))
    if late_betas is not None:
        late = np.asarray(late_betas, dtype=float)
        bad = np.nonzero(late >= saturation_beta)[0]
        if bad.size:
            raise NotSaturated(bad.tolist(), late[bad].tolist())
    slope, intercept = np.polyfit(eps, y, 1)
    fit = slope * eps + intercept
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    pred = 2 * TWO_D_ALPHA * (K / kbar) ** 2
    return TwoDLawReport(eps, y, float(slope), float(intercept), r2, pred, K, kbar)


def one_d_p_loc(K: float, kbar: float) -> float:
    """One-dimensional localisation scale ``K^2 / (4 kbar)`` in momentum units."""
    return K * K / (4 * kbar)


def gamma_normalizer(alpha: float, s: float) -> float:
    """``int exp(-|p|^alpha / s) dp`` over the real line."""
    return 2 * s ** (1 / alpha) * special.gamma(1 + 1 / alpha)
