"""Anderson tight-binding models and the kicked-rotor mapping onto them.

The Floquet eigenproblem of the kicked rotor is equivalent to a tight-binding
equation in momentum space,

    tan(v_m) u_m + sum_{r != 0} t_r u_{m+r} = -t_0 u_m,

with pseudo-random on-site terms ``tan(v_m)``, ``v_m = omega/2 - kbar (m +
beta)^2 / 4 - sum_i m_i omega_i / 2``, and hopping integrals given by Fourier
coefficients of ``tan(kappa cos(x) / 2)``. This module builds both sides,
solves tight-binding models, and checks the equivalence against direct
diagonalisation of the one-period evolution operator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .core import KRError, member_rng

TWO_PI = 2 * math.pi

PRINTED_SIGN = 1
PROSE_SIGN = -1


class PoleInDomain(KRError):
    pass


class QuadratureNotConverged(KRError):
    pass


class NonSymmetric(KRError):
    pass


class TruncationDominates(KRError):
    pass


class NotConverged(KRError):
    pass


@dataclass(frozen=True)
class BoxDisorder:
    """On-site energies i.i.d. uniform in ``[-W/2, W/2]`` with hopping ``T``."""

    W: float
    T: float = 1.0
    seed: int = 0

    def sample(self, n: int, stream: int = 0) -> np.ndarray:
        rng = member_rng(self.seed, stream)
        return rng.uniform(-self.W / 2, self.W / 2, size=n)


@dataclass
class TightBindingModel:
    """Finite-box tight-binding model.

    ``onsite`` has one axis per lattice dimension. ``hopping`` maps integer
    displacement tuples ``r`` to ``t_r``; only displacements present are used.
    """

    onsite: np.ndarray
    hopping: dict[tuple[int, ...], float] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.onsite.ndim

    @property
    def anderson_eigenvalue(self) -> float:
        return -self.hopping.get((0,) * self.dimension, 0.0)

    def matrix(self) -> np.ndarray:
        """Dense Hamiltonian with open boundaries; the ``r = 0`` entry is left out."""
        shape = self.onsite.shape
        n = self.onsite.size
        H = np.diag(self.onsite.ravel().astype(float))
        idx = np.arange(n).reshape(shape)
        for r, t in self.hopping.items():
            if not any(r) or t == 0.0:
                continue
            src = tuple(slice(max(0, -ri), s - max(0, ri)) for ri, s in zip(r, shape))
            dst = tuple(slice(max(0, ri), s - max(0, -ri)) for ri, s in zip(r, shape))
            H[idx[src].ravel(), idx[dst].ravel()] += t
        return H


@dataclass
class Eigenpairs:
    values: np.ndarray
    vectors: np.ndarray  # columns


def nearest_neighbour_chain(onsite: np.ndarray, T: float = 1.0) -> TightBindingModel:
    return TightBindingModel(np.asarray(onsite, dtype=float), {(1,): T, (-1,): T})


def pseudo_disorder(omega: float, kbar: float, beta_qm: float = 0.0, omegas=(),
                    box=(64,)) -> np.ndarray:
    """On-site terms ``tan(v_m)`` over the box ``|m_i| <= box[i]``.

    ``box`` lists one half-width per dimension; its length must be
    ``len(omegas) + 1``. Values are deterministic and heavy tailed.
    """
    box = tuple(int(b) for b in box)
    if len(box) != len(omegas) + 1:
        raise ValueError("box needs one half-width per dimension (1 + len(omegas))")
    axes = [np.arange(-b, b + 1, dtype=float) for b in box]
    grids = np.meshgrid(*axes, indexing="ij")
    v = omega / 2 - kbar * (grids[0] + beta_qm) ** 2 / 4
    for g, w in zip(grids[1:], omegas):
        v = v - g * w / 2
    return np.tan(v)


def _hopping_grid(kappa, epsilon, d, n):
    x = TWO_PI * np.arange(n) / n
    if d == 1:
        arg = 0.5 * kappa * np.cos(x)
    else:
        grids = np.meshgrid(*([x] * d), indexing="ij")
        mod = np.ones_like(grids[0])
        for g in grids[1:]:
            mod = mod * np.cos(g)
        arg = 0.5 * kappa * np.cos(grids[0]) * (1 + epsilon * mod)
    return np.tan(arg)


def _hopping_table(kappa, epsilon, d, r_max, n):
    coeffs = np.fft.fftn(_hopping_grid(kappa, epsilon, d, n)) / n ** d
    # fftn uses exp(-i r x); the integral uses exp(+i r x), i.e. index -r
    raw = {}
    for r in itertools.product(range(-r_max, r_max + 1), repeat=d):
        raw[r] = float(coeffs[tuple((-ri) % n for ri in r)].real)
    # the integrand is even in every coordinate; average over sign flips so
    # the table is exactly symmetric rather than symmetric to rounding
    flips = list(itertools.product((1, -1), repeat=d))
    return {r: math.fsum(raw[tuple(f * ri for f, ri in zip(fl, r))] for fl in flips) / len(flips)
            for r in raw}


def hopping_coefficients(kappa: float, epsilon: float = 0.0, d: int = 1, r_max: int = 20,
                         n_quad: int = 256, sign: int = PRINTED_SIGN,
                         tol: float = 1e-10) -> dict[tuple[int, ...], float]:
    """Hopping integrals ``t_r`` for ``|r_i| <= r_max``.

    ``t_r = sign * (2 pi)^-d  int dx exp(i r.x) tan[(kappa/2) cos x_1 (1 + epsilon
    cos x_2 ... cos x_d)]`` by the trapezoid rule on ``n_quad`` points per axis,
    which converges geometrically for this periodic analytic integrand.
    ``sign=+1`` is the integral as written; ``sign=-1`` gives
    ``-<m|tan(kappa cos x / 2)|m+r>``, the sign entering the eigen-equation.

    Raises
    ------
    PoleInDomain
        If ``kappa (1 + epsilon) >= pi``.
    QuadratureNotConverged
        If doubling ``n_quad`` moves any coefficient by more than ``tol``.
    """
    if d == 1:
        epsilon = 0.0
    if kappa * (1 + epsilon) >= math.pi:
        raise PoleInDomain(f"kappa(1+epsilon) = {kappa * (1 + epsilon):.4g} >= pi")
    n_quad = max(n_quad, 2 * r_max + 2)
    coarse = _hopping_table(kappa, epsilon, d, r_max, n_quad)
    fine = _hopping_table(kappa, epsilon, d, r_max, 2 * n_quad)
    err = max(abs(coarse[r] - fine[r]) for r in fine)
    if err > tol:
        raise QuadratureNotConverged(f"max change {err:.3g} on refining {n_quad} -> {2 * n_quad}")
    return {r: sign * t for r, t in fine.items()}


def solve_tight_binding(model: TightBindingModel, check_tol: float = 1e-12) -> Eigenpairs:
    """All eigenpairs of a finite tight-binding model, ascending.

    One-dimensional models with short range use a banded solver.

    Raises
    ------
    NonSymmetric
        If the hopping table or assembled matrix is not symmetric.
    """
    for r, t in model.hopping.items():
        back = model.hopping.get(tuple(-ri for ri in r))
        if back is None or abs(back - t) > check_tol * max(1.0, abs(t)):
            raise NonSymmetric(f"t{r}={t} but t{tuple(-ri for ri in r)}={back}")
    if not np.all(np.isfinite(model.onsite)):
        raise ValueError("on-site energies must be finite")
    n = model.onsite.size
    if model.dimension == 1:
        reach = max((abs(r[0]) for r, t in model.hopping.items() if t != 0.0 and r[0] != 0),
                    default=0)
        if reach < n // 4:
            bands = np.zeros((reach + 1, n))
            bands[0] = model.onsite
            for k in range(1, reach + 1):
                bands[k, :n - k] = model.hopping.get((k,), 0.0)
            w, v = sla.eig_banded(bands, lower=True)
            return Eigenpairs(w, v)
    H = model.matrix()
    if not np.allclose(H, H.T, atol=check_tol, rtol=0):
        raise NonSymmetric("assembled matrix is not symmetric")
    w, v = np.linalg.eigh(H)
    return Eigenpairs(w, v)


def envelope_xi(u: np.ndarray, floor: float = 1e-26, central: float = 0.6) -> float:
    """Localisation length of a 1-D eigenvector from its decay ``|u|^2 ~ exp(-2|m - m0|/xi)``.

    ``log|u|^2`` is regressed on ``|m - m0|`` over the central ``central``
    fraction of each side's decay range, from the peak to where the
    probability reaches ``floor`` (or the box edge); the peak site is excluded.
    Returns ``inf`` when no decay is resolved.
    """
    prob = np.abs(np.asarray(u)) ** 2
    prob = prob / prob.sum()
    m0 = int(np.argmax(prob))
    dist, logs = [], []
    for side in (prob[m0 + 1:], prob[:m0][::-1]):
        if side.size < 5:
            continue
        below = np.nonzero(side < floor)[0]
        end = below[0] if below.size else side.size
        if end < 5:
            continue
        lo = int(round(end * (1 - central) / 2))
        hi = int(round(end * (1 + central) / 2))
        k = np.arange(lo, hi)
        dist.append(k + 1.0)
        logs.append(np.log(np.maximum(side[k], 1e-300)))
    if not dist:
        return math.inf
    dist = np.concatenate(dist)
    logs = np.concatenate(logs)
    slope = np.polyfit(dist, logs, 1)[0]
    return math.inf if slope >= 0 else -2.0 / slope


def transfer_matrix_xi(disorder: BoxDisorder, energy: float = 0.0, N: int = 2_000_000,
                       n_segments: int = 64, renorm_every: int = 8, rel_tol: float = 0.02):
    """Localisation length ``xi = 1/gamma`` of a nearest-neighbour box-disorder chain.

    ``gamma`` is the Lyapunov exponent of the product of 2x2 transfer matrices
    for ``u_{n+1} = ((energy - E_n)/T) u_n - u_{n-1}``, computed on
    ``n_segments`` independent segments of total length ``N`` with periodic
    renormalisation. The standard error is that of the segment mean.

    Returns
    -------
    (xi, stderr)
        ``(inf, 0.0)`` for ``W = 0``.

    Raises
    ------
    NotConverged
        If the relative standard error of ``gamma`` exceeds ``rel_tol``.
    """
    if disorder.W == 0:
        return math.inf, 0.0
    L = N // n_segments
    E = disorder.sample(L * n_segments).reshape(n_segments, L)
    a = (energy - E) / disorder.T
    u_prev = np.zeros(n_segments)
    u = np.ones(n_segments)
    logsum = np.zeros(n_segments)
    for start in range(0, L, renorm_every):
        for k in range(start, min(start + renorm_every, L)):
            u, u_prev = a[:, k] * u - u_prev, u
        scale = np.hypot(u, u_prev)
        logsum += np.log(scale)
        u /= scale
        u_prev /= scale
    gammas = logsum / L
    gamma = gammas.mean()
    se_gamma = gammas.std(ddof=1) / math.sqrt(n_segments)
    if gamma <= 0 or se_gamma / gamma > rel_tol:
        raise NotConverged(f"gamma = {gamma:.4g} +- {se_gamma:.2g} at N = {N}")
    xi = 1.0 / gamma
    return xi, xi * se_gamma / gamma


def diagonalization_xi(disorder: BoxDisorder, energy: float = 0.0, N: int = 2048,
                       n_realizations: int = 8, n_states: int = 8) -> float:
    """Median envelope localisation length of eigenstates closest to ``energy``.

    Independent check of :func:`transfer_matrix_xi` by direct diagonalisation.
    """
    xis = []
    for k in range(n_realizations):
        model = nearest_neighbour_chain(disorder.sample(N, stream=1000 + k), disorder.T)
        pairs = solve_tight_binding(model)
        nearest = np.argsort(np.abs(pairs.values - energy))[:n_states]
        for j in nearest:
            xis.append(envelope_xi(pairs.vectors[:, j]))
    return float(np.median(xis))


# --- Floquet side -----------------------------------------------------------

def floquet_matrix(K: float, kbar: float, beta_qm: float, M: int) -> np.ndarray:
    """One-period evolution operator on the ``2M+1`` ladder ``m = -M..M``.

    The kick acts on the matching ``2M+1`` point position grid, so the matrix
    is exactly unitary (cyclic truncation).
    """
    n = 2 * M + 1
    m = np.arange(-M, M + 1)
    x = TWO_PI * np.arange(n) / n
    # F[j, k] = exp(i m_k x_j)/sqrt(n): momentum -> position
    F = np.exp(1j * np.outer(x, m)) / math.sqrt(n)
    kick = F.conj().T @ (np.exp(-1j * (K / kbar) * np.cos(x))[:, None] * F)
    free = np.exp(-0.5j * kbar * (m + beta_qm) ** 2)
    return free[:, None] * kick


@dataclass
class OracleReport:
    K: float
    kbar: float
    beta_qm: float
    M: int
    sign: int
    quasienergies: np.ndarray
    unimodularity: float
    residuals: np.ndarray
    edge_weights: np.ndarray
    interior: np.ndarray
    median_residual: float
    median_residual_other_sign: float
    t0: float

    def to_dict(self) -> dict:
        return {
            "K": self.K, "kbar": self.kbar, "beta_qm": self.beta_qm, "M_small": self.M,
            "selected_sign": self.sign,
            "max_abs_eigenvalue_deviation": self.unimodularity,
            "n_eigenpairs": int(len(self.residuals)),
            "n_interior": int(self.interior.sum()),
            "median_interior_residual": self.median_residual,
            "median_interior_residual_other_sign": self.median_residual_other_sign,
            "t0": self.t0,
        }


def _tb_residual(u, onsite, hop_matrix, t0):
    lhs = onsite * u + hop_matrix @ u
    rhs = -t0 * u
    scale = max(np.linalg.norm(onsite * u), np.linalg.norm(hop_matrix @ u), 1e-300)
    return float(np.linalg.norm(lhs - rhs) / scale)


def floquet_oracle(K: float, kbar: float, beta_qm: float = 0.0, M_small: int = 64,
                   edge_tol: float = 1e-8, r_max: int | None = None,
                   strict: bool = False) -> OracleReport:
    """Check the tight-binding equation on exact Floquet eigenpairs.

    Diagonalises the one-period operator on ``2 M_small + 1`` momentum states,
    forms ``u = (1 + i tan t)^-1 |omega>`` with ``t = (K / 2 kbar) cos x``,
    and evaluates the relative residual of the tight-binding equation with
    on-site terms from :func:`pseudo_disorder` at each quasi-energy and hopping
    from :func:`hopping_coefficients`. Both hopping signs are tried and the one
    with the smaller median residual is reported.

    Eigenpairs with weight above ``edge_tol`` on the outer 10% of the basis are
    excluded from the median. With ``strict=True`` a
    :class:`TruncationDominates` is raised when none remain.
    """
    if M_small > 128:
        raise ValueError("M_small must be <= 128 for dense diagonalisation")
    kappa = K / kbar
    n = 2 * M_small + 1
    U = floquet_matrix(K, kbar, beta_qm, M_small)
    lam, vecs = np.linalg.eig(U)
    unimod = float(np.max(np.abs(np.abs(lam) - 1)))
    omegas = np.mod(-np.angle(lam), TWO_PI)

    m = np.arange(-M_small, M_small + 1)
    x = TWO_PI * np.arange(n) / n
    F = np.exp(1j * np.outer(x, m)) / math.sqrt(n)
    denom = 1 + 1j * np.tan(0.5 * kappa * np.cos(x))
    u_all = F.conj().T @ ((F @ vecs) / denom[:, None])

    if r_max is None:
        r_max = M_small
    table = hopping_coefficients(kappa, 0.0, 1, r_max=min(r_max, 2 * M_small), n_quad=512)
    t0 = table[(0,)]
    hop = np.zeros((n, n))
    for (r,), t in table.items():
        if r != 0 and abs(r) < n:
            hop += np.diag(np.full(n - abs(r), t), k=r)

    edge = np.abs(m) > 0.9 * M_small
    prob = np.abs(u_all) ** 2
    prob /= prob.sum(axis=0, keepdims=True)
    edge_w = prob[edge].sum(axis=0)
    interior = edge_w <= edge_tol
    if strict and not interior.any():
        raise TruncationDominates("every eigenvector has edge weight above tolerance")

    res = {}
    for sign in (PRINTED_SIGN, PROSE_SIGN):
        r = np.empty(n)
        for j in range(n):
            onsite = pseudo_disorder(omegas[j], kbar, beta_qm, (), (M_small,))
            r[j] = _tb_residual(u_all[:, j], onsite, sign * hop, sign * t0)
        res[sign] = r
    med = {s: float(np.median(r[interior])) if interior.any() else math.nan
           for s, r in res.items()}
    best = PROSE_SIGN if med[PROSE_SIGN] <= med[PRINTED_SIGN] else PRINTED_SIGN
    other = PRINTED_SIGN if best == PROSE_SIGN else PROSE_SIGN
    return OracleReport(K, kbar, beta_qm, M_small, best, omegas, unimod, res[best],
                        edge_w, interior, med[best], med[other], t0)


def fgp_model(K: float, kbar: float, omega: float, beta_qm: float = 0.0, half_width: int = 256,
              r_max: int = 30, epsilon: float = 0.0, omegas=()) -> TightBindingModel:
    """Tight-binding model equivalent to the kicked rotor at quasi-energy ``omega``."""
    d = len(omegas) + 1
    onsite = pseudo_disorder(omega, kbar, beta_qm, omegas, (half_width,) * d)
    table = hopping_coefficients(K / kbar, epsilon, d, r_max=r_max, n_quad=max(256, 4 * r_max),
                                 sign=PROSE_SIGN)
    return TightBindingModel(onsite, table)
