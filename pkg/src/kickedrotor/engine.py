"""Split-step propagation of the (quasi)periodically kicked quantum rotor.

One kick period applies the kick ``exp(-i K a_n cos(x) / kbar)`` on the
position grid, then the free phase ``exp(-i kbar (m + beta)**2 / 2)`` on the
momentum ladder. Members of an ensemble differ by quasimomentum and modulation
phases; they are propagated together as rows of a 2-D array.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .core import (EnsembleSpec, KRError, MemberError, QuantumState, SimParams,
                   basis_size, ladder_indices, validate)

EDGE_FRACTION = 0.9
EDGE_TOLERANCE = 1e-6
GAUSSIAN_TAIL_TOLERANCE = 1e-12


class BasisTooSmall(KRError):
    pass


class EdgeLeak(KRError):
    """Probability reached the edge of the momentum basis."""

    def __init__(self, weight: float, kick: int, member: int | None = None):
        self.weight = weight
        self.kick = kick
        self.member = member
        super().__init__(f"edge weight {weight:.3g} > {EDGE_TOLERANCE:g} at kick {kick}"
                         + ("" if member is None else f" (member {member})")
                         + "; increase basis_half_width")


@dataclass(frozen=True)
class KickSchedule:
    """Kick amplitude factors ``a_n = 1 + epsilon * prod_i cos(omega_i n + phi_i)``.

    Kick ``n`` (``n = 0, 1, ...``) happens at time ``t = n``.
    """

    amplitudes: np.ndarray

    @classmethod
    def from_params(cls, params: SimParams, n_kicks: int | None = None) -> "KickSchedule":
        n = params.n_kicks if n_kicks is None else n_kicks
        return cls(kick_amplitudes(params.epsilon, params.omegas, params.phis, n))

    def __len__(self):
        return len(self.amplitudes)


def kick_amplitudes(epsilon, omegas, phis, n_kicks) -> np.ndarray:
    n = np.arange(n_kicks, dtype=float)
    f = np.ones(n_kicks)
    for w, ph in zip(omegas, phis):
        f = f * np.cos(w * n + ph)
    if not omegas:
        # no modulation frequency: f is undefined, the kick is unmodulated
        f = np.zeros(n_kicks)
    return 1.0 + epsilon * f


@dataclass
class ObservableSeries:
    """Time series of one member or an ensemble average.

    ``distribution`` holds the populations of the momentum classes
    ``p_classes = kbar * n``; class ``n`` collects the ladder point closest to
    ``n``, i.e. ``round(m + beta_qm) == n``. ``pi0`` is the population of class 0.
    """

    times: np.ndarray
    p2: np.ndarray
    pi0: np.ndarray
    p_classes: np.ndarray
    distribution: np.ndarray
    kbar: float
    members: list[dict] = field(default_factory=list)
    p2_members: np.ndarray | None = None
    distributions_at: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def n_members(self) -> int:
        return max(1, len(self.members))


def log_times(n_kicks: int, per_decade: int = 30) -> np.ndarray:
    """Integer times from 1 to ``n_kicks``, log spaced, duplicates removed."""
    if n_kicks < 1:
        return np.array([0])
    decades = math.log10(n_kicks)
    n = max(2, int(math.ceil(decades * per_decade)) + 1)
    t = np.unique(np.rint(np.logspace(0.0, decades, n)).astype(int))
    t = t[(t >= 1) & (t <= n_kicks)]
    if t[-1] != n_kicks:
        t = np.append(t, n_kicks)
    return t


def build_initial_state(kind: str, beta_qm: float, M: int, width: float | None = None) -> QuantumState:
    """Normalised initial state centred on ``m = 0``.

    ``kind`` is ``"momentum_delta"`` or ``"gaussian"``; for the latter the
    probability ``|psi_m|^2`` is a Gaussian in ``m`` of standard deviation
    ``width``.
    """
    N = basis_size(M)
    m = ladder_indices(N)
    psi = np.zeros(N, dtype=complex)
    if kind == "momentum_delta":
        psi[m == 0] = 1.0
    elif kind == "gaussian":
        if width is None or width <= 0:
            raise ValueError("gaussian state needs width > 0")
        prob = np.exp(-0.5 * (m / width) ** 2)
        prob /= prob.sum()
        if prob[m == M][0] > GAUSSIAN_TAIL_TOLERANCE:
            raise BasisTooSmall(f"gaussian width {width} leaves {prob[m == M][0]:.3g} at |m|=M={M}")
        psi = np.sqrt(prob).astype(complex)
    else:
        raise ValueError(f"unknown initial state kind {kind!r}")
    return QuantumState(psi, beta_qm, 0, M)


def _position_grid(N: int) -> np.ndarray:
    return 2 * np.pi * np.arange(N) / N


def _free_phase(m: np.ndarray, beta, kbar: float) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    q = m[None, :] + beta.reshape(-1, 1)
    return np.exp(-0.5j * kbar * q * q)


def propagate_one_period(state: QuantumState, K_eff: float, kbar: float) -> QuantumState:
    """Apply one kick of strength ``K_eff`` followed by one free period."""
    N = len(state.amplitudes)
    m = ladder_indices(N)
    x = _position_grid(N)
    psi_x = sfft.ifft(np.fft.ifftshift(state.amplitudes)) * N
    psi_x *= np.exp(-1j * (K_eff / kbar) * np.cos(x))
    amps = np.fft.fftshift(sfft.fft(psi_x)) / N
    amps *= _free_phase(m, state.beta_qm, kbar)[0]
    return QuantumState(amps, state.beta_qm, state.kick_index + 1, state.basis_half_width)


def _unit_phase(angle: np.ndarray) -> np.ndarray:
    out = np.empty(angle.shape, dtype=complex)
    np.cos(angle, out=out.real)
    np.sin(angle, out=out.imag)
    return out


class _Batch:
    """Rows of momentum amplitudes in FFT order for several members."""

    def __init__(self, members: list[SimParams], M: int, workers: int = 1):
        self.N = basis_size(M)
        self.M = M
        self.workers = workers
        kbar = members[0].kbar
        self.kbar = kbar
        m = ladder_indices(self.N)
        self.m_fft = np.fft.ifftshift(m)
        self.betas = np.array([p.beta_qm for p in members])
        self.free = _free_phase(self.m_fft, self.betas, kbar)
        self.cosx = np.cos(_position_grid(self.N))
        self.q2 = (self.m_fft[None, :] + self.betas[:, None]).astype(np.longdouble) ** 2
        self.edge = np.abs(self.m_fft) > EDGE_FRACTION * M
        # momentum class of each ladder point, offset to be a non-negative index
        cls = np.rint(self.m_fft[None, :] + self.betas[:, None]).astype(int)
        self.class_index = cls + self.N // 2 + 1
        self.n_classes = self.N + 2
        psi = np.zeros((len(members), self.N), dtype=complex)
        psi[:, 0] = 1.0  # m = 0 sits at index 0 in FFT order
        self.psi = psi
        self.amps = np.stack([kick_amplitudes(p.epsilon, p.omegas, p.phis, p.n_kicks)
                              * p.K / kbar for p in members])

    def kick(self, n: int):
        strength = self.amps[:, n]
        psi_x = sfft.ifft(self.psi, axis=1, workers=self.workers)
        if np.all(strength == strength[0]):
            psi_x *= _unit_phase(-strength[0] * self.cosx)[None, :]
        else:
            psi_x *= _unit_phase(-strength[:, None] * self.cosx[None, :])
        self.psi = sfft.fft(psi_x, axis=1, workers=self.workers)
        self.psi *= self.free

    def probabilities(self) -> np.ndarray:
        return self.psi.real ** 2 + self.psi.imag ** 2

    def p2(self, prob) -> np.ndarray:
        s = np.sum(prob.astype(np.longdouble) * self.q2, axis=1)
        return (s * self.kbar ** 2).astype(float)

    def class_populations(self, prob) -> np.ndarray:
        out = np.zeros((prob.shape[0], self.n_classes))
        for i in range(prob.shape[0]):
            out[i] = np.bincount(self.class_index[i], weights=prob[i], minlength=self.n_classes)
        return out


def _run_batch(members: list[SimParams], times: np.ndarray, M: int, workers: int,
               snapshots=(), amplitudes=None) -> dict:
    b = _Batch(members, M, workers)
    if amplitudes is not None:
        b.amps = amplitudes * members[0].K / members[0].kbar
    n_kicks = members[0].n_kicks
    n_s = len(times)
    p2 = np.zeros((len(members), n_s))
    pi0 = np.zeros((len(members), n_s))
    snaps = {}
    zero_class = b.N // 2 + 1
    want = set(int(t) for t in times) | set(int(s) for s in snapshots) | {n_kicks}
    k_sample = 0
    classes = None
    for n in range(n_kicks + 1):
        if n in want:
            prob = b.probabilities()
            edge = np.sum(prob[:, b.edge], axis=1)
            bad = np.nonzero(edge > EDGE_TOLERANCE)[0]
            if bad.size:
                raise EdgeLeak(float(edge[bad[0]]), n, int(bad[0]))
            classes = b.class_populations(prob)
            if k_sample < n_s and times[k_sample] == n:
                p2[:, k_sample] = b.p2(prob)
                pi0[:, k_sample] = classes[:, zero_class]
                k_sample += 1
            if n in snapshots:
                snaps[n] = classes
        if n < n_kicks:
            b.kick(n)
    return {"p2": p2, "pi0": pi0, "classes": classes, "snaps": snaps, "N": b.N}


def _member_meta(p: SimParams) -> dict:
    return {"beta_qm": p.beta_qm, "phis": list(p.phis), "seed": p.seed}


def _assemble(members, times, results, kbar, keep_members=True) -> ObservableSeries:
    N = results[0]["N"]
    n_classes = N + 2
    p_classes = kbar * (np.arange(n_classes) - (N // 2 + 1))
    n_mem = len(members)
    # fixed-order reduction over members, independent of batching
    p2_all = np.concatenate([r["p2"] for r in results], axis=0)
    pi0_all = np.concatenate([r["pi0"] for r in results], axis=0)
    cls_all = np.concatenate([r["classes"] for r in results], axis=0)
    p2 = _ordered_mean(p2_all)
    pi0 = _ordered_mean(pi0_all)
    dist = _ordered_mean(cls_all)
    snaps = {}
    for t in results[0]["snaps"]:
        snaps[t] = _ordered_mean(np.concatenate([r["snaps"][t] for r in results], axis=0))
    keep = np.nonzero(np.any(cls_all > 0, axis=0))[0]
    lo, hi = keep.min(), keep.max() + 1
    return ObservableSeries(
        times=np.asarray(times), p2=p2, pi0=pi0,
        p_classes=p_classes[lo:hi], distribution=dist[lo:hi], kbar=kbar,
        members=[_member_meta(p) for p in members] if keep_members else [],
        p2_members=p2_all if keep_members and n_mem > 1 else None,
        distributions_at={t: d[lo:hi] for t, d in snaps.items()},
    )


def _ordered_mean(a: np.ndarray) -> np.ndarray:
    acc = np.zeros(a.shape[1:], dtype=a.dtype)
    for row in a:
        acc = acc + row
    return acc / a.shape[0]


def evolve(params: SimParams, schedule: KickSchedule | None = None,
           sampling: np.ndarray | None = None, snapshots=()) -> ObservableSeries:
    """Propagate one member from ``|m = 0>`` and record its observables.

    ``schedule`` overrides the kick amplitudes derived from ``params``;
    ``snapshots`` lists extra times at which the class distribution is kept.

    Raises
    ------
    EdgeLeak
        If more than ``1e-6`` of probability sits at ``|m| > 0.9 M`` at a
        sampled time.
    """
    validate(params)
    times = log_times(params.n_kicks) if sampling is None else np.asarray(sampling, dtype=int)
    if schedule is not None:
        if len(schedule) < params.n_kicks:
            raise ValueError("schedule shorter than n_kicks")
        amps = np.asarray(schedule.amplitudes, dtype=float)[None, :params.n_kicks]
    else:
        amps = None
    res = _run_batch([params], times, params.basis_half_width, 1, snapshots, amps)
    return _assemble([params], times, [res], params.kbar)


def run_ensemble(params: SimParams, spec: EnsembleSpec, sampling: np.ndarray | None = None,
                 threads: int = 1, chunk_size: int = 64, snapshots=(),
                 keep_members: bool = True) -> ObservableSeries:
    """Average :func:`evolve` over the members described by ``spec``.

    Members are propagated in chunks of ``chunk_size`` rows; the reduction
    runs over members in index order, so results do not depend on ``threads``.

    Raises
    ------
    MemberError
        Wrapping the first failing member's error, with its index.
    """
    validate(params)
    if spec.n_members < 1:
        raise ValueError("n_members must be >= 1")
    times = log_times(params.n_kicks) if sampling is None else np.asarray(sampling, dtype=int)
    members = [spec.member(params, i) for i in range(spec.n_members)]
    chunks = [list(range(i, min(i + chunk_size, len(members))))
              for i in range(0, len(members), chunk_size)]

    def work(idx):
        try:
            return _run_batch([members[i] for i in idx], times,
                              params.basis_half_width, 1, snapshots)
        except EdgeLeak as exc:
            raise MemberError(idx[0] + (exc.member or 0), exc) from exc

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    return _assemble(members, times, results, params.kbar, keep_members)
