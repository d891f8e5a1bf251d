"""Shared types, parameter validation and reproducible seeding.

Units are dimensionless: time in kick periods, position ``x`` on the circle
``[0, 2pi)`` and momentum ``p = kbar * (m + beta_qm)`` on the ladder of integer
``m``. The free evolution over one period multiplies each momentum component by
``exp(-i kbar (m + beta_qm)**2 / 2)`` and a kick of strength ``K`` multiplies
the position-space wavefunction by ``exp(-i K cos(x) / kbar)``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

#: Default incommensurate modulation frequencies (radians per kick).
DEFAULT_OMEGAS = (2 * math.pi * math.sqrt(5.0), 2 * math.pi * math.sqrt(13.0))


class KRError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(KRError, ValueError):
    """Parameters violate a documented bound."""


class OutOfRange(ValidationError):
    def __init__(self, field_name: str, bound: str, value: Any = None):
        self.field = field_name
        self.bound = bound
        self.value = value
        super().__init__(f"{field_name}={value!r} violates {bound}")


class IncompatibleDimensions(ValidationError):
    def __init__(self, n_omegas: int, n_phis: int):
        self.n_omegas = n_omegas
        self.n_phis = n_phis
        super().__init__(
            f"omegas has {n_omegas} entries but phis has {n_phis}; "
            "both must list the d-1 extra driving frequencies"
        )


class MemberError(KRError):
    """An ensemble member failed; wraps the original error."""

    def __init__(self, index: int, error: Exception):
        self.index = index
        self.error = error
        super().__init__(f"member {index}: {error}")


@dataclass(frozen=True)
class SimParams:
    """Physical and numerical parameters of one kicked-rotor simulation.

    ``omegas`` and ``phis`` list the extra driving frequencies and phases of
    the kick modulation ``1 + epsilon * prod_i cos(omega_i n + phi_i)``; their
    common length is ``d - 1``.
    """

    K: float
    kbar: float
    epsilon: float = 0.0
    omegas: tuple[float, ...] = ()
    phis: tuple[float, ...] = ()
    beta_qm: float = 0.0
    n_kicks: int = 100
    basis_half_width: int = 1024
    seed: int = 0

    def __post_init__(self):
        # lists from JSON become tuples so the object stays hashable
        object.__setattr__(self, "omegas", tuple(float(w) for w in self.omegas))
        object.__setattr__(self, "phis", tuple(float(p) for p in self.phis))

    @property
    def dimension(self) -> int:
        return len(self.omegas) + 1

    @property
    def kappa(self) -> float:
        return self.K / self.kbar

    def replace(self, **changes) -> "SimParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["omegas"] = list(self.omegas)
        d["phis"] = list(self.phis)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SimParams":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValidationError(f"unknown SimParams fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class ValidatedParams:
    """A :class:`SimParams` that passed :func:`validate`.

    ``fgp_applicable`` records whether ``kappa * (1 + epsilon) < pi``, the
    range in which the tight-binding hopping integrals are pole free. Dynamics
    does not need it; the mapping tools do. ``rational_relation`` is the
    integer relation found by :func:`rational_relation`, or None when the
    driving frequencies and ``kbar`` look incommensurate.
    """

    params: SimParams
    fgp_applicable: bool
    rational_relation: tuple[int, ...] | None = None

    def __getattr__(self, name):
        return getattr(self.params, name)


def validate(params: SimParams) -> ValidatedParams:
    """Check the documented bounds of ``params``.

    Raises
    ------
    OutOfRange
        A scalar field is outside its allowed interval.
    IncompatibleDimensions
        ``omegas`` and ``phis`` have different lengths.
    """
    p = params
    if not (math.isfinite(p.K) and p.K >= 0):
        raise OutOfRange("K", "K >= 0", p.K)
    if not (math.isfinite(p.kbar) and p.kbar > 0):
        raise OutOfRange("kbar", "kbar > 0", p.kbar)
    if not (0 <= p.epsilon < 1):
        raise OutOfRange("epsilon", "0 <= epsilon < 1", p.epsilon)
    if not (0 <= p.beta_qm < 1):
        raise OutOfRange("beta_qm", "0 <= beta_qm < 1", p.beta_qm)
    if int(p.n_kicks) != p.n_kicks or p.n_kicks < 0:
        raise OutOfRange("n_kicks", "integer n_kicks >= 0", p.n_kicks)
    if int(p.basis_half_width) != p.basis_half_width or 2 * p.basis_half_width + 1 < 3:
        raise OutOfRange("basis_half_width", "integer M with 2M+1 >= 3", p.basis_half_width)
    if not (0 <= p.seed <= MASK64):
        raise OutOfRange("seed", "0 <= seed < 2**64", p.seed)
    if len(p.omegas) != len(p.phis):
        raise IncompatibleDimensions(len(p.omegas), len(p.phis))
    for w in p.omegas:
        if not math.isfinite(w):
            raise OutOfRange("omegas", "finite frequencies", w)
    for ph in p.phis:
        if not (0 <= ph < 2 * math.pi):
            raise OutOfRange("phis", "0 <= phi < 2 pi", ph)
    applicable = p.kappa * (1 + p.epsilon) < math.pi
    return ValidatedParams(p, applicable, rational_relation(p))


def rational_relation(params: SimParams, max_coeff: int = 8, tol: float = 1e-9):
    """Smallest integer relation among ``omega_i / 2pi`` and ``kbar / 4pi``.

    Searches integer vectors ``n`` with ``|n_j| <= max_coeff``, not all zero,
    such that ``sum_i n_i omega_i / 2pi + n_k kbar / 4pi`` is within ``tol``
    of an integer. A hit means the effective dimension is lower than
    ``len(omegas) + 1`` (rational frequency) or the free evolution is
    resonant (rational ``kbar / 4pi``). Only modulated frequencies count
    when ``epsilon > 0``.

    Returns
    -------
    tuple of int or None
        Coefficients ordered as ``(n_1, ..., n_{d-1}, n_kbar)``.
    """
    x = [w / (2 * math.pi) for w in params.omegas] if params.epsilon > 0 else []
    x.append(params.kbar / (4 * math.pi))
    x = np.array(x)
    r = np.arange(-max_coeff, max_coeff + 1)
    grid = np.stack(np.meshgrid(*([r] * len(x)), indexing="ij"), axis=-1).reshape(-1, len(x))
    grid = grid[np.any(grid != 0, axis=1)]
    v = grid @ x
    hit = np.abs(v - np.round(v)) < tol
    if not hit.any():
        return None
    best = grid[hit][np.argmin(np.abs(grid[hit]).sum(axis=1))]
    best = best * np.sign(best[np.nonzero(best)[0][0]])  # first nonzero entry positive
    if len(best) < len(params.omegas) + 1:
        best = np.concatenate([np.zeros(len(params.omegas), dtype=int), best])
    return tuple(int(n) for n in best)


def _splitmix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


def derive_member_seed(seed: int, index: int) -> int:
    """Seed of ensemble member ``index``, mixed from the ensemble ``seed``.

    Counter-based SplitMix64: for a fixed ``seed`` the map ``index -> output``
    is a bijection on 64-bit integers, so member seeds never collide.
    """
    z = (_splitmix64(seed & MASK64) + GOLDEN_GAMMA * (index + 1)) & MASK64
    return _splitmix64(z)


def member_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(derive_member_seed(seed, index))


@dataclass(frozen=True)
class EnsembleSpec:
    """How ensemble members are drawn.

    Member ``i`` takes its quasimomentum uniformly in ``[0, 1)`` and each
    modulation phase uniformly in ``[0, 2pi)`` from the stream seeded by
    ``derive_member_seed(seed, i)``. Setting ``sample_beta`` or
    ``sample_phases`` to False keeps the values given in :class:`SimParams`.
    """

    n_members: int
    seed: int = 0
    sample_beta: bool = True
    sample_phases: bool = True

    def member(self, params: SimParams, index: int) -> SimParams:
        rng = member_rng(self.seed, index)
        beta = rng.uniform(0.0, 1.0)
        phis = tuple(rng.uniform(0.0, 2 * math.pi, size=len(params.omegas)))
        return params.replace(
            beta_qm=float(beta) if self.sample_beta else params.beta_qm,
            phis=phis if self.sample_phases else params.phis,
            seed=derive_member_seed(self.seed, index),
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EnsembleSpec":
        return cls(**data)


@dataclass
class QuantumState:
    """Wavefunction of one quasimomentum family in the momentum basis.

    ``amplitudes[k]`` is the amplitude of momentum ``kbar * (m[k] + beta_qm)``.
    The ladder covers ``[-M, M]`` and is padded on the right up to a size with
    small prime factors, see :func:`basis_size`.
    """

    amplitudes: np.ndarray
    beta_qm: float
    kick_index: int = 0
    basis_half_width: int = field(default=0)

    def __post_init__(self):
        if self.basis_half_width == 0:
            self.basis_half_width = (len(self.amplitudes) - 1) // 2

    @property
    def m(self) -> np.ndarray:
        return ladder_indices(len(self.amplitudes))

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def copy(self) -> "QuantumState":
        return QuantumState(self.amplitudes.copy(), self.beta_qm, self.kick_index,
                            self.basis_half_width)


def basis_size(M: int) -> int:
    """Grid size used for ``m in [-M, M]``: ``2M+1`` rounded up to a fast FFT length."""
    from scipy.fft import next_fast_len

    return next_fast_len(2 * M + 1)


def ladder_indices(n: int) -> np.ndarray:
    """Integer momentum indices of an ``n``-point ladder, centred on 0."""
    return np.arange(n) - n // 2


def save_config(path: str | Path, params: SimParams, ensemble: EnsembleSpec | None = None,
                **extra) -> None:
    data: dict[str, Any] = {"params": params.to_dict()}
    if ensemble is not None:
        data["ensemble"] = ensemble.to_dict()
    data.update(extra)
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def load_config(path: str | Path) -> tuple[SimParams, EnsembleSpec | None, dict]:
    """Read a JSON config written by :func:`save_config`.

    Floats are written with ``repr`` precision by :mod:`json`, so the round
    trip is bit exact.
    """
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    if "params" not in data:
        raise ValidationError(f"{path}: missing 'params' section")
    params = SimParams.from_dict(data.pop("params"))
    ens = data.pop("ensemble", None)
    ensemble = EnsembleSpec.from_dict(ens) if ens is not None else None
    return params, ensemble, data
