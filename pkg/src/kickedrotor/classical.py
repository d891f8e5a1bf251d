"""Classical kicked rotor: the Standard Map and its momentum diffusion."""

from __future__ import annotations

import math
import warnings
from typing import NamedTuple

import numpy as np

from .core import member_rng

TWO_PI = 2 * math.pi


class RegimeWarning(UserWarning):
    """Requested kick strength lies outside the ergodic regime ``K > 5``."""


class PhasePoint(NamedTuple):
    theta: float
    L: float


class DiffusionEstimate(NamedTuple):
    D: float
    stderr: float
    steps: np.ndarray
    mean_L2: np.ndarray


def standard_map_step(pt: PhasePoint, K: float) -> PhasePoint:
    """One kick period: ``theta += L`` then ``L += K sin(theta)``.

    ``theta`` is reduced to ``[0, 2pi)``; ``L`` is left unfolded.
    """
    theta = (pt.theta + pt.L) % TWO_PI
    return PhasePoint(theta, pt.L + K * math.sin(theta))


def standard_map_inverse(pt: PhasePoint, K: float) -> PhasePoint:
    L = pt.L - K * math.sin(pt.theta)
    return PhasePoint((pt.theta - L) % TWO_PI, L)


def standard_map_jacobian(pt: PhasePoint, K: float) -> np.ndarray:
    """Jacobian ``d(theta', L') / d(theta, L)`` of one step."""
    c = K * math.cos((pt.theta + pt.L) % TWO_PI)
    return np.array([[1.0, 1.0], [c, 1.0 + c]])


def iterate(theta: np.ndarray, L: np.ndarray, K: float, n_steps: int):
    """Iterate an ensemble ``n_steps`` times; returns final arrays and ``<L^2>(t)``.

    The mean is taken after every step, ``mean_L2[0]`` being the initial value.
    """
    theta = np.array(theta, dtype=float)
    L = np.array(L, dtype=float)
    mean_L2 = np.empty(n_steps + 1)
    mean_L2[0] = np.mean(L * L)
    for n in range(1, n_steps + 1):
        theta = np.mod(theta + L, TWO_PI)
        L = L + K * np.sin(theta)
        mean_L2[n] = np.mean(L * L)
    return theta, L, mean_L2


def _slope_through_window(t: np.ndarray, y: np.ndarray) -> float:
    A = np.vstack([2 * t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


def classical_diffusion(K: float, n_traj: int = 10_000, n_steps: int = 200,
                        seed: int = 0, skip: int = 10, n_batches: int = 20) -> DiffusionEstimate:
    """Momentum diffusion constant of the Standard Map.

    Initial conditions have ``theta`` uniform in ``[0, 2pi)`` and ``L = 0``.
    ``D`` is the least-squares slope of ``<L^2>`` against ``2t`` for
    ``t > skip``; the standard error comes from splitting the trajectories
    into ``n_batches`` independent groups.

    Warns
    -----
    RegimeWarning
        If ``K <= 5`` (mixed phase space, the estimate is still returned).
    """
    if K <= 5:
        warnings.warn(f"K={K} <= 5: phase space is mixed, diffusion is not normal",
                      RegimeWarning, stacklevel=2)
    if n_steps <= skip + 1:
        raise ValueError("n_steps must exceed the transient window")
    rng = member_rng(seed, 0)
    theta0 = rng.uniform(0.0, TWO_PI, size=n_traj)
    L0 = np.zeros(n_traj)
    n_batches = max(1, min(n_batches, n_traj))
    batches = np.array_split(np.arange(n_traj), n_batches)

    steps = np.arange(n_steps + 1, dtype=float)
    window = steps > skip
    curves = []
    for idx in batches:
        _, _, m2 = iterate(theta0[idx], L0[idx], K, n_steps)
        curves.append(m2 * len(idx))
    mean_L2 = np.sum(curves, axis=0) / n_traj
    D = _slope_through_window(steps[window], mean_L2[window])
    if n_batches > 1:
        per_batch = [_slope_through_window(steps[window], c[window] / len(b))
                     for c, b in zip(curves, batches)]
        stderr = float(np.std(per_batch, ddof=1) / math.sqrt(n_batches))
    else:
        stderr = float("nan")
    return DiffusionEstimate(D, stderr, steps, mean_L2)
