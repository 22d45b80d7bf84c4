"""Multiplicative cocycles, Birkhoff averages and Lyapunov exponents on suspension flows."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    FiberWalk,
    FlowPoint,
    Observable,
    PointSet,
    SuspensionFlow,
    evolve_points,
    integrate_observable,
    integrate_points,
    sample_volume,
)


def _constant_value(u):
    """Return c if ``u`` is the constant observable c, else None."""
    if isinstance(u, Observable) and all(t.a == 0 and t.b == 0 for t in u.terms):
        return u.const
    return None


@dataclass(frozen=True)
class BirkhoffSample:
    point: FlowPoint
    horizon: float
    integral: float

    @property
    def average(self) -> float:
        return self.integral / self.horizon


def delta(flow: SuspensionFlow, u, p: FlowPoint, t: float) -> float:
    """log of the multiplicative cocycle ``exp(int_0^t u(f_s p) ds)``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    c = _constant_value(u)
    if c is not None:
        return c * t
    return integrate_observable(flow, u, p, t)


def birkhoff_integrals(flow: SuspensionFlow, u, points: PointSet, T: float) -> np.ndarray:
    c = _constant_value(u)
    if c is not None:
        return np.full(len(points), c * T)
    return integrate_points(flow, u, points, T)


def birkhoff_sample(flow: SuspensionFlow, u, p: FlowPoint, T: float) -> BirkhoffSample:
    return BirkhoffSample(p, T, delta(flow, u, p, T))


def estimate_chi(flow: SuspensionFlow, u, samples: PointSet, T: float):
    """Mean Birkhoff average and a 2-stderr half width."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if len(samples) < 10:
        raise ValueError("need at least 10 samples")
    c = _constant_value(u)
    if c is not None:
        return float(c), 0.0
    avg = birkhoff_integrals(flow, u, samples, T) / T
    half = 2.0 * float(np.std(avg, ddof=1)) / math.sqrt(len(avg))
    return float(np.mean(avg)), half


# ---------------------------------------------------------------------------
# Lyapunov exponents by re-orthonormalization at every crossing
# ---------------------------------------------------------------------------


def _qr_positive(M):
    Q, R = np.linalg.qr(M)
    signs = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    signs = np.where(signs == 0, 1.0, signs)
    Q = Q * signs[..., None, :]
    R = R * signs[..., :, None]
    return Q, R


def lyapunov_qr(flow: SuspensionFlow, p: FlowPoint, T: float, frame=None) -> np.ndarray:
    """Base-tangent Lyapunov exponents per unit flow time, sorted descending."""
    if T <= 0:
        raise ValueError("T must be positive")
    Q = np.eye(2) if frame is None else _qr_positive(np.asarray(frame, dtype=float))[0]
    logs = np.zeros(2)
    for seg in FiberWalk(flow, np.array([p.x]), np.array([p.s]), T):
        if seg.crossed[0]:
            Q, R = _qr_positive(flow.base.jacobian(seg.x[0]) @ Q)
            logs += np.log(np.abs(np.diagonal(R)))
    return np.sort(logs / T)[::-1]


def lyapunov_qr_points(flow: SuspensionFlow, points: PointSet, T: float) -> np.ndarray:
    """Batch version of :func:`lyapunov_qr`; returns an ``(N, 2)`` array."""
    n = len(points)
    Q = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    logs = np.zeros((n, 2))
    for seg in FiberWalk(flow, points.x, points.s, T):
        idx = np.flatnonzero(seg.crossed)
        if idx.size:
            Qn, R = _qr_positive(flow.base.jacobian(seg.x[idx]) @ Q[idx])
            Q[idx] = Qn
            logs[idx] += np.log(np.abs(np.diagonal(R, axis1=-2, axis2=-1)))
    return -np.sort(-logs / T, axis=1)


# ---------------------------------------------------------------------------
# asymptotic variance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarianceEstimate:
    value: float
    stderr: float
    degenerate: bool
    T: float
    N: int


def variance_sigma2(flow: SuspensionFlow, u, T: float, N: int, seed: int, points: PointSet | None = None):
    """Estimate ``lim (1/T) E[(int_0^T (u - chi))^2]`` under the volume.

    Uses the increment ``(E[I_{2T}^2] - E[I_T^2]) / T``, which cancels the
    bounded boundary terms that dominate ``E[I_T^2] / T`` when ``u`` is
    close to a coboundary. The degeneracy flag is raised when the estimate
    does not exceed three standard errors.
    """
    if T < 100:
        raise ValueError("T must be >= 100")
    chi = flow.chi(u)
    if _constant_value(u) is not None:
        return VarianceEstimate(0.0, 0.0, True, T, N)
    centered = u + (-chi)
    pts = sample_volume(flow, seed, N) if points is None else points
    first = integrate_points(flow, centered, pts, T)
    second = integrate_points(flow, centered, evolve_points(flow, pts, T), T)
    incr = ((first + second) ** 2 - first**2) / T
    value = float(np.mean(incr))
    stderr = float(np.std(incr, ddof=1) / math.sqrt(len(incr)))
    return VarianceEstimate(value, stderr, bool(value <= 3.0 * stderr), T, len(pts))
