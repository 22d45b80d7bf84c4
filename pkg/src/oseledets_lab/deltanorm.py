"""Rescaled max-norms for triangular matrices, Gronwall bounds and growth certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import PointSet, SuspensionFlow, metric_log_norm
from .errors import BoundError, ShapeError
from .perron import TriangularTrajectory, abs_rate_integral, bundle_segments


@dataclass(frozen=True)
class DeltaNorm:
    """``||v||_delta = ||D^{-1} v||_inf`` with ``D = diag(1, e, ..., e^{k-1})``."""

    k: int
    beta: float
    delta: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")

    @property
    def eps_scale(self) -> float:
        if self.k == 1 or self.beta == 0:
            return 1.0
        return min(1.0, self.delta / ((self.k - 1) * self.beta))

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.eps_scale ** np.arange(self.k))

    @property
    def equivalence(self) -> tuple:
        """``(K, c)`` with ``||v||_inf / K <= ||v||_delta <= c ||v||_inf``."""
        return 1.0, self.eps_scale ** (1 - self.k)


def vector_norm_delta(dn: DeltaNorm, v) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.max(np.abs(v / np.diag(dn.D))))


def _rescaled(dn: DeltaNorm, B: np.ndarray) -> np.ndarray:
    # (D^{-1} B D)_ij = b_ij e^{j-i}
    e = dn.eps_scale
    p = np.arange(dn.k)
    return B * e ** (p[None, :] - p[:, None]).astype(float)


def op_norm_delta(dn: DeltaNorm, B, check: bool = True) -> float:
    """Operator norm induced by ``||.||_delta``: max absolute row sum of ``D^{-1} B D``."""
    B = np.asarray(B, dtype=float)
    if B.shape != (dn.k, dn.k):
        raise ShapeError(f"expected a {dn.k}x{dn.k} matrix")
    if check:
        if np.any(np.tril(B, -1) != 0):
            raise ShapeError("B must be upper triangular")
        off = np.abs(np.triu(B, 1))
        if off.size and off.max() > dn.beta:
            raise BoundError(f"off-diagonal entry {off.max():.6g} exceeds beta={dn.beta:.6g}")
    return float(np.max(np.sum(np.abs(_rescaled(dn, B)), axis=1)))


def op_norm_delta_batch(dn: DeltaNorm, Bs: np.ndarray) -> np.ndarray:
    """Vectorized :func:`op_norm_delta` for a stack of triangular matrices (no checks)."""
    e = dn.eps_scale
    p = np.arange(dn.k)
    scale = e ** (p[None, :] - p[:, None]).astype(float)
    return np.max(np.sum(np.abs(Bs * scale), axis=-1), axis=-1)


def spectral_radius_triangular(B) -> float:
    return float(np.max(np.abs(np.diagonal(np.asarray(B)))))


def random_triangular(rng: np.random.Generator, k: int, beta: float, n: int, diag_scale: float = 3.0):
    """``n`` random upper-triangular matrices with off-diagonals in ``[-beta, beta]``."""
    B = np.triu(rng.uniform(-beta, beta, (n, k, k)), 1)
    idx = np.arange(k)
    B[:, idx, idx] = rng.uniform(-diag_scale, diag_scale, (n, k))
    return B


def audit_norm_bound(rng: np.random.Generator, k: int, beta: float, delta: float, n: int = 10_000) -> int:
    """Number of random matrices with ``||B||_delta > r(B) + delta``."""
    dn = DeltaNorm(k, beta, delta)
    Bs = random_triangular(rng, k, beta, n)
    norms = op_norm_delta_batch(dn, Bs)
    radii = np.max(np.abs(np.diagonal(Bs, axis1=1, axis2=2)), axis=1)
    return int(np.sum(norms > radii + delta))


@dataclass(frozen=True)
class GronwallCertificate:
    lhs: float
    rhs: float
    passed: bool
    log_lhs: float
    log_rhs: float


def gronwall_certificate(traj: TriangularTrajectory, dn: DeltaNorm, T: float) -> GronwallCertificate:
    """Compare ``||Z(T)||_delta`` with ``exp(delta T + int_0^T r(B))``."""
    i = traj.node(T)
    if traj.Z is not None:
        lhs = op_norm_delta(dn, traj.Z[i], check=False)
        log_lhs = math.log(lhs) if lhs > 0 else -math.inf
    else:
        # one-dimensional and impulsive trajectories: Z is diagonal in integrated form
        log_lhs = float(np.max(traj.diag_integrals[i]))
    log_rhs = dn.delta * T + float(traj.r_integral[i])
    passed = log_lhs <= log_rhs + math.log1p(1e-6)
    return GronwallCertificate(_safe_exp(log_lhs), _safe_exp(log_rhs), bool(passed), log_lhs, log_rhs)


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 700 else math.inf


@dataclass
class TheoremBReport:
    delta: float
    C_hat: float
    log_C_profile: np.ndarray  # max over samples of the log ratio, per horizon
    T_grid: np.ndarray
    u_values: np.ndarray
    mean_u: float
    N: int

    def non_increasing_tail(self, fraction: float = 0.5, tol: float = 1e-12) -> bool:
        """Whether the running certificate is non-increasing over the last part of the grid."""
        start = int(len(self.T_grid) * (1 - fraction))
        tail = self.log_C_profile[start:]
        return bool(np.all(np.diff(tail) <= tol))


def theoremB_certificate(flow: SuspensionFlow, samples: PointSet, delta: float, T_grid, kind: str = "unstable"):
    """Empirical constant in ``||T^E f_t|| <= C e^{delta t} exp(int_0^t u)`` with ``u = r(B)``.

    ``C_hat`` is the largest ratio over samples and ``t`` in ``[0, T]``; the
    profile reports that running maximum at every horizon of ``T_grid``.
    Along a fiber the log ratio has derivative ``b - |b| - delta < 0``, so its
    supremum over ``[0, T]`` is attained at ``t = 0`` or at a segment end.
    """
    from .perron import bundle_u_values

    T_grid = np.sort(np.asarray(T_grid, dtype=float))
    n = len(samples)
    u_int = np.zeros(n)
    node_t, node_best = [0.0], [0.0]
    for bs in bundle_segments(flow, samples, float(T_grid[-1]), kind):
        seg = bs.seg
        live = seg.length > 0
        log_end = bs.log_a + metric_log_norm(bs.mw, bs.sig_b) - bs.phi_a
        u_int = u_int + abs_rate_integral(bs)
        ratio = np.where(live, log_end - delta * (seg.t0 + seg.length) - u_int, -np.inf)
        node_t.append(seg.t0 + seg.length)
        node_best.append(ratio)
    ends = np.concatenate([np.atleast_1d(np.asarray(t, dtype=float)) * np.ones(n) for t in node_t])
    vals = np.concatenate([np.atleast_1d(np.asarray(v, dtype=float)) * np.ones(n) for v in node_best])
    profile = np.empty(len(T_grid))
    for j, T in enumerate(T_grid):
        profile[j] = float(np.max(vals[ends <= T * (1 + 1e-15)]))
    u_values = bundle_u_values(flow, samples, kind)
    return TheoremBReport(
        delta, math.exp(float(profile[-1])), profile, T_grid, u_values, float(np.mean(u_values)), n
    )
