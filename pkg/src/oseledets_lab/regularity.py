"""Regularity functions of cocycles and Lyapunov bundles, and the inequalities between them.

For an integrand ``u`` with mean ``chi`` and a level ``c = chi + eps`` the
running integral ``g(t) = int_0^t (u(f_s p) - c) ds`` is scanned over
``[0, T_max]``; ``log D_eps = max g`` and ``T_eps`` is the earliest time where
the maximum is reached. Suprema are exact: between roof crossings ``g`` is
linear for fiber-constant integrands, and for the other integrands every
interior local maximum is solved for explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy.optimize import brentq

from .dynamics import (
    FiberWalk,
    FlowPoint,
    PointSet,
    SuspensionFlow,
    metric_log_norm,
    metric_rate_root,
    segment_integral,
)
from .errors import SkippedTruncated
from .perron import BundleSegment, abs_rate_integral, bundle_segments

TIE_TOL = 1e-12
TRUNCATION_TOL = 1e-6


@dataclass(frozen=True)
class RegularityRecord:
    point: FlowPoint | None
    epsilon: float
    horizon: float
    log_D: float
    T_eps: float
    truncated: bool

    @property
    def D(self) -> float:
        return math.exp(self.log_D) if self.log_D < 700 else math.inf


@dataclass
class RegularityBatch:
    """Regularity values for ``m`` levels and ``N`` points from one pass over the orbits."""

    eps: np.ndarray  # (m,)
    horizon: float
    log_D: np.ndarray  # (m, N)
    T_eps: np.ndarray  # (m, N)
    truncated: np.ndarray  # (m, N)
    points: PointSet | None = None

    def record(self, i: int, j: int) -> RegularityRecord:
        p = self.points[j] if self.points is not None else None
        return RegularityRecord(p, float(self.eps[i]), self.horizon, float(self.log_D[i, j]),
                                float(self.T_eps[i, j]), bool(self.truncated[i, j]))

    def truncated_fraction(self) -> np.ndarray:
        return self.truncated.mean(axis=1)


# ---------------------------------------------------------------------------
# integrands
# ---------------------------------------------------------------------------


class _Integrand:
    """Supplies, segment by segment, the integral and interior maxima of ``g``."""

    sup: float
    chi: float

    def steps(self, points: PointSet, T_max: float) -> Iterator:
        raise NotImplementedError

    @staticmethod
    def segment(step):
        """(t0, length, integral over the segment)."""
        raise NotImplementedError

    def interior(self, step, levels):
        """Iterable of ``(dt, dS)`` arrays of shape (m, N): interior local maxima of ``g``."""
        return ()


class ObservableIntegrand(_Integrand):
    """A phase-space field along orbits of ``flow``.

    ``u`` is anything callable on base points with ``base_only`` true (an
    :class:`~oseledets_lab.dynamics.Observable`, a grid function, a smooth
    majorant) or a fiber-dependent :class:`Observable`.
    """

    def __init__(self, flow: SuspensionFlow, u, chi: float | None = None, sup: float | None = None):
        self.flow = flow
        self.u = u
        self.chi = flow.chi(u) if chi is None else float(chi)
        self.sup = float(u.sup_norm if sup is None else sup)
        self.base_only = getattr(u, "base_only", True)

    def steps(self, points, T_max):
        return iter(FiberWalk(self.flow, points.x, points.s, T_max))

    def segment(self, seg):
        return seg.t0, seg.length, segment_integral(self.u, seg)

    def interior(self, seg, levels, nodes: int = 33, iters: int = 60):
        if self.base_only:
            return ()
        # sign changes of u - level from + to - along the fiber, refined by bisection
        sig_a = seg.s0 / seg.roof
        sig_b = (seg.s0 + seg.length) / seg.roof
        grid = np.linspace(0.0, 1.0, nodes)
        sig = sig_a[None, :] + grid[:, None] * (sig_b - sig_a)[None, :]
        vals = np.stack([self.u(seg.x, s) for s in sig])  # (nodes, N)
        out = []
        n = vals.shape[1]
        for c in range(len(levels)):
            d = vals - levels[c]
            rows, cols = np.nonzero((d[:-1] > 0) & (d[1:] <= 0))
            if rows.size == 0:
                continue
            # all crossings of this level in one vectorized bisection
            x = seg.x[cols]
            lo, hi = sig[rows, cols], sig[rows + 1, cols]
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                pos = self.u(x, mid) - levels[c] > 0
                lo = np.where(pos, mid, lo)
                hi = np.where(pos, hi, mid)
            dt_all = (0.5 * (lo + hi) - sig_a[cols]) * seg.roof[cols]
            # k-th crossing of each column goes into the k-th candidate array
            order = np.lexsort((rows, cols))
            cols, dt_all = cols[order], dt_all[order]
            rank = np.arange(len(cols)) - np.searchsorted(cols, cols)
            for r in range(int(rank.max()) + 1):
                sel = rank == r
                dt = np.full(n, np.nan)
                dt[cols[sel]] = dt_all[sel]
                live = ~np.isnan(dt)
                clipped = seg._replace(length=np.where(live, dt, 0.0))
                dS = segment_integral(self.u, clipped)
                cand_t = np.full((len(levels), n), np.nan)
                cand_S = np.full_like(cand_t, np.nan)
                cand_t[c], cand_S[c] = dt, np.where(live, dS, np.nan)
                out.append((cand_t, cand_S))
        return out


class BundleAbsRate(_Integrand):
    """``u = r(B) = |b|`` for a one-dimensional bundle in the suspension metric."""

    def __init__(self, flow: SuspensionFlow, chi: float, kind: str = "unstable", sup: float | None = None):
        self.flow = flow
        self.kind = kind
        self.chi = float(chi)
        self.sup = math.inf if sup is None else float(sup)

    def steps(self, points, T_max):
        return bundle_segments(self.flow, points, T_max, self.kind)

    def segment(self, bs: BundleSegment):
        return bs.seg.t0, bs.seg.length, abs_rate_integral(bs)

    def interior(self, bs: BundleSegment, levels):
        # |b| decreases while b < 0, so g has a local maximum where b = -level
        seg = bs.seg
        out = []
        for c, level in enumerate(levels):
            if level <= 0:
                continue
            root = metric_rate_root(bs.mw, -level * seg.roof)
            ok = (root > bs.sig_a) & (root < bs.sig_b) & (seg.length > 0)
            if not ok.any():
                continue
            clipped = BundleSegment(seg, bs.mw, bs.sig_a, np.where(ok, root, bs.sig_a), bs.log_a, bs.phi_a)
            cand_t = np.full((len(levels), len(root)), np.nan)
            cand_S = np.full_like(cand_t, np.nan)
            cand_t[c] = np.where(ok, (root - bs.sig_a) * seg.roof, np.nan)
            cand_S[c] = abs_rate_integral(clipped)
            out.append((cand_t, cand_S))
        return out


class BundleLogNorm(_Integrand):
    """Signed rate ``b``: its running integral is ``log ||T^E f_t||``.

    Along a fiber ``b`` is non-decreasing, so ``g`` is convex there and
    segment ends carry every local maximum.
    """

    def __init__(self, flow: SuspensionFlow, chi: float, kind: str = "unstable"):
        self.flow = flow
        self.kind = kind
        self.chi = float(chi)
        self.sup = math.inf

    def steps(self, points, T_max):
        return bundle_segments(self.flow, points, T_max, self.kind)

    def segment(self, bs: BundleSegment):
        dS = metric_log_norm(bs.mw, bs.sig_b) - bs.phi_a
        return bs.seg.t0, bs.seg.length, np.where(bs.seg.length > 0, dS, 0.0)


# ---------------------------------------------------------------------------
# scanning
# ---------------------------------------------------------------------------


def scan(integrand: _Integrand, points: PointSet, eps, T_max: float) -> RegularityBatch:
    """Regularity values for every level ``chi + eps`` from a single pass over the orbits."""
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if np.any(eps <= 0):
        raise ValueError("eps must be positive")
    if T_max <= 0:
        raise ValueError("T_max must be positive")
    levels = integrand.chi + eps
    m, n = len(eps), len(points)
    S = np.zeros(n)
    best = np.zeros((m, n))
    best_t = np.zeros((m, n))
    t_end = np.zeros(n)
    lv = levels[:, None]

    def offer(t, g):
        nonlocal best, best_t
        better = g > best + TIE_TOL
        best = np.where(better, g, best)
        best_t = np.where(better, t, best_t)

    for step in integrand.steps(points, T_max):
        t0, length, dS = integrand.segment(step)
        live = length > 0
        for cand_t, cand_S in integrand.interior(step, levels):
            ok = np.isfinite(cand_t) & live
            tc = t0 + np.nan_to_num(cand_t)
            g = np.where(ok, S + np.nan_to_num(cand_S) - lv * tc, -np.inf)
            offer(tc, g)
        t_end = np.where(live, t0 + length, t_end)
        S = np.where(live, S + dS, S)
        offer(t_end * np.ones((m, 1)), np.where(live, S - lv * t_end, -np.inf))

    g_final = S - lv * t_end
    truncated = g_final >= best - TRUNCATION_TOL
    # D = 1 whenever the level reaches the sup-norm bound
    flat = (eps >= integrand.sup - integrand.chi)[:, None]
    best = np.where(flat, 0.0, best)
    best_t = np.where(flat, 0.0, best_t)
    truncated = np.where(flat, False, truncated)
    return RegularityBatch(eps, float(T_max), best, best_t, truncated, points)


def regularity_D_batch(flow: SuspensionFlow, u, points: PointSet, eps, T_max: float,
                       chi: float | None = None) -> RegularityBatch:
    return scan(ObservableIntegrand(flow, u, chi), points, eps, T_max)


def regularity_D(flow: SuspensionFlow, u, p: FlowPoint | None, eps: float, T_max: float) -> RegularityRecord:
    """``D_eps`` and ``T_eps`` at one point (``u`` may be a :class:`SyntheticIntegrand`)."""
    if isinstance(u, SyntheticIntegrand):
        return u.record(eps, T_max)
    batch = regularity_D_batch(flow, u, PointSet.of(p), eps, T_max)
    return batch.record(0, 0)


def regularity_R_batch(flow: SuspensionFlow, points: PointSet, eps, T_max: float, chi: float,
                       kind: str = "unstable") -> RegularityBatch:
    """``log R_eps = sup_t (log ||T^E f_t|| - (chi + eps) t)``."""
    return scan(BundleLogNorm(flow, chi, kind), points, eps, T_max)


def regularity_R(flow: SuspensionFlow, p: FlowPoint, eps: float, T_max: float, chi: float,
                 kind: str = "unstable") -> RegularityRecord:
    return regularity_R_batch(flow, PointSet.of(p), eps, T_max, chi, kind).record(0, 0)


# ---------------------------------------------------------------------------
# synthetic integrands with closed-form antiderivatives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticIntegrand:
    """Integrand given directly as a function of time along one orbit.

    ``f`` is the integrand, ``F`` an antiderivative; ``sup`` bounds ``|f|``
    and ``chi`` is its mean.
    """

    f: Callable
    F: Callable
    sup: float
    chi: float = 0.0
    resolution: float = 0.01

    @classmethod
    def cosine(cls) -> "SyntheticIntegrand":
        return cls(np.cos, np.sin, 1.0, 0.0)

    def _downcrossings(self, level: float, T_max: float) -> list:
        n = max(2, int(math.ceil(T_max / self.resolution)) + 1)
        t = np.linspace(0.0, T_max, n)
        d = self.f(t) - level
        roots = []
        for j in np.flatnonzero((d[:-1] > 0) & (d[1:] <= 0)):
            if d[j + 1] == 0:
                roots.append(float(t[j + 1]))
            else:
                roots.append(brentq(lambda s: float(self.f(s)) - level, t[j], t[j + 1], xtol=1e-15, rtol=1e-15))
        return roots

    def scan(self, eps, T_max: float):
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        out = []
        for e in eps:
            level = self.chi + e
            if e >= self.sup - self.chi:
                out.append((0.0, 0.0, False))
                continue
            cands = self._downcrossings(level, T_max)
            best, best_t = 0.0, 0.0
            F0 = float(self.F(0.0))
            for t in cands + [T_max]:
                g = float(self.F(t)) - F0 - level * t
                if g > best + TIE_TOL:
                    best, best_t = g, t
            g_end = float(self.F(T_max)) - F0 - level * T_max
            out.append((best, best_t, g_end >= best - TRUNCATION_TOL))
        return out

    def record(self, eps: float, T_max: float) -> RegularityRecord:
        log_D, T, trunc = self.scan(eps, T_max)[0]
        return RegularityRecord(None, float(eps), float(T_max), log_D, T, bool(trunc))


# ---------------------------------------------------------------------------
# inequality audits
# ---------------------------------------------------------------------------


@dataclass
class Audit:
    """Pointwise comparison ``lhs <= rhs + slack`` over a batch."""

    lhs: np.ndarray
    rhs: np.ndarray
    skipped: np.ndarray
    slack: float = 1e-9

    @property
    def violations(self) -> int:
        return int(np.sum((self.lhs > self.rhs + self.slack) & ~self.skipped))

    @property
    def checked(self) -> int:
        return int(np.sum(~self.skipped))

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _levels_batch(u, flow, points, eps, T_max, chi=None):
    if isinstance(u, SyntheticIntegrand):
        res = u.scan(eps, T_max)
        arr = np.array(res, dtype=float).T[:, :, None]
        return RegularityBatch(np.atleast_1d(eps), T_max, arr[0], arr[1], arr[2].astype(bool))
    return regularity_D_batch(flow, u, points, eps, T_max, chi)


def audit_down(flow, u, points, eta: float, eps: float, T_max: float) -> Audit:
    """``log D_eta <= log D_eps + (eps - eta) T_eta``."""
    if not 0 < eta < eps:
        raise ValueError("need 0 < eta < eps")
    b = _levels_batch(u, flow, points, [eta, eps], T_max)
    lhs = b.log_D[0]
    rhs = b.log_D[1] + (eps - eta) * b.T_eps[0]
    return Audit(lhs, rhs, b.truncated.any(axis=0))


def check_down(flow, u, p, eta: float, eps: float, T_max: float):
    pts = None if isinstance(u, SyntheticIntegrand) else PointSet.of(p)
    a = audit_down(flow, u, pts, eta, eps, T_max)
    if a.skipped[0]:
        raise SkippedTruncated("record truncated at the horizon")
    return float(a.lhs[0]), float(a.rhs[0]), a.passed


def partition_levels(u_sup: float, chi: float, eps: float, N: int) -> np.ndarray:
    """``eps = eps_0 < ... < eps_N = ||u|| - chi`` with uniform gaps."""
    top = u_sup - chi
    if not 0 < eps < top:
        raise ValueError("need 0 < eps < ||u|| - chi")
    return eps + (top - eps) * np.arange(N + 1) / N


def audit_product(flow, u, points, eps: float, N: int, T_max: float, chi=None) -> Audit:
    """``log D_eps <= delta * sum_{i<N} T_{eps_i}`` for the uniform partition."""
    chi_v = u.chi if isinstance(u, SyntheticIntegrand) else (flow.chi(u) if chi is None else chi)
    sup = u.sup if isinstance(u, SyntheticIntegrand) else u.sup_norm
    levels = partition_levels(sup, chi_v, eps, N)
    gap = levels[1] - levels[0]
    b = _levels_batch(u, flow, points, levels[:-1], T_max, chi)
    lhs = b.log_D[0]
    rhs = gap * b.T_eps.sum(axis=0)
    return Audit(lhs, rhs, b.truncated.any(axis=0))


def product_bound(flow, u, p, eps: float, N: int, T_max: float):
    pts = None if isinstance(u, SyntheticIntegrand) else PointSet.of(p)
    a = audit_product(flow, u, pts, eps, N, T_max)
    if a.skipped[0]:
        raise SkippedTruncated("record truncated at the horizon")
    return float(a.lhs[0]), float(a.rhs[0]), a.passed


@dataclass
class RemarkCheck:
    log_D: np.ndarray
    quadrature: np.ndarray  # trapezoid rule of T_eta over the grid
    left: np.ndarray  # left Riemann sum (upper bound since T is non-increasing)
    right: np.ndarray  # right Riemann sum (lower bound)
    skipped: np.ndarray

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(self.log_D - self.quadrature)

    @property
    def envelope(self) -> np.ndarray:
        return 0.5 * (self.left - self.right)

    def within_envelope(self, slack: float = 1e-9) -> np.ndarray:
        return (self.log_D >= self.right - slack) & (self.log_D <= self.left + slack)


def remark_identity(flow, u, points, eps: float, n_nodes: int, T_max: float, chi=None) -> RemarkCheck:
    """Compare ``log D_eps`` with ``int_eps^{||u|| - chi} T_eta d eta`` on a uniform grid."""
    chi_v = u.chi if isinstance(u, SyntheticIntegrand) else (flow.chi(u) if chi is None else chi)
    sup = u.sup if isinstance(u, SyntheticIntegrand) else u.sup_norm
    top = sup - chi_v
    if not 0 < eps <= top:
        raise ValueError("need 0 < eps <= ||u|| - chi")
    if eps == top:
        z = np.zeros(1 if points is None else len(points))
        return RemarkCheck(z, z, z, z, np.zeros(len(z), dtype=bool))
    grid = np.linspace(eps, top, n_nodes)
    b = _levels_batch(u, flow, points, grid, T_max, chi)
    T = b.T_eps  # (n_nodes, N)
    h = np.diff(grid)[:, None]
    left = np.sum(h * T[:-1], axis=0)
    right = np.sum(h * T[1:], axis=0)
    quad = 0.5 * (left + right)
    return RemarkCheck(b.log_D[0], quad, left, right, b.truncated.any(axis=0))


@dataclass
class ChainCheck:
    log_R: np.ndarray
    log_rhs: np.ndarray  # log C_delta + log D_{eps - delta}
    audit: Audit


def theoremC_chain(flow: SuspensionFlow, points: PointSet, eps: float, delta: float, T_max: float,
                   chi: float, log_C_delta: float = 0.0, kind: str = "unstable") -> ChainCheck:
    """``R_eps <= C_delta D_{eps - delta}`` with ``D`` built from ``u = r(B)``."""
    if not 0 < delta < eps:
        raise ValueError("need 0 < delta < eps")
    R = regularity_R_batch(flow, points, [eps], T_max, chi, kind)
    D = scan(BundleAbsRate(flow, chi, kind), points, [eps - delta], T_max)
    lhs = R.log_D[0]
    rhs = log_C_delta + D.log_D[0]
    return ChainCheck(lhs, rhs, Audit(lhs, rhs, R.truncated[0] | D.truncated[0]))
