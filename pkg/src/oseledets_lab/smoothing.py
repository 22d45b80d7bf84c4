"""Smooth majorants of bounded grid functions with a small mean gap.

The majorant of a piecewise-constant function ``g`` on an ``n x n`` grid is

    u~ = a + F_M * w,

where ``w`` is the cell-wise sup of ``g`` over an l-infinity ball of ``m``
cells, ``F_M`` the product Fejer kernel of order ``M`` and ``a`` a margin.
Because ``F_M >= 0`` has unit mass, at any ``x``

    F_M * w (x) >= g(x) - (1 - m_in) * osc(g),

with ``m_in`` the kernel mass inside the ball, so ``a >= (1 - m_in) osc(g)``
certifies ``u~ >= g`` everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter

from .dynamics import Observable, RoofFunction
from .errors import BudgetInfeasible, ShapeError


@dataclass(frozen=True)
class GridFunction:
    """Piecewise-constant function on ``T^2``: ``g(x) = values[floor(n x1), floor(n x2)]``."""

    values: np.ndarray
    base_only: bool = field(default=True, init=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ShapeError("grid function needs an n x n array")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def oscillation(self) -> float:
        return float(self.values.max() - self.values.min())

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.minimum((x * self.n).astype(np.int64), self.n - 1) % self.n
        return self.values[idx[..., 0], idx[..., 1]]

    def __add__(self, c):
        if not isinstance(c, (int, float)):
            return NotImplemented
        return GridFunction(self.values + c)

    def mean(self, roof: RoofFunction | None = None, sub: int = 8) -> float:
        if roof is None or roof.is_constant:
            return float(self.values.mean())
        # roof-weighted mean: cell averages of r by a midpoint rule on sub x sub nodes per cell
        n = self.n
        g = (np.arange(n * sub) + 0.5) / (n * sub)
        X = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)
        r = roof(X).reshape(n, sub, n, sub).mean(axis=(1, 3))
        return float(np.sum(self.values * r) / np.sum(r))

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))

    @classmethod
    def sample(cls, f, n: int) -> "GridFunction":
        """Cell values of ``f`` at the lower-left cell corners."""
        g = np.arange(n) / n
        X = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)
        return cls(f(X))

    @classmethod
    def box_indicator(cls, n: int = 64, lo: float = 0.25, hi: float = 0.75, height: float = 1.0) -> "GridFunction":
        c = (np.arange(n) + 0.5) / n
        inside = (c >= lo) & (c < hi)
        return cls(height * np.outer(inside, inside).astype(float))


def fejer_inside_mass(M: int, rho: float) -> float:
    """Mass of the 1-D Fejer kernel of order ``M`` on ``[-rho, rho]``."""
    if rho >= 0.5:
        return 1.0
    j = np.arange(1, M)
    return float(2 * rho + 2 * np.sum((1 - j / M) * np.sin(2 * math.pi * j * rho) / (math.pi * j)))


def _cell_factor(n: int, k: np.ndarray) -> np.ndarray:
    """Fourier factor of the indicator of one cell ``[0, 1/n)`` times ``n``."""
    z = 2j * math.pi * k / n
    out = np.ones(len(k), dtype=complex)
    nz = k != 0
    out[nz] = (1 - np.exp(-z[nz])) / z[nz]
    return out


@dataclass(frozen=True)
class SmoothMajorant:
    """``u~(x) = offset + sum_i P_i(x1) Q_i(x2)`` with trigonometric ``P_i, Q_i`` of degree < M."""

    offset: float
    freqs: np.ndarray  # (2M - 1,) integer frequencies
    P: np.ndarray  # (rank, 2M - 1) complex coefficients in x1
    Q: np.ndarray  # (rank, 2M - 1) complex coefficients in x2
    M: int
    rho: float
    margin: float
    gap: float  # exact mean gap against the input grid function
    source: GridFunction | None = None
    base_only: bool = True

    def _eval_1d(self, C, x):
        # sum_k c_k e^{2 pi i k x}, folded into real arithmetic over k >= 0
        pos = self.freqs >= 0
        k = self.freqs[pos]
        c = C[:, pos]
        ph = 2 * math.pi * np.multiply.outer(x, k)
        cos, sin = np.cos(ph), np.sin(ph)
        w = np.where(k == 0, 1.0, 2.0)
        return np.einsum("...k,rk->r...", cos, c.real * w) - np.einsum("...k,rk->r...", sin, c.imag * w)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self._eval_1d(self.P, x[..., 0])
        q = self._eval_1d(self.Q, x[..., 1])
        return self.offset + np.sum(p * q, axis=0)

    def on_grid(self, m: int) -> np.ndarray:
        """Values on the ``m x m`` grid ``(i/m, j/m)``."""
        g = np.arange(m) / m
        p = self._eval_1d(self.P, g)
        q = self._eval_1d(self.Q, g)
        return self.offset + np.einsum("ri,rj->ij", p, q)

    @property
    def sup_norm(self) -> float:
        bound = abs(self.offset) + float(np.sum(np.sum(np.abs(self.P), axis=1) * np.sum(np.abs(self.Q), axis=1)))
        return bound

    def mean(self, roof: RoofFunction | None = None) -> float:
        if roof is not None and not roof.is_constant:
            raise ValueError("majorant means are computed for constant roofs only")
        z = int(np.flatnonzero(self.freqs == 0)[0])
        return float(self.offset + np.sum(self.P[:, z] * self.Q[:, z]).real)


@dataclass(frozen=True)
class MajorantPlan:
    M: int
    m_cells: int
    margin: float
    predicted_gap: float


def _dilate(values: np.ndarray, m: int) -> np.ndarray:
    if m == 0:
        return values.copy()
    return maximum_filter(values, size=2 * m + 1, mode="wrap")


def _plan(g: GridFunction, m: int, M: int, rank_err: float, safety: float) -> MajorantPlan:
    n = g.n
    m1 = fejer_inside_mass(M, m / n)
    margin = g.oscillation * (1 - m1 * m1) + rank_err + safety
    w = _dilate(g.values, m)
    gap = float(w.mean() - g.values.mean()) + margin
    return MajorantPlan(M, m, margin, gap)


def smooth_majorant(g, delta: float, max_order: int = 4096, orders=None, rank_tol: float = 1e-13):
    """Smooth ``u~ >= g`` with mean gap below ``delta``.

    A trigonometric ``g`` (an :class:`Observable`) is already smooth and gets
    a tiny constant margin. For grid functions the dilation radius and kernel
    order are searched over a ladder and the cheapest admissible pair is used.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if isinstance(g, Observable):
        a = min(1e-9, delta / 2)
        return g + a
    if not isinstance(g, GridFunction):
        g = GridFunction(np.asarray(g, dtype=float))
    n = g.n
    safety = 1e-12 * max(1.0, g.sup_norm)
    if orders is None:
        orders = [2**j for j in range(2, 16) if 2**j <= max_order]

    values = g.values
    if g.oscillation == 0:
        return _build(g, 0, orders[0], safety, np.zeros((0, n)), np.zeros((0, n)), float(values.flat[0]))

    # dilation and low-rank split depend only on m; the kernel order only moves the margin
    splits = []
    for m in range(0, n // 2 + 1):
        w = _dilate(values, m)
        U, s, Vt = np.linalg.svd(w)
        keep = s > rank_tol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
        dropped = float(np.sum(s[~keep] * np.abs(U[:, ~keep]).max(axis=0) * np.abs(Vt[~keep]).max(axis=1)))
        splits.append((w, (U[:, keep] * s[keep]).T, Vt[keep], dropped))

    best = None
    for M in orders:
        for m, (w, left, right, dropped) in enumerate(splits):
            plan = _plan(g, m, M, dropped, safety)
            if best is None or plan.predicted_gap < best.predicted_gap:
                best = plan
            if plan.predicted_gap < delta:
                return _build(g, m, M, plan.margin, left, right, 0.0)
    raise BudgetInfeasible(f"smallest achievable mean gap {best.predicted_gap:.4g} exceeds {delta}",
                           achieved_gap=best.predicted_gap)


def _build(g, m, M, margin, left, right, const):
    n = g.n
    k = np.arange(-(M - 1), M)
    fej = 1 - np.abs(k) / M
    cell = _cell_factor(n, k)
    # Fourier coefficient of a step vector v on n cells: (1/n) sum_c v_c e^{-2 pi i k c/n} * cell factor
    idx = np.arange(n)
    E = np.exp(-2j * math.pi * np.outer(idx, k) / n) / n  # (n, K)
    P = (left @ E) * cell * fej if len(left) else np.zeros((0, len(k)), dtype=complex)
    Q = (right @ E) * cell * fej if len(right) else np.zeros((0, len(k)), dtype=complex)
    offset = margin + const
    z = M - 1  # index of frequency 0
    gap = offset + float(np.sum(P[:, z] * Q[:, z]).real) - g.mean()
    return SmoothMajorant(offset, k, P, Q, M, m / n, margin, gap, g)


def verify_majorant(maj, g: GridFunction, factor: int = 2) -> tuple:
    """``(min(u~ - g), quadrature of u~ - g)`` on the ``factor * n`` grid."""
    m = factor * g.n
    pts = np.arange(m) / m
    X = np.stack(np.meshgrid(pts, pts, indexing="ij"), axis=-1)
    ut = maj.on_grid(m) if isinstance(maj, SmoothMajorant) else maj(X)
    diff = ut - g(X)
    return float(diff.min()), float(diff.mean())


def case2_reduction_check(flow, g, delta: float, eps: float, samples, T_max: float, majorant=None):
    """``log D^g_eps <= log D^{u~}_{eps - delta}`` at every sample."""
    from .regularity import Audit, regularity_D_batch

    if not 0 < delta < eps:
        raise ValueError("need 0 < delta < eps")
    ut = smooth_majorant(g, delta) if majorant is None else majorant
    chi_g = flow.chi(g)
    chi_u = flow.chi(ut)
    if chi_u - chi_g >= delta:
        raise BudgetInfeasible(f"mean gap {chi_u - chi_g:.4g} is not below delta", achieved_gap=chi_u - chi_g)
    lhs = regularity_D_batch(flow, g, samples, [eps], T_max, chi_g)
    rhs = regularity_D_batch(flow, ut, samples, [eps - delta], T_max, chi_u)
    return Audit(lhs.log_D[0], rhs.log_D[0], lhs.truncated[0] | rhs.truncated[0]), ut
