"""Pressure curves, rate functions and large-deviation tails.

Pressures of the unperturbed base map are computed from periodic points,
which are enumerated exactly: ``Fix(A^n)`` is the set of rational points
``M^{-1} m mod 1`` with ``M = A^n - I``, and their orbits are iterated on
integer numerators so no rounding accumulates along an orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .dynamics import FiberWalk, Observable, PointSet, SuspensionFlow, sample_volume, segment_integral
from .errors import (
    AllZeroCounts,
    BracketFailure,
    DegeneratePeriod,
    DegenerateProfile,
    NonConvexInput,
)

CAT = ((2, 1), (1, 1))


# ---------------------------------------------------------------------------
# periodic points
# ---------------------------------------------------------------------------


def _matpow(A, n):
    R = np.eye(2, dtype=object)
    M = np.array(A, dtype=object)
    for _ in range(n):
        R = R.dot(M)
    return R


def _column_hermite(M):
    """Unimodular column operations turning ``M`` into ``[[a, 0], [b, c]]`` with a, c > 0."""
    (p, q), (r, s) = [[int(v) for v in row] for row in M]
    # extended Euclid on the first row acting on columns
    c0, c1 = (p, r), (q, s)
    while c1[0] != 0:
        k = c0[0] // c1[0]
        c0, c1 = c1, (c0[0] - k * c1[0], c0[1] - k * c1[1])
    if c0[0] < 0:
        c0 = (-c0[0], -c0[1])
    if c1[1] < 0:
        c1 = (-c1[0], -c1[1])
    return c0[0], c0[1], c1[1]


@dataclass(frozen=True)
class PeriodicPoints:
    """``Fix(A^n)`` as integer numerators over a common denominator."""

    A: tuple
    n: int
    numerators: np.ndarray  # (count, 2) int64
    denominator: int

    @property
    def count(self) -> int:
        return len(self.numerators)

    @property
    def points(self) -> np.ndarray:
        return self.numerators / self.denominator

    def orbit(self):
        """Yield the numerators of ``A^j x`` for ``j = 0..n-1``."""
        A = np.array(self.A, dtype=np.int64)
        N = self.numerators
        for _ in range(self.n):
            yield N
            N = (N @ A.T) % self.denominator


def periodic_points(A=CAT, n: int = 1) -> PeriodicPoints:
    if n < 1:
        raise ValueError("period must be >= 1")
    An = _matpow(A, n)
    M = An - np.eye(2, dtype=object)
    d = int(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])
    if d == 0:
        raise DegeneratePeriod(f"det(A^{n} - I) = 0")
    a, _, c = _column_hermite(M)
    if a * c != abs(d):
        raise AssertionError("lattice index mismatch")
    adj = np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]], dtype=object)
    sign = 1 if d > 0 else -1
    i, j = np.meshgrid(np.arange(a, dtype=np.int64), np.arange(c, dtype=np.int64), indexing="ij")
    reps = np.stack([i.ravel(), j.ravel()], axis=1)
    adj64 = np.array([[int(v) % abs(d) for v in row] for row in adj * sign], dtype=np.int64)
    num = (reps @ adj64.T) % abs(d) if abs(d) < 2**31 else None
    if num is None:
        raise ValueError("period too large for int64 numerators")
    return PeriodicPoints(tuple(tuple(int(v) for v in r) for r in A), n, num, abs(d))


def fixed_points(A=CAT, n: int = 1) -> np.ndarray:
    """All ``x`` in ``[0, 1)^2`` with ``A^n x = x mod 1``."""
    return periodic_points(A, n).points


def birkhoff_sums(pp: PeriodicPoints, phi) -> np.ndarray:
    total = np.zeros(pp.count)
    for N in pp.orbit():
        total += phi(N / pp.denominator)
    return total


@dataclass
class PressureSequence:
    n: np.ndarray
    values: np.ndarray

    @property
    def value(self) -> float:
        return float(self.values[-1])

    @property
    def error(self) -> float:
        return float(abs(self.values[-1] - self.values[-2])) if len(self.values) > 1 else math.inf


def pressure_po(phi_hat, n_max: int = 12, A=CAT, n_min: int = 1) -> PressureSequence:
    """``(1/n) log sum_{Fix(A^n)} exp(S_n phi)`` for ``n = n_min..n_max``."""
    if n_max > 14:
        raise ValueError("n_max must be <= 14")
    if isinstance(phi_hat, (int, float)):
        c = float(phi_hat)
        phi_hat = Observable.constant(c)
    ns = np.arange(n_min, n_max + 1)
    vals = []
    for n in ns:
        pp = periodic_points(A, int(n))
        vals.append(float(logsumexp(birkhoff_sums(pp, phi_hat))) / n)
    return PressureSequence(ns, np.array(vals))


class _MapSums:
    """Birkhoff sums of phi and of the roof over ``Fix(A^n)``, reused across parameters."""

    def __init__(self, flow: SuspensionFlow, phi, n: int):
        if flow.base.kappa != 0:
            raise ValueError("periodic-orbit pressure needs an unperturbed base (kappa = 0)")
        pp = periodic_points(flow.base.A, n)
        self.n = n
        self.count = pp.count
        roof = flow.roof
        if getattr(phi, "base_only", True) is False:
            raise ValueError("periodic-orbit pressure needs a fiber-constant observable")
        self.S_phi = birkhoff_sums(pp, lambda x: roof(x) * phi(x))
        self.S_r = birkhoff_sums(pp, roof)
        self.constant_roof = roof.is_constant
        self.r0 = roof.r0

    def pressure_map(self, t: float, s: float) -> float:
        return float(logsumexp(t * self.S_phi - s * self.S_r)) / self.n

    def pressure_flow(self, t: float) -> float:
        if self.constant_roof:
            return self.pressure_map(t, 0.0) / self.r0
        p0 = math.log(self.count) / self.n
        bound = (abs(t) * float(np.max(np.abs(self.S_phi))) / self.n + p0) / float(np.min(self.S_r) / self.n)
        lo, hi = -bound - 1.0, bound + 1.0
        f = lambda s: self.pressure_map(t, s)
        if f(lo) * f(hi) > 0:
            raise BracketFailure(f"no sign change on [{lo:.4g}, {hi:.4g}]")
        return brentq(f, lo, hi, xtol=1e-12)


def pressure_flow(phi, flow: SuspensionFlow, n: int = 12) -> float:
    """Flow pressure: the root ``s`` of ``P_map(phi_hat - s r) = 0`` with ``phi_hat = r phi``."""
    return _MapSums(flow, phi, n).pressure_flow(1.0)


# ---------------------------------------------------------------------------
# pressure curves and rate functions
# ---------------------------------------------------------------------------


@dataclass
class PressureCurve:
    t: np.ndarray
    beta: np.ndarray
    method: str
    order: float
    meta: dict = field(default_factory=dict)

    def second_differences(self) -> np.ndarray:
        return self.beta[2:] - 2 * self.beta[1:-1] + self.beta[:-2]

    def is_convex(self, tol: float = 1e-6) -> bool:
        return bool(np.all(self.second_differences() >= -tol))

    def derivative_at_zero(self) -> float:
        i = int(np.argmin(np.abs(self.t)))
        return float((self.beta[i + 1] - self.beta[i - 1]) / (self.t[i + 1] - self.t[i - 1]))

    def second_derivative_at_zero(self) -> float:
        i = int(np.argmin(np.abs(self.t)))
        h = 0.5 * (self.t[i + 1] - self.t[i - 1])
        return float((self.beta[i + 1] - 2 * self.beta[i] + self.beta[i - 1]) / h**2)


def symmetric_grid(t_max: float = 2.0, step: float = 0.05) -> np.ndarray:
    m = int(round(t_max / step))
    return np.arange(-m, m + 1) * step


def beta_curve(phi, flow: SuspensionFlow, t_grid, n: int = 12) -> PressureCurve:
    """``beta(t) = P(t phi) - P(0)`` from periodic points of order ``n``."""
    t_grid = np.asarray(t_grid, dtype=float)
    sums = _MapSums(flow, phi, n)
    p0 = sums.pressure_flow(0.0)
    beta = np.array([sums.pressure_flow(t) - p0 for t in t_grid])
    beta[t_grid == 0] = 0.0
    return PressureCurve(t_grid, beta, "periodic-orbit", n)


def beta_mc(phi, flow: SuspensionFlow, t_grid, T: float, N: int, seed: int, integrals=None) -> PressureCurve:
    """Finite-time cumulant curve ``(1/T) log mean exp(t int_0^T phi)``."""
    t_grid = np.asarray(t_grid, dtype=float)
    if isinstance(phi, Observable) and all(tt.a == 0 and tt.b == 0 for tt in phi.terms):
        return PressureCurve(t_grid, phi.const * t_grid, "Monte-Carlo-CGF", T, {"N": N, "seed": seed})
    if integrals is None:
        from .cocycle import birkhoff_integrals

        integrals = birkhoff_integrals(flow, phi, sample_volume(flow, seed, N), T)
    I = np.asarray(integrals)
    beta = np.array([(logsumexp(t * I) - math.log(len(I))) / T for t in t_grid])
    beta[t_grid == 0] = 0.0
    return PressureCurve(t_grid, beta, "Monte-Carlo-CGF", T, {"N": len(I), "seed": seed})


@dataclass
class EntropyProfile:
    a: np.ndarray  # interior slopes beta'(t_j)
    H: np.ndarray  # rate values at a
    t: np.ndarray  # the matching t_j
    chi: float
    gamma_domain: tuple
    curve: PressureCurve
    sigma2: float | None = None
    degenerate: bool = False

    def H_at(self, a) -> np.ndarray:
        """Rate function ``max_j (a t_j - beta_j)`` inside the domain, ``inf`` outside."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        if self.degenerate:
            out = np.where(np.isclose(a, self.chi, rtol=0, atol=1e-12), 0.0, np.inf)
            return out
        t, b = self.curve.t, self.curve.beta
        vals = np.max(a[:, None] * t[None, :] - b[None, :], axis=1)
        lo, hi = self.gamma_domain
        return np.where((a >= lo) & (a <= hi), np.maximum(vals, 0.0), np.inf)

    def rho(self, a) -> np.ndarray:
        """Inverse of ``beta'`` by monotone interpolation."""
        return np.interp(a, self.a, self.t, left=np.nan, right=np.nan)

    def second_derivative_at_chi(self) -> float:
        """``H''(chi)`` from the slopes at the nodes adjacent to ``t = 0``."""
        i = int(np.argmin(np.abs(self.t)))
        return float((self.t[i + 1] - self.t[i - 1]) / (self.a[i + 1] - self.a[i - 1]))

    def is_convex(self, tol: float = 1e-9) -> bool:
        H = self.H
        a = self.a
        if len(a) < 3:
            return True
        slopes = np.diff(H) / np.diff(a)
        return bool(np.all(np.diff(slopes) >= -tol * (1 + np.abs(slopes[:-1]))))


def legendre(curve: PressureCurve, sigma2: float | None = None, convex_tol: float = 1e-6) -> EntropyProfile:
    """``H(a) = sup_t (a t - beta(t))`` sampled at the slopes of the curve."""
    t, b = curve.t, curve.beta
    if len(t) < 3:
        raise ValueError("need at least 3 nodes")
    if not curve.is_convex(convex_tol):
        raise NonConvexInput("pressure curve is not convex on its grid")
    i0 = int(np.argmin(np.abs(t)))
    chi = float((b[i0 + 1] - b[i0 - 1]) / (t[i0 + 1] - t[i0 - 1]))
    # central differences are exact for quadratics and keep a_j increasing on convex data
    a = (b[2:] - b[:-2]) / (t[2:] - t[:-2])
    tj = t[1:-1]
    span = float(a[-1] - a[0])
    if span <= 1e-12 * max(1.0, abs(a).max()):
        return EntropyProfile(np.array([chi]), np.array([0.0]), np.array([0.0]), chi, (chi, chi), curve,
                              sigma2, degenerate=True)
    H = tj * a - b[1:-1]
    return EntropyProfile(a, H, tj, chi, (float(a[0]), float(a[-1])), curve, sigma2)


def integrability_threshold(profile: EntropyProfile, chi: float, u_sup: float, eps: float,
                            nodes: int = 4001) -> float:
    """``p*(eps) = 1 / int_eps^{u_sup - chi} ds / H(chi + s)``.

    The integrand is set to 0 where ``chi + s`` leaves the rate function's
    domain (``H`` infinite there).
    """
    top = u_sup - chi
    if not 0 < eps < top:
        raise ValueError("need 0 < eps < u_sup - chi")
    s = np.linspace(eps, top, nodes)
    H = profile.H_at(chi + s)
    finite = np.isfinite(H)
    if not finite.any():
        raise DegenerateProfile("rate function is infinite on the whole range", threshold=math.inf)
    with np.errstate(divide="ignore"):
        f = np.where(finite, 1.0 / H, 0.0)
    if not np.all(np.isfinite(f)):
        raise DegenerateProfile("rate function vanishes inside the range")
    integral = float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(s)))
    return math.inf if integral == 0.0 else 1.0 / integral


# ---------------------------------------------------------------------------
# empirical tails
# ---------------------------------------------------------------------------


def wilson_interval(k: np.ndarray, n: int, z: float = 1.96):
    k = np.asarray(k, dtype=float)
    p = k / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    # the bounds are exactly 0 and 1 at the extremes; avoid rounding residue there
    lo = np.where(k == 0, 0.0, np.clip(centre - half, 0.0, 1.0))
    hi = np.where(k == n, 1.0, np.clip(centre + half, 0.0, 1.0))
    return lo, hi


def integrals_at_horizons(flow: SuspensionFlow, u, points: PointSet, horizons) -> np.ndarray:
    """``int_0^T u`` for every point and every ``T`` in ``horizons`` from one walk."""
    horizons = np.sort(np.asarray(horizons, dtype=float))
    out = np.zeros((len(horizons), len(points)))
    for seg in FiberWalk(flow, points.x, points.s, float(horizons[-1])):
        full = segment_integral(u, seg)
        t_end = seg.t0 + seg.length
        for j, T in enumerate(horizons):
            whole = t_end <= T
            cut = ~whole & (seg.t0 < T)
            add = np.where(whole, full, 0.0)
            if cut.any():
                part = seg._replace(length=np.where(cut, T - seg.t0, 0.0))
                add = add + np.where(cut, segment_integral(u, part), 0.0)
            out[j] += add
    return out


@dataclass
class TailRate:
    a: float
    T: np.ndarray
    counts: np.ndarray
    N: int
    slope: float  # with the 1/2 log T prefactor removed
    raw_slope: float
    intercept: float
    dropped: np.ndarray
    wilson_lo: np.ndarray
    wilson_hi: np.ndarray

    @property
    def freq(self) -> np.ndarray:
        return self.counts / self.N


def tail_rate_empirical(flow: SuspensionFlow, u, a: float, T_list, N: int, seed: int,
                        integrals=None, prefactor: bool = True) -> TailRate:
    """Slope of ``-log m{int_0^T u >= T a}`` against ``T``.

    Above the mean the frequency carries a ``T^{-1/2}`` prefactor; with
    ``prefactor`` set, ``1/2 log T`` is subtracted before fitting. The raw
    slope is reported either way.
    """
    T_list = np.asarray(T_list, dtype=float)
    if integrals is None:
        if N < 10_000:
            raise ValueError("N must be >= 10^4")
        pts = sample_volume(flow, seed, N)
        integrals = integrals_at_horizons(flow, u, pts, T_list)
    I = np.asarray(integrals)
    n = I.shape[1]
    counts = np.array([int(np.sum(I[j] >= T_list[j] * a)) for j in range(len(T_list))])
    keep = counts > 0
    if not keep.any():
        raise AllZeroCounts(f"no exceedances of a={a} at any horizon")
    y = -np.log(counts[keep] / n)
    x = T_list[keep]
    lo, hi = wilson_interval(counts, n)
    if keep.sum() >= 2:
        raw = np.polyfit(x, y, 1)
        corr = y - 0.5 * np.log(x) if (prefactor and a > flow.chi(u)) else y
        fit = np.polyfit(x, corr, 1)
        slope, icpt, raw_slope = float(fit[0]), float(fit[1]), float(raw[0])
    else:
        slope = raw_slope = float(y[0] / x[0])
        icpt = 0.0
    return TailRate(a, T_list, counts, n, slope, raw_slope, icpt, ~keep, lo, hi)


def exceedance_decay(values: np.ndarray, T_list) -> tuple:
    """Least-squares decay rate of ``log m{X > T}`` over ``T_list`` (zero counts dropped)."""
    T_list = np.asarray(T_list, dtype=float)
    n = len(values)
    counts = np.array([int(np.sum(values > T)) for T in T_list])
    keep = counts > 0
    if keep.sum() < 2:
        raise AllZeroCounts("fewer than two non-empty tail cells")
    fit = np.polyfit(T_list[keep], np.log(counts[keep] / n), 1)
    return float(-fit[0]), counts


@dataclass
class LemmaTReport:
    zeta: float
    edges: np.ndarray
    counts: np.ndarray
    mass: np.ndarray
    bound: np.ndarray
    L: float
    rate_reference: float  # H((chi + eps) / zeta)
    fitted_exponent: float
    monotone: bool
    insufficient: np.ndarray


def lemmaT_tail(T_eps: np.ndarray, eps: float, zeta: float, profile: EntropyProfile, chi: float,
                n_max: int | None = None) -> LemmaTReport:
    """Masses of ``B_n = {zeta^n < T_eps <= zeta^{n+1}}`` against ``L exp(-H ((chi+eps)/zeta) zeta^{n+1})``."""
    if zeta <= 1:
        raise ValueError("zeta must exceed 1")
    T_eps = np.asarray(T_eps, dtype=float)
    N = len(T_eps)
    top = float(T_eps.max()) if N else 0.0
    if n_max is None:
        n_max = max(1, int(math.ceil(math.log(max(top, zeta)) / math.log(zeta))))
    edges = zeta ** np.arange(n_max + 2, dtype=float)
    counts = np.array([int(np.sum((T_eps > edges[n]) & (T_eps <= edges[n + 1]))) for n in range(n_max + 1)])
    mass = counts / max(N, 1)
    H_ref = float(profile.H_at((chi + eps) / zeta)[0])
    L = float(mass[0] * math.exp(H_ref * edges[1])) if math.isfinite(H_ref) else math.nan
    bound = L * np.exp(-H_ref * edges[1:]) if math.isfinite(H_ref) else np.full(len(mass), np.nan)
    nz = counts > 0
    monotone = bool(np.all(np.diff(np.log(mass[nz])) <= 0)) if nz.sum() > 1 else True
    if nz.sum() >= 2:
        fitted = float(-np.polyfit(edges[1:][nz], np.log(mass[nz]), 1)[0])
    else:
        fitted = math.nan
    return LemmaTReport(zeta, edges, counts, mass, bound, L, H_ref, fitted, monotone, counts < 10)
