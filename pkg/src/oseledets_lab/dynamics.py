"""Suspension flows over (optionally sheared) hyperbolic toral automorphisms.

The phase space is ``M = {(x, s) : x in T^2, 0 <= s < r(x)}``. Points move
upward at unit speed and drop through the base map ``f = A o h`` when they
reach the roof, where ``h(x1, x2) = (x1 + kappa/(2 pi) sin(2 pi x2), x2)``.

Most routines work on batches: base points are ``(N, 2)`` arrays and heights
``(N,)`` arrays. Scalar entry points wrap the batch code with ``N = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import NonConvergence

TWO_PI = 2.0 * math.pi
CAT = ((2, 1), (1, 1))
CAT_LAMBDA = (3.0 + math.sqrt(5.0)) / 2.0
CAT_LOG_LAMBDA = math.log(CAT_LAMBDA)


def wrap(x):
    """Reduce coordinates to [0, 1)."""
    y = x - np.floor(x)
    return np.where(y >= 1.0, 0.0, y)


# ---------------------------------------------------------------------------
# base map and roof
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BaseMap:
    """Area-preserving torus map ``f = A o h``."""

    A: tuple = CAT
    kappa: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.A)
        if A.shape != (2, 2) or not np.all(A == np.round(A)):
            raise ValueError("A must be a 2x2 integer matrix")
        A = tuple(tuple(int(v) for v in row) for row in A)
        object.__setattr__(self, "A", A)
        (a, b), (c, d) = A
        if abs(a * d - b * c) != 1:
            raise ValueError("|det A| must be 1")
        if abs(a + d) <= 2:
            raise ValueError("A is not hyperbolic (|trace| <= 2)")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def det(self) -> int:
        (a, b), (c, d) = self.A
        return a * d - b * c

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.array(self.A, dtype=float)

    @cached_property
    def inverse_int(self) -> np.ndarray:
        (a, b), (c, d) = self.A
        return self.det * np.array([[d, -b], [-c, a]], dtype=np.int64)

    @cached_property
    def inverse_matrix(self) -> np.ndarray:
        return self.inverse_int.astype(float)

    @cached_property
    def eigen(self):
        """(log|lambda_u|, v_u, log|lambda_s|, v_s) of A with unit, sign-normalized vectors."""
        w, V = np.linalg.eig(self.matrix)
        order = np.argsort(-np.abs(w))
        w, V = w[order].real, V[:, order].real
        return (
            math.log(abs(w[0])),
            _normalize_sign(V[:, 0] / np.linalg.norm(V[:, 0])),
            math.log(abs(w[1])),
            _normalize_sign(V[:, 1] / np.linalg.norm(V[:, 1])),
        )

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        h = x.copy()
        if self.kappa:
            h[..., 0] += self.kappa / TWO_PI * np.sin(TWO_PI * x[..., 1])
        return wrap(h @ self.matrix.T)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        z = wrap(y @ self.inverse_matrix.T)
        if self.kappa:
            z[..., 0] -= self.kappa / TWO_PI * np.sin(TWO_PI * z[..., 1])
            z = wrap(z)
        return z

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        (a, b), (c, d) = self.A
        shear = self.kappa * np.cos(TWO_PI * x[..., 1])
        J = np.empty(x.shape[:-1] + (2, 2))
        J[..., 0, 0] = a
        J[..., 0, 1] = a * shear + b
        J[..., 1, 0] = c
        J[..., 1, 1] = c * shear + d
        return J

    def inverse_jacobian(self, y):
        """Derivative of the inverse map at ``y``."""
        y = np.asarray(y, dtype=float)
        z = wrap(y @ self.inverse_matrix.T)
        shear = -self.kappa * np.cos(TWO_PI * z[..., 1])
        Ai = self.inverse_matrix
        J = np.empty(y.shape[:-1] + (2, 2))
        J[..., 0, 0] = Ai[0, 0] + shear * Ai[1, 0]
        J[..., 0, 1] = Ai[0, 1] + shear * Ai[1, 1]
        J[..., 1, 0] = Ai[1, 0]
        J[..., 1, 1] = Ai[1, 1]
        return J


@dataclass(frozen=True)
class RoofFunction:
    """``r(x) = r0 + sum amp * cos(2 pi k.x + phase)``; terms are ``((k1, k2), amp, phase)``."""

    r0: float = 1.0
    terms: tuple = ()

    def __post_init__(self):
        terms = tuple(
            ((int(k[0]), int(k[1])), float(amp), float(phase)) for k, amp, phase in self.terms
        )
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "r0", float(self.r0))
        if self.r0 <= sum(abs(amp) for _, amp, _ in terms):
            raise ValueError("roof must satisfy r0 > sum |amp|")

    @property
    def is_constant(self) -> bool:
        return all(amp == 0.0 or k == (0, 0) for k, amp, _ in self.terms)

    @property
    def r_min(self) -> float:
        return self.r0 - sum(abs(amp) for _, amp, _ in self.terms)

    @property
    def r_max(self) -> float:
        return self.r0 + sum(abs(amp) for _, amp, _ in self.terms)

    @property
    def mean(self) -> float:
        return float(self.fourier().get((0, 0), 0.0).real)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], self.r0)
        for (k1, k2), amp, phase in self.terms:
            out = out + amp * np.cos(TWO_PI * (k1 * x[..., 0] + k2 * x[..., 1]) + phase)
        return out

    def fourier(self) -> dict:
        coef = {(0, 0): complex(self.r0)}
        for k, amp, phase in self.terms:
            half = 0.5 * amp * complex(math.cos(phase), math.sin(phase))
            _accumulate(coef, k, half)
            _accumulate(coef, (-k[0], -k[1]), half.conjugate())
        return coef


def _accumulate(coef, k, value):
    coef[k] = coef.get(k, 0.0) + value


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrigTerm:
    """``a cos(2 pi (k.x + j sigma)) + b sin(...)`` with ``sigma = s / r(x)``."""

    k: tuple = (1, 0)
    a: float = 0.0
    b: float = 0.0
    j: int = 0


@dataclass(frozen=True)
class Observable:
    """Real trigonometric polynomial on the phase space."""

    const: float = 0.0
    terms: tuple = ()

    def __post_init__(self):
        terms = []
        for t in self.terms:
            if not isinstance(t, TrigTerm):
                t = TrigTerm(*t)
            terms.append(TrigTerm((int(t.k[0]), int(t.k[1])), float(t.a), float(t.b), int(t.j)))
        object.__setattr__(self, "terms", tuple(terms))
        object.__setattr__(self, "const", float(self.const))

    @classmethod
    def constant(cls, c: float) -> "Observable":
        return cls(c)

    @classmethod
    def cosine(cls, amp: float = 1.0, k=(1, 0), const: float = 0.0) -> "Observable":
        return cls(const, (TrigTerm(tuple(k), amp),))

    @property
    def base_only(self) -> bool:
        return all(t.j == 0 for t in self.terms)

    def __add__(self, c):
        if not isinstance(c, (int, float)):
            return NotImplemented
        return Observable(self.const + c, self.terms)

    def __call__(self, x, sigma=None):
        """Evaluate at base points ``x``; ``sigma`` is the normalized fiber height."""
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], self.const)
        for t in self.terms:
            phase = t.k[0] * x[..., 0] + t.k[1] * x[..., 1]
            if t.j:
                if sigma is None:
                    raise ValueError("fiber-dependent observable needs sigma")
                phase = phase + t.j * np.asarray(sigma)
            phase = TWO_PI * phase
            if t.a:
                out = out + t.a * np.cos(phase)
            if t.b:
                out = out + t.b * np.sin(phase)
        return out

    def fourier(self) -> dict:
        """Complex Fourier coefficients of the fiber-averaged (j = 0) part."""
        coef = {(0, 0): complex(self.const)}
        for t in self.terms:
            if t.j:
                continue
            half = 0.5 * complex(t.a, -t.b)
            _accumulate(coef, t.k, half)
            _accumulate(coef, (-t.k[0], -t.k[1]), half.conjugate())
        return coef

    def mean(self, roof: RoofFunction | None = None) -> float:
        """Integral against the normalized volume of the suspension.

        Terms with ``j != 0`` complete whole periods along each fiber and
        integrate to zero; the rest are weighted by the roof.
        """
        u = self.fourier()
        if roof is None or roof.is_constant:
            return float(u.get((0, 0), 0.0).real)
        r = roof.fourier()
        total = sum(c * r.get((-k[0], -k[1]), 0.0) for k, c in u.items())
        return float(total.real / roof.mean)

    @cached_property
    def sup_norm(self) -> float:
        triangle = abs(self.const) + sum(math.hypot(t.a, t.b) for t in self.terms)
        if not self.base_only or not self.terms:
            return triangle
        n = 512
        g = (np.arange(n) + 0.0) / n
        X = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)
        grid_max = float(np.max(np.abs(self(X))))
        lip = TWO_PI * sum(math.hypot(*t.k) * math.hypot(t.a, t.b) for t in self.terms)
        return min(triangle, grid_max + lip * math.sqrt(0.5) / n)

    def params(self) -> dict:
        return {
            "const": self.const,
            "terms": [[t.k[0], t.k[1], t.a, t.b, t.j] for t in self.terms],
        }


# ---------------------------------------------------------------------------
# points and the flow
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowPoint:
    x: tuple
    s: float = 0.0

    def __post_init__(self):
        x = wrap(np.asarray(self.x, dtype=float))
        object.__setattr__(self, "x", (float(x[0]), float(x[1])))
        object.__setattr__(self, "s", float(self.s))


@dataclass
class PointSet:
    """Struct-of-arrays batch of flow points."""

    x: np.ndarray
    s: np.ndarray
    acceptance: float | None = None

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.s = np.atleast_1d(np.asarray(self.s, dtype=float))
        if self.x.shape != (len(self.s), 2):
            raise ValueError("x must have shape (N, 2) matching s")

    @classmethod
    def of(cls, points: Sequence[FlowPoint] | FlowPoint) -> "PointSet":
        if isinstance(points, FlowPoint):
            points = [points]
        return cls(np.array([p.x for p in points]), np.array([p.s for p in points]))

    def __len__(self):
        return len(self.s)

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return FlowPoint(tuple(self.x[i]), float(self.s[i]))
        return PointSet(self.x[i], self.s[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


@dataclass(frozen=True)
class SuspensionFlow:
    base: BaseMap = field(default_factory=BaseMap)
    roof: RoofFunction = field(default_factory=RoofFunction)

    def chi(self, u) -> float:
        """Volume mean of an observable or any base field exposing ``mean(roof)``."""
        return float(u.mean(self.roof))

    def contains(self, p: FlowPoint) -> bool:
        return 0.0 <= p.s < float(self.roof(np.array(p.x)))

    def params(self) -> dict:
        return {
            "A": [list(r) for r in self.base.A],
            "kappa": self.base.kappa,
            "roof_r0": self.roof.r0,
            "roof_terms": [[k[0], k[1], amp, ph] for k, amp, ph in self.roof.terms],
        }


def cat_suspension(kappa: float = 0.0, r0: float = 1.0, roof_terms=()) -> SuspensionFlow:
    return SuspensionFlow(BaseMap(CAT, kappa), RoofFunction(r0, roof_terms))


# ---------------------------------------------------------------------------
# orbit walking
# ---------------------------------------------------------------------------


class Segment(NamedTuple):
    x: np.ndarray  # base points of the current fiber
    roof: np.ndarray  # r(x)
    t0: np.ndarray  # elapsed flow time at the start of the segment
    s0: np.ndarray  # height at the start of the segment
    length: np.ndarray  # flow time spent on this fiber (0 once an orbit is done)
    crossed: np.ndarray  # the orbit reaches the roof and drops through f


class FiberWalk:
    """Iterate fiber segments of many forward orbits at once.

    After exhaustion ``x``, ``s`` hold the end points ``f_T(p)``. Crossings
    are left-closed: an orbit that reaches the roof exactly at its horizon
    ends at height 0 over ``f(x)``.
    """

    def __init__(self, flow: SuspensionFlow, x, s, horizon):
        self.flow = flow
        self.x = np.atleast_2d(np.asarray(x, dtype=float))
        self.s = np.atleast_1d(np.asarray(s, dtype=float))
        n = len(self.s)
        self.horizon = np.broadcast_to(np.asarray(horizon, dtype=float), (n,)).copy()
        if np.any(self.horizon < 0):
            raise ValueError("FiberWalk needs non-negative horizons")
        self.t = np.zeros(n)
        self.crossings = np.zeros(n, dtype=np.int64)

    def __iter__(self) -> Iterator[Segment]:
        flow = self.flow
        r = flow.roof(self.x)
        while True:
            active = self.t < self.horizon
            if not active.any():
                return
            left = r - self.s
            remaining = self.horizon - self.t
            crossed = active & (left <= remaining)
            length = np.where(active, np.minimum(left, remaining), 0.0)
            yield Segment(self.x, r, self.t, self.s, length, crossed)
            self.t = np.where(crossed, self.t + left, self.t + length)
            if crossed.any():
                self.x = np.where(crossed[:, None], flow.base(self.x), self.x)
                r = np.where(crossed, flow.roof(self.x), r)
            self.s = np.where(crossed, 0.0, self.s + length)
            self.crossings = self.crossings + crossed
            # orbits that stop exactly at a crossing are done
            self.t = np.where(crossed & (left == remaining), self.horizon, self.t)


def _evolve_backward(flow: SuspensionFlow, x, s, tau):
    x = np.array(x, dtype=float)
    s = np.array(s, dtype=float)
    rem = np.array(np.broadcast_to(tau, s.shape), dtype=float)
    while True:
        back = rem > s
        if not back.any():
            return x, s - rem
        rem = np.where(back, rem - s, rem)
        x = np.where(back[:, None], flow.base.inverse(x), x)
        s = np.where(back, flow.roof(x), s)


def evolve_points(flow: SuspensionFlow, points: PointSet, t: float) -> PointSet:
    if t >= 0:
        walk = FiberWalk(flow, points.x, points.s, t)
        for _ in walk:
            pass
        return PointSet(walk.x, walk.s)
    x, s = _evolve_backward(flow, points.x, points.s, -t)
    return PointSet(x, s)


def evolve(flow: SuspensionFlow, p: FlowPoint, t: float) -> FlowPoint:
    """Flow a single point for time ``t`` (negative times use the inverse map)."""
    return evolve_points(flow, PointSet.of(p), t)[0]


def jacobian_cocycle(flow: SuspensionFlow, p: FlowPoint, t: float) -> np.ndarray:
    """Base-tangent derivative of ``f_t`` at ``p``: ordered product of crossing Jacobians."""
    J = np.eye(2)
    if t >= 0:
        walk = FiberWalk(flow, np.array([p.x]), np.array([p.s]), t)
        for seg in walk:
            if seg.crossed[0]:
                J = flow.base.jacobian(seg.x[0]) @ J
        return J
    x, s, rem = np.array(p.x), p.s, -t
    while rem > s:
        rem -= s
        J = flow.base.inverse_jacobian(x) @ J
        x = flow.base.inverse(x)
        s = float(flow.roof(x))
    return J


def sample_volume(flow: SuspensionFlow, seed: int, n: int) -> PointSet:
    """Draw ``n`` points from the normalized volume by rejection under the roof graph."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    r_top = flow.roof.r_max
    rate_guess = flow.roof.mean / r_top
    xs, ss, drawn, kept = [], [], 0, 0
    while kept < n:
        m = int(math.ceil((n - kept) / rate_guess * 1.05)) + 16
        x = rng.random((m, 2))
        s = rng.random(m) * r_top
        ok = s < flow.roof(x)
        xs.append(x[ok])
        ss.append(s[ok])
        drawn += m
        kept += int(ok.sum())
    x = np.concatenate(xs)[:n]
    s = np.concatenate(ss)[:n]
    return PointSet(x, s, acceptance=kept / drawn)


# ---------------------------------------------------------------------------
# observables along orbits
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def segment_integral(u, seg: Segment) -> np.ndarray:
    """Integral of ``u`` over each segment (exact for fiber-constant ``u``)."""
    if getattr(u, "base_only", True):
        return np.where(seg.length > 0, u(seg.x) * seg.length, 0.0)
    # Gauss-Legendre in the normalized height
    sig_a = seg.s0 / seg.roof
    sig_b = (seg.s0 + seg.length) / seg.roof
    half = 0.5 * (sig_b - sig_a)
    mid = 0.5 * (sig_b + sig_a)
    total = np.zeros(len(seg.length))
    for node, w in zip(_GL_NODES, _GL_WEIGHTS):
        total += w * u(seg.x, mid + half * node)
    return total * half * seg.roof


def integrate_points(flow: SuspensionFlow, u, points: PointSet, t: float) -> np.ndarray:
    """``int_0^t u(f_s p) ds`` for every point of the batch."""
    if t < 0:
        raise ValueError("t must be >= 0")
    total = np.zeros(len(points))
    for seg in FiberWalk(flow, points.x, points.s, t):
        total += segment_integral(u, seg)
    return total


def integrate_observable(flow: SuspensionFlow, u, p: FlowPoint, t: float) -> float:
    return float(integrate_points(flow, u, PointSet.of(p), t)[0])


# ---------------------------------------------------------------------------
# invariant directions and the suspension metric
# ---------------------------------------------------------------------------


def _normalize_sign(v):
    v = np.asarray(v, dtype=float)
    flip = (v[..., 0] < 0) | ((v[..., 0] == 0) & (v[..., 1] < 0))
    return np.where(flip[..., None], -v, v)


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


_SEED_VECTOR = np.array([0.8, 0.6])


def _push(base: BaseMap, x, depth, stable):
    """Direction at ``x`` obtained by transporting a seed vector over ``depth`` steps."""
    step = base if stable else base.inverse
    orbit = [x]
    for _ in range(depth):
        orbit.append(step(orbit[-1]))
    v = np.broadcast_to(_SEED_VECTOR, x.shape).copy()
    for y in reversed(orbit[1:]):
        J = base.inverse_jacobian(y) if stable else base.jacobian(y)
        v = _unit(np.einsum("...ij,...j->...i", J, v))
    return _normalize_sign(v)


def bundle_directions(base: BaseMap, x, kind: str = "unstable", depth: int = 40, tol: float = 1e-8):
    """Unit vectors spanning the unstable (or stable) line field at base points ``x``.

    The seed vector is transported from ``depth`` and ``2 * depth`` steps away;
    the two results must agree to ``tol``.
    """
    if kind not in ("unstable", "stable"):
        raise ValueError("kind must be 'unstable' or 'stable'")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    stable = kind == "stable"
    v_short = _push(base, x, depth, stable)
    v_long = _push(base, x, 2 * depth, stable)
    err = float(np.max(np.linalg.norm(v_long - v_short, axis=-1)))
    if err > tol:
        raise NonConvergence(f"{kind} direction not converged at depth {depth}: {err:.3g}")
    return v_long


def unstable_direction(flow: SuspensionFlow, p, n_back: int = 40, stable: bool = False, tol: float = 1e-8):
    x = p.x if isinstance(p, FlowPoint) else p
    return bundle_directions(flow.base, x, "stable" if stable else "unstable", n_back, tol)[0]


class MetricWeights(NamedTuple):
    """Spectral data of ``M = Df^T Df`` seen from a unit vector ``w``.

    ``c1, c2`` are the squared components of ``w`` on the eigenvectors and
    ``L1 >= L2`` the logs of the eigenvalues.
    """

    c1: np.ndarray
    c2: np.ndarray
    L1: np.ndarray
    L2: np.ndarray


def metric_weights(base: BaseMap, x, w) -> MetricWeights:
    J = base.jacobian(x)
    M = np.einsum("...ki,...kj->...ij", J, J)
    a, b, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 1]
    half_tr = 0.5 * (a + d)
    disc = np.sqrt(np.maximum(0.25 * (a - d) ** 2 + b * b, 0.0))
    mu1, mu2 = half_tr + disc, half_tr - disc
    # eigenvector of mu1, robust for near-diagonal M
    e = np.where(
        (a >= d)[..., None],
        np.stack([mu1 - d, b], axis=-1),
        np.stack([b, mu1 - a], axis=-1),
    )
    nrm = np.linalg.norm(e, axis=-1, keepdims=True)
    e = np.where(nrm > 0, e / np.where(nrm > 0, nrm, 1.0), np.array([1.0, 0.0]))
    w = _unit(np.asarray(w, dtype=float))
    c1 = np.clip(np.einsum("...i,...i->...", e, w) ** 2, 0.0, 1.0)
    return MetricWeights(c1, 1.0 - c1, np.log(mu1), np.log(mu2))


def metric_log_norm(mw: MetricWeights, sigma):
    """``log ||w||_G`` at normalized height ``sigma`` for the suspension metric.

    ``G_sigma(x) = (Df_x^T Df_x)^sigma`` interpolates between the Euclidean
    metric on the floor and the pulled-back metric under the roof, so the
    metric is continuous across the identification ``(x, r(x)) ~ (f x, 0)``.
    """
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore"):
        lc1 = np.log(mw.c1)
        lc2 = np.log(mw.c2)
    return 0.5 * np.logaddexp(lc1 + sigma * mw.L1, lc2 + sigma * mw.L2)


def metric_log_rate(mw: MetricWeights, sigma):
    """``d/dsigma`` of :func:`metric_log_norm`; non-decreasing in ``sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore"):
        z1 = np.log(mw.c1) + sigma * mw.L1
        z2 = np.log(mw.c2) + sigma * mw.L2
    top = np.maximum(z1, z2)
    top = np.where(np.isfinite(top), top, 0.0)
    p1, p2 = np.exp(z1 - top), np.exp(z2 - top)
    return 0.5 * (p1 * mw.L1 + p2 * mw.L2) / (p1 + p2)


def metric_rate_root(mw: MetricWeights, level):
    """Height where :func:`metric_log_rate` equals ``level`` (nan when it never does)."""
    level = np.asarray(level, dtype=float)
    num = mw.c2 * (2.0 * level - mw.L2)
    den = mw.c1 * (mw.L1 - 2.0 * level)
    gap = mw.L1 - mw.L2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = num / den
        root = np.log(ratio) / gap
    ok = (ratio > 0) & (gap > 0) & np.isfinite(root)
    return np.where(ok, root, np.nan)
