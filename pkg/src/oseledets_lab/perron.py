"""Triangularization of linear systems by differentiable Gram-Schmidt frames.

For ``X' = A(t) X`` the frame ``U(t)`` from the QR factorization of ``X(t)``
solves ``U' = U S`` with ``S`` skew, built from ``C = U^T A U`` by copying the
strict lower triangle of ``C`` and mirroring it with a sign flip. Then
``B = C - S`` is upper triangular and ``Z = U^T X`` solves ``Z' = B Z``.

Three kinds of trajectories share :class:`TriangularTrajectory`:

* ``smooth``: a generator ``A(t)`` integrated with a fixed-step RK4 scheme;
* ``impulsive``: suspension crossings, where the base-tangent derivative jumps
  by a Jacobian and only integrated diagonals are meaningful;
* ``bundle``: a one-dimensional invariant line field measured in the
  continuous suspension metric, where ``b(t)`` is known in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import (
    FiberWalk,
    FlowPoint,
    MetricWeights,
    PointSet,
    Segment,
    SuspensionFlow,
    bundle_directions,
    jacobian_cocycle,
    metric_log_norm,
    metric_log_rate,
    metric_rate_root,
    metric_weights,
)
from .errors import DegenerateBasis, StepSizeFailure


# ---------------------------------------------------------------------------
# Gram-Schmidt
# ---------------------------------------------------------------------------


def _as_basis_matrix(basis) -> np.ndarray:
    V = np.asarray(basis, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise ValueError("basis must be k vectors of length k")
    # vectors are given row-wise; the frame uses them as columns
    return V.T.copy()


def gram_schmidt_matrix(V: np.ndarray):
    """QR of the column matrix ``V`` with a positive diagonal in ``R``."""
    V = np.asarray(V, dtype=float)
    if not np.all(np.isfinite(V)) or np.linalg.cond(V) >= 1e10:
        raise DegenerateBasis("basis is numerically rank deficient")
    Q, R = np.linalg.qr(V)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs, R * signs[:, None]


def gram_schmidt(basis):
    """Orthonormal frame and upper-triangular factor of a list of basis vectors.

    Returns ``(Q, R)`` with ``Q`` holding the frame vectors as columns and
    ``basis_matrix = Q @ R``.
    """
    return gram_schmidt_matrix(_as_basis_matrix(basis))


def _reorthonormalize(U):
    Q, R = np.linalg.qr(U)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


# ---------------------------------------------------------------------------
# linear systems
# ---------------------------------------------------------------------------


@dataclass
class LinearSystem:
    """``v' = A(t) v`` with a smooth generator."""

    k: int
    generator: Callable[[float], np.ndarray]
    alpha: float | None = None
    meta: dict = field(default_factory=dict)

    def A(self, t: float) -> np.ndarray:
        return np.asarray(self.generator(t), dtype=float)

    def sup_norm(self, t_grid) -> float:
        """Largest spectral norm of ``A`` on ``t_grid`` (the alpha used in audits)."""
        return max(float(np.linalg.norm(self.A(t), 2)) for t in t_grid)

    @classmethod
    def constant(cls, A, **meta) -> "LinearSystem":
        A = np.array(A, dtype=float)
        return cls(A.shape[0], lambda t: A, float(np.linalg.norm(A, 2)), meta)

    @classmethod
    def scalar(cls, a: float, k: int) -> "LinearSystem":
        return cls.constant(a * np.eye(k), family="scalar")


def random_smooth_system(rng: np.random.Generator, k: int, modes: int = 2, scale: float = 1.0) -> LinearSystem:
    """Random trigonometric generator ``A0 + sum A_j sin(w_j t + phi_j)``."""
    mats = scale * rng.standard_normal((modes + 1, k, k)) / math.sqrt(k)
    freqs = rng.uniform(0.5, 2.0, modes)
    phases = rng.uniform(0.0, 2 * math.pi, modes)

    def generator(t):
        out = mats[0].copy()
        for j in range(modes):
            out += mats[j + 1] * math.sin(freqs[j] * t + phases[j])
        return out

    return LinearSystem(k, generator, None, {"family": "random-trig", "modes": modes})


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


@dataclass
class TriangularTrajectory:
    kind: str
    t: np.ndarray  # (n,)
    B: np.ndarray  # (n, k, k) at nodes; impulsive: per-segment mean densities
    diag_integrals: np.ndarray  # (n, k): int_0^t b_ii
    r_integral: np.ndarray  # (n,): int_0^t r(B)
    gamma0: np.ndarray  # (k,): log Gamma_m(0)
    U: np.ndarray | None = None  # (n, k, k)
    Z: np.ndarray | None = None  # (n, k, k) fundamental solution, Z(0) = I
    R0: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.diag_integrals.shape[1]

    @property
    def gamma_logs(self) -> np.ndarray:
        """``log Gamma_m(t)`` for ``m = 1..k`` at every node."""
        return self.gamma0 + np.cumsum(self.diag_integrals, axis=1)

    def node(self, t: float) -> int:
        i = int(np.searchsorted(self.t, t))
        if i >= len(self.t) or not math.isclose(self.t[i], t, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError(f"t={t} is not a node of the trajectory")
        return i


_LOWER_MASKS: dict = {}


def _split_skew(C):
    k = C.shape[-1]
    mask = _LOWER_MASKS.get(k)
    if mask is None:
        mask = _LOWER_MASKS.setdefault(k, np.tri(k, k, -1))
    low = C * mask
    S = low - low.T
    return S, C - S


def _frame_rhs(system: LinearSystem, t, U, Z):
    C = U.T @ system.A(t) @ U
    S, B = _split_skew(C)
    d = C.diagonal()
    return U @ S, B @ Z, d, abs(d).max()


def triangularize(
    system: LinearSystem,
    basis,
    t_grid,
    h_max: float | None = None,
    drift_tol: float = 1e-10,
    h_min: float = 1e-7,
) -> TriangularTrajectory:
    """Integrate the frame flow with RK4 and record ``U``, ``B``, ``Z`` on ``t_grid``.

    The step halves whenever one step moves ``U`` further than ``drift_tol``
    from the orthogonal group; ``U`` is re-orthonormalized after every
    accepted step.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must start at 0 and increase")
    k = system.k
    U0, R0 = gram_schmidt(basis)
    if h_max is None:
        a0 = float(np.linalg.norm(system.A(0.0), 2))
        h_max = 0.02 / max(1.0, a0)

    U, Z = U0.copy(), np.eye(k)
    L = np.zeros(k)
    Rint = 0.0
    n = len(t_grid)
    Us = np.empty((n, k, k))
    Bs = np.empty((n, k, k))
    Zs = np.empty((n, k, k))
    Ls = np.empty((n, k))
    Rs = np.empty(n)
    eye = np.eye(k)
    h = h_max
    t = 0.0
    steps = rejected = 0

    def record(i):
        Us[i], Zs[i], Ls[i], Rs[i] = U, Z, L, Rint
        Bs[i] = _split_skew(U.T @ system.A(t_grid[i]) @ U)[1]

    record(0)
    for i in range(1, n):
        target = t_grid[i]
        while t < target:
            step = min(h, target - t)
            k1 = _frame_rhs(system, t, U, Z)
            k2 = _frame_rhs(system, t + step / 2, U + step / 2 * k1[0], Z + step / 2 * k1[1])
            k3 = _frame_rhs(system, t + step / 2, U + step / 2 * k2[0], Z + step / 2 * k2[1])
            k4 = _frame_rhs(system, t + step, U + step * k3[0], Z + step * k3[1])
            U_new = U + step / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            drift = float(np.max(np.abs(U_new.T @ U_new - eye)))
            if drift > drift_tol:
                h = step / 2
                rejected += 1
                if h < h_min:
                    raise StepSizeFailure(f"orthogonality drift {drift:.3g} at t={t:.6g}")
                continue
            U = _reorthonormalize(U_new)
            Z = Z + step / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            L = L + step / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            Rint += step / 6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
            t = target if step == target - t else t + step
            steps += 1
        record(i)

    gamma0 = np.cumsum(np.log(np.abs(np.diag(R0))))
    return TriangularTrajectory(
        "smooth", t_grid, Bs, Ls, Rs, gamma0, Us, Zs, R0,
        {"steps": steps, "rejected": rejected, "h": h},
    )


def direct_solution(system: LinearSystem, X0, t_grid, rtol: float = 1e-12, atol: float = 1e-14) -> np.ndarray:
    """Independent high-order solution of ``X' = A(t) X`` on ``t_grid``."""
    X0 = np.asarray(X0, dtype=float)
    k = system.k

    def rhs(t, y):
        return (system.A(t) @ y.reshape(k, k)).ravel()

    t_grid = np.asarray(t_grid, dtype=float)
    sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), X0.ravel(), method="DOP853",
                    t_eval=t_grid, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y.T.reshape(len(t_grid), k, k)


def direct_gamma_logs(system: LinearSystem, basis, t_grid, restart: float = 1.0) -> np.ndarray:
    """``log Gamma_m`` on ``t_grid`` by high-order integration with discrete QR restarts.

    Volumes of nearly aligned flags are ill-conditioned when read off a single
    long solve, so the solution is re-orthonormalized every ``restart`` time units.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    Q, R = gram_schmidt(basis)
    base = np.log(np.abs(np.diag(R)))
    out = np.empty((len(t_grid), system.k))
    out[0] = np.cumsum(base)
    start = 0
    while start < len(t_grid) - 1:
        tau = t_grid[start]
        stop = int(np.searchsorted(t_grid, tau + restart * (1 + 1e-12), side="right")) - 1
        stop = max(stop, start + 1)
        X = direct_solution(system, Q, t_grid[start:stop + 1])
        for j in range(1, stop - start + 1):
            out[start + j] = np.cumsum(base + np.log(np.abs(np.diag(np.linalg.qr(X[j], mode="r")))))
        Qn, Rn = gram_schmidt_matrix(X[-1])
        base = base + np.log(np.abs(np.diag(Rn)))
        Q = Qn
        start = stop
    return out


def gamma_logs_of(X: np.ndarray) -> np.ndarray:
    """``log Gamma_m`` of the column flags of a stack of matrices."""
    R = np.linalg.qr(X, mode="r")
    return np.cumsum(np.log(np.abs(np.diagonal(R, axis1=-2, axis2=-1))), axis=-1)


def audit_trajectory(system: LinearSystem, traj: TriangularTrajectory, basis) -> dict:
    """Deviation figures for the frame-flow invariants against a direct solve."""
    t = traj.t
    k = traj.k
    eye = np.eye(k)
    X = direct_solution(system, _as_basis_matrix(basis), t)
    recon = traj.U @ traj.Z @ traj.R0
    rel = np.linalg.norm(recon - X, axis=(1, 2)) / np.linalg.norm(X, axis=(1, 2))
    gam = direct_gamma_logs(system, basis, t)
    ratios = np.diff(np.concatenate([np.zeros((len(t), 1)), gam], axis=1), axis=1)
    ratios = ratios - ratios[0]
    pos = t > 0
    diag_gap = np.abs(traj.diag_integrals - ratios).max(axis=1)
    norms = np.array([np.linalg.norm(system.A(s), 2) for s in t])
    iu = np.triu_indices(k, 1)
    off = np.abs(traj.B[:, iu[0], iu[1]]) if k > 1 else np.zeros((len(t), 1))
    lower = np.tril(traj.B, -1)
    zlow = np.tril(np.einsum("nji,njk->nik", traj.U, X), -1)
    return {
        "orthogonality": float(np.max(np.abs(np.einsum("nji,njk->nik", traj.U, traj.U) - eye))),
        "triangularity": float(np.max(np.abs(lower))),
        "frame_flag_drift": float(np.max(np.abs(zlow).max(axis=(1, 2)) / np.linalg.norm(X, axis=(1, 2)))),
        "alpha": float(norms.max()),
        "offdiag_excess": float(np.max(off.max(axis=1) - 2.0 * norms.max())),
        "offdiag_pointwise_excess": float(np.max(off.max(axis=1) - 2.0 * norms)),
        "diag_gamma_per_time": float(np.max(diag_gap[pos] / t[pos])) if pos.any() else 0.0,
        "reconstruction": float(rel.max()),
    }


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------


def gamma_volume_rate(traj: TriangularTrajectory, m: int, t: float) -> float:
    """``(1/t) log(Gamma_m(t) / Gamma_m(0))``."""
    if t <= 0:
        raise ValueError("t must be positive")
    if not 1 <= m <= traj.k:
        raise ValueError("m out of range")
    i = traj.node(t)
    return float(np.sum(traj.diag_integrals[i, :m]) / t)


def spectral_radius_path(traj: TriangularTrajectory) -> np.ndarray:
    """``r(B(t))`` at the nodes (per-segment mean density for impulsive/bundle kinds)."""
    if traj.kind == "smooth":
        return np.max(np.abs(np.diagonal(traj.B, axis1=1, axis2=2)), axis=1)
    dt = np.diff(traj.t)
    dr = np.diff(traj.r_integral)
    dens = np.divide(dr, dt, out=np.zeros_like(dr), where=dt > 0)
    return np.append(dens, dens[-1] if len(dens) else 0.0)


def time_avg_spectral_radius(traj: TriangularTrajectory, T: float) -> float:
    i = traj.node(T)
    return float(traj.r_integral[i] / T)


def check_basis_independence(system: LinearSystem, basis1, basis2, t_grid) -> float:
    """Largest gap between the spectral-radius paths started from two bases."""
    r1 = spectral_radius_path(triangularize(system, basis1, t_grid))
    r2 = spectral_radius_path(triangularize(system, basis2, t_grid))
    return float(np.max(np.abs(r1 - r2)))


def gram_schmidt_derivative_norm(k: int, h: float = 1e-6) -> float:
    """Operator norm (Frobenius on matrix space) of the derivative of the GS frame map at I."""
    cols = []
    for idx in range(k * k):
        E = np.zeros(k * k)
        E[idx] = 1.0
        E = E.reshape(k, k)
        plus = gram_schmidt_matrix(np.eye(k) + h * E)[0]
        minus = gram_schmidt_matrix(np.eye(k) - h * E)[0]
        cols.append(((plus - minus) / (2 * h)).ravel())
    return float(np.linalg.norm(np.array(cols).T, 2))


def check_rho_bound(A0) -> tuple:
    """``(|r(B(0))|, K ||A(0)||, passed)`` with ``K = 1 + ||T_I G||`` and the standard basis."""
    A0 = np.asarray(A0, dtype=float)
    k = A0.shape[0]
    B0 = _split_skew(A0)[1]
    lhs = float(np.max(np.abs(np.diag(B0))))
    K = 1.0 + gram_schmidt_derivative_norm(k)
    rhs = K * float(np.linalg.norm(A0, 2))
    return lhs, rhs, bool(lhs <= rhs)


SUITE_TOLERANCES = {
    "orthogonality": 1e-8,
    "triangularity": 1e-8,
    "offdiag_excess": 1e-6,
    "diag_gamma_per_time": 1e-6,
    "basis_gap": 1e-6,
    "reconstruction": 1e-6,
}


def perron_suite(seed: int = 0, n_systems: int = 50, k_max: int = 5, T: float = 10.0, step: float = 0.1):
    """Audit rows for ``n_systems`` random systems with ``k`` cycling through ``1..k_max``.

    Each system is triangularized from two independent random bases; the
    second run only feeds ``basis_gap``, the largest difference between the
    two ``r(B)`` paths.
    """
    rng = np.random.default_rng(seed)
    t_grid = np.arange(int(round(T / step)) + 1) * step
    rows = []
    for i in range(n_systems):
        k = 1 + i % k_max
        system = random_smooth_system(rng, k)
        b1 = rng.standard_normal((k, k))
        b2 = rng.standard_normal((k, k))
        traj = triangularize(system, b1, t_grid)
        row = {"system": i, "k": k}
        row.update(audit_trajectory(system, traj, b1))
        other = triangularize(system, b2, t_grid)
        row["basis_gap"] = float(np.max(np.abs(spectral_radius_path(traj) - spectral_radius_path(other))))
        rows.append(row)
    return rows


def suite_violations(rows) -> dict:
    """Count of rows above tolerance, per audited quantity."""
    return {key: sum(1 for r in rows if r[key] > tol) for key, tol in SUITE_TOLERANCES.items()}


# ---------------------------------------------------------------------------
# suspension crossings (impulsive base-tangent cocycle)
# ---------------------------------------------------------------------------


def crossing_trajectory(flow: SuspensionFlow, p: FlowPoint, T: float, basis=None) -> TriangularTrajectory:
    """QR at every crossing; nodes are 0, the crossing times and T."""
    Q, R0 = gram_schmidt(np.eye(2) if basis is None else basis)
    times, incs = [0.0], [np.zeros(2)]
    for seg in FiberWalk(flow, np.array([p.x]), np.array([p.s]), T):
        if seg.crossed[0]:
            M = flow.base.jacobian(seg.x[0]) @ Q
            Q, R = gram_schmidt_matrix(M)
            times.append(float(seg.t0[0] + seg.length[0]))
            incs.append(np.log(np.abs(np.diag(R))))
    if times[-1] < T:
        times.append(float(T))
        incs.append(np.zeros(2))
    t = np.array(times)
    inc = np.array(incs)
    diag = np.cumsum(inc, axis=0)
    r_int = np.cumsum(np.max(np.abs(inc), axis=1))
    dt = np.diff(t, prepend=0.0)
    dens = np.divide(inc, dt[:, None], out=np.zeros_like(inc), where=dt[:, None] > 0)
    B = np.zeros((len(t), 2, 2))
    B[:, 0, 0], B[:, 1, 1] = dens[:, 0], dens[:, 1]
    return TriangularTrajectory(
        "impulsive", t, B, diag, r_int, np.cumsum(np.log(np.abs(np.diag(R0)))), R0=R0,
        meta={"x": p.x, "s": p.s},
    )


def cocycle_shift_check(flow: SuspensionFlow, p: FlowPoint, s: float, t: float, basis=None) -> float:
    """Compare integrated diagonals of ``B_p`` on ``[s, s+t]`` with those of ``B_{f_s p}`` on ``[0, t]``.

    The second frame is the Gram-Schmidt frame of the first basis pushed
    forward by the derivative of ``f_s``.
    """
    from .dynamics import evolve

    V = np.eye(2) if basis is None else np.asarray(basis, dtype=float)
    Q = gram_schmidt(V)[0]
    left = np.zeros(2)
    for seg in FiberWalk(flow, np.array([p.x]), np.array([p.s]), s + t):
        if seg.crossed[0]:
            Q, R = gram_schmidt_matrix(flow.base.jacobian(seg.x[0]) @ Q)
            if seg.t0[0] + seg.length[0] > s:
                left += np.log(np.abs(np.diag(R)))
    W = jacobian_cocycle(flow, p, s) @ _as_basis_matrix(V)
    q = evolve(flow, p, s)
    Q = gram_schmidt_matrix(W)[0]
    right = np.zeros(2)
    for seg in FiberWalk(flow, np.array([q.x]), np.array([q.s]), t):
        if seg.crossed[0]:
            Q, R = gram_schmidt_matrix(flow.base.jacobian(seg.x[0]) @ Q)
            right += np.log(np.abs(np.diag(R)))
    return float(np.max(np.abs(left - right)))


# ---------------------------------------------------------------------------
# one-dimensional bundles in the continuous suspension metric
# ---------------------------------------------------------------------------


class BundleSegment(NamedTuple):
    seg: Segment
    mw: MetricWeights  # spectral data of the fiber's base point along the bundle
    sig_a: np.ndarray  # normalized height at the segment start
    sig_b: np.ndarray  # normalized height at the segment end
    log_a: np.ndarray  # log ||T^E f_t|| at the segment start
    phi_a: np.ndarray  # metric_log_norm at sig_a


def bundle_segments(flow: SuspensionFlow, points: PointSet, T: float, kind: str = "unstable",
                    depth: int = 40) -> Iterator[BundleSegment]:
    """Walk orbits while tracking ``log ||T^E f_t||`` in the suspension metric.

    ``log ||T^E f_t||`` on the fiber over ``x_k`` at height ``sigma`` is
    ``A_k + Phi_k(sigma) - Phi_0(sigma_0)`` where ``A_k`` accumulates the
    Euclidean log-stretch of the bundle at the crossings.
    """
    walk = FiberWalk(flow, points.x, points.s, T)
    base = flow.base
    v = bundle_directions(base, walk.x, kind, depth)
    acc = None
    phi0 = None
    for seg in walk:
        mw = metric_weights(base, seg.x, v)
        sig_a = seg.s0 / seg.roof
        sig_b = (seg.s0 + seg.length) / seg.roof
        phi_a = metric_log_norm(mw, sig_a)
        if acc is None:
            phi0 = phi_a
            acc = np.zeros(len(sig_a))
        yield BundleSegment(seg, mw, sig_a, sig_b, acc - phi0 + phi_a, phi_a)
        if seg.crossed.any():
            idx = np.flatnonzero(seg.crossed)
            J = base.jacobian(seg.x[idx])
            w = np.einsum("nij,nj->ni", J, v[idx])
            nrm = np.linalg.norm(w, axis=1)
            acc = acc.copy()
            acc[idx] += np.log(nrm)
            v = v.copy()
            if kind == "unstable":
                v[idx] = w / nrm[:, None]
            else:
                v[idx] = bundle_directions(base, base(seg.x[idx]), kind, 25, tol=1e-7)
                # keep the orientation carried by the derivative
                flip = np.einsum("ni,ni->n", v[idx], w) < 0
                v[idx[flip]] *= -1.0


def bundle_rate(bs: BundleSegment, sigma) -> np.ndarray:
    """``b(t) = d/dt log ||T^E f_t||`` at normalized height ``sigma``."""
    return metric_log_rate(bs.mw, sigma) / bs.seg.roof


def abs_rate_integral(bs: BundleSegment) -> np.ndarray:
    """``int |b| dt`` over each segment, split where ``b`` changes sign."""
    mw = bs.mw
    phi_b = metric_log_norm(mw, bs.sig_b)
    root = metric_rate_root(mw, 0.0)
    inside = (root > bs.sig_a) & (root < bs.sig_b)
    phi_r = metric_log_norm(mw, np.where(inside, root, bs.sig_a))
    split = np.abs(phi_r - bs.phi_a) + np.abs(phi_b - phi_r)
    return np.where(bs.seg.length > 0, np.where(inside, split, np.abs(phi_b - bs.phi_a)), 0.0)


def bundle_u_values(flow: SuspensionFlow, points: PointSet, kind: str = "unstable") -> np.ndarray:
    """``u(p) = r(B_p(0)) = |b(0)|`` for the bundle at each point."""
    v = bundle_directions(flow.base, points.x, kind)
    mw = metric_weights(flow.base, points.x, v)
    r = flow.roof(points.x)
    return np.abs(metric_log_rate(mw, points.s / r)) / r


def bundle_trajectory(flow: SuspensionFlow, p: FlowPoint, T: float, kind: str = "unstable") -> TriangularTrajectory:
    """One-dimensional triangular trajectory of the bundle with nodes at segment ends."""
    times, logs, rint = [0.0], [0.0], [0.0]
    b_nodes = []
    for bs in bundle_segments(flow, PointSet.of(p), T, kind):
        if bs.seg.length[0] <= 0:
            continue
        b_nodes.append(float(bundle_rate(bs, bs.sig_a)[0]))
        times.append(float(bs.seg.t0[0] + bs.seg.length[0]))
        logs.append(float(bs.log_a[0] + metric_log_norm(bs.mw, bs.sig_b)[0] - bs.phi_a[0]))
        rint.append(rint[-1] + float(abs_rate_integral(bs)[0]))
    b_nodes.append(b_nodes[-1] if b_nodes else 0.0)
    B = np.array(b_nodes).reshape(-1, 1, 1)
    return TriangularTrajectory(
        "bundle", np.array(times), B, np.array(logs)[:, None], np.array(rint), np.zeros(1),
        meta={"x": p.x, "s": p.s, "kind": kind},
    )
