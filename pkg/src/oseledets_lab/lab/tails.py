"""Tail-index estimation and the L^p comparison table."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateProfile, InsufficientSamples, TooFewExceedances
from ..thermo import EntropyProfile, integrability_threshold

N_BOOT = 200


@dataclass(frozen=True)
class HillEstimate:
    p_hat: float
    k: int
    n: int
    ci_low: float
    ci_high: float
    threshold_log: float  # log of the (k+1)-th largest value

    @property
    def degenerate(self) -> bool:
        return math.isinf(self.p_hat)


def _hill_gamma(sorted_desc: np.ndarray, k: int) -> float:
    return float(np.mean(sorted_desc[:k]) - sorted_desc[k])


def _top(logs: np.ndarray, k: int) -> np.ndarray:
    # the k+1 largest in descending order
    part = np.partition(logs, len(logs) - k - 1)[len(logs) - k - 1:]
    return np.sort(part)[::-1]


def hill_from_logs(logs, k: int, seed: int = 0, n_boot: int = N_BOOT) -> HillEstimate:
    """Hill estimate of ``p`` in ``P(X > x) ~ x^{-p}`` from ``log X``.

    Working on logs avoids overflow for quantities like ``exp(T_eps)``.
    The interval is a percentile bootstrap over ``n_boot`` resamples.
    """
    logs = np.asarray(logs, dtype=float).ravel()
    n = len(logs)
    if not np.all(np.isfinite(logs)):
        raise ValueError("values must be positive and finite")
    if k < 1 or k >= n / 2:
        raise TooFewExceedances(f"need 1 <= k < n/2, got k={k}, n={n}")
    top = _top(logs, k)
    gamma = _hill_gamma(top, k)
    if gamma <= 0:
        raise TooFewExceedances("top order statistics are tied; tail index undefined")
    rng = np.random.default_rng(seed)
    boot = np.empty(n_boot)
    for b in range(n_boot):
        g = _hill_gamma(_top(logs[rng.integers(0, n, n)], k), k)
        boot[b] = 1.0 / g if g > 0 else math.inf
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return HillEstimate(1.0 / gamma, k, n, float(lo), float(hi), float(top[k]))


def hill_tail_index(values, k: int, seed: int = 0, n_boot: int = N_BOOT) -> HillEstimate:
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        raise ValueError("values must be positive")
    return hill_from_logs(np.log(values), k, seed, n_boot)


def hill_profile(logs, ks) -> np.ndarray:
    """Point estimates over a range of ``k``; a drifting profile flags a misspecified tail."""
    logs = np.sort(np.asarray(logs, dtype=float))[::-1]
    out = np.empty(len(ks))
    for i, k in enumerate(ks):
        g = _hill_gamma(logs, int(k))
        out[i] = 1.0 / g if g > 0 else math.inf
    return out


def _hill_or_sentinel(logs, k, seed):
    try:
        return hill_from_logs(logs, k, seed)
    except TooFewExceedances:
        # bounded (or single-atom) distribution: every finite moment exists
        return HillEstimate(math.inf, k, len(logs), math.inf, math.inf, float(np.max(logs)))


@dataclass(frozen=True)
class LpReport:
    eps: float
    chi: float
    H_level: float  # H(chi + eps)
    p_star: float
    hill_D: HillEstimate
    hill_T: HillEstimate
    untruncated: float
    margin: float = 0.7

    @property
    def T_pass(self) -> bool:
        return self.hill_T.p_hat >= self.margin * self.H_level

    @property
    def D_pass(self) -> bool:
        return self.hill_D.p_hat >= self.margin * self.p_star

    def rows(self) -> list:
        return [
            ("H(chi+eps)", self.H_level, "legendre"),
            ("p_star", self.p_star, "threshold-quadrature"),
            ("p_hat_D", self.hill_D.p_hat, "hill"),
            ("p_hat_D_ci_low", self.hill_D.ci_low, "hill-bootstrap"),
            ("p_hat_D_ci_high", self.hill_D.ci_high, "hill-bootstrap"),
            ("p_hat_T", self.hill_T.p_hat, "hill"),
            ("p_hat_T_ci_low", self.hill_T.ci_low, "hill-bootstrap"),
            ("p_hat_T_ci_high", self.hill_T.ci_high, "hill-bootstrap"),
            ("untruncated_fraction", self.untruncated, "scan"),
            ("T_pass", float(self.T_pass), "margin-0.7"),
            ("D_pass", float(self.D_pass), "margin-0.7"),
        ]


def lp_report(log_D, T_eps, truncated, profile: EntropyProfile, eps: float, chi: float, u_sup: float,
              k: int = 500, seed: int = 0, margin: float = 0.7) -> LpReport:
    """Tail indices of ``D_eps`` and ``exp(T_eps)`` next to the rate-function predictions."""
    truncated = np.asarray(truncated, dtype=bool)
    untr = 1.0 - float(truncated.mean()) if truncated.size else 1.0
    if untr < 0.99:
        raise InsufficientSamples(f"only {untr:.3%} of the scans reached their maximum")
    H_level = float(profile.H_at(chi + eps)[0])
    try:
        p_star = integrability_threshold(profile, chi, u_sup, eps)
    except DegenerateProfile as exc:
        p_star = exc.threshold
    hD = _hill_or_sentinel(np.asarray(log_D)[~truncated], k, seed)
    hT = _hill_or_sentinel(np.asarray(T_eps)[~truncated], k, seed + 1)
    return LpReport(eps, chi, H_level, p_star, hD, hT, untr, margin)
