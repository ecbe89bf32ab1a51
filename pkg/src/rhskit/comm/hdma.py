"""Holographic-pattern division multiple access (HDMA).

Users share the surface through a convex combination of their single-user
patterns.  With per-user constants ``I_l``, the weights ``a_l`` maximize
``sum_l log2(1 + I_l a_l^2)`` over the probability simplex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ..errors import InfeasibleError
from ..surface import HolographicPattern, Quantization

LN2 = np.log(2.0)


@dataclass(frozen=True, eq=False)
class HdmaWeights:
    """Weights ``a`` (L x K), the multiplier ``beta_star`` and the constants ``I``."""

    a: np.ndarray
    beta_star: float
    I: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        if a.ndim != 2:
            raise ValueError("weights must be an L x K array")
        if np.any(a < 0):
            raise ValueError("weights must be non-negative")
        if abs(a.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {a.sum():.12g}, not 1")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "I", np.asarray(self.I, dtype=float))

    @property
    def per_user(self):
        return self.a.sum(axis=1)

    @classmethod
    def from_user_weights(cls, a_user, K=1, beta_star=float("nan"), I=()):
        a_user = np.asarray(a_user, dtype=float)
        return cls(np.repeat(a_user[:, None] / K, K, axis=1), beta_star, I)


def hdma_pattern(single_patterns, weights: HdmaWeights, quant: Quantization | None = None) -> HolographicPattern:
    """Weighted sum ``sum_{l,k} a_{l,k} m_l^k`` of single-user patterns.

    ``single_patterns[l][k]`` is the pattern of user ``l`` on feed ``k``; a flat
    list is read as one feed per user.
    """
    pats = [p if isinstance(p, (list, tuple)) else [p] for p in single_patterns]
    a = weights.a
    if a.shape != (len(pats), len(pats[0])) or any(len(p) != a.shape[1] for p in pats):
        raise ValueError(f"weights are {a.shape}, patterns are {len(pats)} x {len(pats[0])}")
    shape = pats[0][0].shape
    if any(p.shape != shape for row in pats for p in row):
        raise ValueError("patterns do not share one geometry")
    mask = pats[0][0].mask
    m = sum(a[l, k] * pats[l][k].amplitudes for l in range(a.shape[0]) for k in range(a.shape[1]))
    m = np.clip(np.where(mask, m, 0.0), 0.0, 1.0)
    return HolographicPattern.build(m, quant or Quantization(), mask)


def hdma_sum_rate(I, a):
    """``sum_l log2(1 + I_l a_l^2)`` for per-user weights ``a``."""
    I = np.asarray(I, dtype=float)
    a = np.asarray(a, dtype=float)
    if a.ndim == 2:
        a = a.sum(axis=1)
    return float(np.sum(np.log2(1 + I * a * a)))


def _plus_roots(x, I):
    return x + np.sqrt(np.maximum(x * x - 1.0 / I, 0.0))


def _solve_active(I, xtol):
    """Root of ``sum_l (x + sqrt(x^2 - 1/I_l)) = 1`` in ``x = 1/(beta ln 2)``; None if unbracketed."""
    if I.size == 1:
        x = (1 + 1 / I[0]) / 2
        return x, np.array([1.0])
    x_lo = float(np.max(1 / np.sqrt(I)))
    f = lambda x: float(np.sum(_plus_roots(x, I)) - 1.0)
    if f(x_lo) > 0:
        return None
    x_hi = max(2 * x_lo, 1e-300)
    while f(x_hi) < 0:
        x_hi *= 2.0
    x = brentq(f, x_lo, x_hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    a = _plus_roots(x, I)
    return x, a / a.sum()


def hdma_optimal_weights(I, tol=1e-14, K=1, active_set_search=True) -> HdmaWeights:
    """Optimal HDMA weights from the stationarity condition on the simplex.

    Each weight is the larger root ``a_l = x + sqrt(x^2 - 1/I_l)`` with
    ``x = 1/(beta* ln 2)`` set by scalar root-finding so the weights sum to 1.
    When the interior root does not exist, or a boundary point does better,
    weak users are dropped: the best of the candidate active sets (strongest
    users first) is returned.  ``active_set_search=False`` keeps every user
    and raises :class:`InfeasibleError` when that is impossible.
    """
    I = np.asarray(I, dtype=float).ravel()
    if I.size == 0 or np.any(I <= 0) or not np.all(np.isfinite(I)):
        raise ValueError("all I_l must be positive and finite")
    if not active_set_search:
        sol = _solve_active(I, tol)
        if sol is None:
            weakest = int(np.argmin(I))
            raise InfeasibleError(
                f"no real weights with all users active; user {weakest} (I={I[weakest]:.6g}) is too weak"
            )
        x, a = sol
        return HdmaWeights.from_user_weights(a, K, 1 / (x * LN2), I)

    order = np.argsort(-I, kind="stable")
    best = None
    for n_active in range(1, I.size + 1):
        act = order[:n_active]
        sol = _solve_active(I[act], tol)
        if sol is None:
            continue
        x, a_act = sol
        a = np.zeros(I.size)
        a[act] = a_act
        val = hdma_sum_rate(I, a)
        if best is None or val > best[0] + 1e-15:
            best = (val, x, a)
    _, x, a = best
    return HdmaWeights.from_user_weights(a, K, 1 / (x * LN2), I)


def hdma_constants(P_T, sigma2, gains):
    """Per-user constants ``I_l = P_T |g_l|^2 / sigma2``."""
    g = np.asarray(gains)
    return P_T * np.abs(g) ** 2 / sigma2


def grid_best_weights(I, step=1e-3):
    """Brute-force two-user oracle over ``(a, 1 - a)`` on a regular grid."""
    I = np.asarray(I, dtype=float)
    if I.size != 2:
        raise ValueError("grid oracle is for two users")
    a1 = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    vals = np.log2(1 + I[0] * a1**2) + np.log2(1 + I[1] * (1 - a1) ** 2)
    j = int(np.argmax(vals))
    return float(a1[j]), float(vals[j])
