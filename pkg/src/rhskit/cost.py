"""Hardware cost models and cost-effectiveness metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# elements per unit of radar utility (scaled by P_M) in the analytic bound
SURROGATE_FACTOR = 6.0


@dataclass(frozen=True)
class CostModel:
    """Cost parameters of an RHS and an equivalent phased array.

    ``nu`` is the price of one RHS element, ``chi`` of one RF chain and
    ``beta_ratio`` the price of a phased-array antenna in units of ``nu``.
    ``M`` and ``M_A`` are the element counts of the RHS and of the phased
    array, ``P_M`` the per-antenna power budget and ``rho`` the ISAC weight.
    """

    nu: float = 1.0
    chi: float = 10.0
    beta_ratio: float = 9.0
    M: int = 256
    M_A: int = 64
    K: int = 1
    P_M: float = 1.0
    rho: float = 0.8

    def __post_init__(self):
        for name in ("nu", "chi", "beta_ratio", "P_M"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.M < 1 or self.M_A < 1 or self.K < 1:
            raise ValueError("element and RF-chain counts must be >= 1")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")

    def rhs_cost(self, elements=None):
        return self.nu * (self.M if elements is None else elements) + self.chi * self.K

    def phased_array_cost(self, elements=None):
        n = self.M_A if elements is None else elements
        return self.beta_ratio * self.nu * n + self.chi * self.K


class ElementLookup:
    """RHS element count needed for a radar utility, read off a measured sweep.

    Samples are (delta, elements) pairs, typically at power-of-two element
    counts; queries interpolate linearly in log-log space and extrapolate
    along the end segments.
    """

    def __init__(self, deltas, elements):
        d = np.asarray(deltas, dtype=float)
        e = np.asarray(elements, dtype=float)
        if d.size < 2 or d.shape != e.shape or np.any(d <= 0) or np.any(e <= 0):
            raise ValueError("need at least two positive (delta, elements) samples")
        o = np.argsort(d)
        self.log_d = np.log(d[o])
        self.log_e = np.log(e[o])
        if np.any(np.diff(self.log_d) <= 0):
            raise ValueError("delta samples must be distinct")

    def __call__(self, delta):
        x = np.log(np.asarray(delta, dtype=float))
        y = np.interp(x, self.log_d, self.log_e)
        lo = x < self.log_d[0]
        hi = x > self.log_d[-1]
        s0 = (self.log_e[1] - self.log_e[0]) / (self.log_d[1] - self.log_d[0])
        s1 = (self.log_e[-1] - self.log_e[-2]) / (self.log_d[-1] - self.log_d[-2])
        y = np.where(lo, self.log_e[0] + s0 * (x - self.log_d[0]), y)
        y = np.where(hi, self.log_e[-1] + s1 * (x - self.log_d[-1]), y)
        return np.exp(y)


def surrogate_elements(delta, P_M):
    """Analytic upper bound on the RHS element count, ``6 delta / P_M``."""
    return SURROGATE_FACTOR * (np.asarray(delta, dtype=float) / P_M)


def cost_effectiveness(cost: CostModel, delta, elements=None):
    """Relative saving ``1 - alpha_r / alpha_a`` of an RHS over a phased array.

    The phased array needs ``delta / P_M`` antennas.  The RHS element count
    comes from ``elements`` (an :class:`ElementLookup` or any callable of
    ``delta``), or from the analytic surrogate when omitted.
    """
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0):
        raise ValueError("delta must be positive")
    per = delta / cost.P_M
    n_rhs = SURROGATE_FACTOR * per if elements is None else np.asarray(elements(delta), dtype=float)
    alpha_r = cost.nu * n_rhs + cost.chi * cost.K
    alpha_a = cost.nu * (cost.beta_ratio * per) + cost.chi * cost.K
    eta = 1.0 - alpha_r / alpha_a
    return float(eta) if eta.ndim == 0 else eta


def cost_efficiency_comm(sum_rate, cost):
    """Sum rate per unit hardware cost; ``cost`` is a number or a :class:`CostModel` (RHS side)."""
    c = cost.rhs_cost() if isinstance(cost, CostModel) else float(cost)
    if not c > 0:
        raise ValueError("hardware cost must be positive")
    return float(sum_rate) / c
