"""Hardware-cost comparisons between RHS and phased-array transmitters.

Both architectures drive a linear array at the same pitch toward the same
single-antenna users.  The RHS uses a superposition of single-user
holographic patterns (user l on feed l) followed by zero-forcing; the
phased array uses per-element phase steering toward each user, also
followed by zero-forcing.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..channels import los_channel, surface_steering
from ..cost import cost_efficiency_comm
from ..errors import SingularChannelError
from ..surface import Direction, SurfaceGeometry, reference_matrix, single_beam_pattern, spread_feeds
from .beamforming import (
    CommScenario,
    HybridBeamformer,
    effective_channel,
    matched_combiners,
    sum_rate,
    zf_digital,
)
from .hdma import HdmaWeights, hdma_constants, hdma_optimal_weights, hdma_pattern, hdma_sum_rate


@dataclass(frozen=True)
class LinkSetup:
    """Users on the horizon at azimuths ``user_phi_deg`` with unit LoS gains."""

    user_phi_deg: tuple = (-30.0, 25.0)
    snr_db: float = 0.0
    lambda0: float = 1.0
    n_g: float = 1.732

    @property
    def L(self):
        return len(self.user_phi_deg)

    @property
    def directions(self):
        return [Direction.from_degrees(90.0, p) for p in self.user_phi_deg]

    def sigma2(self, P_T=1.0):
        return P_T / 10 ** (self.snr_db / 10)


def _geometry(setup, n, feeds):
    d = setup.lambda0 / 3
    return SurfaceGeometry(n, 1, setup.lambda0, d, setup.n_g, spread_feeds(n, 1, d, feeds))


def _channels(setup, geom):
    return [los_channel(geom, u, 1.0).matrix for u in setup.directions]


def rhs_sum_rate(setup: LinkSetup, n: int) -> float:
    """RHS sum rate with equal-weight pattern superposition and ZF."""
    return _rhs_rate_cached(setup, int(n))


@lru_cache(maxsize=4096)
def _rhs_rate_cached(setup, n):
    L = setup.L
    geom = _geometry(setup, n, L)
    sc = CommScenario(geom, _channels(setup, geom), setup.sigma2(), 1.0)
    # feed l carries the pattern of user l only; all-pairs superposition makes G near rank one
    pats = [[single_beam_pattern(geom, k, u) for k in range(L)] for u in setup.directions]
    w = HdmaWeights(np.eye(L) / L, float("nan"), np.ones(L))
    pat = hdma_pattern(pats, w)
    Q = reference_matrix(geom)
    W = matched_combiners(sc, pat, Q)
    try:
        V = zf_digital(effective_channel(sc, pat, Q, W), sc.P_T, pat.flat[:, None] * Q)
    except SingularChannelError:
        return 0.0
    return sum_rate(sc, HybridBeamformer(V, pat, Q, W))


def phased_array_sum_rate(setup: LinkSetup, n: int) -> float:
    """Fully connected phased array: matched steering per RF chain, then ZF."""
    return _pa_rate_cached(setup, int(n))


@lru_cache(maxsize=4096)
def _pa_rate_cached(setup, n):
    geom = _geometry(setup, n, 1)
    H = np.vstack(_channels(setup, geom))
    F = np.stack([surface_steering(geom, u) for u in setup.directions], axis=1)
    try:
        V = zf_digital(H @ F, 1.0, F)
    except SingularChannelError:
        return 0.0
    T = np.abs(H @ F @ V) ** 2
    sig = np.diag(T)
    return float(np.sum(np.log2(1 + sig / (setup.sigma2() + T.sum(1) - sig))))


def min_elements(rate_fn, target, n_max=4096, n_min=1):
    """Smallest element count reaching ``target`` by bisection; None if out of budget.

    The rate is treated as non-decreasing in the element count.
    """
    if target <= 0:
        return 0
    if rate_fn(n_max) < target:
        return None
    lo, hi = n_min, n_max
    if rate_fn(lo) >= target:
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if rate_fn(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def hardware_cost_comparison(cost_ratio_c, sumrate_targets, search_opts=None, setup=None, chi=10.0):
    """Minimum element count and cost of RHS vs phased array per target rate.

    Returns a column dict with ``c, target_rate, rhs_elements, pa_elements,
    rhs_cost, pa_cost, attainable``.  Unreachable targets give NaN counts and
    ``attainable = 0``.
    """
    opts = dict(n_max=1024, n_min=1)
    opts.update(search_opts or {})
    setup = setup or LinkSetup()
    cs = np.atleast_1d(np.asarray(cost_ratio_c, dtype=float))
    if np.any(cs <= 0):
        raise ValueError("cost ratio c must be positive")
    K = setup.L
    found = {}
    for t in sumrate_targets:
        found[float(t)] = (
            min_elements(lambda n: rhs_sum_rate(setup, n), t, **opts),
            min_elements(lambda n: phased_array_sum_rate(setup, n), t, **opts),
        )
    cols = {k: [] for k in ("c", "target_rate", "rhs_elements", "pa_elements", "rhs_cost", "pa_cost", "attainable")}
    for c in cs:
        for t in sumrate_targets:
            nr, npa = found[float(t)]
            ok = nr is not None and npa is not None
            rf = 0.0 if t <= 0 else chi * K
            cols["c"].append(float(c))
            cols["target_rate"].append(float(t))
            cols["rhs_elements"].append(float(nr) if nr is not None else np.nan)
            cols["pa_elements"].append(float(npa) if npa is not None else np.nan)
            cols["rhs_cost"].append(nr + rf if nr is not None else np.nan)
            cols["pa_cost"].append(c * npa + rf if npa is not None else np.nan)
            cols["attainable"].append(1.0 if ok else 0.0)
    return {k: np.asarray(v, dtype=float) for k, v in cols.items()}


def hdma_rate(setup: LinkSetup, n: int) -> float:
    """Single-feed HDMA sum rate with optimal weights."""
    geom = _geometry(setup, n, 1)
    H = _channels(setup, geom)
    q = reference_matrix(geom)[:, 0]
    g = []
    for u, h in zip(setup.directions, H):
        m = single_beam_pattern(geom, 0, u).flat
        g.append(np.linalg.norm(h @ (m * q)) / np.sqrt(np.sum(m * m)))
    I = hdma_constants(1.0, setup.sigma2(), g)
    w = hdma_optimal_weights(I)
    return hdma_sum_rate(I, w.a)


def hdma_vs_sdma_sweep(sizes, betas, setup=None, nu=1.0, chi=10.0):
    """Cost efficiency of single-feed HDMA on an RHS vs SDMA on a phased array."""
    setup = setup or LinkSetup()
    cols = {k: [] for k in ("n_elements", "beta_ratio", "hdma_rate", "sdma_rate", "hdma_cost", "sdma_cost", "hdma_eta", "sdma_eta")}
    for b in betas:
        for n in sizes:
            rh, rs = hdma_rate(setup, n), phased_array_sum_rate(setup, n)
            ch, cs = nu * n + chi, b * nu * n + chi * setup.L
            cols["n_elements"].append(float(n))
            cols["beta_ratio"].append(float(b))
            cols["hdma_rate"].append(rh)
            cols["sdma_rate"].append(rs)
            cols["hdma_cost"].append(ch)
            cols["sdma_cost"].append(cs)
            cols["hdma_eta"].append(cost_efficiency_comm(rh, ch))
            cols["sdma_eta"].append(cost_efficiency_comm(rs, cs))
    return {k: np.asarray(v, dtype=float) for k, v in cols.items()}
