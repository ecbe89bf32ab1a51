"""Joint sensing and communication on one holographic transmitter.

The transmit signal is ``x = diag(m) Q V s`` where the first L columns of
``V`` carry the user streams and the remaining K columns are dedicated
radar streams.  With ``P = Q V V^H Q^H`` and target steering rows ``a_t``:

* gain toward target t: ``g_t = (a_t * m) P (a_t * m)^H``
* cross-correlation of targets t, t': ``|(a_t * m) P (a_t' * m)^H| / sqrt(g_t g_t')``
* utility: ``delta = rho * mean(g) - (1 - rho) * mean(corr)``

The digital step is a semidefinite relaxation over the stream covariances
whose rank-one user part is recovered without loss; the amplitude step is a
projected-gradient move.  Either step is kept only if the true utility does
not drop and every constraint still holds.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations

import cvxpy as cp
import numpy as np

from ..comm.beamforming import HybridBeamformer
from ..errors import InfeasibleError
from ..surface import Direction, HolographicPattern, SurfaceGeometry, reference_matrix, steering_matrix
from .radar import optimize_amplitudes

FEAS_TOL = 1e-6


def isac_utility(gains, correlations, rho=0.8) -> float:
    """Radar utility; ``correlations`` may be empty (single target)."""
    g = np.asarray(gains, dtype=float).ravel()
    c = np.asarray(correlations, dtype=float).ravel()
    if g.size == 0:
        raise ValueError("at least one target gain is required")
    if np.any(g < 0):
        raise ValueError("beampattern gains must be non-negative")
    if np.any((c < 0) | (c > 1 + 1e-12)):
        raise ValueError("cross-correlations must lie in [0, 1]")
    if not 0 <= rho <= 1:
        raise ValueError("rho must lie in [0, 1]")
    corr = float(c.mean()) if c.size else 0.0
    return float(rho * g.mean() - (1 - rho) * corr)


@dataclass(frozen=True, eq=False)
class IsacScene:
    """Single-antenna users (channel rows of length N) and target directions."""

    geom: SurfaceGeometry
    users: tuple = ()
    targets: tuple = ()
    sigma2: float = 1.0
    eta: float = 1.0
    steering: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        H = tuple(np.asarray(h, dtype=complex).ravel() for h in self.users)
        if any(h.size != self.geom.n_elements for h in H):
            raise ValueError("user channel length does not match the surface")
        T = tuple(self.targets)
        if not all(isinstance(t, Direction) for t in T):
            raise TypeError("targets must be Direction instances")
        if self.sigma2 <= 0 or not 0 < self.eta <= 1:
            raise ValueError("sigma2 must be positive and eta in (0, 1]")
        object.__setattr__(self, "users", H)
        object.__setattr__(self, "targets", T)
        S = steering_matrix(self.geom, list(T)) if T else np.zeros((0, self.geom.n_elements), complex)
        object.__setattr__(self, "steering", S)

    @property
    def L(self):
        return len(self.users)

    @property
    def K(self):
        return self.geom.n_feeds


@dataclass
class IsacResult:
    beamformer: HybridBeamformer
    delta: float
    sinr: np.ndarray
    trace: list
    power: float


# ---------------------------------------------------------------- evaluation


def _covariance(Q, V):
    X = Q @ V
    return X @ X.conj().T


def _terms(scene, m, P):
    """Target gains, pair list and complex cross terms for amplitudes ``m``."""
    B = scene.steering * m  # T x N
    BP = B @ P
    g = np.real(np.einsum("tn,tn->t", BP, B.conj()))
    pairs = list(combinations(range(len(g)), 2))
    x = np.array([BP[i] @ B[j].conj() for i, j in pairs], dtype=complex)
    return g, pairs, x


def _correlations(g, pairs, x):
    out = np.empty(len(pairs))
    for k, (i, j) in enumerate(pairs):
        d = np.sqrt(g[i] * g[j])
        out[k] = min(1.0, abs(x[k]) / d) if d > 0 else 0.0
    return out


def evaluate_delta(scene, m, Q, V, rho):
    if not scene.targets:
        return 0.0
    g, pairs, x = _terms(scene, m, _covariance(Q, V))
    return isac_utility(np.maximum(g, 0.0), _correlations(g, pairs, x), rho)


def user_sinrs(scene, m, Q, V):
    if scene.L == 0:
        return np.zeros(0)
    Hb = np.stack(scene.users) * m
    T = np.abs(Hb @ Q @ V) ** 2  # L x (L + K)
    sig = np.diag(T[:, : scene.L])
    return sig / (T.sum(axis=1) - sig + scene.sigma2)


def isac_power(scene, m, Q, V):
    return float(scene.eta * np.linalg.norm((m[:, None] * Q) @ V) ** 2)


def _feasible(scene, m, Q, V, sinr_min, P_T):
    if isac_power(scene, m, Q, V) > P_T * (1 + FEAS_TOL):
        return False
    s = user_sinrs(scene, m, Q, V)
    return bool(np.all(s >= sinr_min * (1 - FEAS_TOL)))


# ---------------------------------------------------------------- digital step


def _sdr(scene, m, Q, sinr_min, P_T, rho, weights=None, objective=True):
    """Solve the relaxed digital problem for fixed amplitudes.

    Returns ``V`` (K x (L + K)) or None if the relaxation is infeasible.
    ``weights`` fixes the correlation normalizers of the linearized utility.
    """
    K, L = scene.K, scene.L
    A = m[:, None] * Q
    # normalize powers so the solver works near unit scale
    s = P_T
    Rs = [cp.Variable((K, K), hermitian=True) for _ in range(L + 1)]
    R = sum(Rs)
    cons = [X >> 0 for X in Rs]
    G = scene.eta * (A.conj().T @ A) / s
    cons.append(cp.real(cp.trace(G @ R)) <= 1.0)
    floor = sinr_min * (1 + 10 * FEAS_TOL) if L else 0.0
    for l, h in enumerate(scene.users):
        b = h @ A
        Hl = np.outer(b.conj(), b)
        sig = cp.real(cp.trace(Hl @ Rs[l]))
        tot = cp.real(cp.trace(Hl @ R))
        cons.append(sig >= floor * (tot - sig + scene.sigma2 / s))
    obj = 0
    if objective and scene.targets:
        Bt = scene.steering @ A  # T x K
        norm = max(s * float(np.max(np.sum(np.abs(Bt) ** 2, axis=1))), 1e-300)
        gains = [s * cp.real(cp.trace(np.outer(b.conj(), b) @ R)) for b in Bt]
        obj = rho * sum(gains) / len(gains)
        pairs = list(combinations(range(len(Bt)), 2))
        if pairs and rho < 1 and weights is not None:
            corr = [cp.abs(cp.trace(np.outer(Bt[j].conj(), Bt[i]) @ R)) / weights[k] for k, (i, j) in enumerate(pairs)]
            obj = obj - (1 - rho) * sum(corr) / len(corr)
        obj = obj / norm
    prob = cp.Problem(cp.Maximize(obj), cons)
    with warnings.catch_warnings():
        # cvxpy's complex canonicalization and accuracy notes are noise here;
        # every returned iterate is re-checked against the true constraints
        warnings.simplefilter("ignore", UserWarning)
        try:
            prob.solve(solver=cp.CLARABEL)
        except cp.SolverError:
            prob.solve(solver=cp.SCS, eps=1e-9, max_iters=20000)
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return None
    Rv = [X.value * s for X in Rs]
    return _recover(scene, A, Rv, Q)


def _recover(scene, A, Rv, Q):
    """Rank-one user streams carved out of the total covariance."""
    K, L = scene.K, scene.L
    R = sum(Rv)
    R = (R + R.conj().T) / 2
    V = np.zeros((K, L + K), dtype=complex)
    used = np.zeros((K, K), dtype=complex)
    for l, h in enumerate(scene.users):
        b = h @ A
        Rl = (Rv[l] + Rv[l].conj().T) / 2
        den = np.real(b @ Rl @ b.conj())
        if den > 0:
            V[:, l] = Rl @ b.conj() / np.sqrt(den)
        used += np.outer(V[:, l], V[:, l].conj())
    rest = R - used
    ev, U = np.linalg.eigh((rest + rest.conj().T) / 2)
    V[:, L:] = U * np.sqrt(np.clip(ev, 0.0, None))
    return V


def _fit_power(scene, m, Q, V, P_T):
    p = isac_power(scene, m, Q, V)
    return V * np.sqrt(P_T / p) if p > 0 else V


# ---------------------------------------------------------------- amplitude step


def _delta_grad(scene, m, P, rho):
    """Utility and its gradient in the amplitudes for a fixed covariance."""
    S = scene.steering
    T = S.shape[0]
    B = S * m
    BP = B @ P
    g = np.real(np.einsum("tn,tn->t", BP, B.conj()))
    # d g_t / d m = 2 Re(conj(a_t) * (P (a_t*m)^H)^* ...) written elementwise
    dg = 2 * np.real(S * (B.conj() @ P.T))
    val = rho * g.mean()
    grad = rho * dg.mean(axis=0)
    pairs = list(combinations(range(T), 2))
    if pairs and rho < 1:
        cs, dcs = [], []
        for i, j in pairs:
            x = BP[i] @ B[j].conj()
            d = np.sqrt(max(g[i] * g[j], 1e-300))
            # x = sum_nk m_n m_k S_in P_nk conj(S_jk)
            dx = S[i] * (P @ B[j].conj()) + np.conj(S[j]) * (P.T @ B[i])
            ax = abs(x)
            dax = np.real(np.conj(x) * dx) / max(ax, 1e-300)
            c = ax / d
            dc = dax / d - 0.5 * c * (dg[i] / max(g[i], 1e-300) + dg[j] / max(g[j], 1e-300))
            cs.append(c)
            dcs.append(dc)
        val -= (1 - rho) * np.mean(cs)
        grad = grad - (1 - rho) * np.mean(dcs, axis=0)
    return float(val), grad


def _amplitude_step(scene, m, Q, V, sinr_min, P_T, rho, delta, tries=8):
    P = _covariance(Q, V)
    _, grad = _delta_grad(scene, m, P, rho)
    gn = np.linalg.norm(grad)
    if not np.isfinite(gn) or gn == 0:
        return m, V, delta
    step = 0.5 * np.sqrt(m.size) / gn
    for _ in range(tries):
        m2 = np.clip(m + step * grad, 0.0, 1.0)
        if np.max(m2) > 0:
            cands = [_fit_power(scene, m2, Q, V, P_T)]
            if scene.L:
                # SINR floors usually bind; let the relaxation repair the streams
                Vr = _sdr(scene, m2, Q, sinr_min, P_T, rho, weights=_pair_weights(scene, m2, Q, V, P_T))
                if Vr is not None:
                    cands.append(_fit_power(scene, m2, Q, Vr, P_T))
            for V2 in cands:
                if _feasible(scene, m2, Q, V2, sinr_min, P_T):
                    d2 = evaluate_delta(scene, m2, Q, V2, rho)
                    if d2 > delta:
                        return m2, V2, d2
        step *= 0.5
    return m, V, delta


def _pair_weights(scene, m, Q, V, P_T):
    g, pairs, _ = _terms(scene, m, _covariance(Q, V))
    if not pairs:
        return None
    i, j = np.array(pairs).T
    return np.sqrt(np.maximum(g[i] * g[j], 1e-300)) / P_T


# ---------------------------------------------------------------- driver


def _initial_patterns(scene, Q):
    q = Q[:, 0]
    rows = [scene.steering[t] for t in range(len(scene.targets))] + list(scene.users)
    cands = []
    if rows:
        sols = [optimize_amplitudes(a, q).amplitudes for a in rows]
        mix = np.mean([s / s.max() for s in sols], axis=0)
        cands.append(mix / mix.max())
    cands.append(np.ones(scene.geom.n_elements))
    return cands


def max_min_sinr(scene, m, Q, P_T, hi=None, iters=40, rtol=1e-3) -> float:
    """Largest common SINR floor the relaxation can meet at amplitudes ``m``.

    Bisection stops once the bracket is within ``rtol`` of its upper end;
    the lower end, a floor known to be feasible, is returned.
    """
    if scene.L == 0:
        return np.inf
    A = m[:, None] * Q
    if hi is None:
        # single-user optimum of the weakest user bounds any common floor
        G = scene.eta * (A.conj().T @ A)
        Gp = np.linalg.pinv(G)
        hi = min(float(np.real(h @ A @ Gp @ (h @ A).conj())) for h in scene.users) * P_T / scene.sigma2
    lo = 0.0
    for _ in range(iters):
        mid = (lo + hi) / 2
        if _sdr(scene, m, Q, mid, P_T, 1.0, objective=False) is None:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rtol * max(hi, 1e-12):
            break
    return lo


def optimize_isac(scene: IsacScene, sinr_min, P_T, rho=0.8, max_iters=20, tol=1e-7, init=None) -> IsacResult:
    """Maximize the radar utility subject to per-user SINR floors and a power budget.

    ``init`` (an :class:`IsacResult` from a looser or tighter run) warm-starts
    the amplitudes and digital streams; it is used only when feasible.
    Raises :class:`InfeasibleError` carrying the achievable max-min SINR when no
    starting point meets the floor.
    """
    if sinr_min < 0 or P_T <= 0:
        raise ValueError("sinr_min must be >= 0 and P_T > 0")
    if not 0 <= rho <= 1:
        raise ValueError("rho must lie in [0, 1]")
    Q = reference_matrix(scene.geom)
    best = None
    if init is not None:
        m0 = np.asarray(init.beamformer.pattern.flat, dtype=float)
        V0 = _fit_power(scene, m0, Q, init.beamformer.digital, P_T)
        if _feasible(scene, m0, Q, V0, sinr_min, P_T):
            best = (m0, V0, evaluate_delta(scene, m0, Q, V0, rho))
    starts = _initial_patterns(scene, Q)
    for m0 in starts:
        V0 = _sdr(scene, m0, Q, sinr_min, P_T, rho)
        if V0 is None:
            continue
        V0 = _fit_power(scene, m0, Q, V0, P_T)
        if not _feasible(scene, m0, Q, V0, sinr_min, P_T):
            continue
        d0 = evaluate_delta(scene, m0, Q, V0, rho)
        if best is None or d0 > best[2]:
            best = (m0, V0, d0)
        if scene.targets:
            break
    if best is None:
        achievable = max(max_min_sinr(scene, m0, Q, P_T) for m0 in starts)
        raise InfeasibleError(f"SINR floor {sinr_min:.6g} is infeasible; the pre-solve reaches {achievable:.4g}")

    m, V, delta = best
    trace = [delta]
    if scene.targets:
        for _ in range(max_iters):
            prev = delta
            V2 = _sdr(scene, m, Q, sinr_min, P_T, rho, weights=_pair_weights(scene, m, Q, V, P_T))
            if V2 is not None:
                V2 = _fit_power(scene, m, Q, V2, P_T)
                if _feasible(scene, m, Q, V2, sinr_min, P_T):
                    d2 = evaluate_delta(scene, m, Q, V2, rho)
                    if d2 > delta:
                        V, delta = V2, d2
            m, V, delta = _amplitude_step(scene, m, Q, V, sinr_min, P_T, rho, delta)
            trace.append(delta)
            if delta - prev <= tol * max(abs(prev), 1.0):
                break
    bf = HybridBeamformer(V, HolographicPattern.build(m), Q, np.ones((1, scene.L), dtype=complex))
    return IsacResult(bf, float(delta), user_sinrs(scene, m, Q, V), trace, isac_power(scene, m, Q, V))


def isac_floor_sweep(scene, floors, P_T, rho=0.8, **kw):
    """Solve per SINR floor, from the tightest floor outward.

    Each looser floor starts from the solution of the next tighter one, so
    the utility can only grow as the floor relaxes.  Returns one
    :class:`IsacResult` per floor, or None where the floor is infeasible.
    """
    order = np.argsort(np.asarray(floors, dtype=float), kind="stable")[::-1]
    out = [None] * len(floors)
    prev = None
    for i in order:
        try:
            res = optimize_isac(scene, float(floors[i]), P_T, rho, init=prev, **kw)
        except InfeasibleError:
            continue
        out[i] = prev = res
    return out


def element_lookup_samples(make_scene, sizes, sinr_min, P_T, rho=0.8):
    """(delta, elements) samples for :class:`rhskit.cost.ElementLookup`.

    ``make_scene(n)`` builds the scene for an n-element surface.
    """
    deltas = []
    for n in sizes:
        deltas.append(optimize_isac(make_scene(int(n)), sinr_min, P_T, rho).delta)
    return np.asarray(deltas), np.asarray(sizes, dtype=float)
