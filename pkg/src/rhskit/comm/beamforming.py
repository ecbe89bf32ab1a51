"""Hybrid digital / holographic beamforming for the multi-user downlink.

The transmit chain is ``x = M V s``: a K x L digital precoder ``V`` feeds K
RF chains (one per feed), and the holographic analog map is
``M = diag(m) Q`` with ``Q[n, k] = exp(-j k_s |r_n - f_k|)``.  User ``l``
combines with the unit-norm vector ``W_l``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ..errors import ConstraintViolationError, SingularChannelError
from ..surface import HolographicPattern, Quantization, reference_matrix

LN2 = np.log(2.0)


@dataclass(frozen=True, eq=False)
class CommScenario:
    """Downlink scenario.  ``channels[l]`` is the M x N matrix of user ``l``."""

    geom: object
    channels: tuple
    sigma2: float
    P_T: float
    J: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        H = tuple(np.atleast_2d(np.asarray(h, dtype=complex)) for h in self.channels)
        if not H:
            raise ValueError("scenario needs at least one user")
        shapes = {h.shape for h in H}
        if len(shapes) != 1:
            raise ValueError("all user channels must share one shape")
        if H[0].shape[1] != self.geom.n_elements:
            raise ValueError("channel width does not match the surface element count")
        if self.sigma2 <= 0 or self.P_T <= 0 or self.J <= 0:
            raise ValueError("sigma2, P_T and J must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if self.geom.n_feeds < len(H):
            raise ValueError(f"need at least as many feeds as users ({self.geom.n_feeds} < {len(H)})")
        object.__setattr__(self, "channels", H)

    @property
    def L(self):
        return len(self.channels)

    @property
    def M(self):
        return self.channels[0].shape[0]

    @property
    def K(self):
        return self.geom.n_feeds

    @property
    def N(self):
        return self.geom.n_elements

    @property
    def noise(self):
        return self.J * self.sigma2


@dataclass(frozen=True, eq=False)
class HybridBeamformer:
    digital: np.ndarray  # K x L
    pattern: HolographicPattern
    reference: np.ndarray  # N x K reference phases
    combiners: np.ndarray  # M x L, column l is W_l

    @property
    def analog(self):
        return self.pattern.flat[:, None] * self.reference

    def replace(self, **kw):
        d = dict(digital=self.digital, pattern=self.pattern, reference=self.reference, combiners=self.combiners)
        d.update(kw)
        return HybridBeamformer(**d)


def _check_dims(sc: CommScenario, bf: HybridBeamformer):
    if bf.digital.shape != (sc.K, sc.L):
        raise ValueError(f"digital precoder is {bf.digital.shape}, expected {(sc.K, sc.L)}")
    if bf.reference.shape != (sc.N, sc.K) or bf.pattern.amplitudes.size != sc.N:
        raise ValueError("analog map does not match the surface")
    if bf.combiners.shape != (sc.M, sc.L):
        raise ValueError(f"combiners are {bf.combiners.shape}, expected {(sc.M, sc.L)}")


def link_gains(sc: CommScenario, bf: HybridBeamformer) -> np.ndarray:
    """L x L matrix ``T[l, l'] = W_l^H H_l M V_l'``."""
    _check_dims(sc, bf)
    X = bf.analog @ bf.digital
    return np.stack([np.conj(bf.combiners[:, l]) @ (sc.channels[l] @ X) for l in range(sc.L)])


def sinrs(sc, bf):
    T = np.abs(link_gains(sc, bf)) ** 2
    sig = np.diag(T)
    interf = T.sum(axis=1) - sig
    return sig / (sc.noise + interf)


def user_rate(sc, bf, l):
    if not 0 <= l < sc.L:
        raise ValueError(f"user index {l} out of range")
    return float(np.log2(1.0 + sinrs(sc, bf)[l]))


def user_rates(sc, bf):
    return np.log2(1.0 + sinrs(sc, bf))


def sum_rate(sc, bf):
    return float(user_rates(sc, bf).sum())


def transmit_power(sc, bf):
    return float(sc.eta * np.linalg.norm(bf.analog @ bf.digital) ** 2)


def zf_digital(G, P_T=None, analog=None, eta=1.0, rtol=1e-10) -> np.ndarray:
    """Zero-forcing precoder ``pinv(G)`` for an L x K effective channel.

    With ``P_T`` given, all streams are scaled by one common factor so the
    radiated power ``eta * ||analog V||_F^2`` (or ``||V||_F^2`` without
    ``analog``) equals ``P_T``.
    """
    G = np.atleast_2d(np.asarray(G, dtype=complex))
    L = G.shape[0]
    s = np.linalg.svd(G, compute_uv=False)
    rank = int(np.sum(s > rtol * max(s[0] if s.size else 0.0, np.finfo(float).tiny)))
    if s.size == 0 or s[0] == 0 or rank < L:
        raise SingularChannelError(rank=rank if s.size and s[0] > 0 else 0, required=L)
    V = np.linalg.pinv(G)
    if P_T is not None:
        X = V if analog is None else analog @ V
        V = V * np.sqrt(P_T / (eta * np.linalg.norm(X) ** 2))
    return V


def effective_channel(sc, pattern, reference, combiners):
    """L x K matrix ``G[l] = W_l^H H_l diag(m) Q``."""
    A = pattern.flat[:, None] * reference
    return np.stack([np.conj(combiners[:, l]) @ (sc.channels[l] @ A) for l in range(sc.L)])


def _unit(v):
    nv = np.linalg.norm(v)
    return v / nv if nv > 0 else None


def matched_combiners(sc, pattern, reference, digital=None):
    """Dominant left singular vector of ``H_l M V_l`` (or of ``H_l M`` without ``V``)."""
    A = pattern.flat[:, None] * reference
    W = np.zeros((sc.M, sc.L), dtype=complex)
    for l in range(sc.L):
        HA = sc.channels[l] @ A
        w = _unit(HA @ digital[:, l]) if digital is not None else None
        if w is None:
            u, s, _ = np.linalg.svd(HA)
            w = u[:, 0] if s.size and s[0] > 0 else np.eye(sc.M)[:, 0]
        W[:, l] = w
    return W


def initial_beamformer(sc: CommScenario, pattern: HolographicPattern | None = None) -> HybridBeamformer:
    """Baseline: uniform pattern (m = 0.5 unless given), matched combiners, ZF precoder."""
    Q = reference_matrix(sc.geom)
    if pattern is None:
        pattern = HolographicPattern.uniform(sc.geom.shape, 0.5, mask=sc.geom.mask)
    W = matched_combiners(sc, pattern, Q)
    G = effective_channel(sc, pattern, Q, W)
    V = zf_digital(G, sc.P_T, pattern.flat[:, None] * Q, sc.eta)
    return HybridBeamformer(V, pattern, Q, W)


def check_feasible(sc, bf, tol=1e-9):
    """Raise :class:`ConstraintViolationError` naming the first violated constraint."""
    _check_dims(sc, bf)
    norms = np.linalg.norm(bf.combiners, axis=0)
    if np.any(np.abs(norms**2 - 1) > tol):
        raise ConstraintViolationError("combiner-norm", f"|W_l|^2 = {np.round(norms**2, 12).tolist()}")
    p = transmit_power(sc, bf)
    if p > sc.P_T * (1 + tol) + tol:
        raise ConstraintViolationError("power", f"transmit power {p:.6g} > P_T = {sc.P_T:.6g}")
    m = bf.pattern.flat
    if np.any(m < -tol) or np.any(m > 1 + tol):
        raise ConstraintViolationError("amplitude-box", "amplitudes outside [0, 1]")


# --------------------------------------------------------------- m-step pieces


def project_box_ball(z, w, budget, iters=100):
    """Euclidean projection onto ``{0 <= m <= 1, sum w m^2 <= budget}``.

    The KKT point is ``clip(z / (1 + lam w), 0, 1)`` with ``lam >= 0`` the
    root of the (monotone) constraint value, bracketed and then solved with
    Brent's method; the returned point is always on the feasible side.
    """
    m = np.clip(z, 0.0, 1.0)
    if np.dot(w, m * m) <= budget:
        return m
    at = lambda lam: np.minimum(np.maximum(z / (1 + lam * w), 0.0), 1.0)
    f = lambda lam: np.dot(w, at(lam) ** 2) - budget
    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            return at(hi)
    hi = brentq(f, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=iters)
    step = max(hi * 1e-12, 1e-300)
    while f(hi) > 0:
        hi += step
        step *= 2.0
    return at(hi)


def _coefficients(sc, bf):
    """C[l, l', n] = (W_l^H H_l)_n (Q V_l')_n, so link gain T[l, l'] = C[l, l'] . m."""
    QV = bf.reference @ bf.digital  # N x L
    WH = np.stack([np.conj(bf.combiners[:, l]) @ sc.channels[l] for l in range(sc.L)])  # L x N
    return WH[:, None, :] * QV.T[None, :, :]


class _Surrogate:
    """Quadratic-transform lower bound on the sum rate, concave in ``m``."""

    def __init__(self, C, noise, m0):
        self.C = C
        self.noise = noise
        L = C.shape[0]
        self.offdiag = ~np.eye(L, dtype=bool)
        T = C @ m0
        sig = np.diag(T)
        interf = np.sum(np.abs(T) ** 2 * self.offdiag, axis=1)
        self.y = sig / (noise + interf)

    def inner(self, m):
        T = self.C @ m
        sig = np.diag(T)
        interf = np.sum(np.abs(T) ** 2 * self.offdiag, axis=1)
        u = 2 * np.real(np.conj(self.y) * sig) - np.abs(self.y) ** 2 * (self.noise + interf)
        return u, T

    def value(self, m):
        u, _ = self.inner(m)
        if np.any(u <= -1):
            return -np.inf
        return float(np.sum(np.log1p(u)) / LN2)

    def grad(self, m):
        u, T = self.inner(m)
        L = self.C.shape[0]
        idx = np.arange(L)
        Cd = self.C[idx, idx, :]
        g_sig = 2 * np.real(np.conj(self.y)[:, None] * Cd)
        g_int = 2 * np.real(np.conj(T)[:, :, None] * self.C)
        g_int = np.sum(g_int * self.offdiag[:, :, None], axis=1)
        gu = g_sig - (np.abs(self.y) ** 2)[:, None] * g_int
        return np.sum(gu / (1 + u)[:, None], axis=0) / LN2


def _ascend(sur, m, proj, iters, step0=None):
    f = sur.value(m)
    t = step0
    for _ in range(iters):
        g = sur.grad(m)
        gn = np.max(np.abs(g))
        if gn == 0:
            break
        if t is None:
            t = 0.1 / gn
        improved = False
        for _ in range(40):
            mn = proj(m + t * g)
            fn = sur.value(mn)
            if fn >= f + 1e-4 * np.dot(g, mn - m) and fn > f:
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        small = np.max(np.abs(mn - m)) < 1e-12
        m, f = mn, fn
        t *= 2.0
        if small:
            break
    return m, t


@dataclass
class OptimizeOptions:
    max_iters: int = 30
    tol: float = 1e-6
    fp_rounds: int = 3
    inner_iters: int = 20
    update_combiners: bool = True


@dataclass
class OptimizeTrace:
    sum_rates: list = field(default_factory=list)
    converged: bool = False


def optimize_holographic(sc: CommScenario, init: HybridBeamformer, opts: OptimizeOptions | None = None):
    """Alternating maximization of the sum rate over ``W``, ``V`` and ``m``.

    Every sub-step is accepted only when it does not lower the sum rate, so
    the returned trace is monotone.  The amplitude step maximizes the
    quadratic-transform surrogate by projected gradient ascent on the box
    intersected with the transmit-power ball.
    """
    opts = opts or OptimizeOptions()
    check_feasible(sc, init)
    if not init.pattern.quant.continuous:
        init = init.replace(pattern=HolographicPattern(init.pattern.amplitudes, Quantization(), init.pattern.mask))
    bf = init
    best = sum_rate(sc, bf)
    trace = OptimizeTrace([best])
    mask = bf.pattern.mask.ravel()
    step = None

    def accept(cand):
        nonlocal bf, best
        try:
            r = sum_rate(sc, cand)
        except (ValueError, FloatingPointError):
            return False
        if np.isfinite(r) and r >= best and transmit_power(sc, cand) <= sc.P_T * (1 + 1e-10):
            bf, best = cand, r
            return True
        return False

    for _ in range(opts.max_iters):
        prev = best
        if opts.update_combiners:
            accept(bf.replace(combiners=matched_combiners(sc, bf.pattern, bf.reference, bf.digital)))
        try:
            G = effective_channel(sc, bf.pattern, bf.reference, bf.combiners)
            accept(bf.replace(digital=zf_digital(G, sc.P_T, bf.analog, sc.eta)))
        except SingularChannelError:
            pass

        QV = bf.reference @ bf.digital
        w = sc.eta * np.sum(np.abs(QV) ** 2, axis=1)
        proj = lambda z: np.where(mask, project_box_ball(np.where(mask, z, 0.0), w, sc.P_T), 0.0)
        C = _coefficients(sc, bf)
        m = bf.pattern.flat.copy()
        for _ in range(opts.fp_rounds):
            sur = _Surrogate(C, sc.noise, m)
            m, step = _ascend(sur, m, proj, opts.inner_iters, step)
        accept(bf.replace(pattern=HolographicPattern(m.reshape(bf.pattern.shape), Quantization(), bf.pattern.mask)))

        trace.sum_rates.append(best)
        if best - prev <= opts.tol * max(abs(prev), 1e-12):
            trace.converged = True
            break
    return bf, trace


def requantized_sum_rate(sc, bf, quant: Quantization):
    """Sum rate after quantizing the pattern and re-running ZF at full power."""
    pat = bf.pattern.requantize(quant)
    G = effective_channel(sc, pat, bf.reference, bf.combiners)
    V = zf_digital(G, sc.P_T, pat.flat[:, None] * bf.reference, sc.eta)
    q = bf.replace(pattern=pat, digital=V)
    return sum_rate(sc, q), q
