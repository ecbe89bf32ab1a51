"""RHS radar: echo SNR, amplitude control, detection and estimation metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import norm

from ..errors import ConvergenceError, DegenerateReceiverError
from ..surface import Direction, Quantization, SurfaceGeometry, object_phase, reference_phase


@dataclass(frozen=True, eq=False)
class RadarScene:
    """Monostatic-style scene with separate transmit and receive surfaces.

    ``h_t`` and ``h_r`` are per-element propagation vectors toward the
    target.  When omitted they are unit-gain far-field steering vectors
    toward ``(theta, phi)`` scaled by ``path_gain``.  ``q_t`` and ``q_r``
    default to the reference waves of feed 0.
    """

    R: float
    theta: float
    phi: float
    beta: complex
    tx_geom: SurfaceGeometry
    rx_geom: SurfaceGeometry
    sigma2: float = 1.0
    P_t: float = 1.0
    path_gain: float = 1.0
    q_t: np.ndarray | None = None
    q_r: np.ndarray | None = None
    h_t: np.ndarray | None = None
    h_r: np.ndarray | None = None

    def __post_init__(self):
        if self.R <= 0 or self.sigma2 <= 0:
            raise ValueError("R and sigma2 must be positive")
        if self.P_t <= 0:
            raise ValueError("P_t must be positive")
        d = Direction(self.theta, self.phi)
        for side, geom in (("t", self.tx_geom), ("r", self.rx_geom)):
            q = getattr(self, f"q_{side}")
            q = reference_phase(geom, 0) if q is None else np.asarray(q, dtype=complex).ravel()
            if q.size != geom.n_elements or np.any(np.abs(np.abs(q) - 1) > 1e-12):
                raise ValueError(f"q_{side} must be a unit-modulus vector of length {geom.n_elements}")
            h = getattr(self, f"h_{side}")
            # a_n = exp(+j k0 u . r_n) so that h^T (m q) matches the beampattern sum
            h = self.path_gain * np.conj(object_phase(geom, d)) if h is None else np.asarray(h, dtype=complex).ravel()
            if h.size != geom.n_elements:
                raise ValueError(f"h_{side} must have length {geom.n_elements}")
            object.__setattr__(self, f"q_{side}", q)
            object.__setattr__(self, f"h_{side}", h)

    @property
    def direction(self):
        return Direction(self.theta, self.phi)


class RadarSnr(NamedTuple):
    gamma: float
    gamma_t: float
    gamma_r: float


def _amps(m, n):
    a = np.asarray(getattr(m, "flat", m), dtype=float).ravel()
    if a.size != n:
        raise ValueError(f"pattern has {a.size} entries, expected {n}")
    return a


def rhs_radar_snr(scene: RadarScene, M_t, M_r) -> RadarSnr:
    """Echo SNR ``|beta|^2 gamma_t gamma_r`` of an RHS transmit/receive pair.

    The transmit signal is normalized so that ``||M_t q_t x||^2 = P_t``.
    """
    mt = _amps(M_t, scene.tx_geom.n_elements)
    mr = _amps(M_r, scene.rx_geom.n_elements)
    xt, xr = mt * scene.q_t, mr * scene.q_r
    nr = np.vdot(xr, xr).real
    if nr <= 0:
        raise DegenerateReceiverError("receive weighting |M_r q_r| is zero")
    nt = np.vdot(xt, xt).real
    gamma_t = 0.0 if nt <= 0 else scene.P_t * abs(scene.h_t @ xt) ** 2 / nt
    gamma_r = abs(scene.h_r @ xr) ** 2 / (scene.sigma2 * nr)
    return RadarSnr(float(abs(scene.beta) ** 2 * gamma_t * gamma_r), float(gamma_t), float(gamma_r))


# ---------------------------------------------------------------- amplitude control


def _amplitudes_for_phase(b, w, max_iter):
    """Maximize ``b . m`` s.t. ``sum w m^2 <= 1``, ``0 <= m <= 1`` (active-set clipping)."""
    n = b.size
    m = np.zeros(n)
    pos = b > 0
    if not pos.any():
        return m
    if np.sum(w[pos]) <= 1:
        m[pos] = 1.0
        return m
    clipped = np.zeros(n, dtype=bool)
    free = pos.copy()
    for _ in range(max_iter + 1):
        budget = 1.0 - np.sum(w[clipped])
        r = np.zeros(n)
        r[free] = b[free] / w[free]
        s2 = np.sum(w[free] * r[free] ** 2)
        scale = np.sqrt(budget / s2) if s2 > 0 else 0.0
        cand = r * scale
        over = free & (cand > 1.0)
        if not over.any():
            m[free] = cand[free]
            m[clipped] = 1.0
            return m
        # the largest ratios saturate first
        clipped |= over
        free &= ~over
        if not free.any():
            m[clipped] = 1.0
            return m
    raise ConvergenceError(f"clipping loop exceeded {max_iter} iterations (N={n}, clipped={int(clipped.sum())})")


def _value_for_phase(phi, c, w, max_iter):
    m = _amplitudes_for_phase(np.real(c * np.exp(-1j * phi)), w, max_iter)
    return abs(np.dot(m, c)) ** 2, m


def _grid_values(grid, c, w, max_iter, chunk=64):
    """Objective on a phase grid; rows without clipping are evaluated in bulk."""
    out = np.empty(grid.size)
    for s in range(0, grid.size, chunk):
        ph = grid[s : s + chunk]
        B = np.maximum(np.real(c[None, :] * np.exp(-1j * ph[:, None])), 0.0)
        R = B / w
        s2 = np.sum(w * R * R, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            M = R / np.sqrt(s2)[:, None]
        ok = (s2 > 0) & (np.max(M, axis=1) <= 1.0) & (np.sum(w * (B > 0), axis=1) > 1)
        out[s : s + chunk][ok] = np.abs(M[ok] @ c) ** 2
        for i in np.flatnonzero(~ok):
            out[s + i] = _value_for_phase(ph[i], c, w, max_iter)[0]
    return out


class AmplitudeSolution(NamedTuple):
    amplitudes: np.ndarray
    value: float


def optimize_amplitudes(a, q, n_grid=None, polish_iters=50) -> AmplitudeSolution:
    """Maximize ``|a^T M q|^2`` over ``M = diag(m)`` with ``||M q|| <= 1`` and ``m`` in [0, 1].

    For a fixed common phase ``phi`` the problem is a linear program over a
    weighted ball and box, solved in closed form up to clipping: unclipped
    entries are proportional to ``Re(a_n q_n e^{-j phi}) / |q_n|^2`` and
    saturated entries sit at 1.  The outer search covers ``phi`` on a grid,
    refines the best cells and finishes with alternating phase/amplitude
    updates, each of which cannot lower the objective.
    """
    a = np.asarray(a, dtype=complex).ravel()
    q = np.asarray(q, dtype=complex).ravel()
    if a.size != q.size or a.size == 0:
        raise ValueError("a and q must be non-empty and the same length")
    c = a * q
    w = np.abs(q) ** 2
    if not np.any(np.abs(c) > 0) or not np.any(w > 0):
        raise ValueError("a * q is identically zero")
    nz = (w > 0) & (np.abs(c) > 0)
    cz, wz = c[nz], w[nz]
    n = cz.size
    max_iter = n

    grid = np.linspace(0, 2 * np.pi, n_grid or int(np.clip(8 * n, 64, 512)), endpoint=False)
    vals = _grid_values(grid, cz, wz, max_iter)
    step = grid[1] - grid[0]
    best_v, best_m = -1.0, None
    for j in np.argsort(vals)[::-1][:4]:
        res = minimize_scalar(
            lambda p: -_value_for_phase(p, cz, wz, max_iter)[0],
            bounds=(grid[j] - step, grid[j] + step),
            method="bounded",
            options={"xatol": 1e-12},
        )
        for p in (res.x, grid[j]):
            v, m = _value_for_phase(p, cz, wz, max_iter)
            if v > best_v:
                best_v, best_m = v, m
    for _ in range(polish_iters):
        phi = np.angle(np.dot(best_m, cz))
        v, m = _value_for_phase(phi, cz, wz, max_iter)
        if v <= best_v * (1 + 1e-15):
            break
        best_v, best_m = v, m
    out = np.zeros(c.size)
    out[nz] = best_m
    return AmplitudeSolution(out, float(abs(np.dot(out, c)) ** 2))


def amplitude_objective(a, q, m):
    """Normalized objective ``|a^T M q|^2 / ||M q||^2``."""
    a, q, m = (np.asarray(v).ravel() for v in (a, q, m))
    x = m * q
    nx = np.vdot(x, x).real
    return 0.0 if nx == 0 else float(abs(a @ x) ** 2 / nx)


class QuantizedAmplitudes(NamedTuple):
    amplitudes: np.ndarray
    signal_scale: float
    value: float
    loss: float


def quantize_amplitudes(m, bits, a=None, q=None, quant=None) -> QuantizedAmplitudes:
    """Round continuous amplitudes to a ``bits``-bit grid.

    Off-grid inputs are first stretched so their peak is 1, which leaves the
    normalized objective unchanged and uses the full grid.  The returned
    ``signal_scale`` restores ``||M q x|| = 1``.  With ``a`` and ``q`` given,
    ``value`` is the achieved objective and ``loss`` the relative drop from
    the continuous input.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    quant = quant or Quantization(bits)
    m = np.asarray(m, dtype=float).ravel()
    if quant.on_grid(m):
        mq = m.copy()
    else:
        peak = m.max()
        mq = quant.quantize(m / peak if peak > 0 else m)
    qv = np.ones(m.size) if q is None else np.asarray(q).ravel()
    nrm = np.linalg.norm(mq * qv)
    scale = 1.0 / nrm if nrm > 0 else 0.0
    if a is None:
        return QuantizedAmplitudes(mq, scale, float("nan"), float("nan"))
    v0 = amplitude_objective(a, qv, m)
    v1 = amplitude_objective(a, qv, mq)
    return QuantizedAmplitudes(mq, scale, v1, float(1 - v1 / v0) if v0 > 0 else 0.0)


def optimize_radar(scene: RadarScene):
    """Separately optimal transmit and receive amplitudes and the resulting SNR."""
    mt = optimize_amplitudes(scene.h_t, scene.q_t).amplitudes
    mr = optimize_amplitudes(scene.h_r, scene.q_r).amplitudes
    return mt, mr, rhs_radar_snr(scene, mt, mr)


# ------------------------------------------------------------ detection / estimation


def detection_probability(gamma, p_fa):
    """Coherent known-signal detector ``p_d = Q(Q^-1(p_fa) - sqrt(gamma))``."""
    if not 0 < p_fa < 1:
        raise ValueError("p_fa must lie in (0, 1)")
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma must be non-negative")
    out = norm.sf(norm.isf(p_fa) - np.sqrt(g))
    return float(out) if out.ndim == 0 else out


def simulate_detector(gamma, p_fa, trials, rng):
    """Monte Carlo of the matched-filter test; returns (empirical p_fa, empirical p_d).

    The whitened statistic is ``z = sqrt(gamma) * H + n`` with ``n ~ N(0, 1)``,
    compared against the Neyman-Pearson threshold ``Q^-1(p_fa)``.
    """
    if not 0 < p_fa < 1:
        raise ValueError("p_fa must lie in (0, 1)")
    tau = norm.isf(p_fa)
    n0 = rng.standard_normal(trials)
    n1 = rng.standard_normal(trials)
    return float(np.mean(n0 > tau)), float(np.mean(np.sqrt(gamma) + n1 > tau))


def crb_proxy(gamma):
    """Normalized CRB scale ``1 / gamma``."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g <= 0):
        raise ValueError("gamma must be positive")
    out = 1.0 / g
    return float(out) if out.ndim == 0 else out


def ml_reflection_variance(gamma, trials, rng, samples=16, beta=1.0):
    """Empirical variance of the ML estimate of ``beta`` at echo SNR ``gamma``.

    The echo is ``y = beta * s + n`` with a known waveform ``s`` of energy
    ``gamma * sigma^2 / |beta|^2`` and ``n ~ CN(0, sigma^2 I)``.
    """
    s = np.exp(2j * np.pi * rng.random(samples))
    s *= np.sqrt(gamma / abs(beta) ** 2) / np.linalg.norm(s)
    n = (rng.standard_normal((trials, samples)) + 1j * rng.standard_normal((trials, samples))) / np.sqrt(2)
    est = (n + beta * s) @ np.conj(s) / np.vdot(s, s).real
    return float(np.mean(np.abs(est - beta) ** 2))
