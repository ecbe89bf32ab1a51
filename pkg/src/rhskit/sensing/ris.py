"""RIS radar SNR and the RHS-versus-RIS surface comparison.

The RIS is a reflector lit by an external feed; only the captured part of
the feed's power reaches the surface.  The RHS carries the feed power
inside its waveguide, but loses some of it in the power divider and in the
residual left at the end of every serially fed row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..surface import (
    SPEED_OF_LIGHT,
    Direction,
    LeakageModel,
    SurfaceGeometry,
    object_phase,
    reference_phase,
    serial_feed_power,
    single_beam_pattern,
)


@dataclass(frozen=True)
class CaptureModel:
    """Fraction of feed power intercepted by a surface of physical width ``W``.

    ``capture = min(1, kappa * (W / feed_distance)**2)``: a fixed feed at
    ``feed_distance`` meters sees a solid angle growing with the square of
    the width.  At a fixed element count the width shrinks with the
    wavelength, so capture falls as frequency rises.
    """

    kappa: float = 0.2
    feed_distance: float = 1.0

    def __post_init__(self):
        if self.kappa <= 0 or self.feed_distance <= 0:
            raise ValueError("kappa and feed_distance must be positive")

    def fraction(self, width):
        return float(min(1.0, self.kappa * (width / self.feed_distance) ** 2))


@dataclass(frozen=True, eq=False)
class RisConfig:
    """Constant-amplitude reflector with per-element phases.

    ``phases=None`` selects the optimal alignment.  ``illumination`` is the
    complex feed-to-element field, normalized to unit total power; uniform
    magnitude with the phase of a spherical wave from the feed by default.
    ``width`` is the physical aperture used by the capture model.
    """

    A: float = 1.0
    phases: np.ndarray | None = None
    illumination: np.ndarray | None = None
    width: float | None = None
    capture: CaptureModel | None = None

    def __post_init__(self):
        if not 0 <= self.A <= 1:
            raise ValueError("reflection amplitude must lie in [0, 1]")
        if self.phases is not None and not np.all(np.isfinite(self.phases)):
            raise ValueError("phases must be finite")

    def capture_fraction(self):
        if self.capture is None or self.width is None:
            return 1.0
        return self.capture.fraction(self.width)


def _illumination(scene_geom, ris):
    if ris.illumination is not None:
        g = np.asarray(ris.illumination, dtype=complex).ravel()
    else:
        g = reference_phase(scene_geom, 0)
    return g / np.linalg.norm(g)


def optimal_ris_phases(g, h):
    """Phases cancelling each path's phase, so every summand is real and positive."""
    return -np.angle(g * h)


def ris_radar_snr(scene, ris: RisConfig) -> float:
    """Echo SNR of a RIS radar reusing the scene's target channels.

    Transmit and receive both go through the feed, the reflector and the
    target channel; each pass carries the reflection amplitude and the
    capture fraction.
    """
    geom = scene.tx_geom
    g = _illumination(geom, ris)
    c = ris.capture_fraction()
    th_t = optimal_ris_phases(g, scene.h_t) if ris.phases is None else np.asarray(ris.phases).ravel()
    th_r = optimal_ris_phases(g, scene.h_r) if ris.phases is None else np.asarray(ris.phases).ravel()
    gt = scene.P_t * c * ris.A**2 * abs(np.sum(g * np.exp(1j * th_t) * scene.h_t)) ** 2
    gr = c * ris.A**2 * abs(np.sum(g * np.exp(1j * th_r) * scene.h_r)) ** 2 / scene.sigma2
    return float(abs(scene.beta) ** 2 * gt * gr)


# ------------------------------------------------------------------ comparison


@dataclass(frozen=True)
class RhsLossModel:
    """Feeding losses of a 2-D RHS: a divider tree in z, serial feeding along y.

    ``decay_alpha`` is the per-element leakage coefficient of each row (the
    residual at the row end is absorbed) and ``divider_loss_db`` the loss per
    binary divider stage.  ``ideal=True`` radiates all feed power.
    """

    decay_alpha: float = 0.05
    divider_loss_db: float = 0.5
    ideal: bool = False

    def divider_efficiency(self, rows):
        stages = int(np.ceil(np.log2(max(rows, 1))))
        return 10 ** (-self.divider_loss_db * stages / 10)


def rhs_efficiency(n, lambda0, target: Direction, loss: RhsLossModel, n_g=1.732):
    """Aperture efficiency of an RHS spanning ``n`` half-wavelengths per edge.

    Rows of the lambda/3 lattice run along y, are fed in phase by the divider
    tree and start at an edge feed.  Each row uses the holographic pattern of
    that feed; the power each element actually radiates follows the serial
    feed recursion.  The result is the coherent row gain relative to a
    lossless uniformly phased row, times the divider efficiency, so 1 means
    a perfect aperture.  The target lies in the horizontal plane, where all
    rows see the same problem.
    """
    d = lambda0 / 3
    n_row = int(round(n * (lambda0 / 2) / d))
    row = SurfaceGeometry(n_row, 1, lambda0, d, n_g, feeds=[[0.0, -d, 0.0]])
    pat = single_beam_pattern(row, 0, target)
    q = reference_phase(row, 0)
    a = np.conj(object_phase(row, target))
    if loss.ideal:
        p = pat.flat**2 / np.sum(pat.flat**2)
    else:
        p, _ = serial_feed_power(row, pat, LeakageModel(mode="serial-decay", decay_alpha=loss.decay_alpha))
    field = np.sum(np.sqrt(p) * q * a)
    eff = 1.0 if loss.ideal else loss.divider_efficiency(n_row)
    return float(eff * abs(field) ** 2 / n_row)


def rhs_pass_gain(n, lambda0, target: Direction, loss: RhsLossModel, n_g=1.732):
    """One-way power gain, in units of a half-wave cell, of an n x n RHS."""
    return n * n * rhs_efficiency(n, lambda0, target, loss, n_g)


def ris_pass_gain(n, lambda0, capture: CaptureModel, A=1.0):
    """One-way power gain of an n x n half-wave RIS with aligned phases."""
    width = n * lambda0 / 2
    return float(capture.fraction(width) * A**2 * n * n)


def surface_comparison_sweep(freqs, sizes, rhs_loss_model=None, ris_capture_model=None, target=None, ris_amplitude=1.0):
    """Winner (RHS or RIS) per (frequency, size) for the two-way echo SNR.

    ``sizes`` are edge element counts of square surfaces at half-wavelength
    pitch.  SNRs share ``|beta|^2 P_t |h|^4 / sigma^2 = 1``, so only the
    surface gains differ.
    """
    loss = rhs_loss_model or RhsLossModel()
    cap = ris_capture_model or CaptureModel()
    tgt = target or Direction.from_degrees(90.0, 30.0)
    cols = {k: [] for k in ("freq_hz", "n_elements", "edge", "gamma_rhs", "gamma_ris", "margin_db", "winner")}
    for f in freqs:
        lam = SPEED_OF_LIGHT / f
        for n in sizes:
            g_h = rhs_pass_gain(n, lam, tgt, loss) ** 2
            g_i = ris_pass_gain(n, lam, cap, ris_amplitude) ** 2
            cols["freq_hz"].append(float(f))
            cols["n_elements"].append(float(n * n))
            cols["edge"].append(float(n))
            cols["gamma_rhs"].append(g_h)
            cols["gamma_ris"].append(g_i)
            cols["margin_db"].append(10 * np.log10(g_h / g_i) if g_i > 0 else np.inf)
            cols["winner"].append(1.0 if g_h > g_i else 0.0)
    return {k: np.asarray(v, dtype=float) for k, v in cols.items()}


def winner_flips(table, freqs, sizes):
    """Per-frequency index of the first RIS win (len(sizes) if none) and the flip counts."""
    W = np.asarray(table["winner"]).reshape(len(freqs), len(sizes))
    first = [int(np.argmin(r)) if (r == 0).any() else len(sizes) for r in W]
    flips = [int(np.sum(r[1:] != r[:-1])) for r in W]
    return W, first, flips
