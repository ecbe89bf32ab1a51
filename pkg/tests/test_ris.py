import numpy as np
import pytest

from rhskit.sensing.radar import RadarScene
from rhskit.sensing.ris import (
    CaptureModel,
    RhsLossModel,
    RisConfig,
    optimal_ris_phases,
    rhs_pass_gain,
    ris_pass_gain,
    ris_radar_snr,
    surface_comparison_sweep,
    winner_flips,
)
from rhskit.surface import Direction, SurfaceGeometry

FREQS = [3e9, 6e9, 12e9, 28e9, 60e9]
SIZES = [16, 32, 64, 128]


def random_scene(rng, n=8):
    g = SurfaceGeometry(n, 1, 1.0)
    ht = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    hr = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return RadarScene(4.0, 1.0, 0.2, 0.8 - 0.1j, g, g, sigma2=0.5, P_t=2.0, h_t=ht, h_r=hr)


def test_zero_amplitude_gives_zero(rng):
    assert ris_radar_snr(random_scene(rng), RisConfig(A=0.0)) == 0.0


def test_config_validation():
    with pytest.raises(ValueError):
        RisConfig(A=1.5)
    with pytest.raises(ValueError):
        RisConfig(phases=np.array([0.0, np.nan]))
    with pytest.raises(ValueError):
        CaptureModel(kappa=0.0)


def test_optimal_phases_align_every_path(rng):
    g = np.exp(2j * np.pi * rng.random(8)) / np.sqrt(8)
    h = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    terms = g * np.exp(1j * optimal_ris_phases(g, h)) * h
    assert abs(terms.sum()) == pytest.approx(np.abs(terms).sum(), rel=1e-12)
    np.testing.assert_allclose(np.angle(terms), 0.0, atol=1e-12)


def test_snr_closed_form(rng):
    s = random_scene(rng)
    g = np.ones(8) / np.sqrt(8)
    got = ris_radar_snr(s, RisConfig(A=0.5, illumination=g))
    expect = abs(s.beta) ** 2 * s.P_t * (0.25 * np.sum(np.abs(s.h_t)) ** 2 / 8) * (0.25 * np.sum(np.abs(s.h_r)) ** 2 / 8) / s.sigma2
    assert got == pytest.approx(expect, rel=1e-12)


def test_optimal_beats_random_phases():
    rng = np.random.default_rng(42)
    for _ in range(100):
        s = random_scene(rng)
        best = ris_radar_snr(s, RisConfig())
        rand = ris_radar_snr(s, RisConfig(phases=2 * np.pi * rng.random(8)))
        assert best >= rand


def test_capture_scales_snr_quadratically(rng):
    s = random_scene(rng)
    full = ris_radar_snr(s, RisConfig())
    part = ris_radar_snr(s, RisConfig(width=1.0, capture=CaptureModel(kappa=0.1)))
    assert part == pytest.approx(full * 0.01, rel=1e-12)


def test_full_capture_ris_beats_lossless_rhs():
    tgt = Direction.from_degrees(90, 30)
    cap = CaptureModel(kappa=1e6)
    for n in (8, 16, 32):
        assert ris_pass_gain(n, 0.01, cap) > rhs_pass_gain(n, 0.01, tgt, RhsLossModel(ideal=True))


def test_tiny_ris_at_high_frequency_loses():
    tgt = Direction.from_degrees(90, 30)
    lam = 3e8 / 60e9
    assert rhs_pass_gain(8, lam, tgt, RhsLossModel()) > ris_pass_gain(8, lam, CaptureModel())


def test_winner_map_pattern():
    tb = surface_comparison_sweep(FREQS, SIZES)
    W, first, flips = winner_flips(tb, FREQS, SIZES)
    assert all(f <= 1 for f in flips)
    assert all(a <= b for a, b in zip(first, first[1:]))
    assert W[-1, 0] == 1.0
    assert W[0, -1] == 0.0
    np.testing.assert_array_equal(tb["winner"], (tb["gamma_rhs"] > tb["gamma_ris"]).astype(float))
