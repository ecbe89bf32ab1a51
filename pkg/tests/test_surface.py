import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rhskit.errors import ModeError
from rhskit.surface import (
    Direction,
    DirectionGrid,
    HolographicPattern,
    LeakageModel,
    Quantization,
    SurfaceGeometry,
    beampattern_gain,
    beampattern_table,
    enforce_leakage,
    interference,
    object_phase,
    radiated_power,
    reference_phase,
    serial_feed_power,
    serial_order,
    single_beam_pattern,
    steering_matrix,
)

BROADSIDE = Direction.from_degrees(90.0, 0.0)


def line(n, spacing=1 / 3, n_g=1.732, feed=(0.0, 0.0, 0.0)):
    return SurfaceGeometry(n, 1, 1.0, spacing, n_g, feeds=[feed])


class TestGeometry:
    def test_defaults(self):
        g = SurfaceGeometry(4, 3, 0.03)
        assert g.spacing == pytest.approx(0.01)
        assert g.n_g == 1.732
        assert g.n_feeds == 1
        np.testing.assert_allclose(g.feeds[0], [0.0, 0.015, 0.01])

    def test_positions_c_order(self):
        g = SurfaceGeometry(2, 3, 1.0, 0.5)
        np.testing.assert_allclose(g.positions[1], [0, 0, 0.5])
        np.testing.assert_allclose(g.positions[3], [0, 0.5, 0])

    @pytest.mark.parametrize("kw", [dict(n_y=0), dict(lambda0=-1.0), dict(n_g=0.5), dict(spacing=-0.1)])
    def test_rejects_bad_arguments(self, kw):
        args = dict(n_y=4, n_z=4, lambda0=1.0)
        args.update(kw)
        with pytest.raises(ValueError):
            SurfaceGeometry(**args)

    def test_rejects_empty_mask(self):
        with pytest.raises(ValueError):
            SurfaceGeometry(2, 2, 1.0, mask=np.zeros((2, 2), bool))

    def test_guided_distance_bad_feed(self):
        with pytest.raises(IndexError):
            SurfaceGeometry(2, 2, 1.0).guided_distance(3)


class TestPhases:
    def test_reference_at_feed_is_one(self):
        g = line(1)
        assert reference_phase(g)[0] == pytest.approx(1 + 0j)

    def test_reference_full_guided_wavelength(self):
        n_g = 1.732
        g = SurfaceGeometry(2, 1, 1.0, 1 / n_g, n_g, feeds=[[0, 0, 0]])
        assert reference_phase(g)[1] == pytest.approx(1 + 0j, abs=1e-12)

    def test_reference_four_element_line(self):
        # exp(-j 2pi 1.732 d_n) for d_n = 0, 1/3, 2/3, 1; evaluated by hand
        expected = np.array(
            [1 + 0j, -0.8842551604 + 0.4670040807j, 0.5638143773 - 0.8259015365j, -0.1128563849 + 0.9936113105j]
        )
        np.testing.assert_allclose(reference_phase(line(4)), expected, atol=1e-8)

    def test_object_broadside_all_ones(self):
        np.testing.assert_allclose(object_phase(SurfaceGeometry(3, 3, 1.0), BROADSIDE), 1.0, atol=1e-12)

    def test_object_single_element_any_direction(self):
        g = SurfaceGeometry(1, 1, 1.0, feeds=[[0, 0, 0]])
        assert object_phase(g, Direction.from_degrees(37, 12))[0] == pytest.approx(1 + 0j)

    def test_object_half_wavelength_along_y(self):
        g = line(2, spacing=0.5)
        np.testing.assert_allclose(object_phase(g, Direction.from_degrees(90, 90)), [1, -1], atol=1e-12)

    def test_interference_unit_modulus_and_conjugate(self):
        g = line(4)
        v = interference(g, 0, BROADSIDE)
        np.testing.assert_allclose(np.abs(v), 1.0)
        np.testing.assert_allclose(v, np.conj(reference_phase(g)))
        assert v[0] == pytest.approx(1 + 0j)


class TestPattern:
    def test_amplitude_rule(self):
        # element distances chosen so Re(interference) is 1, -1 and 0
        n_g = 2.0
        g = SurfaceGeometry(3, 1, 1.0, 0.25, n_g, feeds=[[0, 0, 0]])
        m = single_beam_pattern(g, 0, BROADSIDE).flat
        # guided phase 0, pi, 2pi... spacing 1/4 at n_g 2 gives k_s d = pi
        np.testing.assert_allclose(m, [1.0, 0.0, 1.0], atol=1e-12)
        g2 = SurfaceGeometry(2, 1, 1.0, 0.125, n_g, feeds=[[0, 0, 0]])
        np.testing.assert_allclose(single_beam_pattern(g2, 0, BROADSIDE).flat, [1.0, 0.5], atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0, 180), st.floats(-180, 180), st.integers(1, 6), st.integers(1, 6))
    def test_range(self, th, ph, ny, nz):
        m = single_beam_pattern(SurfaceGeometry(ny, nz, 1.0), 0, Direction.from_degrees(th, ph)).flat
        assert np.all((m >= 0) & (m <= 1))

    def test_validation(self):
        with pytest.raises(ValueError):
            HolographicPattern(np.array([0.5, 1.2]))
        with pytest.raises(ValueError):
            HolographicPattern(np.array([0.5, 0.3]), Quantization(2))
        with pytest.raises(ValueError):
            HolographicPattern(np.array([0.5, 0.3]), mask=np.array([True, False]))

    def test_quantization_levels(self):
        assert Quantization(1).levels == pytest.approx([1 / np.sqrt(3), 1.0])
        assert Quantization(2).levels == pytest.approx([0, 1 / 3, 2 / 3, 1])
        assert Quantization.binary().levels == pytest.approx([0, 1])
        with pytest.raises(ValueError):
            Quantization(0)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.integers(1, 8))
    def test_quantize_idempotent(self, vals, bits):
        q = Quantization(bits)
        once = q.quantize(vals)
        np.testing.assert_array_equal(q.quantize(once), once)
        HolographicPattern(once, q)


class TestBeampattern:
    grid = DirectionGrid.regular(step_deg=15.0)

    def test_zero_pattern(self):
        g = SurfaceGeometry(4, 4, 1.0)
        gain = beampattern_gain(g, HolographicPattern(np.zeros((4, 4))), 0, self.grid)
        assert np.all(gain == 0.0)

    def test_single_element_isotropic(self):
        g = SurfaceGeometry(1, 1, 1.0)
        gain = beampattern_gain(g, HolographicPattern(np.ones((1, 1))), 0, self.grid)
        np.testing.assert_allclose(gain, 1.0)

    def test_reconstruction_60_30(self):
        g = SurfaceGeometry(16, 16, 1.0)
        pat = single_beam_pattern(g, 0, Direction.from_degrees(60, 30))
        grid = DirectionGrid.regular((0, 180), (-90, 90), 1.0)
        t, p = grid.degrees()
        k = np.argmax(beampattern_gain(g, pat, 0, grid))
        assert abs(t[k] - 60) <= 1 and abs(p[k] - 30) <= 1

    def test_reconstruction_large_aperture(self):
        # at 32 x 32 the beam is narrow enough that the argmax sits on the
        # nearest 1 degree grid point for the large majority of directions
        g = SurfaceGeometry(32, 32, 1.0)
        rng = np.random.default_rng(77)
        hits = 0
        for _ in range(60):
            th, ph = rng.uniform(20, 160), rng.uniform(-70, 70)
            t0, p0 = np.round(th), np.round(ph)
            tt, pp = np.meshgrid(np.arange(t0 - 8, t0 + 9), np.arange(p0 - 8, p0 + 9), indexing="ij")
            grid = DirectionGrid(np.deg2rad(tt), np.deg2rad(pp))
            k = np.argmax(beampattern_gain(g, single_beam_pattern(g, 0, Direction.from_degrees(th, ph)), 0, grid))
            hits += abs(tt.ravel()[k] - th) <= 1 and abs(pp.ravel()[k] - ph) <= 1
        assert hits / 60 >= 0.9

    def test_masking_equivalence(self, rng):
        g = SurfaceGeometry(6, 5, 1.0)
        pat = single_beam_pattern(g, 0, Direction.from_degrees(70, -20))
        mask = rng.random((6, 5)) > 0.4
        masked = pat.with_mask(mask)
        zeroed = HolographicPattern(np.where(mask, pat.amplitudes, 0.0))
        np.testing.assert_array_equal(
            beampattern_gain(g, masked, 0, self.grid), beampattern_gain(g, zeroed, 0, self.grid)
        )

    def test_table_columns(self):
        g = SurfaceGeometry(2, 2, 1.0)
        tab = beampattern_table(self.grid, beampattern_gain(g, HolographicPattern.uniform((2, 2)), 0, self.grid))
        assert list(tab) == ["theta_deg", "phi_deg", "gain_linear", "gain_db"]

    def test_empty_grid(self):
        g = SurfaceGeometry(2, 2, 1.0)
        with pytest.raises(ValueError):
            beampattern_gain(g, HolographicPattern.uniform((2, 2)), 0, [])

    def test_steering_matches_conjugate_object(self):
        g = SurfaceGeometry(3, 2, 1.0)
        d = Direction.from_degrees(50, 40)
        np.testing.assert_allclose(steering_matrix(g, [d])[0], np.conj(object_phase(g, d)))


class TestLeakage:
    def test_zero_pattern_unchanged(self):
        pat = HolographicPattern(np.zeros((2, 2)))
        assert enforce_leakage(pat, LeakageModel(), 0.1) is pat

    def test_exact_budget(self):
        pat = HolographicPattern(np.ones((2, 2)))
        out = enforce_leakage(pat, LeakageModel(), 4.0)
        np.testing.assert_array_equal(out.amplitudes, pat.amplitudes)

    def test_scale_half(self):
        out = enforce_leakage(HolographicPattern(np.ones((2, 2))), LeakageModel(), 1.0)
        np.testing.assert_allclose(out.flat, 0.5)
        assert radiated_power(out, LeakageModel()) == pytest.approx(1.0)

    def test_quantized_budget(self):
        pat = HolographicPattern(np.ones(8), Quantization(3))
        out = enforce_leakage(pat, LeakageModel(0.5), 1.3)
        assert radiated_power(out, LeakageModel(0.5)) <= 1.3
        assert Quantization(3).on_grid(out.flat)

    def test_budget_below_floor(self):
        pat = HolographicPattern(np.ones(4), Quantization(1))
        with pytest.raises(ValueError):
            enforce_leakage(pat, LeakageModel(), 0.1)

    def test_serial_all_off(self):
        g = line(3)
        p, res = serial_feed_power(g, HolographicPattern(np.zeros((3, 1))), LeakageModel(mode="serial-decay"))
        assert np.all(p == 0) and res == 1.0

    def test_serial_single_step(self):
        p, res = serial_feed_power(line(1), HolographicPattern(np.ones((1, 1))), LeakageModel(mode="serial-decay", decay_alpha=0.3))
        assert p[0] == pytest.approx(0.3) and res == pytest.approx(0.7)

    def test_serial_two_steps(self):
        p, res = serial_feed_power(line(2), HolographicPattern(np.ones((2, 1))), LeakageModel(mode="serial-decay", decay_alpha=0.5))
        np.testing.assert_allclose(p, [0.5, 0.25])
        assert res == pytest.approx(0.25)

    def test_serial_needs_mode(self):
        with pytest.raises(ModeError):
            serial_feed_power(line(2), HolographicPattern(np.ones((2, 1))), LeakageModel())

    def test_serial_order_ties(self):
        g = SurfaceGeometry(3, 1, 1.0)  # center feed: elements 0 and 2 tie
        assert list(serial_order(g)) == [1, 0, 2]

    def test_serial_power_in_decay_mode(self):
        g = SurfaceGeometry(4, 4, 1.0)
        pat = single_beam_pattern(g, 0, Direction.from_degrees(80, 10))
        leak = LeakageModel(mode="serial-decay", decay_alpha=0.1)
        out = enforce_leakage(pat, leak, 0.2, geom=g)
        assert radiated_power(out, leak, g) <= 0.2 + 1e-12
