import numpy as np
import pytest

from rhskit.channels import los_channel
from rhskit.comm.beamforming import (
    CommScenario,
    HybridBeamformer,
    OptimizeOptions,
    check_feasible,
    effective_channel,
    initial_beamformer,
    link_gains,
    optimize_holographic,
    project_box_ball,
    requantized_sum_rate,
    sum_rate,
    transmit_power,
    user_rate,
    zf_digital,
)
from rhskit.errors import ConstraintViolationError, SingularChannelError
from rhskit.surface import (
    Direction,
    DirectionGrid,
    HolographicPattern,
    Quantization,
    SurfaceGeometry,
    beampattern_gain,
    reference_matrix,
)


def test_zero_stream_zero_rate(rng, comm_scenario):
    sc = comm_scenario(rng)
    bf = initial_beamformer(sc)
    V = bf.digital.copy()
    V[:, 0] = 0
    assert user_rate(sc, bf.replace(digital=V), 0) == 0.0


def test_unit_snr_gives_one_bit():
    g = SurfaceGeometry(1, 1, 1.0)
    sc = CommScenario(g, [np.array([[1.0 + 0j]])], 1.0, 1.0)
    bf = HybridBeamformer(np.array([[1.0 + 0j]]), HolographicPattern(np.ones((1, 1))), reference_matrix(g), np.ones((1, 1)))
    assert user_rate(sc, bf, 0) == pytest.approx(1.0)


def test_zero_forced_snr_15(rng, comm_scenario):
    sc = comm_scenario(rng, P_T=1e6)
    bf = initial_beamformer(sc)
    G = effective_channel(sc, bf.pattern, bf.reference, bf.combiners)
    bf = bf.replace(digital=np.linalg.pinv(G) * np.sqrt(15.0))
    for l in range(2):
        assert user_rate(sc, bf, l) == pytest.approx(4.0, abs=1e-9)


def test_user_rate_bad_index(rng, comm_scenario):
    sc = comm_scenario(rng)
    with pytest.raises(ValueError):
        user_rate(sc, initial_beamformer(sc), 5)


def test_dimension_mismatch(rng, comm_scenario):
    sc = comm_scenario(rng)
    bf = initial_beamformer(sc)
    with pytest.raises(ValueError):
        link_gains(sc, bf.replace(digital=bf.digital[:, :1]))


class TestZF:
    def test_identity(self):
        V = zf_digital(np.eye(3))
        np.testing.assert_allclose(V, np.eye(3), atol=1e-12)

    def test_single_user_matched(self, rng):
        g = rng.normal(size=(1, 4)) + 1j * rng.normal(size=(1, 4))
        V = zf_digital(g)
        np.testing.assert_allclose(V[:, 0] / np.linalg.norm(V), g[0].conj() / np.linalg.norm(g), atol=1e-12)

    def test_nulling(self, rng):
        G = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        T = G @ zf_digital(G)
        off = T - np.diag(np.diag(T))
        assert np.max(np.abs(off)) < 1e-10 * np.linalg.norm(T)

    def test_power_equality(self, rng):
        G = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
        A = rng.normal(size=(5, 3))
        V = zf_digital(G, 2.0, A, eta=0.5)
        assert 0.5 * np.linalg.norm(A @ V) ** 2 == pytest.approx(2.0)

    def test_rank_deficient(self):
        G = np.array([[1, 2], [2, 4]], dtype=complex)
        with pytest.raises(SingularChannelError) as e:
            zf_digital(G)
        assert e.value.rank == 1 and e.value.required == 2


class TestProjection:
    def test_feasible_point_unchanged(self):
        z = np.array([0.1, 0.5, 0.2])
        np.testing.assert_array_equal(project_box_ball(z, np.ones(3), 10.0), z)

    def test_variational_inequality(self, rng):
        for _ in range(50):
            n = 6
            z = rng.normal(size=n) * 2
            w = rng.uniform(0.1, 2.0, n)
            b = rng.uniform(0.05, 2.0)
            p = project_box_ball(z, w, b)
            assert np.all((p >= 0) & (p <= 1)) and np.dot(w, p * p) <= b * (1 + 1e-9)
            for _ in range(20):
                y = np.clip(rng.random(n), 0, 1)
                y *= min(1.0, np.sqrt(b / max(np.dot(w, y * y), 1e-300)))
                assert np.dot(z - p, y - p) <= 1e-7


class TestOptimize:
    def test_monotone_and_beats_baseline(self, rng, comm_scenario):
        for _ in range(3):
            sc = comm_scenario(rng)
            init = initial_beamformer(sc)
            bf, trace = optimize_holographic(sc, init, OptimizeOptions(max_iters=10))
            r = np.array(trace.sum_rates)
            assert np.all(np.diff(r) >= -1e-9)
            assert r[-1] >= sum_rate(sc, init)
            check_feasible(sc, bf)
            assert transmit_power(sc, bf) <= sc.P_T * (1 + 1e-9)

    def test_sixteen_two_users(self, rng, comm_scenario):
        sc = comm_scenario(rng, n=16)
        init = initial_beamformer(sc)
        bf, trace = optimize_holographic(sc, init, OptimizeOptions(max_iters=8))
        assert sum_rate(sc, bf) >= sum_rate(sc, init)

    def test_single_user_los_points_at_user(self):
        g = SurfaceGeometry(16, 16, 1.0)
        d = Direction.from_degrees(70, 25)
        sc = CommScenario(g, [los_channel(g, d, 1.0).matrix], 1.0, 1.0)
        bf, _ = optimize_holographic(sc, initial_beamformer(sc), OptimizeOptions(max_iters=15))
        grid = DirectionGrid.regular((0, 180), (-90, 90), 1.0)
        t, p = grid.degrees()
        k = np.argmax(beampattern_gain(g, bf.pattern, 0, grid))
        assert abs(t[k] - 70) <= 1 and abs(p[k] - 25) <= 1

    def test_infeasible_init_names_constraint(self, rng, comm_scenario):
        sc = comm_scenario(rng)
        init = initial_beamformer(sc)
        with pytest.raises(ConstraintViolationError) as e:
            optimize_holographic(sc, init.replace(digital=init.digital * 3))
        assert e.value.constraint == "power"
        with pytest.raises(ConstraintViolationError) as e:
            optimize_holographic(sc, init.replace(combiners=init.combiners * 2))
        assert e.value.constraint == "combiner-norm"

    def test_two_bit_keeps_most_of_the_rate(self, rng, comm_scenario):
        ratios = []
        for _ in range(3):
            sc = comm_scenario(rng)
            bf, _ = optimize_holographic(sc, initial_beamformer(sc), OptimizeOptions(max_iters=10))
            q, _ = requantized_sum_rate(sc, bf, Quantization(2))
            ratios.append(q / sum_rate(sc, bf))
        assert np.mean(ratios) >= 0.9
