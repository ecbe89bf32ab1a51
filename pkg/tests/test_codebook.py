import numpy as np
import pytest

from rhskit.channels import psi_mu_channel
from rhskit.codebook import (
    ChannelOracle,
    beam_train,
    beamwidth_3db,
    build_codebook,
    codebook_array,
    equivalent_arrays,
    exhaustive_search,
    load_codebook_csv,
    mu_grid,
    psi_cells,
    random_user_channel,
    save_codebook_csv,
    training_overhead_sweep,
)


@pytest.fixture(scope="module")
def cb16():
    return build_codebook(codebook_array(16), 4, 4, 20.0)


def test_equivalent_arrays_small():
    masks = equivalent_arrays(4, 2)
    assert ["".join(str(int(v)) for v in m) for m in masks] == ["1100", "0110", "0011"]


def test_equivalent_arrays_counts():
    assert len(equivalent_arrays(8, 8)) == 1
    masks = equivalent_arrays(128, 64)
    assert len(masks) == 65
    assert all(m.sum() == 64 for m in masks)
    with pytest.raises(ValueError):
        equivalent_arrays(4, 5)


def test_codebook_array_is_dense():
    g = codebook_array(16)
    assert g.n == 48
    assert g.spacing == pytest.approx(1 / 6)


def test_codebook_sizes():
    cb = build_codebook(codebook_array(2), 1, 1, 20.0)
    assert len(cb.layer(1)) == 2
    assert sum(len(c) for c in cb.bottom_layer) == 2
    cb = build_codebook(codebook_array(8), 3, 4, 20.0)
    assert [len(cb.layer(s)) for s in (1, 2, 3)] == [2, 4, 8]
    assert len(cb.bottom_layer) == 8 and all(len(c) == 4 for c in cb.bottom_layer)
    assert cb.n_codewords == 14 + 32


def test_codebook_rejects_oversized_depth():
    with pytest.raises(ValueError):
        build_codebook(codebook_array(1), 3, 2, 20.0)


def test_patterns_are_valid_amplitudes(cb16):
    for cw in cb16.codewords():
        f = cw.pattern.flat
        assert np.all(f >= 0) and np.all(f <= 1)
        assert np.all(f[~cw.mask] == 0)


def test_upper_layer_masks_widen_with_depth(cb16):
    active = [int(cb16.layer(s)[0].mask.sum()) for s in range(1, 5)]
    assert active == [6, 12, 24, 48]


def test_psi_cells_tile_interval():
    for s in range(1, 6):
        cells = psi_cells(s)
        assert cells[0][0] == -1.0 and cells[-1][1] == 1.0
        for (a, b), (c, d) in zip(cells, cells[1:]):
            assert b == c and b > a


def test_mu_grid_covers_range():
    samples, cov = mu_grid(4, 20.0)
    assert samples[0] == 0.0 and samples[-1] == pytest.approx(0.05)
    assert cov[0][0] == 0.0 and cov[-1][1] == pytest.approx(0.05)
    for (a, b), s in zip(cov, samples):
        assert a <= s <= b


def test_noiseless_on_grid_training_is_exact(cb16):
    hits = 0
    total = 0
    for cell in cb16.bottom_layer:
        for cw in cell:
            h = psi_mu_channel(cb16.geom, cw.psi, cw.mu)
            res = beam_train(cb16, ChannelOracle(cb16, h))
            total += 1
            hits += res.psi == cw.psi and res.mu == cw.mu
    assert total == 64
    assert hits == total


def test_query_count_law(cb16, rng):
    for snr in (None, 0.0, 20.0):
        h, _, _ = random_user_channel(cb16.geom, rng, 20.0)
        oracle = ChannelOracle(cb16, h, snr, rng if snr is not None else None)
        res = beam_train(cb16, oracle, snr)
        assert res.query_count == 2 * 4 + 4
        assert oracle.queries == res.query_count
    cb = build_codebook(codebook_array(128), 7, 8, 20.0)
    oracle = ChannelOracle(cb, psi_mu_channel(cb.geom, 0.1, 0.01))
    assert beam_train(cb, oracle).query_count == 22
    assert exhaustive_search(cb, oracle).query_count == 1024


def test_exhaustive_is_upper_bound(cb16, rng):
    for _ in range(10):
        h, _, _ = random_user_channel(cb16.geom, rng, 20.0)
        o = ChannelOracle(cb16, h)
        assert o(exhaustive_search(cb16, o).codeword) >= o(beam_train(cb16, o).codeword) - 1e-12


def test_noisy_oracle_needs_rng(cb16):
    with pytest.raises(ValueError):
        ChannelOracle(cb16, np.ones(cb16.geom.n), snr_db=10.0)


def test_beamwidth_halves_per_layer():
    cb = build_codebook(codebook_array(32), 5, 4, 20.0)
    widths = [beamwidth_3db(cb, cb.layer(s)[len(cb.layer(s)) // 2]) for s in range(1, 6)]
    for a, b in zip(widths, widths[1:]):
        assert b == pytest.approx(a / 2, rel=0.25)


def test_overhead_sweep_law():
    out = training_overhead_sweep([16, 32, 64], 4, 2, 20.0, lambda N, t: np.random.default_rng([N, t]))
    assert list(out["hierarchical_queries"]) == [12.0, 14.0, 16.0]
    assert list(out["exhaustive_queries"]) == [64.0, 128.0, 256.0]
    assert np.all(out["rate_ratio"] > 0)
    with pytest.raises(ValueError):
        training_overhead_sweep([24], 4, 1, 20.0, lambda N, t: np.random.default_rng(0))


def test_csv_roundtrip(tmp_path):
    cb = build_codebook(codebook_array(8), 3, 2, 20.0)
    p = tmp_path / "cb.csv"
    save_codebook_csv(p, cb)
    back = load_codebook_csv(p, cb.geom)
    assert back.S == 3 and back.T == 2 and back.r_min == 20.0
    for a, b in zip(cb.codewords(), back.codewords()):
        assert (a.layer, a.cell, a.mu_index) == (b.layer, b.cell, b.mu_index)
        assert a.psi == b.psi and a.mu == b.mu
        np.testing.assert_array_equal(a.mask, b.mask)
        np.testing.assert_array_equal(a.pattern.flat, b.pattern.flat)
