import numpy as np
import pytest

from rhskit.comm.hardware import (
    LinkSetup,
    hardware_cost_comparison,
    hdma_vs_sdma_sweep,
    min_elements,
    phased_array_sum_rate,
    rhs_sum_rate,
)

SETUP = LinkSetup()


def test_min_elements_bisection():
    assert min_elements(lambda n: float(n), 37.5, n_max=100) == 38
    assert min_elements(lambda n: float(n), 0.0) == 0
    assert min_elements(lambda n: float(n), 500.0, n_max=100) is None


def test_zero_target_zero_elements():
    tab = hardware_cost_comparison([5.0], [0.0], setup=SETUP)
    assert tab["rhs_elements"][0] == 0 and tab["pa_elements"][0] == 0


def test_unattainable_row():
    tab = hardware_cost_comparison([5.0], [60.0], {"n_max": 64}, SETUP)
    assert tab["attainable"][0] == 0 and np.isnan(tab["rhs_elements"][0])


def test_unit_cost_ratio_phased_array_never_costlier():
    tab = hardware_cost_comparison([1.0], [1.0, 3.0, 5.0, 7.0], {"n_max": 512}, SETUP)
    ok = tab["attainable"] == 1
    assert ok.any()
    assert np.all(tab["pa_cost"][ok] <= tab["rhs_cost"][ok])


def test_phased_array_dominates_per_element():
    for n in (8, 32, 128):
        assert phased_array_sum_rate(SETUP, n) >= rhs_sum_rate(SETUP, n)


def test_crossover_for_expensive_phase_shifters():
    tab = hardware_cost_comparison([50.0], [4.0, 6.0, 8.0], {"n_max": 1024}, SETUP)
    ok = tab["attainable"] == 1
    assert np.all(tab["rhs_cost"][ok] < tab["pa_cost"][ok])
    cheap = hardware_cost_comparison([2.0], [4.0, 6.0, 8.0], {"n_max": 1024}, SETUP)
    assert np.all(cheap["rhs_cost"] > cheap["pa_cost"])


def test_rates_grow_with_size():
    r = [rhs_sum_rate(SETUP, n) for n in (16, 64, 256)]
    assert r[0] < r[1] < r[2]


def test_rejects_bad_ratio():
    with pytest.raises(ValueError):
        hardware_cost_comparison([0.0], [1.0])


def test_hdma_sdma_crossover():
    sizes = [16, 64, 256, 1024]
    tab = hdma_vs_sdma_sweep(sizes, [2.0, 10.0])
    low = tab["beta_ratio"] == 2.0
    diff = tab["hdma_eta"][low] - tab["sdma_eta"][low]
    # first lower, then higher as the surface grows
    assert diff[0] < 0 and diff[-1] > 0
    assert np.sum(np.diff(np.sign(diff)) != 0) == 1
    high = tab["beta_ratio"] == 10.0
    assert np.all(tab["hdma_eta"][high] > tab["sdma_eta"][high])
