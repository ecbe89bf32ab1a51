import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def comm_scenario():
    """Factory for random multipath downlink scenarios with one feed per user."""
    from rhskit.channels import multipath_channel, random_paths
    from rhskit.comm.beamforming import CommScenario
    from rhskit.surface import SurfaceGeometry, spread_feeds

    def make(rng, n=8, L=2, M=2, paths=3, sigma2=1.0, P_T=1.0):
        geom = SurfaceGeometry(n, n, 1.0, feeds=spread_feeds(n, n, 1 / 3, L))
        H = [multipath_channel(geom, random_paths(rng, paths), M).matrix for _ in range(L)]
        return CommScenario(geom, H, sigma2, P_T)

    return make
