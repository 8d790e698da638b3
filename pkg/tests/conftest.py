import math

import pytest

from inhomdiff.geometry import DensityProfile, GeometricBundle, ManifoldProfile


def make_bundle(N=3, beta=1.0, nu=0.0, alpha=0.0, mu=0.0, window=None, r_max=1e6, **kw):
    man = ManifoldProfile.power_log(N, beta=beta, nu=nu)
    dens = DensityProfile.power_log(alpha, mu=mu, window=window)
    return GeometricBundle(man, dens, r_max=r_max, **kw)


@pytest.fixture(scope="session")
def euclid():
    return make_bundle()


@pytest.fixture(scope="session")
def euclid_a1():
    return make_bundle(alpha=1.0)


@pytest.fixture(scope="session")
def beta09():
    return make_bundle(beta=0.9, alpha=1.0)


@pytest.fixture(scope="session")
def ball_volume():
    return 4.0 * math.pi / 3.0
