"""Shared fixtures: kernels and ladder tables are expensive, build them once."""
import pytest

from stripwetting import ladder, return_kernel
from stripwetting.increments import DiscretePQ, Gaussian, rng_streams


@pytest.fixture(scope="session")
def kernel_pq1():
    return return_kernel.build_pq(0.3, 1)


@pytest.fixture(scope="session")
def kernel_pq2():
    return return_kernel.build_pq(0.3, 2)


@pytest.fixture(scope="session")
def kernel_pq1_4096():
    return return_kernel.build_pq(0.3, 1, n_max=4096)


@pytest.fixture(scope="session")
def kernel_gauss():
    return return_kernel.build_continuous(Gaussian(1.0), 1.0)


@pytest.fixture(scope="session")
def tables_pq():
    return ladder.estimate_ladder(DiscretePQ(0.3), 0, 11.0)


@pytest.fixture(scope="session")
def tables_gauss():
    rng = rng_streams(20260814, 1)[0]
    return ladder.estimate_ladder(Gaussian(1.0), 100_000, 11.0, rng)
