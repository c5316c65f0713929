"""Tail sums sum_{n > N} e^(-lam n) n^(-power) against brute high-precision sums."""
import math

import numpy as np
import pytest

from stripwetting._tails import frac_power_tail


def brute(lam, n_max, power, terms):
    n = np.arange(n_max + 1, n_max + 1 + terms, dtype=np.longdouble)
    return float(np.sum(np.exp(-lam * n) * n ** (-np.longdouble(power))))


def test_zeta_tail_between_integral_bounds():
    # sum_{n>N} n^(-3/2) lies between 2/sqrt(N+1) and 2/sqrt(N)
    for n_max in (16, 512, 8192):
        t = frac_power_tail(0.0, n_max)
        assert 2.0 / math.sqrt(n_max + 1) <= t <= 2.0 / math.sqrt(n_max)


@pytest.mark.parametrize(
    "lam,n_max",
    [
        (0.5, 16),      # direct summation branch
        (0.03, 64),     # direct summation branch
        (2e-3, 512),    # series branch, moderate lam
        (1e-4, 8192),   # series branch, small lam
    ],
)
def test_matches_brute_sum(lam, n_max):
    terms = int(math.ceil(60.0 / lam))
    ref = brute(lam, n_max, 1.5, terms)
    assert frac_power_tail(lam, n_max) == pytest.approx(ref, rel=1e-10)


def test_continuous_at_branch_point():
    # the sum's log-derivative in lam is the mean surviving n (~3 n_max), so
    # a 1e-9 relative nudge in lam moves the value by about 1e-8 relative;
    # anything beyond that would be a branch mismatch
    n_max = 512
    lam = 2.0 / n_max
    lo = frac_power_tail(lam * (1.0 - 1e-9), n_max)
    hi = frac_power_tail(lam * (1.0 + 1e-9), n_max)
    assert lo == pytest.approx(hi, rel=1e-7)


def test_tiny_lam_square_root_singularity():
    # the lam -> 0 defect is the polylog's singular term 2 sqrt(pi lam)
    n_max = 512
    lam = 1e-14
    drop = frac_power_tail(0.0, n_max) - frac_power_tail(lam, n_max)
    assert drop == pytest.approx(2.0 * math.sqrt(math.pi * lam), rel=1e-6)


def test_monotone_in_lam():
    n_max = 256
    lams = [0.0, 1e-6, 1e-4, 1e-2, 0.5, 2.0]
    vals = [frac_power_tail(l, n_max) for l in lams]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_power_half_mean_tail():
    # power 1/2 shows up in mean return times: divergent at lam = 0
    assert frac_power_tail(0.0, 100, power=0.5) == math.inf
    lam, n_max = 0.01, 64
    ref = brute(lam, n_max, 0.5, int(60.0 / lam))
    assert frac_power_tail(lam, n_max, power=0.5) == pytest.approx(ref, rel=1e-10)


def test_validation():
    with pytest.raises(ValueError):
        frac_power_tail(-1e-3, 64)
    with pytest.raises(ValueError):
        frac_power_tail(0.1, 0)
