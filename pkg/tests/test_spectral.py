"""Spectral pipeline: operator assembly, Perron data, free energy, tilting."""
import math

import numpy as np
import pytest

from stripwetting import pq_exact, return_kernel as rk, spectral
from stripwetting.increments import Gaussian


BETA_C_1 = pq_exact.constants(0.3).beta_c_1
BETA_C_2 = pq_exact.constants(0.3).beta_c_2


def test_power_iteration_identity():
    rho, v, res = spectral.power_iteration(np.eye(3))
    assert rho == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(v, v[0])
    assert res <= 1e-12


def test_power_iteration_diagonal():
    rho, v, _ = spectral.power_iteration(np.diag([2.0, 1.0]))
    assert rho == pytest.approx(2.0, abs=1e-10)
    assert v[0] > 0.99 * v.sum()


def test_power_iteration_pq_matrix():
    M1 = pq_exact.tridiagonal_Ma(0.3, 1)
    rho, v, _ = spectral.power_iteration(M1)
    assert rho == pytest.approx(1.0 - (3.0 - math.sqrt(5.0)) * 0.3 / 2.0, abs=1e-12)
    assert rho == pytest.approx(0.8854102, abs=1e-7)
    assert np.all(v > 0.0)


def test_power_iteration_failure_modes():
    with pytest.raises(ValueError):
        spectral.power_iteration(np.ones((2, 3)))
    rho, _, _ = spectral.power_iteration(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert rho == 0.0
    with pytest.raises(RuntimeError, match="residual"):
        # antidiagonal with unequal weights keeps the iterates oscillating
        spectral.power_iteration(np.array([[0.0, 2.0], [1.0, 0.0]]), max_iter=64)


def test_assemble_row_sums_are_return_mass(kernel_pq1):
    B = spectral.assemble_B(kernel_pq1, 0.0)
    rows = B.matrix.sum(axis=1)
    assert np.abs(rows - kernel_pq1.total_return_mass()).max() < 1e-12
    assert rows[0] == pytest.approx(0.7, abs=1e-12)
    assert rows[1] == pytest.approx(1.0, abs=5e-7)


def test_assemble_entries_nonincreasing_in_lam(kernel_pq1, kernel_gauss):
    for kernel in (kernel_pq1, kernel_gauss):
        prev = spectral.assemble_B(kernel, 0.0).matrix
        for lam in (1e-4, 1e-2, 0.3, 2.0):
            cur = spectral.assemble_B(kernel, lam).matrix
            assert np.all(cur <= prev + 1e-18)
            prev = cur


def test_assemble_kills_at_large_lam(kernel_pq1):
    assert spectral.assemble_B(kernel_pq1, 50.0).matrix.max() < 1e-20
    with pytest.raises(ValueError):
        spectral.assemble_B(kernel_pq1, -0.1)


def test_spectral_radius_solution(kernel_pq1):
    B = spectral.assemble_B(kernel_pq1, 0.05)
    sol = spectral.spectral_radius(B)
    assert np.abs(B.matrix @ sol.right - sol.delta * sol.right).max() <= 1e-12 * sol.delta
    assert np.abs(sol.left @ B.matrix - sol.delta * sol.left).max() <= 1e-11 * sol.delta
    assert np.all(sol.right > 0.0) and np.all(sol.left > 0.0)
    assert sol.mu.sum() == pytest.approx(1.0, abs=1e-12)


def test_critical_beta_lattice(kernel_pq1, kernel_pq2):
    assert abs(spectral.critical_beta(kernel_pq1) - BETA_C_1) < 1e-6
    assert abs(spectral.critical_beta(kernel_pq2) - BETA_C_2) < 1e-6


def test_critical_beta_gauss(kernel_gauss):
    # fixed discretization, deterministic build: pinned to the observed value
    assert spectral.critical_beta(kernel_gauss) == pytest.approx(0.4625616500865495, abs=1e-8)


def test_delta_strictly_decreasing(kernel_pq1):
    lams = np.logspace(-4, 0.5, 8)
    vals = [spectral.delta(kernel_pq1, float(l)) for l in lams]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_free_energy_zero_below_critical(kernel_pq1, kernel_gauss):
    assert spectral.free_energy(kernel_pq1, BETA_C_1 - 0.1) == 0.0
    bg = spectral.critical_beta(kernel_gauss)
    assert spectral.free_energy(kernel_gauss, bg - 0.1) == 0.0


def test_free_energy_against_transfer_matrix(kernel_pq1):
    beta = BETA_C_1 + 0.5
    F = spectral.free_energy(kernel_pq1, beta)
    assert F == pytest.approx(0.33916252588, abs=1e-9)
    z = pq_exact.transfer_matrix_Z(0.3, 1, beta, 2000, boundary="free", start=0)
    assert abs(z / 2000.0 - F) < 1e-4


def test_free_energy_convex_nondecreasing(kernel_pq1):
    betas = BETA_C_1 + np.linspace(-0.05, 0.6, 14)
    F = np.array([spectral.free_energy(kernel_pq1, float(b)) for b in betas])
    assert np.all(F >= 0.0)
    assert np.all(np.diff(F) >= 0.0)
    assert np.all(np.diff(F, 2) >= -1e-8)


def test_free_energy_quadratic_amplitude(kernel_pq1):
    # log-log fit over beta - beta_c in [1e-3, 1e-2]; pipeline values are
    # deterministic, and F / eps^2 tracks (m_0 / (u_2^2 sqrt(p)))^2 = 4.9907
    eps = np.logspace(-3, -2, 11)
    F = np.array([spectral.free_energy(kernel_pq1, BETA_C_1 + float(e)) for e in eps])
    slope, logA = np.polyfit(np.log(eps), np.log(F), 1)
    assert slope == pytest.approx(1.9789141, abs=1e-4)
    assert math.exp(logA) == pytest.approx(4.3177351, rel=1e-4)
    assert F[0] / eps[0] ** 2 == pytest.approx(4.9621252, rel=1e-4)


def test_free_energy_gauss_grid_refinement(kernel_gauss):
    # 64 vs 128 strip nodes moves beta_c by well under 1e-3 relative
    k128 = rk.build_continuous(Gaussian(1.0), 1.0, n_quad_nodes=128)
    b64 = spectral.critical_beta(kernel_gauss)
    b128 = spectral.critical_beta(k128)
    assert abs(b64 / b128 - 1.0) < 1e-3


@pytest.mark.parametrize("shift,mass", [(-0.1, math.exp(-0.1)), (0.0, 1.0), (0.3, 1.0)])
def test_tilted_row_mass(kernel_pq1, shift, mass):
    beta_c = spectral.critical_beta(kernel_pq1)
    tilted = spectral.build_tilted(kernel_pq1, beta_c + shift)
    assert np.abs(tilted.row_mass() - mass).max() < 1e-6


@pytest.mark.parametrize("shift,mass", [(-0.1, math.exp(-0.1)), (0.0, 1.0), (0.3, 1.0)])
def test_tilted_row_mass_gauss(kernel_gauss, shift, mass):
    beta_c = spectral.critical_beta(kernel_gauss)
    tilted = spectral.build_tilted(kernel_gauss, beta_c + shift)
    assert np.abs(tilted.row_mass() - mass).max() < 1e-6


def test_tilted_mu_invariant(kernel_pq1):
    tilted = spectral.build_tilted(kernel_pq1, BETA_C_1 + 0.5)
    P = tilted.transition()
    assert np.abs(tilted.mu @ P - tilted.mu).sum() < 1e-8
    assert tilted.mu.sum() == pytest.approx(1.0, abs=1e-12)


def test_tilted_mean_return_time(kernel_pq1):
    # "at criticality" must mean the pipeline's own beta_c: the closed form
    # sits 1.1e-7 above it, which already makes C_beta finite (huge)
    beta_c = spectral.critical_beta(kernel_pq1)
    below = spectral.build_tilted(kernel_pq1, beta_c - 0.05)
    at = spectral.build_tilted(kernel_pq1, beta_c)
    assert below.C_beta == math.inf
    assert at.C_beta == math.inf
    above = spectral.build_tilted(kernel_pq1, BETA_C_1 + 0.3)
    assert 1.0 < above.C_beta < 10.0
    # thermodynamic consistency: contact fraction dF/dbeta equals 1/C_beta
    h = 1e-5
    dF = (
        spectral.free_energy(kernel_pq1, BETA_C_1 + 0.3 + h)
        - spectral.free_energy(kernel_pq1, BETA_C_1 + 0.3 - h)
    ) / (2.0 * h)
    assert dF == pytest.approx(1.0 / above.C_beta, rel=1e-5)
