"""Spectral pipeline: Laplace-transformed return operator, free energy, tilt.

For lam >= 0 the operator B_lam acts on functions of the strip nodes,

    (B_lam g)(x) = sum_n e^(-lam n) integral f_{x,dy}(n) g(y),

realized as a dense matrix with the quadrature weights folded in and the
n > n_max remainder carried by the kernel's tail coefficients. Its Perron
root delta(lam) is decreasing in lam; the critical reward is
beta_c = -log delta(0) and the free energy above beta_c is the root of
e^beta delta(F) = 1. Tilting by the right eigenvector at lam = F turns the
return kernel into a (sub)stochastic semi-Markov kernel whose row mass is
min(1, e^(beta - beta_c)) and whose mean return time C_beta normalizes the
stationary renewal density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._tails import frac_power_tail
from .return_kernel import ReturnKernel

__all__ = [
    "OperatorB",
    "SpectralSolution",
    "TiltedKernel",
    "power_iteration",
    "assemble_B",
    "spectral_radius",
    "delta",
    "critical_beta",
    "free_energy",
    "build_tilted",
]


def power_iteration(matrix, tol: float = 1e-12, max_iter: int = 20000):
    """Perron root and right eigenvector of a nonnegative matrix.

    Returns (radius, vector, residual) with the vector L1-normalized and
    residual = max |A v - radius v|. Stops when residual <= tol * radius.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    v = np.ones(A.shape[0])
    v /= v.sum()
    rho = 0.0
    residual = math.inf
    for _ in range(max_iter):
        Av = A @ v
        rho = float(v @ Av) / float(v @ v)
        residual = float(np.abs(Av - rho * v).max())
        if residual <= tol * abs(rho):
            return rho, v, residual
        s = Av.sum()
        if s <= 0.0:
            # nilpotent direction; the Perron root is 0
            return 0.0, v, 0.0
        v = Av / s
    raise RuntimeError(
        f"power iteration did not converge in {max_iter} steps (residual {residual:.3e})"
    )


@dataclass(frozen=True)
class OperatorB:
    """Dense realization of B_lam on the kernel's nodes."""

    kernel: ReturnKernel
    lam: float
    matrix: np.ndarray


def assemble_B(kernel: ReturnKernel, lam: float) -> OperatorB:
    if lam < 0.0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    n = np.arange(1, kernel.n_max + 1, dtype=float)
    head = kernel.values @ np.exp(-lam * n)
    mat = (head + frac_power_tail(lam, kernel.n_max) * kernel.tail_theta) * kernel.weights
    return OperatorB(kernel=kernel, lam=lam, matrix=mat)


@dataclass(frozen=True)
class SpectralSolution:
    """Perron data of one B_lam: root, right/left vectors, residual.

    left and right are normalized so that mu = left * right sums to 1;
    mu is the stationary law of the tilted modulating chain.
    """

    lam: float
    delta: float
    right: np.ndarray
    left: np.ndarray
    residual: float

    @property
    def mu(self) -> np.ndarray:
        return self.left * self.right


def spectral_radius(B: OperatorB, tol: float = 1e-12) -> SpectralSolution:
    rho, right, res_r = power_iteration(B.matrix, tol=tol)
    rho_l, left, res_l = power_iteration(B.matrix.T, tol=tol)
    mass = float(left @ right)
    if mass <= 0.0:
        raise RuntimeError("degenerate eigenvectors")
    left = left / mass
    return SpectralSolution(
        lam=B.lam,
        delta=rho,
        right=right,
        left=left,
        residual=max(res_r, res_l),
    )


def delta(kernel: ReturnKernel, lam: float) -> float:
    return power_iteration(assemble_B(kernel, lam).matrix)[0]


def critical_beta(kernel: ReturnKernel) -> float:
    """Reward threshold: -log of the Perron root at lam = 0."""
    return -math.log(delta(kernel, 0.0))


def free_energy(kernel: ReturnKernel, beta: float, tol: float = 1e-12) -> float:
    """F(beta): zero up to beta_c, above it the root of e^beta delta(F) = 1."""
    d0 = delta(kernel, 0.0)
    if math.exp(beta) * d0 <= 1.0:
        return 0.0
    # delta is decreasing; bracket the sign change and bisect
    lo, g_lo = 0.0, math.exp(beta) * d0 - 1.0
    hi = 1e-6
    while math.exp(beta) * delta(kernel, hi) > 1.0:
        lo = hi
        hi *= 4.0
        if hi > 1e6:
            raise RuntimeError("free energy bracket expansion failed")
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if math.exp(beta) * delta(kernel, mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class TiltedKernel:
    """Semi-Markov kernel K_beta[i, j, n-1] after the Doob tilt at lam = F.

    values holds the transported mass per node pair and arrival time with
    quadrature weights folded in; tail_coeff times the n^(-3/2) tail sum
    carries arrival times beyond n_max. Row mass is min(1, e^(beta-beta_c))
    up to solver residuals. C_beta is the mean return time under mu
    (math.inf at and below beta_c).
    """

    kernel: ReturnKernel
    beta: float
    F: float
    values: np.ndarray
    tail_coeff: np.ndarray
    right: np.ndarray
    mu: np.ndarray
    C_beta: float

    def row_mass(self) -> np.ndarray:
        head = self.values.sum(axis=(1, 2))
        tail = self.tail_coeff.sum(axis=1) * frac_power_tail(self.F, self.kernel.n_max)
        return head + tail

    def transition(self) -> np.ndarray:
        """Arrival-time-marginalized modulating chain (rows sum to row_mass)."""
        return self.values.sum(axis=2) + self.tail_coeff * frac_power_tail(
            self.F, self.kernel.n_max
        )


def build_tilted(kernel: ReturnKernel, beta: float) -> TiltedKernel:
    F = free_energy(kernel, beta)
    sol = spectral_radius(assemble_B(kernel, F))
    v = sol.right
    eb = math.exp(beta)
    n = np.arange(1, kernel.n_max + 1, dtype=float)
    # e^beta e^(-F n) f_n(i, j) w_j v_j / v_i
    shape_ij = (kernel.weights * v)[None, :] / v[:, None]
    values = eb * np.exp(-F * n)[None, None, :] * kernel.values * shape_ij[:, :, None]
    tail_coeff = eb * kernel.tail_theta * shape_ij
    beta_c = -math.log(delta(kernel, 0.0))
    if beta <= beta_c:
        C = math.inf
    else:
        mean_head = float(np.einsum("ijn,n,i->", values, n, sol.mu))
        mean_tail = float(sol.mu @ tail_coeff.sum(axis=1)) * frac_power_tail(
            F, kernel.n_max, power=0.5
        )
        C = mean_head + mean_tail
    return TiltedKernel(
        kernel=kernel,
        beta=beta,
        F=F,
        values=values,
        tail_coeff=tail_coeff,
        right=v,
        mu=sol.mu,
        C_beta=C,
    )
