"""Closed-form results for the lattice (p, q) walk.

The walk with steps -1/0/+1 admits exact formulas: the critical points of
the strip model for widths a = 1 and a = 2 (eigenvalues of a small
tridiagonal matrix, the width-two case through a cubic solved by radicals),
the tail constant of the first-return mass, and the quadratic amplitude of
the free energy near criticality. Together with an exact transfer-matrix
partition function they form the numerical oracle the rest of the package
is tested against.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PQConstants",
    "constants",
    "tridiagonal_Ma",
    "cardan_roots",
    "spectral_radius_Ma",
    "transfer_matrix_Z",
]


@dataclass(frozen=True)
class PQConstants:
    """Closed-form constants of the (p, q) walk at a given p.

    beta_c_0/1/2 are the critical points for strip widths 0, 1, 2; r is the
    auxiliary cubic root entering beta_c_2; c_K the first-return tail
    constant; sumK the total first-return mass above the wall; C_1 the
    quadratic free-energy amplitude; Delta_q the width-one discriminant;
    cubic the monic characteristic-polynomial coefficients (c2, c1, c0) of
    the width-two matrix.
    """

    p: float
    beta_c_0: float
    beta_c_1: float
    beta_c_2: float
    r: float
    c_K: float
    sumK: float
    C_1: float
    Delta_q: float
    cubic: tuple[float, float, float]


def constants(p: float) -> PQConstants:
    """Evaluate all closed-form constants at p in (0, 1/2)."""
    if not 0.0 < p < 0.5:
        raise ValueError(f"p must lie in (0, 1/2), got {p}")
    q = 1.0 - 2.0 * p
    # width-two auxiliary root, trigonometric form of the cubic solution
    r = 2.0 * math.sqrt(7.0) * math.cos(math.pi / 3.0 - math.atan(3.0 * math.sqrt(3.0)) / 3.0)
    beta_c_0 = -math.log(1.0 - p)
    beta_c_1 = -math.log(1.0 - (3.0 - math.sqrt(5.0)) * p / 2.0)
    beta_c_2 = -math.log(1.0 - (5.0 - r) * p / 3.0)
    c_K = math.sqrt(p / (8.0 * math.pi))
    sumK = (1.0 + q) / 2.0
    C_1 = 5.0 / ((math.sqrt(5.0) - 1.0) ** 2 * math.pi * c_K ** 2)
    Delta_q = 5.0 * (q - 1.0) ** 2 / 4.0
    d_last = (1.0 + q) / 2.0
    cubic = (
        -(2.0 * q + d_last),
        q * q + 2.0 * q * d_last - 2.0 * p * p,
        p * p * (q + d_last) - q * q * d_last,
    )
    consts = PQConstants(
        p=p,
        beta_c_0=beta_c_0,
        beta_c_1=beta_c_1,
        beta_c_2=beta_c_2,
        r=r,
        c_K=c_K,
        sumK=sumK,
        C_1=C_1,
        Delta_q=Delta_q,
        cubic=cubic,
    )
    if not beta_c_0 > beta_c_1 > beta_c_2 > 0.0:
        raise AssertionError(f"critical-point ordering violated at p={p}")
    return consts


def tridiagonal_Ma(p: float, a: int) -> np.ndarray:
    """The (a+1) x (a+1) strip matrix: diagonal (q, ..., q, (1+q)/2), off-diagonals p."""
    if a < 1:
        raise ValueError("shipped for a >= 1; the a = 0 convention is a cited constant")
    q = 1.0 - 2.0 * p
    m = np.zeros((a + 1, a + 1))
    idx = np.arange(a + 1)
    m[idx, idx] = q
    m[a, a] = (1.0 + q) / 2.0
    m[idx[:-1], idx[:-1] + 1] = p
    m[idx[:-1] + 1, idx[:-1]] = p
    return m


def cardan_roots(c2: float, c1: float, c0: float) -> np.ndarray:
    """Three roots of X^3 + c2 X^2 + c1 X + c0 by the Cardan-Tartaglia formulas.

    Returns a complex array; purely real roots carry zero imaginary part.
    Each root gets one Newton polish step, leaving |P(root)| < 1e-10.
    """
    # depress with X = t - c2/3
    a1 = c1 - c2 * c2 / 3.0
    a0 = 2.0 * c2 ** 3 / 27.0 - c2 * c1 / 3.0 + c0
    disc = (a0 / 2.0) ** 2 + (a1 / 3.0) ** 3
    if disc > 0.0:  # one real root, conjugate complex pair
        sq = math.sqrt(disc)
        u = math.copysign(abs(-a0 / 2.0 + sq) ** (1.0 / 3.0), -a0 / 2.0 + sq)
        v = math.copysign(abs(-a0 / 2.0 - sq) ** (1.0 / 3.0), -a0 / 2.0 - sq)
        ts = np.array(
            [
                u + v,
                -(u + v) / 2.0 + 1j * math.sqrt(3.0) / 2.0 * (u - v),
                -(u + v) / 2.0 - 1j * math.sqrt(3.0) / 2.0 * (u - v),
            ],
            dtype=complex,
        )
    elif a1 == 0.0:  # triple root
        ts = np.zeros(3, dtype=complex)
    else:  # three real roots, trigonometric form
        rho = 2.0 * math.sqrt(-a1 / 3.0)
        theta = math.acos(min(1.0, max(-1.0, 3.0 * a0 / (a1 * rho))))
        ts = np.array(
            [rho * math.cos((theta - 2.0 * math.pi * k) / 3.0) for k in range(3)],
            dtype=complex,
        )
    roots = ts - c2 / 3.0
    # one Newton step kills the last rounding error
    val = roots ** 3 + c2 * roots ** 2 + c1 * roots + c0
    der = 3.0 * roots ** 2 + 2.0 * c2 * roots + c1
    safe = np.abs(der) > 1e-30
    roots[safe] -= val[safe] / der[safe]
    roots.imag[np.abs(roots.imag) < 1e-14] = 0.0
    return roots


def spectral_radius_Ma(p: float, a: int) -> float:
    """Dominant eigenvalue of the strip matrix, equal to exp(-beta_c_a) for a in {1, 2}."""
    from .spectral import power_iteration

    radius, _, _ = power_iteration(tridiagonal_Ma(p, a))
    return radius


def transfer_matrix_Z(
    p: float,
    a: int,
    beta: float,
    N: int,
    boundary: str = "constrained",
    start: int = 0,
) -> float:
    """Exact log partition function of the strip model by height-indexed DP.

    The walk starts at an integer height in [0, a]; each of the N steps picks
    -1/0/+1 with probabilities (p, q, p), paths dipping below 0 are killed,
    and every arrival in [0, a] is rewarded by a factor e^beta. The
    constrained variant additionally requires S_N in [0, a]. Accumulation is
    log-domain so localized regimes at large N cannot overflow.

    Heights above a + 6 sqrt(N) carry total mass below 1e-12 and are cut;
    the cumulative cut mass is tracked and warned about if it ever matters.
    """
    if boundary not in ("free", "constrained"):
        raise ValueError(f"boundary must be free or constrained, got {boundary!r}")
    if N < 1 or N > 100_000:
        raise ValueError(f"N must lie in [1, 1e5], got {N}")
    if not 0 <= start <= a:
        raise ValueError(f"start must lie in [0, a], got {start}")
    q = 1.0 - 2.0 * p
    cap = a + int(math.ceil(6.0 * math.sqrt(N))) + 2
    reward = np.ones(cap + 1)
    reward[: a + 1] = math.exp(beta)
    w = np.zeros(cap + 1)
    w[start] = 1.0
    log_z = 0.0
    lost = 0.0
    for _ in range(N):
        nxt = q * w
        nxt[:-1] += p * w[1:]
        nxt[1:] += p * w[:-1]
        lost += p * w[-1]
        nxt *= reward
        total = nxt.sum()
        if total <= 0.0:
            raise ValueError("partition weight vanished (impossible boundary combination)")
        log_z += math.log(total)
        w = nxt / total
        lost /= total
    if boundary == "constrained":
        end_mass = w[: a + 1].sum()
        if end_mass <= 0.0:
            raise ValueError("no admissible constrained endpoint")
        log_z += math.log(end_mass)
    if lost > 1e-9:
        warnings.warn(f"height-cap loss {lost:.3e} exceeded 1e-9", RuntimeWarning)
    return log_z
