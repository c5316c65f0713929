"""Analytic tail sums sum_{n > N} e^(-lam n) n^(-s).

The discounted operator and the tilted kernel represent everything beyond
the tabulated horizon by a coefficient times these sums. Three regimes:
lam = 0 reduces to a zeta difference; tiny lam (below 2/N, where the naive
difference of near-equal numbers would still be accurate) uses the polylog
expansion around lam = 0; everything else is summed directly, which needs
at most ~22 N terms.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import zeta

__all__ = ["frac_power_tail"]


def _polylog_near_one(s: float, lam: float) -> float:
    # Li_s(e^-lam) = Gamma(1-s) lam^(s-1) + sum_k zeta(s-k) (-lam)^k / k!
    # valid for |lam| < 2 pi and non-integer s
    acc = math.gamma(1.0 - s) * lam ** (s - 1.0)
    term = 1.0
    for k in range(0, 40):
        if k > 0:
            term *= -lam / k
        contrib = float(zeta(s - k)) * term
        acc += contrib
        if abs(contrib) < 1e-18 * abs(acc):
            break
    return acc


def frac_power_tail(lam: float, n_max: int, power: float = 1.5) -> float:
    """sum_{n > n_max} e^(-lam n) n^(-power), accurate to relative ~1e-12."""
    if lam < 0.0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    if lam == 0.0:
        if power <= 1.0:
            return math.inf
        head = np.sum(np.arange(1, n_max + 1, dtype=float) ** (-power))
        return float(zeta(power) - head)
    if lam <= 2.0 / n_max:
        n = np.arange(1, n_max + 1, dtype=float)
        head = np.sum(np.exp(-lam * n) * n ** (-power))
        return float(_polylog_near_one(power, lam) - head)
    count = int(math.ceil(45.0 / lam)) + 8  # e^-45 leaves no double-precision residue
    n = np.arange(n_max + 1, n_max + 1 + count, dtype=float)
    return float(np.sum(np.exp(-lam * n) * n ** (-power)))
