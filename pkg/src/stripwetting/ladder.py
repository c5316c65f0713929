"""Ladder-height structure of the walk.

First strict ascending/descending ladder heights H, their renewal functions
U and V tabulated on a grid, the fluctuation constant assembled from the two
ladder tails, and Monte Carlo harnesses for the square-root survival laws.
For the lattice (p, q) walk everything is closed-form (ladder heights are
exactly 1); continuous laws are tabulated by ladder simulation with recorded
confidence bands.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .increments import DiscretePQ, IncrementLaw

__all__ = [
    "LadderTables",
    "estimate_ladder",
    "theta_a",
    "stayabove_check",
    "fluctu_check",
]

# walks that have not crossed after this many steps are censored; the
# survival tail at the cap is ~1e-3 of replicas, below the MC bands here
_STEP_CAP = 1 << 21


@dataclass(frozen=True)
class LadderTables:
    """Renewal functions and ladder-height tails on a grid over [0, x_max].

    asc_tail(u) = P[H_1 >= u] for the first strict ascending ladder height,
    desc_tail the descending analogue; sample_count is 0 when the tables are
    exact (lattice walk) and the stderr band is then identically zero.
    """

    grid: np.ndarray
    U_values: np.ndarray
    V_values: np.ndarray
    asc_tail: Callable[[np.ndarray], np.ndarray]
    desc_tail: Callable[[np.ndarray], np.ndarray]
    sample_count: int
    stderr: np.ndarray = field(repr=False, default=None)


def _tail_from_pool(pool: np.ndarray) -> Callable:
    pool = np.sort(pool)
    n = len(pool)

    def tail(u):
        u = np.asarray(u, dtype=float)
        out = 1.0 - np.searchsorted(pool, u, side="left") / n
        return out if out.ndim else float(out)

    return tail


def _ladder_height_pool(law, n_samples, rng, side):
    """First strict ladder heights by direct simulation with absorption.

    side=+1 collects H_1 (first positive value), side=-1 collects H_1^-
    (magnitude of the first negative value). Replicas still undecided after
    the step cap are censored; their fraction is ~1e-3 and is warned about
    when it grows beyond that.
    """
    out = np.empty(n_samples)
    filled = 0
    censored = 0
    chunk = min(n_samples, 250_000)
    start = 0
    while start < n_samples:
        m = min(chunk, n_samples - start)
        h = np.zeros(m)
        alive = np.arange(m)
        for _ in range(_STEP_CAP):
            if alive.size == 0:
                break
            h[alive] += law.sample(rng, alive.size)
            crossed = side * h[alive] > 0.0
            done = alive[crossed]
            out[filled : filled + done.size] = side * h[done]
            filled += done.size
            alive = alive[~crossed]
        censored += alive.size
        start += m
    if censored > 0.01 * n_samples:
        warnings.warn(f"{censored} of {n_samples} ladder replicas censored", RuntimeWarning)
    return out[:filled]


def _renewal_from_pool(pool, grid):
    """Renewal function U(x) = 1 + E #(ladder points in (0, x]) on the grid.

    Disjoint blocks of the iid height pool form independent renewal rows, so
    the across-row spread gives an honest stderr band.
    """
    x_max = float(grid[-1])
    mean_h = float(pool.mean())
    k = int(x_max / mean_h * 1.6) + 32  # rows must overshoot x_max
    rows = len(pool) // k
    if rows < 16:
        raise ValueError("sample pool too small for the requested x_max")
    cums = np.cumsum(pool[: rows * k].reshape(rows, k), axis=1)
    short = cums[:, -1] < x_max
    if short.any():
        cums = cums[~short]
    counts = np.empty((len(cums), len(grid)))
    for i, row in enumerate(cums):
        counts[i] = np.searchsorted(row, grid, side="right")
    u = 1.0 + counts.mean(axis=0)
    se = counts.std(axis=0, ddof=1) / math.sqrt(len(counts))
    return u, se


def estimate_ladder(law: IncrementLaw, n_samples: int, x_max: float, rng=None) -> LadderTables:
    """Ladder tables over [0, x_max]: exact for DiscretePQ, MC otherwise."""
    grid = np.linspace(0.0, x_max, 257)
    if isinstance(law, DiscretePQ):
        # strict ladder steps of the lattice walk are exactly +-1
        u_vals = 1.0 + np.floor(grid)
        return LadderTables(
            grid=grid,
            U_values=u_vals,
            V_values=u_vals.copy(),
            asc_tail=_unit_step_tail,
            desc_tail=_unit_step_tail,
            sample_count=0,
            stderr=np.zeros_like(grid),
        )
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1 for sampled laws")
    if rng is None:
        raise ValueError("sampled laws need an rng")
    asc_pool = _ladder_height_pool(law, n_samples, rng, side=+1)
    desc_pool = _ladder_height_pool(law, n_samples, rng, side=-1)
    u_vals, u_se = _renewal_from_pool(asc_pool, grid)
    v_vals, v_se = _renewal_from_pool(desc_pool, grid)
    return LadderTables(
        grid=grid,
        U_values=u_vals,
        V_values=v_vals,
        asc_tail=_tail_from_pool(asc_pool),
        desc_tail=_tail_from_pool(desc_pool),
        sample_count=n_samples,
        stderr=np.maximum(u_se, v_se),
    )


def _scalar_ok(out, u):
    return out if np.ndim(u) else float(out)


def _unit_step_tail(u):
    # P[H_1 >= u] for a +-1 ladder: every step has height exactly 1
    return _scalar_ok(np.where(np.asarray(u, dtype=float) <= 1.0, 1.0, 0.0), u)


def theta_a(tables: LadderTables, sigma: float, a: float, x: float, y: float,
            strict: bool = False) -> float:
    """Fluctuation constant P[H_1^- >= a-y] P[H_1 >= a-x] / (sigma sqrt(2 pi))."""
    inside = 0.0 <= x <= a and 0.0 <= y <= a
    if not inside:
        if strict:
            raise ValueError(f"(x, y) = ({x}, {y}) outside the strip [0, {a}]^2")
        return 0.0
    return float(tables.desc_tail(a - y)) * float(tables.asc_tail(a - x)) / (sigma * math.sqrt(2.0 * math.pi))


def _survival_fractions(law, start, n_list, n_samples, rng, kill):
    """P_hat[alive after n steps] for each n in n_list; kill(h) marks deaths."""
    n_list = sorted(int(n) for n in n_list)
    counts = {n: 0 for n in n_list}
    chunk = min(n_samples, 250_000)
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        h = np.full(m, float(start))
        alive = m
        step = 0
        for n in n_list:
            while step < n and alive:
                h = h[: alive]
                h += law.sample(rng, alive)
                h = h[~kill(h)]
                alive = h.size
                step += 1
            counts[n] += alive
        done += m
    return {n: counts[n] / n_samples for n in n_list}


def stayabove_check(law, a, x, n_list, n_samples, rng, tables=None):
    """sqrt(n) P_x[S_1 > a, ..., S_n > a] against asc_tail(a-x)/(sqrt(2 pi) sigma).

    Returns a dict of columns (n, p_hat, scaled, limit, ratio). When the
    event is empty (the walk cannot clear the strip from x in one step) the
    estimate is identically 0 and the ratio column is NaN.
    """
    if max(n_list) > 10_000:
        raise ValueError("n values above 1e4 are outside the harness regime")
    if tables is None:
        tables = estimate_ladder(law, n_samples if not isinstance(law, DiscretePQ) else 0,
                                 a + 10.0 * law.sigma, rng)
    p_hat = _survival_fractions(law, x, n_list, n_samples, rng, kill=lambda h: h <= a)
    ns = np.array(sorted(int(n) for n in n_list), dtype=float)
    scaled = np.array([math.sqrt(n) * p_hat[int(n)] for n in ns])
    limit = float(tables.asc_tail(a - x)) / (math.sqrt(2.0 * math.pi) * law.sigma)
    ratio = np.where(scaled > 0.0, scaled / limit if limit > 0.0 else np.nan, np.nan)
    return {"n": ns.astype(int), "p_hat": np.array([p_hat[int(n)] for n in ns]),
            "scaled": scaled, "limit": limit, "ratio": ratio}


def fluctu_check(law, x, n, n_samples, rng, tables=None):
    """Ratio of P_x[S_1 >= 0, ..., S_n >= 0] to V(x)/(sqrt(2 pi) sigma sqrt(n)).

    The comparison regime needs x = o(sqrt(n)); x <= n^(1/4) is enforced.
    n = 0 returns 1 exactly (empty conjunction).
    """
    if n == 0:
        return 1.0
    if x > n ** 0.25:
        raise ValueError(f"x = {x} outside the x <= n^(1/4) regime at n = {n}")
    if x == 0.0:
        v_x = 1.0
    else:
        if tables is None:
            tables = estimate_ladder(law, n_samples if not isinstance(law, DiscretePQ) else 0,
                                     max(2.0 * x, 10.0 * law.sigma), rng)
        v_x = float(np.interp(x, tables.grid, tables.V_values))
    p_hat = _survival_fractions(law, x, [n], n_samples, rng, kill=lambda h: h < 0.0)[n]
    target = v_x / (math.sqrt(2.0 * math.pi) * law.sigma * math.sqrt(n))
    return p_hat / target
