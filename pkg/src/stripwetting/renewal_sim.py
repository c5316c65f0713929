"""Markov renewal machinery on the strip nodes.

A semi-Markov kernel K[x, y, n-1] drives renewals: from modulating state x
the next renewal happens n steps later in state y with probability (mass)
K[x][y][n]. Any deficit 1 - sum K per row is killing. This module simulates
such chains, runs the Green-function recursion (the constrained partition
function in tilted coordinates), checks the forward recurrence chain against
its stationary law, and normalizes partition sequences so the three phases
plateau.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._tails import frac_power_tail
from .increments import DiscretePQ
from .return_kernel import build_continuous, build_pq, density_grid
from .spectral import build_tilted, free_energy

__all__ = [
    "DEAD",
    "MarkovRenewalProcess",
    "GreenSeries",
    "simulate",
    "green_function",
    "forward_chain_tv",
    "partition_asymptotics",
]

# absorbing symbol for defective-chain death: simulate() appends
# (math.inf, DEAD) instead of silently truncating the trajectory
DEAD = -1


@dataclass(frozen=True)
class MarkovRenewalProcess:
    """Node-indexed semi-Markov kernel plus a start state or distribution.

    values[x, y, n-1] is the mass of a renewal n steps ahead landing at node
    y, given the chain sits at node x. Rows may sum to less than one; the
    deficit is the per-renewal killing probability.
    """

    values: np.ndarray
    initial_state: int | np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 3 or vals.shape[0] != vals.shape[1]:
            raise ValueError(f"kernel must have shape (m, m, n_max), got {vals.shape}")
        if np.any(vals < 0.0):
            raise ValueError("kernel masses must be nonnegative")
        mass = vals.sum(axis=(1, 2))
        if np.any(mass > 1.0 + 1e-9):
            raise ValueError(f"row mass exceeds 1: max {mass.max():.12g}")
        object.__setattr__(self, "values", vals)
        m = vals.shape[0]
        init = self.initial_state
        if isinstance(init, (int, np.integer)):
            if not 0 <= init < m:
                raise ValueError(f"initial_state {init} outside [0, {m})")
        else:
            init = np.asarray(init, dtype=float)
            if init.shape != (m,) or np.any(init < 0.0) or abs(init.sum() - 1.0) > 1e-9:
                raise ValueError("initial distribution must be a length-m probability vector")
            object.__setattr__(self, "initial_state", init)

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def n_max(self) -> int:
        return self.values.shape[2]

    def row_mass(self) -> np.ndarray:
        return self.values.sum(axis=(1, 2))

    def initial_distribution(self) -> np.ndarray:
        if isinstance(self.initial_state, np.ndarray):
            return self.initial_state
        out = np.zeros(self.n_nodes)
        out[int(self.initial_state)] = 1.0
        return out

    @classmethod
    def from_tilted(cls, tilted, initial_state=0) -> "MarkovRenewalProcess":
        """Wrap a tilted return kernel, dropping its analytic tail.

        The tabulated mass misses sum_{n > n_max} K(n); in the localized
        phase that remainder decays like e^(-F n_max) and is far below
        solver residuals, so the wrapped chain is the tilted law to within
        roundoff.
        """
        return cls(values=tilted.values, initial_state=initial_state)


def simulate(mrp: MarkovRenewalProcess, horizon: int, rng=None) -> list[tuple[float, int]]:
    """Draw one renewal trajectory [(tau_0, J_0), (tau_1, J_1), ...].

    Renewals are appended while tau_k <= horizon; the first draw that would
    land beyond the horizon is discarded and the walk stops. If the kernel
    is defective and the chain dies, a terminal (math.inf, DEAD) entry is
    appended. Deterministic given the rng state.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if rng is None:
        rng = np.random.default_rng()
    m, _, n_max = mrp.values.shape
    # per-state cdf over the flattened (y, n) choices; deficit kills
    cdf = np.cumsum(mrp.values.reshape(m, m * n_max), axis=1)
    if isinstance(mrp.initial_state, np.ndarray):
        state = int(rng.choice(m, p=mrp.initial_state))
    else:
        state = int(mrp.initial_state)
    tau = 0
    out = [(tau, state)]
    while True:
        u = rng.random()
        idx = int(np.searchsorted(cdf[state], u, side="right"))
        if idx >= m * n_max:
            out.append((math.inf, DEAD))
            return out
        y, n_minus_1 = divmod(idx, n_max)
        tau += n_minus_1 + 1
        if tau > horizon:
            return out
        state = y
        out.append((tau, state))


@dataclass(frozen=True)
class GreenSeries:
    """Z[N, y] = P[some renewal happens exactly at time N in state y]."""

    Z: np.ndarray
    initial: np.ndarray = field(repr=False)

    def tv_to(self, target: np.ndarray) -> np.ndarray:
        """Half-L1 distance of each row to a fixed node-weight vector."""
        return 0.5 * np.abs(self.Z - np.asarray(target)[None, :]).sum(axis=1)


def green_function(mrp: MarkovRenewalProcess, N_max: int) -> GreenSeries:
    """Renewal recursion Z(N) = 1_{N=0} delta_init + sum_m Z(N-m) K(m).

    Arrival times beyond the tabulated n_max are dropped; keep n_max at or
    above N_max unless the kernel tail is negligible (localized tilts).
    """
    if N_max < 0:
        raise ValueError(f"N_max must be >= 0, got {N_max}")
    m, _, n_max = mrp.values.shape
    Z = np.zeros((N_max + 1, m))
    Z[0] = mrp.initial_distribution()
    for N in range(1, N_max + 1):
        depth = min(N, n_max)
        stop = N - depth - 1
        block = Z[N - 1 : stop : -1] if stop >= 0 else Z[N - 1 :: -1]
        Z[N] = np.einsum("mx,xym->y", block, mrp.values[:, :, :depth])
    return GreenSeries(Z=Z, initial=mrp.initial_distribution())


def forward_chain_tv(
    mrp: MarkovRenewalProcess,
    mu: np.ndarray,
    xi: float,
    j_list,
    n_chains: int = 1_000_000,
    rng=None,
) -> np.ndarray:
    """TV distance of the forward chain renewal slice to mu/xi at each j.

    The forward chain (A_j, J'_j) counts down the time to the next renewal
    and redraws (A, J') from the kernel row whenever A hits 1; its A = 1
    slice converges to mu/xi in total variation. n_chains independent chains
    are evolved as one multinomial count vector over (A, J') cells, which is
    distributionally identical to looping over chains but runs in
    O(max_j * nodes) multinomial draws. Distances are half-L1 on the node
    cells.

    The kernel must be stochastic (rows summing to 1) with a finite mean
    renewal time, otherwise the stationary law does not exist.
    """
    mu = np.asarray(mu, dtype=float)
    mass = mrp.row_mass()
    if np.any(np.abs(mass - 1.0) > 1e-6):
        worst = float(np.abs(mass - 1.0).max())
        raise ValueError(
            f"defective kernel: row mass off by {worst:.3e}; "
            "the renewal theorem needs a stochastic kernel"
        )
    if not (math.isfinite(xi) and xi > 0.0):
        raise ValueError(f"mean renewal time must be finite and positive, got {xi}")
    m, _, n_max = mrp.values.shape
    if mu.shape != (m,) or np.any(mu < 0.0) or abs(mu.sum() - 1.0) > 1e-6:
        raise ValueError("mu must be a length-m probability vector")
    j_list = [int(j) for j in np.atleast_1d(j_list)]
    if not j_list or any(j < 0 for j in j_list) or sorted(j_list) != j_list:
        raise ValueError("j_list must be nondecreasing nonnegative integers")
    if n_chains < 1:
        raise ValueError("n_chains must be positive")
    if rng is None:
        rng = np.random.default_rng()

    # flattened per-row renewal law over (n, y); exact renormalization of
    # the <= 1e-6 tabulation defect keeps multinomial() happy
    pflat = np.ascontiguousarray(np.swapaxes(mrp.values, 1, 2).reshape(m, n_max * m))
    pflat /= pflat.sum(axis=1, keepdims=True)

    counts = np.zeros((n_max, m), dtype=np.int64)
    start = mrp.initial_distribution()
    per_state = rng.multinomial(n_chains, start / start.sum())
    for x in range(m):
        if per_state[x]:
            counts += rng.multinomial(per_state[x], pflat[x]).reshape(n_max, m)

    target = mu / xi
    out = np.empty(len(j_list))
    pos = 0
    for j in range(j_list[-1] + 1):
        while pos < len(j_list) and j_list[pos] == j:
            empirical = counts[0] / n_chains
            out[pos] = 0.5 * float(np.abs(empirical - target).sum())
            pos += 1
        renewing = counts[0].copy()
        counts[:-1] = counts[1:]
        counts[-1] = 0
        for x in range(m):
            if renewing[x]:
                counts += rng.multinomial(int(renewing[x]), pflat[x]).reshape(n_max, m)
    return out


def _pq_log_partition(law: DiscretePQ, a: int, beta: float, N_list, boundary: str):
    from .pq_exact import transfer_matrix_Z

    return np.array(
        [transfer_matrix_Z(law.p, a, beta, int(N), boundary=boundary) for N in N_list]
    )


def _continuous_partitions(law, a, beta, N_max, kernel):
    """Node-resolved constrained partition Z_c[N, y] on quadrature nodes.

    Green recursion in tilted coordinates, reweighted by v(x0)/v(y) with the
    start at the node closest to the origin. The tilt keeps the recursion
    O(1)-sized in the localized phase; the e^{F N} factor is restored at
    the end (F = 0 below criticality, so nothing can overflow there).
    """
    if kernel is None:
        kernel = build_continuous(law, a)
    tilted = build_tilted(kernel, beta)
    x0 = int(np.argmin(kernel.nodes))
    mrp = MarkovRenewalProcess(values=tilted.values, initial_state=x0)
    series = green_function(mrp, N_max)
    zc = series.Z * (tilted.right[x0] / tilted.right)[None, :]
    zc *= np.exp(tilted.F * np.arange(N_max + 1))[:, None]
    return kernel, zc


def _stay_above(law, kernel, N_max: int) -> np.ndarray:
    """stay[t, y] = P[S_1 > a, ..., S_t > a | S_0 = node y] on the strip nodes.

    Rebuilds a trapezoid grid over (a, T] matching the kernel defaults; any
    consistent quadrature of the survival probability works here.
    """
    a = kernel.a
    du = law.sigma / 6.0
    n_cells = int(math.ceil((kernel.truncation_height - a) / du))
    exc = a + du * np.arange(n_cells + 1)
    exc_w = np.full(n_cells + 1, du)
    exc_w[0] = du / 2.0
    exc_w[-1] = du / 2.0
    first = density_grid(law, kernel.nodes, exc) * exc_w[None, :]
    step = density_grid(law, exc, exc) * exc_w[None, :]
    stay = np.empty((N_max + 1, kernel.nodes.size))
    stay[0] = 1.0
    surv = np.ones(exc.size)
    for t in range(1, N_max + 1):
        stay[t] = first @ surv
        surv = step @ surv
    return stay


def partition_asymptotics(kind: str, law, a, beta: float, N_list, kernel=None) -> np.ndarray:
    """Partition sequence normalized so the named phase plateaus.

    localized          Z_c(N) e^{-F N}     (F > 0, pinned phase)
    deloc_constrained  Z_c(N) N^{3/2}      (F = 0, endpoint in the strip)
    deloc_free         Z_f(N) N^{1/2}      (F = 0, free endpoint)

    DiscretePQ partitions come from the exact log-domain DP; continuous laws
    go through the Green recursion on quadrature nodes, with the free
    endpoint handled by convolving Z_c against stay-above-the-strip
    probabilities.
    """
    if kind not in ("localized", "deloc_constrained", "deloc_free"):
        raise ValueError(f"unknown kind {kind!r}")
    N_arr = np.asarray(list(N_list), dtype=int)
    if N_arr.size == 0 or np.any(N_arr < 1):
        raise ValueError("N_list must hold positive integers")

    if isinstance(law, DiscretePQ):
        boundary = "free" if kind == "deloc_free" else "constrained"
        log_z = _pq_log_partition(law, int(a), beta, N_arr, boundary)
        if kind == "localized":
            if kernel is None:
                kernel = build_pq(law.p, int(a))
            F = free_energy(kernel, beta)
            return np.exp(log_z - F * N_arr)
        power = 1.5 if kind == "deloc_constrained" else 0.5
        return np.exp(log_z + power * np.log(N_arr))

    N_max = int(N_arr.max())
    kernel, zc = _continuous_partitions(law, a, beta, N_max, kernel)
    # zc rows are per-cell masses (the kernel folds quadrature weights in),
    # so plain sums integrate over the strip
    if kind == "localized":
        F = free_energy(kernel, beta)
        return zc[N_arr].sum(axis=1) * np.exp(-F * N_arr.astype(float))
    if kind == "deloc_constrained":
        return zc[N_arr].sum(axis=1) * N_arr.astype(float) ** 1.5
    stay = _stay_above(law, kernel, N_max)
    # Z_f(N) = sum_t  Z_c(N - t, dy) . stay_t(y), the t = N term being the
    # initial mass that never returns to the strip
    free = np.empty(N_arr.size)
    for i, N in enumerate(N_arr):
        free[i] = np.einsum("ty,ty->", zc[N::-1], stay[: N + 1])
    return free * np.sqrt(N_arr.astype(float))
