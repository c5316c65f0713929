"""Exact trajectory sampling for the strip measures.

Lattice paths come from a backward suffix-weight DP followed by forward
categorical draws, so every path carries exactly its Boltzmann probability
(no MCMC, no burn-in). Continuous paths are drawn in two stages: the contact
set and contact heights from the Markov renewal structure by backward
Green-function sampling, then each excursion filled with a walk bridge
conditioned to stay above the strip by rejection. Rescaling, contact-set
statistics, and distributional tests against conditioned simple-walk
references (meander and excursion stand-ins) live here too.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import ks_2samp

from .increments import DiscretePQ, Gaussian, UniformSym
from .renewal_sim import MarkovRenewalProcess, green_function, _stay_above
from .return_kernel import ReturnKernel, build_continuous, density_grid
from .spectral import assemble_B, build_tilted, spectral_radius

__all__ = [
    "PathSample",
    "RescaledPath",
    "sample_pq",
    "sample_continuous",
    "rescale",
    "contact_stats",
    "reference_sampler",
    "scaling_test",
]


@dataclass(frozen=True)
class PathSample:
    """One trajectory S_1..S_N plus its contact bookkeeping.

    contact_set holds the indices i with S_i in [0, a], index 0 always
    included for the pinned start S_0 = 0. L_A is the last contact in
    [0, N/2]; R_A the first contact in [N/2, N], defaulting to N when that
    half is contact-free.
    """

    heights: np.ndarray
    contact_set: np.ndarray
    L_A: int
    R_A: int
    boundary: str

    @property
    def N(self) -> int:
        return self.heights.shape[0]

    @classmethod
    def from_heights(cls, heights, a: float, boundary: str) -> "PathSample":
        heights = np.asarray(heights)
        N = heights.shape[0]
        inside = (heights >= 0.0) & (heights <= a)
        contact_set = np.concatenate(([0], np.flatnonzero(inside) + 1)).astype(np.int32)
        left = contact_set[contact_set <= N // 2]
        L_A = int(left[-1])
        right = contact_set[contact_set >= (N + 1) // 2]
        R_A = int(right[0]) if right.size else N
        return cls(
            heights=heights,
            contact_set=contact_set,
            L_A=L_A,
            R_A=R_A,
            boundary=boundary,
        )


@dataclass(frozen=True)
class RescaledPath:
    """Diffusively rescaled path on [0, 1]: exact at k/N, linear between."""

    values: np.ndarray
    N: int

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < -1e-12) or np.any(t_arr > 1.0 + 1e-12):
            raise ValueError("rescaled paths live on [0, 1]")
        grid = np.arange(self.N + 1) / self.N
        out = np.interp(np.clip(t_arr, 0.0, 1.0), grid, self.values)
        return out if out.ndim else float(out)

    def sup(self) -> float:
        # piecewise linear, so the max sits at a lattice point
        return float(self.values.max())


def rescale(path, sigma: float, N: int | None = None) -> RescaledPath:
    """Map S_1..S_N to t -> S_{Nt}/(sigma sqrt N) with linear interpolation."""
    heights = path.heights if isinstance(path, PathSample) else np.asarray(path, dtype=float)
    if N is None:
        N = heights.shape[0]
    if heights.shape[0] != N:
        raise ValueError(f"path has {heights.shape[0]} heights, expected N = {N}")
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    values = np.empty(N + 1)
    values[0] = 0.0
    values[1:] = np.asarray(heights, dtype=float) / (sigma * math.sqrt(N))
    return RescaledPath(values=values, N=N)


def _validate_batch(samples) -> tuple[int, str]:
    if not samples:
        raise ValueError("no samples given")
    N = samples[0].N
    boundary = samples[0].boundary
    for s in samples:
        if s.N != N or s.boundary != boundary:
            raise ValueError("samples must share N and boundary")
    return N, boundary


def contact_stats(samples, grid=None) -> dict:
    """Empirical contact-extreme tails over a grid of levels.

    Free samples get the tail of the last contact P[max A >= L]; constrained
    samples the tails of L_A and of N - R_A. Index 0 counts as a contact, so
    max A is always defined.
    """
    N, boundary = _validate_batch(samples)
    if grid is None:
        grid = np.unique(np.linspace(0, N, 65, dtype=int))
    grid = np.asarray(grid, dtype=int)
    n = len(samples)
    out = {"N": N, "boundary": boundary, "grid": grid, "n_paths": n}
    if boundary == "free":
        last = np.array([s.contact_set[-1] for s in samples])
        out["tail_max_contact"] = (last[None, :] >= grid[:, None]).mean(axis=1)
    else:
        left = np.array([s.L_A for s in samples])
        right_gap = np.array([s.N - s.R_A for s in samples])
        out["tail_L"] = (left[None, :] >= grid[:, None]).mean(axis=1)
        out["tail_R"] = (right_gap[None, :] >= grid[:, None]).mean(axis=1)
    return out


def sample_pq(
    p: float,
    a: int,
    beta: float,
    N: int,
    boundary: str,
    n_paths: int,
    rng=None,
) -> list[PathSample]:
    """Boltzmann-exact lattice paths by backward DP and forward draws.

    Suffix weights W(x, n) aggregate every admissible continuation with its
    reward factors; forward steps then draw -1/0/+1 proportionally to
    p_s · reward(x + s) · W(x + s, n + 1). Columns are max-normalized, so
    no overflow at any beta. Heights above a + 8 sqrt(N) carry less mass
    than double roundoff and are truncated.
    """
    law = DiscretePQ(p)  # validates p
    if boundary not in ("free", "constrained"):
        raise ValueError(f"boundary must be free or constrained, got {boundary!r}")
    if not (isinstance(a, (int, np.integer)) and a >= 0):
        raise ValueError(f"a must be a nonnegative integer, got {a!r}")
    if not 1 <= N <= 2 ** 15:
        raise ValueError(f"N must lie in [1, 32768], got {N}")
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    if rng is None:
        rng = np.random.default_rng()

    q = law.q
    cap = int(a) + int(math.ceil(8.0 * math.sqrt(N))) + 2
    reward = np.ones(cap + 1)
    reward[: int(a) + 1] = math.exp(beta)
    W = np.empty((N + 1, cap + 1))
    W[N] = 1.0
    if boundary == "constrained":
        W[N] = 0.0
        W[N, : int(a) + 1] = 1.0
    for n in range(N - 1, -1, -1):
        t = reward * W[n + 1]
        col = q * t
        col[1:] += p * t[:-1]
        col[:-1] += p * t[1:]
        peak = col.max()
        if peak <= 0.0:
            raise ValueError("zero total path weight (impossible boundary combination)")
        W[n] = col / peak
    if W[0, 0] <= 0.0:
        raise ValueError("zero total path weight (impossible boundary combination)")

    xs = np.zeros(n_paths, dtype=np.int64)
    heights = np.empty((n_paths, N), dtype=np.int16)
    for n in range(N):
        t = reward * W[n + 1]
        w_down = np.where(xs > 0, p * t[np.maximum(xs - 1, 0)], 0.0)
        w_stay = q * t[xs]
        w_up = np.where(xs < cap, p * t[np.minimum(xs + 1, cap)], 0.0)
        u = rng.random(n_paths) * (w_down + w_stay + w_up)
        step = np.where(u < w_down, -1, np.where(u < w_down + w_stay, 0, 1))
        xs += step
        heights[:, n] = xs
    return [PathSample.from_heights(heights[i], float(a), boundary) for i in range(n_paths)]


def _categorical_rows(weights: np.ndarray, rng) -> np.ndarray:
    """One draw per row from unnormalized nonnegative row weights."""
    totals = weights.sum(axis=1)
    if np.any(totals <= 0.0):
        raise ValueError("zero total path weight (impossible boundary combination)")
    cum = np.cumsum(weights, axis=1)
    u = rng.random(weights.shape[0]) * totals
    return (cum < u[:, None]).sum(axis=1)


def _start_row(law, kernel: ReturnKernel) -> np.ndarray:
    """First-return table f_{0, y}(n) from the exact height 0 on kernel grids."""
    a = kernel.a
    du = law.sigma / 6.0
    n_cells = int(math.ceil((kernel.truncation_height - a) / du))
    exc = a + du * np.arange(n_cells + 1)
    exc_w = np.full(n_cells + 1, du)
    exc_w[0] = du / 2.0
    exc_w[-1] = du / 2.0
    origin = np.array([0.0])
    row = np.empty((kernel.nodes.size, kernel.n_max))
    row[:, 0] = density_grid(law, origin, kernel.nodes)[0]
    live = density_grid(law, origin, exc) * exc_w[None, :]
    step = density_grid(law, exc, exc) * exc_w[None, :]
    exit_ = density_grid(law, exc, kernel.nodes)
    for n in range(2, kernel.n_max + 1):
        row[:, n - 1] = (live @ exit_)[0]
        if n < kernel.n_max:
            live = live @ step
    return row


def _rejection_rounds(todo_size: int) -> int:
    # replicate proposals for nearly-done batches so low acceptance rates
    # cost vector ops, not python iterations
    return max(1, 4096 // todo_size)


def _bridge_fill(x, y, n, rng, sigma, a):
    """Interior heights of Gaussian walk bridges x -> y (n steps) above a.

    x, y are aligned vectors, one bridge each, all of the same length n.
    Proposes exact Gaussian bridges and rejects any touching the strip.
    """
    B = x.shape[0]
    out = np.empty((B, n - 1))
    todo = np.arange(B)
    drift = np.arange(1, n) / n
    attempts = 0
    accepted = 0
    while todo.size:
        rows = np.repeat(todo, _rejection_rounds(todo.size))
        walk = np.cumsum(rng.normal(0.0, sigma, size=(rows.size, n)), axis=1)
        interior = (
            x[rows, None]
            + drift[None, :] * (y[rows] - x[rows])[:, None]
            + walk[:, :-1]
            - drift[None, :] * walk[:, -1:]
        )
        ok = (interior > a).all(axis=1)
        hit, first = np.unique(rows[ok], return_index=True)
        out[hit] = interior[ok][first]
        accepted += int(ok.sum())
        attempts += rows.size
        todo = np.setdiff1d(todo, hit, assume_unique=True)
        if attempts > 1_000_000 and accepted < 1e-6 * attempts:
            raise RuntimeError(
                f"bridge rejection stalled: gap length {n}, {accepted} accepts "
                f"in {attempts} proposals (acceptance < 1e-6)"
            )
    return out


def _free_tail_fill(x, t, rng, sigma, a):
    """Heights of t unconditioned steps from x staying above a throughout."""
    B = x.shape[0]
    out = np.empty((B, t))
    todo = np.arange(B)
    attempts = 0
    accepted = 0
    while todo.size:
        rows = np.repeat(todo, _rejection_rounds(todo.size))
        walk = x[rows, None] + np.cumsum(rng.normal(0.0, sigma, size=(rows.size, t)), axis=1)
        ok = (walk > a).all(axis=1)
        hit, first = np.unique(rows[ok], return_index=True)
        out[hit] = walk[ok][first]
        accepted += int(ok.sum())
        attempts += rows.size
        todo = np.setdiff1d(todo, hit, assume_unique=True)
        if attempts > 1_000_000 and accepted < 1e-6 * attempts:
            raise RuntimeError(
                f"free-tail rejection stalled: segment length {t}, {accepted} "
                f"accepts in {attempts} proposals (acceptance < 1e-6)"
            )
    return out


def sample_continuous(
    law,
    a: float,
    beta: float,
    N: int,
    boundary: str,
    n_paths: int,
    rng=None,
    kernel: ReturnKernel | None = None,
) -> list[PathSample]:
    """Exact continuous-law paths: renewal skeleton, then excursion fill.

    Stage one samples the contact set and contact heights backward through
    the Green function of the tilted kernel (conditioned on a renewal at N
    for the constrained boundary; joint with the stay-above tail for the
    free one). Stage two fills each gap with a Gaussian bridge conditioned
    above the strip by rejection. Needs kernel.n_max >= N so every gap
    length is tabulated.
    """
    if isinstance(law, DiscretePQ):
        raise ValueError("use sample_pq for the lattice walk")
    if isinstance(law, UniformSym):
        raise NotImplementedError(
            "excursion fill needs an exact bridge sampler; Gaussian steps only"
        )
    if not isinstance(law, Gaussian):
        raise ValueError(f"unsupported step law {law!r}")
    if boundary not in ("free", "constrained"):
        raise ValueError(f"boundary must be free or constrained, got {boundary!r}")
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    if rng is None:
        rng = np.random.default_rng()
    if kernel is None:
        kernel = build_continuous(law, a, n_max=max(512, N))
    if kernel.n_max < N:
        raise ValueError(f"kernel tabulates n <= {kernel.n_max}, need N = {N}")

    tilted, aug, v0 = _augmented_kernel(law, kernel, beta)
    v = tilted.right
    m = kernel.nodes.size
    series = green_function(MarkovRenewalProcess(values=aug, initial_state=0), N)
    Z = series.Z

    if boundary == "constrained":
        weights = Z[N, 1:] / v
        terminal_y = 1 + _categorical_rows(np.broadcast_to(weights, (n_paths, m)), rng)
        terminal_s = np.full(n_paths, N, dtype=np.int64)
        tails = np.zeros(n_paths, dtype=np.int64)
    else:
        stay_nodes = _stay_above(law, kernel, N)
        stay0 = _stay_above_origin(law, kernel, N)
        s_idx = np.arange(1, N + 1)
        with np.errstate(divide="ignore"):
            logw = (
                np.log(Z[1:, 1:])
                + tilted.F * s_idx[:, None]
                + np.log(stay_nodes[N - s_idx, :])
                - np.log(v)[None, :]
            )
        logw0 = math.log(stay0[N]) - math.log(v0)
        flat = np.concatenate(([logw0], logw.ravel()))
        flat = np.exp(flat - flat.max())
        picks = _categorical_rows(np.broadcast_to(flat, (n_paths, flat.size)), rng)
        terminal_s = np.where(picks == 0, 0, 1 + (picks - 1) // m).astype(np.int64)
        terminal_y = np.where(picks == 0, 0, 1 + (picks - 1) % m).astype(np.int64)
        tails = N - terminal_s

    # M1[s, y, n+1] = sum_x Z(s - n - 1, x) K(x, y, n + 1): the backward gap
    # law unnormalized, tabulated once so the path loop is pure gathers
    M1 = np.zeros((N + 1, m + 1, kernel.n_max))
    for n in range(1, N + 1):
        M1[n:, :, n - 1] = Z[: N + 1 - n] @ aug[:, :, n - 1]

    # backward Green sampling of the renewal skeleton, all paths in lockstep
    contacts = [[(int(terminal_s[i]), int(terminal_y[i]))] for i in range(n_paths)]
    cur_s = terminal_s.copy()
    cur_y = terminal_y.copy()
    while True:
        active = np.flatnonzero(cur_s > 0)
        if active.size == 0:
            break
        gaps = 1 + _categorical_rows(M1[cur_s[active], cur_y[active], :], rng)
        prev_w = Z[cur_s[active] - gaps, :] * aug[:, cur_y[active], gaps - 1].T
        prev = _categorical_rows(prev_w, rng)
        cur_s[active] -= gaps
        cur_y[active] = prev
        for i in active:
            if cur_s[i] > 0:
                contacts[i].append((int(cur_s[i]), int(cur_y[i])))

    heights = np.zeros((n_paths, N))
    node_of = np.concatenate(([0.0], kernel.nodes))
    gap_groups: dict[int, list] = {}
    tail_groups: dict[int, list] = {}
    for i in range(n_paths):
        prev_t, prev_x = 0, 0.0
        for t_i, y_i in contacts[i][::-1]:
            if t_i == 0:
                continue  # contact-free path, terminal pick was the origin cell
            x_to = node_of[y_i]
            heights[i, t_i - 1] = x_to
            gap = t_i - prev_t
            if gap >= 2:
                gap_groups.setdefault(gap, []).append((i, prev_t, prev_x, x_to))
            prev_t, prev_x = t_i, x_to
        if boundary == "free" and tails[i] > 0:
            tail_groups.setdefault(int(tails[i]), []).append((i, prev_t, prev_x))

    sigma = law.sigma
    for gap, items in gap_groups.items():
        idx = np.array([it[0] for it in items])
        t0 = np.array([it[1] for it in items])
        x_from = np.array([it[2] for it in items])
        y_to = np.array([it[3] for it in items])
        fill = _bridge_fill(x_from, y_to, gap, rng, sigma, a)
        for r in range(gap - 1):
            heights[idx, t0 + r] = fill[:, r]
    for t_len, items in tail_groups.items():
        idx = np.array([it[0] for it in items])
        t0 = np.array([it[1] for it in items])
        x_from = np.array([it[2] for it in items])
        fill = _free_tail_fill(x_from, t_len, rng, sigma, a)
        for r in range(t_len):
            heights[idx, t0 + r] = fill[:, r]

    return [PathSample.from_heights(heights[i], a, boundary) for i in range(n_paths)]


def _augmented_kernel(law, kernel: ReturnKernel, beta: float):
    """Tilted renewal kernel with the exact origin adjoined as state 0.

    Returns (tilted, aug, v0): aug[x, y, n] transports state x to state y in
    n + 1 steps, x = 0 being the origin start row and 1..m the strip nodes.
    The origin's right-eigenfunction value v0 comes from the eigenvalue
    equation applied at height 0; every conditional the samplers draw from
    has v0 cancelling, so its accuracy is irrelevant downstream.

    Gaps longer than n_max are impossible for horizons N <= n_max, so the
    dropped analytic tail costs nothing and the skeleton law is exactly the
    quadrature renewal law: tilt factors cancel from backward conditionals.
    """
    tilted = build_tilted(kernel, beta)
    sol = spectral_radius(assemble_B(kernel, tilted.F))
    v = tilted.right
    m = kernel.nodes.size
    damp = np.exp(-tilted.F * np.arange(1.0, kernel.n_max + 1.0))
    raw0 = _start_row(law, kernel)
    v0 = float(((raw0 * damp[None, :]).sum(axis=1) * kernel.weights) @ v)
    v0 *= math.exp(beta) / sol.delta
    k0 = math.exp(beta) * raw0 * damp[None, :] * (kernel.weights * v)[:, None] / v0
    aug = np.zeros((m + 1, m + 1, kernel.n_max))
    aug[0, 1:, :] = k0
    aug[1:, 1:, :] = tilted.values
    return tilted, aug, v0


def _stay_above_origin(law, kernel: ReturnKernel, N_max: int) -> np.ndarray:
    """stay0[t] = P[S_1 > a, ..., S_t > a | S_0 = 0]."""
    a = kernel.a
    du = law.sigma / 6.0
    n_cells = int(math.ceil((kernel.truncation_height - a) / du))
    exc = a + du * np.arange(n_cells + 1)
    exc_w = np.full(n_cells + 1, du)
    exc_w[0] = du / 2.0
    exc_w[-1] = du / 2.0
    first = (density_grid(law, np.array([0.0]), exc) * exc_w[None, :])[0]
    step = density_grid(law, exc, exc) * exc_w[None, :]
    stay = np.empty(N_max + 1)
    stay[0] = 1.0
    surv = np.ones(exc.size)
    for t in range(1, N_max + 1):
        stay[t] = first @ surv
        surv = step @ surv
    return stay


def reference_sampler(kind: str, N_ref: int = 4096, n_paths: int = 1000, rng=None) -> np.ndarray:
    """Conditioned-positive simple walk paths, the scaling-limit stand-ins.

    The +-1 walk from 0 conditioned to stay nonnegative (meander) or to stay
    nonnegative and end at 0 (excursion) is sampled exactly by the same
    backward-DP construction as the wetting sampler. Returns an int16 array
    of shape (n_paths, N_ref + 1) including the S_0 = 0 column.
    """
    if kind not in ("meander", "excursion"):
        raise ValueError(f"kind must be meander or excursion, got {kind!r}")
    if N_ref < 1:
        raise ValueError("N_ref must be positive")
    if kind == "excursion" and N_ref % 2:
        raise ValueError("excursion reference needs even N_ref (lattice parity)")
    if rng is None:
        rng = np.random.default_rng()
    cap = int(math.ceil(8.0 * math.sqrt(N_ref))) + 2
    W = np.empty((N_ref + 1, cap + 1))
    if kind == "meander":
        W[N_ref] = 1.0
    else:
        W[N_ref] = 0.0
        W[N_ref, 0] = 1.0
    for n in range(N_ref - 1, -1, -1):
        t = W[n + 1]
        col = np.zeros(cap + 1)
        col[1:] += 0.5 * t[:-1]
        col[:-1] += 0.5 * t[1:]
        peak = col.max()
        W[n] = col / peak
    xs = np.zeros(n_paths, dtype=np.int64)
    out = np.zeros((n_paths, N_ref + 1), dtype=np.int16)
    for n in range(N_ref):
        t = W[n + 1]
        w_down = np.where(xs > 0, t[np.maximum(xs - 1, 0)], 0.0)
        w_up = np.where(xs < cap, t[np.minimum(xs + 1, cap)], 0.0)
        u = rng.random(n_paths) * (w_down + w_up)
        xs += np.where(u < w_down, -1, 1)
        out[:, n + 1] = xs
    return out


def _marginals(height_matrix: np.ndarray, t_grid, scale: float) -> np.ndarray:
    """Linear-interp marginals at each t for stacked paths with S_0 column."""
    H = height_matrix
    N = H.shape[1] - 1
    out = np.empty((len(t_grid), H.shape[0]))
    for k, t in enumerate(t_grid):
        pos = t * N
        lo = min(int(math.floor(pos)), N - 1) if pos < N else N - 1
        frac = pos - lo
        out[k] = (H[:, lo] * (1.0 - frac) + H[:, lo + 1] * frac) / scale
    return out


def scaling_test(
    samples,
    kind: str,
    t_grid=None,
    sigma: float | None = None,
    N_ref: int = 4096,
    n_ref_paths: int = 100_000,
    rng=None,
    batch: int = 5000,
    quantiles=(0.25, 0.5, 0.75),
):
    """KS of rescaled marginals against a reference, or sup quantiles.

    kind meander/excursion: returns the two-sample KS statistic per t in
    t_grid, comparing S_{Nt}/(sigma sqrt N) across samples against the
    conditioned simple walk at the same t (reference sampled in batches to
    bound memory). kind supercritical: returns np.quantile of the rescaled
    path suprema at the requested quantiles instead.
    """
    N, _ = _validate_batch(samples)
    if sigma is None or not sigma > 0.0:
        raise ValueError("sigma of the sampled step law is required")
    scale = sigma * math.sqrt(N)
    if kind == "supercritical":
        sups = np.array([max(0.0, float(np.max(s.heights))) / scale for s in samples])
        return np.quantile(sups, quantiles)
    if kind not in ("meander", "excursion"):
        raise ValueError(f"kind must be meander, excursion or supercritical, got {kind!r}")
    if t_grid is None or len(t_grid) == 0:
        raise ValueError("t_grid is required for distributional comparison")
    if rng is None:
        rng = np.random.default_rng()

    own = np.empty((len(samples), N + 1))
    own[:, 0] = 0.0
    for i, s in enumerate(samples):
        own[i, 1:] = s.heights
    own_marg = _marginals(own, t_grid, scale)

    ref_scale = math.sqrt(N_ref)
    ref_marg = []
    done = 0
    while done < n_ref_paths:
        b = min(batch, n_ref_paths - done)
        chunk = reference_sampler(kind, N_ref=N_ref, n_paths=b, rng=rng)
        ref_marg.append(_marginals(chunk, t_grid, ref_scale))
        done += b
    ref_marg = np.concatenate(ref_marg, axis=1)

    return np.array(
        [ks_2samp(own_marg[k], ref_marg[k]).statistic for k in range(len(t_grid))]
    )
