"""First-return kernel of the walk to the strip.

f_{x,y}(n) is the mass (or density) of excursions that leave the strip
[0, a] at height x, stay strictly above a for n - 1 steps, and land back at
height y; the n = 1 layer is simply any step landing in the strip. For the
lattice (p, q) walk the kernel is exact: excursions of length >= 2 exist
only from the top height a back to a. Continuous laws are discretized with
Gauss-Legendre nodes on the strip and a uniform trapezoid grid above it.
Everything beyond n_max is carried analytically by a tail coefficient times
n^(-3/2), the coefficient being read off the largest computed layer.
"""
from __future__ import annotations

import hashlib
import math
import os
import struct
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ladder
from ._tails import frac_power_tail
from .increments import DiscretePQ, IncrementLaw, parse_law

__all__ = [
    "ReturnKernel",
    "build_pq",
    "build_continuous",
    "tail_ratio",
    "save_kernel",
    "load_kernel",
    "cache_path",
]

_MAGIC = b"SWK1"
_VERSION = 1


@dataclass(frozen=True)
class ReturnKernel:
    """Tabulated return kernel on strip nodes.

    values[i, j, n-1] is f_{x_i, x_j}(n); weights are the node quadrature
    weights (ones on the lattice). tail_theta[i, j] is the empirical
    n^(3/2)-tail coefficient used for the analytic continuation beyond
    n_max. step_loss is the largest per-step mass lost to the excursion
    truncation (0 for the exact lattice build).
    """

    law: IncrementLaw
    a: float
    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    n_max: int
    tail_theta: np.ndarray
    truncation_height: float | None = None
    step_loss: float = 0.0

    def total_return_mass(self) -> np.ndarray:
        """Per-node mass of ever returning, analytic tail included."""
        head = self.values.sum(axis=2) @ self.weights
        tail = frac_power_tail(0.0, self.n_max) * (self.tail_theta @ self.weights)
        return head + tail


def build_pq(p: float, a: int, n_max: int = 8192) -> ReturnKernel:
    """Exact lattice return kernel for integer strip width a >= 1.

    Heights strictly above a are tracked up to a + 8 sqrt(n_max); the mass
    that high is below double precision for every admissible n.
    """
    if a < 1 or int(a) != a:
        raise ValueError(f"a must be a positive integer, got {a}")
    if n_max < 2:
        raise ValueError(f"n_max must be >= 2, got {n_max}")
    law = DiscretePQ(p)
    a = int(a)
    m = a + 1
    nodes = np.arange(m, dtype=float)
    values = np.zeros((m, m, n_max))
    # one step: any landing in the strip
    for i in range(m):
        for j in range(m):
            values[i, j, 0] = law.density(float(j - i))
    # longer excursions only run from the top back to the top; track the
    # walk shifted so that "stay > a" reads "stay >= 1"
    cap = 1 + int(math.ceil(8.0 * math.sqrt(n_max)))
    w = np.zeros(cap)
    w[0] = 1.0  # height a + 1 after the opening up-step
    q = law.q
    for n in range(2, n_max + 1):
        values[a, a, n - 1] = p * p * w[0]
        nxt = q * w
        nxt[:-1] += p * w[1:]
        nxt[1:] += p * w[:-1]
        w = nxt
    tail_theta = float(n_max) ** 1.5 * values[:, :, -1].copy()
    return ReturnKernel(
        law=law,
        a=float(a),
        nodes=nodes,
        weights=np.ones(m),
        values=values,
        n_max=n_max,
        tail_theta=tail_theta,
    )


def build_continuous(
    law: IncrementLaw,
    a: float,
    n_quad_nodes: int = 64,
    truncation_height: float | None = None,
    n_max: int = 512,
    excursion_step: float | None = None,
) -> ReturnKernel:
    """Return kernel by iterated quadrature for a continuous step law.

    The strip [0, a] carries Gauss-Legendre nodes; the excursion space
    (a, T] a uniform grid with trapezoid weights, T defaulting to
    a + 8 sigma sqrt(n_max) and the grid step to sigma / 6. Mass stepping
    above T is lost; the worst per-step loss is recorded and warned about
    beyond 1e-6.
    """
    if isinstance(law, DiscretePQ):
        raise ValueError("use build_pq for the lattice walk")
    if a <= 0.0:
        raise ValueError(f"a must be positive, got {a}")
    if n_max < 2:
        raise ValueError(f"n_max must be >= 2, got {n_max}")
    sigma = law.sigma
    if truncation_height is None:
        truncation_height = a + 8.0 * sigma * math.sqrt(n_max)
    if truncation_height <= a + sigma:
        raise ValueError("truncation height too close to the strip")
    if excursion_step is None:
        excursion_step = sigma / 6.0
    xg, wg = np.polynomial.legendre.leggauss(n_quad_nodes)
    nodes = (xg + 1.0) * (a / 2.0)
    weights = wg * (a / 2.0)

    du = excursion_step
    n_cells = int(math.ceil((truncation_height - a) / du))
    truncation_height = a + du * n_cells
    exc = a + du * np.arange(n_cells + 1)
    exc_w = np.full(n_cells + 1, du)
    exc_w[0] = du / 2.0
    exc_w[-1] = du / 2.0

    m = n_quad_nodes
    values = np.empty((m, m, n_max))
    values[:, :, 0] = density_grid(law, nodes, nodes)
    # occupation of the excursion grid, quadrature weights folded in
    live = density_grid(law, nodes, exc) * exc_w[None, :]
    step = density_grid(law, exc, exc) * exc_w[None, :]
    exit_ = density_grid(law, exc, nodes)
    top_tail = 1.0 - law.cdf(truncation_height - exc)
    worst_loss = 0.0
    for n in range(2, n_max + 1):
        values[:, :, n - 1] = live @ exit_
        worst_loss = max(worst_loss, float((live @ top_tail).max()))
        if n < n_max:
            live = live @ step
    if worst_loss > 1e-6:
        warnings.warn(
            f"excursion truncation loses {worst_loss:.2e} mass in one step", RuntimeWarning
        )
    tail_theta = float(n_max) ** 1.5 * values[:, :, -1].copy()
    return ReturnKernel(
        law=law,
        a=float(a),
        nodes=nodes,
        weights=weights,
        values=values,
        n_max=n_max,
        tail_theta=tail_theta,
        truncation_height=float(truncation_height),
        step_loss=worst_loss,
    )


def density_grid(law: IncrementLaw, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Matrix of step densities h(dst_j - src_i)."""
    return law.density(dst[None, :] - src[:, None])


def tail_ratio(kernel: ReturnKernel, tables=None, n_samples: int = 200_000, rng=None):
    """n_max^(3/2) f(n_max) over the ladder-built fluctuation constant.

    Entries where the constant vanishes, or where the kernel has no mass at
    the horizon (empty-event rows), are NaN. Ladder tables are built on
    demand: exactly for the lattice walk, by MC (needs rng) otherwise.
    """
    law = kernel.law
    if tables is None:
        x_max = kernel.a + 10.0 * law.sigma
        if isinstance(law, DiscretePQ):
            tables = ladder.estimate_ladder(law, 0, x_max)
        else:
            if rng is None:
                raise ValueError("continuous laws need rng (or prebuilt tables)")
            tables = ladder.estimate_ladder(law, n_samples, x_max, rng)
    m = len(kernel.nodes)
    theta = np.empty((m, m))
    for i, x in enumerate(kernel.nodes):
        for j, y in enumerate(kernel.nodes):
            theta[i, j] = ladder.theta_a(tables, law.sigma, kernel.a, x, y)
    scaled = float(kernel.n_max) ** 1.5 * kernel.values[:, :, -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = scaled / theta
    ratio[(theta == 0.0) | (scaled == 0.0)] = np.nan
    return ratio


def save_kernel(kernel: ReturnKernel, path) -> None:
    """Binary cache: versioned header, little-endian float64, row-major."""
    spec = kernel.law.spec.encode()
    m = len(kernel.nodes)
    trunc = math.nan if kernel.truncation_height is None else kernel.truncation_height
    header = _MAGIC + struct.pack("<QQ", _VERSION, len(spec)) + spec + struct.pack(
        "<dQddQ", kernel.a, kernel.n_max, trunc, kernel.step_loss, m
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            for arr in (kernel.nodes, kernel.weights, kernel.tail_theta, kernel.values):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_kernel(path) -> ReturnKernel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path} is not a kernel cache (magic {magic!r})")
        version, spec_len = struct.unpack("<QQ", fh.read(16))
        if version != _VERSION:
            raise ValueError(f"unsupported kernel cache version {version}")
        law = parse_law(fh.read(spec_len).decode())
        a, n_max, trunc, step_loss, m = struct.unpack("<dQddQ", fh.read(40))
        n_max = int(n_max)
        m = int(m)
        nodes = np.frombuffer(fh.read(8 * m), dtype="<f8").copy()
        weights = np.frombuffer(fh.read(8 * m), dtype="<f8").copy()
        tail_theta = np.frombuffer(fh.read(8 * m * m), dtype="<f8").reshape(m, m).copy()
        values = np.frombuffer(fh.read(8 * m * m * n_max), dtype="<f8").reshape(
            m, m, n_max
        ).copy()
    return ReturnKernel(
        law=law,
        a=a,
        nodes=nodes,
        weights=weights,
        values=values,
        n_max=n_max,
        tail_theta=tail_theta,
        truncation_height=None if math.isnan(trunc) else trunc,
        step_loss=step_loss,
    )


def cache_path(law: IncrementLaw, a: float, n_max: int, n_quad_nodes: int | None = None,
               truncation_height: float | None = None) -> Path:
    """Deterministic cache location under STRIPWET_CACHE_DIR."""
    base = os.environ.get(
        "STRIPWET_CACHE_DIR", os.path.join(os.path.expanduser("~"), ".cache", "stripwet")
    )
    key = f"{law.spec}|a={a}|n={n_max}|q={n_quad_nodes}|T={truncation_height}"
    digest = hashlib.sha256(key.encode()).hexdigest()[:16]
    return Path(base) / f"kernel_{digest}.swk"
