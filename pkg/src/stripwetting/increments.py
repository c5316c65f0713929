"""Step laws for the wetting walk.

Three symmetric zero-mean families are supported: the lattice (p, q) walk
with steps in {-1, 0, +1}, a centered Gaussian step, and a symmetric uniform
step. Each law exposes its density (or mass) function, an analytic CDF, its
variance, and a vectorized exact sampler. Laws are immutable and safe to
share across worker threads; every worker owns its own rng stream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf as _erf

__all__ = [
    "DiscretePQ",
    "Gaussian",
    "UniformSym",
    "parse_law",
    "draw_increment",
    "density",
    "min_window",
    "rng_streams",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class DiscretePQ:
    """Lattice step: P[+1] = P[-1] = p, P[0] = q = 1 - 2p, with p in (0, 1/2)."""

    p: float

    def __post_init__(self):
        if not 0.0 < self.p < 0.5:
            raise ValueError(f"p must lie in (0, 1/2), got {self.p}")

    @property
    def q(self) -> float:
        return 1.0 - 2.0 * self.p

    @property
    def variance(self) -> float:
        return 2.0 * self.p

    @property
    def sigma(self) -> float:
        return math.sqrt(2.0 * self.p)

    def density(self, x):
        # point masses; exact zero off the lattice
        x = np.asarray(x, dtype=float)
        out = np.where(np.abs(x) == 1.0, self.p, 0.0)
        out = np.where(x == 0.0, self.q, out)
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= -1.0, self.p, 0.0)
        out = np.where(x >= 0.0, self.p + self.q, out)
        out = np.where(x >= 1.0, 1.0, out)
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        u = rng.random(size)
        return np.where(u < self.p, -1.0, np.where(u < 2.0 * self.p, 1.0, 0.0))

    @property
    def spec(self) -> str:
        return f"pq:p={self.p:g}"


@dataclass(frozen=True)
class Gaussian:
    """Centered Gaussian step with standard deviation sigma."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def variance(self) -> float:
        return self.sigma ** 2

    def density(self, x):
        x = np.asarray(x, dtype=float)
        z = x / self.sigma
        out = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = 0.5 * (1.0 + _erf(x / (self.sigma * _SQRT2)))
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        return rng.normal(0.0, self.sigma, size)

    @property
    def spec(self) -> str:
        return f"gauss:sigma={self.sigma:g}"


@dataclass(frozen=True)
class UniformSym:
    """Uniform step on [-halfwidth, +halfwidth]."""

    halfwidth: float

    def __post_init__(self):
        if not self.halfwidth > 0.0:
            raise ValueError(f"halfwidth must be positive, got {self.halfwidth}")

    @property
    def variance(self) -> float:
        return self.halfwidth ** 2 / 3.0

    @property
    def sigma(self) -> float:
        return self.halfwidth / math.sqrt(3.0)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(np.abs(x) <= self.halfwidth, 0.5 / self.halfwidth, 0.0)
        return out if out.ndim else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.clip((x + self.halfwidth) / (2.0 * self.halfwidth), 0.0, 1.0)
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        return rng.uniform(-self.halfwidth, self.halfwidth, size)

    @property
    def spec(self) -> str:
        return f"unif:hw={self.halfwidth:g}"


IncrementLaw = DiscretePQ | Gaussian | UniformSym


def parse_law(text: str) -> IncrementLaw:
    """Parse a law spec string: pq:p=0.3, gauss:sigma=1.0, unif:hw=1.0."""
    try:
        kind, _, args = text.partition(":")
        kv = dict(item.split("=", 1) for item in args.split(",") if item)
        params = {k: float(v) for k, v in kv.items()}
    except ValueError as exc:
        raise ValueError(f"malformed law spec {text!r}") from exc
    try:
        if kind == "pq":
            return DiscretePQ(params["p"])
        if kind == "gauss":
            return Gaussian(params["sigma"])
        if kind == "unif":
            return UniformSym(params["hw"])
    except KeyError as exc:
        raise ValueError(f"law spec {text!r} is missing parameter {exc}") from exc
    raise ValueError(f"unknown law kind {kind!r} in {text!r}")


def draw_increment(law: IncrementLaw, rng, size=None):
    """Draw one step (or an array of steps) from the law.

    Deterministic given the rng state; vectorized when size is given.
    """
    return law.sample(rng, size)


def density(law: IncrementLaw, x):
    """Density at x for continuous laws; point mass for DiscretePQ."""
    return law.density(x)


def min_window(law: IncrementLaw, a: float, cap: int = 10_000) -> int:
    """Smallest n with both P[S_n > a] and P[-S_n > a] strictly inside (0, 1).

    Exact convolution for the lattice walk; support/CDF analysis for the
    continuous families (their n-step CDFs are known, no sampling involved).
    Raises if no such n exists below the cap.
    """
    if not a > 0.0:
        raise ValueError(f"a must be positive, got {a}")
    if isinstance(law, Gaussian):
        # P[S_n > a] = 1 - Phi(a / (sigma sqrt(n))) lies in (0,1) for every n
        return 1
    if isinstance(law, UniformSym):
        # S_n is supported on [-n hw, n hw]; mass beyond a needs n hw > a
        n = int(math.floor(a / law.halfwidth)) + 1
        if n * law.halfwidth == a:  # boundary atom has zero mass
            n += 1
        if n > cap:
            raise ValueError(f"no window below cap={cap} for a={a}")
        return n
    # lattice walk: convolve the mass function until both tails are interior.
    # Symmetry makes the two tail conditions identical.
    step = np.array([law.p, law.q, law.p])
    pmf = step.copy()
    for n in range(1, cap + 1):
        k = np.arange(-n, n + 1)
        upper = pmf[k > a].sum()
        if 0.0 < upper < 1.0:
            return n
        pmf = np.convolve(pmf, step)
    raise ValueError(f"no window below cap={cap} for a={a}")


def rng_streams(seed: int, n: int) -> list[np.random.Generator]:
    """n independent reproducible generators, stable under any scheduling."""
    seq = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.PCG64(child)) for child in seq.spawn(n)]
