"""Numerical tolerances, working boxes and reproducible sampling."""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

DEFAULT_SEED = 20240917


@dataclass(frozen=True)
class ToleranceConfig:
    ode_tol: float = 1e-10
    diff_step_scale: float = 1e-5
    constancy_tol: float = 1e-6
    rank_threshold: float = 1e-6  # relative to the spectral norm of the tested matrix
    equiv_tol: float = 1e-6
    sample_count: int = 10

    def __post_init__(self):
        for name in ("ode_tol", "diff_step_scale", "constancy_tol",
                     "rank_threshold", "equiv_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.sample_count < 1:
            raise ValueError("sample_count must be at least 1")
        if self.constancy_tol < 10 * self.ode_tol:
            raise ValueError("constancy_tol must be at least 10 * ode_tol")

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


DEFAULT_TOL = ToleranceConfig()


@dataclass(frozen=True)
class WorkingBox:
    """Per-parameter closed intervals; every interval contains 0."""

    bounds: tuple = field(default_factory=tuple)

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", b)
        for lo, hi in b:
            if not lo <= 0.0 <= hi or not lo < hi:
                raise ValueError(f"box interval [{lo}, {hi}] must be nondegenerate and contain 0")

    @classmethod
    def uniform(cls, dim, lo=-2.0, hi=2.0):
        return cls(tuple((lo, hi) for _ in range(dim)))

    @property
    def dim(self):
        return len(self.bounds)

    @property
    def lower(self):
        return np.array([lo for lo, _ in self.bounds])

    @property
    def upper(self):
        return np.array([hi for _, hi in self.bounds])

    def resized(self, dim):
        """Box of another dimension reusing the first interval as the template."""
        lo, hi = self.bounds[0] if self.bounds else (-2.0, 2.0)
        return WorkingBox(tuple(self.bounds[i] if i < self.dim else (lo, hi) for i in range(dim)))

    def sample(self, count, seed=DEFAULT_SEED, include_origin=False):
        pts = latin_hypercube(self.lower, self.upper, count, seed)
        if include_origin:
            pts = np.vstack([np.zeros(self.dim), pts])
        return pts


def latin_hypercube(lower, upper, count, seed=DEFAULT_SEED):
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.size == 0:
        return np.zeros((count, 0))
    sampler = qmc.LatinHypercube(d=lower.size, seed=np.random.default_rng(seed))
    return qmc.scale(sampler.random(count), lower, upper)


def chebyshev_grid(a, b, count):
    """Chebyshev-Lobatto points on [a, b] in increasing order (endpoints included)."""
    if count == 1:
        return np.array([0.5 * (a + b)])
    k = np.arange(count)
    pts = 0.5 * (a + b) - 0.5 * (b - a) * np.cos(np.pi * k / (count - 1))
    pts[0], pts[-1] = a, b
    return pts
