"""
Piecewise-constant mixing distributions over the precision scale xi > 0.

A mixing distribution with M pieces of common width ``width`` starting at
``start`` has edges ``l_k = start + k * width`` and density

    p(xi) = sum_k h_k 1{l_(k-1) < xi < l_k} / (width * sum_k h_k).

Heights are stored unnormalized; every evaluation normalizes them.
"""
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError

__all__ = [
    "MixingDistribution",
    "density",
    "mean_inverse",
    "sample",
    "uniform",
    "gaussian_limit",
    "preset_cauchy_approx",
    "preset_student_t_approx",
    "DEFAULT_M",
    "DEFAULT_WIDTH",
    "DEFAULT_START",
]

DEFAULT_M = 10
DEFAULT_WIDTH = 0.2
DEFAULT_START = 0.01


@dataclass(frozen=True, eq=False)
class MixingDistribution:
    """Piecewise-constant density over xi.

    Parameters
    ----------
    heights : array_like
        Nonnegative, unnormalized heights ``h_1..h_M``; at least one > 0.
    width : float
        Common piece width, > 0.
    start : float
        Left edge of the first piece, >= 0.
    """

    heights: np.ndarray
    width: float
    start: float

    def __post_init__(self):
        h = np.array(self.heights, dtype=float).ravel()
        if h.size < 1:
            raise DomainError("need at least one piece")
        if np.any(~np.isfinite(h)) or np.any(h < 0) or not np.any(h > 0):
            raise DomainError("heights must be finite, nonnegative and not all zero")
        if not (np.isfinite(self.width) and self.width > 0):
            raise DomainError("width must be positive")
        if not (np.isfinite(self.start) and self.start >= 0):
            raise DomainError("start must be nonnegative")
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "start", float(self.start))

    @property
    def n_pieces(self):
        return self.heights.size

    @property
    def edges(self):
        """The M + 1 piece boundaries ``l_0..l_M``."""
        return self.start + self.width * np.arange(self.n_pieces + 1)

    @property
    def probs(self):
        """Probability mass of each piece."""
        return self.heights / self.heights.sum()

    @property
    def levels(self):
        """Normalized density value on each piece."""
        return self.probs / self.width

    @property
    def support(self):
        return self.start, self.start + self.width * self.n_pieces

    def pdf(self, xi):
        xi = np.asarray(xi, dtype=float)
        k = np.floor((xi - self.start) / self.width).astype(int)
        inside = (k >= 0) & (k < self.n_pieces)
        out = np.where(inside, self.levels[np.clip(k, 0, self.n_pieces - 1)], 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, xi):
        xi = np.asarray(xi, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.probs)])
        pos = np.clip((xi - self.start) / self.width, 0.0, self.n_pieces)
        k = np.minimum(np.floor(pos).astype(int), self.n_pieces - 1)
        out = cum[k] + (pos - k) * self.probs[k]
        # pin the ends, where (xi - start) / width can round below M
        lo, hi = self.support
        out = np.where(xi >= hi, 1.0, np.where(xi <= lo, 0.0, np.clip(out, 0.0, 1.0)))
        return float(out) if out.ndim == 0 else out

    def ppf(self, q):
        """Inverse CDF.  Pieces with zero mass are skipped."""
        q = np.asarray(q, dtype=float)
        if np.any((q < 0) | (q > 1)):
            raise DomainError("quantile levels must lie in [0, 1]")
        probs = self.probs
        cum = np.cumsum(probs)
        k = np.searchsorted(cum, q * cum[-1], side="left")
        k = np.minimum(k, self.n_pieces - 1)
        below = cum[k] - probs[k]
        frac = np.clip((q - below) / probs[k], 0.0, 1.0)
        out = self.start + self.width * (k + frac)
        return float(out) if out.ndim == 0 else out

    def mean(self):
        mids = self.edges[:-1] + 0.5 * self.width
        return float(np.dot(self.probs, mids))

    def mean_inverse(self):
        return mean_inverse(self)

    def sample(self, n, rng_seed=None):
        return sample(self, n, rng_seed)

    def to_dict(self):
        return {
            "heights": self.heights.tolist(),
            "width": self.width,
            "start": self.start,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["heights"], dtype=float), d["width"], d["start"])

    def with_heights(self, heights):
        return MixingDistribution(heights, self.width, self.start)

    def __repr__(self):
        return (
            f"MixingDistribution(M={self.n_pieces}, width={self.width:g}, "
            f"start={self.start:g})"
        )


def density(mix, xi):
    """Normalized density; zero outside ``[l_0, l_M]``."""
    return mix.pdf(xi)


def mean_inverse(mix):
    """``E[1/xi]``, integrated piece by piece in closed form."""
    if mix.start <= 0:
        raise DomainError("E[1/xi] diverges unless start > 0")
    edges = mix.edges
    return float(np.dot(mix.levels, np.log(edges[1:] / edges[:-1])))


def sample(mix, n, rng_seed=None):
    """Draw ``n`` iid values by exact inverse-CDF sampling.

    ``rng_seed`` may be an integer seed or a ``numpy.random.Generator``.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    rng = np.random.default_rng(rng_seed)
    k = rng.choice(mix.n_pieces, size=n, p=mix.probs)
    return mix.start + mix.width * (k + rng.random(n))


def uniform(M=DEFAULT_M, width=DEFAULT_WIDTH, start=DEFAULT_START):
    return MixingDistribution(np.ones(M), width, start)


def gaussian_limit(half_width=1e-6):
    """A single narrow piece centred on xi = 1 (the Gaussian process limit)."""
    return MixingDistribution(np.ones(1), 2.0 * half_width, 1.0 - half_width)


def _midpoint_preset(pdf, M, delta, l0):
    mids = l0 + delta * (np.arange(M) + 0.5)
    h = pdf(mids)
    return MixingDistribution(h / h.sum(), delta, l0)


def preset_cauchy_approx(M=DEFAULT_M, delta=DEFAULT_WIDTH, l0=1e-4):
    """Heights matched to the scaled chi-square density with one degree of freedom.

    With ``xi ~ chi2(1)`` the elliptical marginal is Cauchy; ``l0`` should be
    a tiny positive number so that the covariance stays finite.
    """
    if l0 <= 0:
        raise DomainError("l0 must be positive")
    return preset_student_t_approx(1.0, M, delta, l0)


def preset_student_t_approx(nu, M=200, delta=0.04, l0=0.01):
    """Heights matched at piece midpoints to the density of ``chi2(nu)/nu``."""
    if nu <= 0:
        raise DomainError("nu must be positive")
    dist = stats.gamma(a=0.5 * nu, scale=2.0 / nu)
    return _midpoint_preset(dist.pdf, M, delta, l0)
