"""The n-dimensional Laplacian noise distribution.

The density is ``c * exp(-eps * ||v||)`` on R^n with the normalizing
constant ``c = eps^n / ((n-1)! * S)`` where ``S`` is the surface area of
the unit sphere in R^n. A draw decomposes into an independent radius and
direction: the radius follows a Gamma distribution with integer shape n
and scale 1/eps, and the direction is uniform on the unit sphere. Adding
such a draw to a vector x yields an output density ``c * exp(-eps *
||z - x||)`` in z, whose pointwise ratio between two centers x, y is at
most ``exp(eps * ||x - y||)``; that ratio bound is the privacy property
everything above this module relies on.

Large dimensions (word embeddings live in R^300) overflow ``(n-1)!`` and
underflow ``exp``, so the constant and the radial CDF are computed in log
space; plain-valued wrappers are kept for the desk-scale call sites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import RngState
from .vectors import as_vector


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy scale ``epsilon`` (units 1/distance) and dimension ``dim``."""

    epsilon: float
    dim: int

    def __post_init__(self):
        if not (isinstance(self.dim, int) and self.dim >= 1):
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be a positive finite real, got {self.epsilon!r}")


def unit_sphere_surface_area(dim: int) -> float:
    """Surface area of the unit sphere in R^dim (2 for dim=1, 2*pi for dim=2)."""
    return math.exp(log_unit_sphere_surface_area(dim))


def log_unit_sphere_surface_area(dim: int) -> float:
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return math.log(2.0) + (dim / 2.0) * math.log(math.pi) - math.lgamma(dim / 2.0)


def log_normalizing_constant(p: PrivacyParams) -> float:
    """log of the constant scaling exp(-eps*||v||) to a unit integral over R^n."""
    n = p.dim
    return n * math.log(p.epsilon) - math.lgamma(n) - log_unit_sphere_surface_area(n)


def normalizing_constant(p: PrivacyParams) -> float:
    """May underflow to 0.0 for dim beyond ~180; use the log form there."""
    return math.exp(log_normalizing_constant(p))


def laplacian_log_pdf(v, p: PrivacyParams) -> float:
    v = as_vector(v)
    if v.shape[0] != p.dim:
        raise ValueError(f"dimension mismatch: vector has {v.shape[0]}, params expect {p.dim}")
    return log_normalizing_constant(p) - p.epsilon * float(np.linalg.norm(v))


def laplacian_pdf(v, p: PrivacyParams) -> float:
    return math.exp(laplacian_log_pdf(v, p))


def truncated_exp_sum(k: int, alpha: float) -> float:
    """Partial exponential sum: sum of alpha^i / i! for i = 0..k."""
    if k < 0:
        raise ValueError("k must be >= 0")
    total = 1.0
    term = 1.0
    for i in range(1, k + 1):
        term *= alpha / i
        total += term
    return total


def _log_truncated_exp_sum(k: int, alpha: float) -> float:
    """log of the partial exponential sum, safe for large alpha and k."""
    if alpha <= 0.0:
        return 0.0 if alpha == 0.0 else math.nan
    i = np.arange(k + 1, dtype=np.float64)
    log_terms = i * math.log(alpha) - np.array([math.lgamma(j + 1.0) for j in range(k + 1)])
    peak = float(log_terms.max())
    return peak + math.log(float(np.exp(log_terms - peak).sum()))


def radial_cdf(radius: float, p: PrivacyParams) -> float:
    """Probability that a draw lands within Euclidean distance ``radius`` of its center.

    Closed form ``1 - exp(-eps*R) * e_{n-1}(eps*R)`` with ``e_k`` the partial
    exponential sum; evaluated in log space so it stays exact-ish for
    eps*R and n in the hundreds.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    x = p.epsilon * float(radius)
    if x == 0.0:
        return 0.0
    return -math.expm1(_log_truncated_exp_sum(p.dim - 1, x) - x)


def radial_cdf_batch(radii, p: PrivacyParams) -> np.ndarray:
    """Vectorized radial_cdf, for empirical-distribution tests."""
    x = p.epsilon * np.asarray(radii, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("radii must be >= 0")
    out = np.zeros(x.shape)
    pos = x > 0
    if np.any(pos):
        xp = x[pos]
        i = np.arange(p.dim, dtype=np.float64)
        lg = np.array([math.lgamma(j + 1.0) for j in range(p.dim)])
        log_terms = i[None, :] * np.log(xp)[:, None] - lg[None, :]
        peak = log_terms.max(axis=1)
        log_ek = peak + np.log(np.exp(log_terms - peak[:, None]).sum(axis=1))
        out[pos] = -np.expm1(log_ek - xp)
    return out


def gamma_sample(shape_n: int, scale: float, rng: RngState) -> float:
    """One Gamma(shape_n, scale) draw as a sum of shape_n exponentials.

    Exact for the integer shapes used here (shape = dimension), at O(shape)
    cost per draw.
    """
    if not (isinstance(shape_n, int) and shape_n >= 1):
        raise ValueError("shape_n must be a positive integer")
    if not scale > 0:
        raise ValueError("scale must be > 0")
    return float(scale * rng.generator.standard_exponential(shape_n).sum())


def unit_sphere_sample(dim: int, rng: RngState) -> np.ndarray:
    """Uniform direction on the unit sphere: normalized standard Gaussian."""
    return sample_unit_directions(dim, rng, 1)[0]


def sample_unit_directions(dim: int, rng: RngState, count: int) -> np.ndarray:
    if dim < 1:
        raise ValueError("dim must be >= 1")
    g = rng.generator.standard_normal((count, dim))
    norms = np.linalg.norm(g, axis=1)
    # An all-zero Gaussian draw has probability 0 but would divide by zero.
    while np.any(norms == 0.0):
        bad = norms == 0.0
        g[bad] = rng.generator.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(g, axis=1)
    return g / norms[:, None]


def noisy_vector(x, p: PrivacyParams, rng: RngState) -> np.ndarray:
    """Perturb x by a radius Gamma(n, 1/eps) times a uniform unit direction."""
    return sample_noisy_vectors(x, p, rng, 1)[0]


def sample_noisy_vectors(x, p: PrivacyParams, rng: RngState, count: int) -> np.ndarray:
    """``count`` independent noisy copies of x, one per row."""
    x = as_vector(x)
    if x.shape[0] != p.dim:
        raise ValueError(f"dimension mismatch: vector has {x.shape[0]}, params expect {p.dim}")
    if count < 1:
        raise ValueError("count must be >= 1")
    radii = rng.generator.standard_exponential((count, p.dim)).sum(axis=1) / p.epsilon
    directions = sample_unit_directions(p.dim, rng, count)
    return x[None, :] + radii[:, None] * directions
