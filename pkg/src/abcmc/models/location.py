"""Gaussian and Laplace location models with unit variance."""

from __future__ import annotations

import math

import numpy as np

from ..numerics import DomainError, std_normal_quantile
from .base import ModelSpec, UnsupportedError

__all__ = ["LAPLACE_SCALE", "gaussian_model", "laplace_model", "laplace_inverse_cdf"]

LAPLACE_SCALE = 1.0 / math.sqrt(2.0)
# widest |theta - prior_mean| scanned by the compatibility search, in prior sds
_SEARCH_SDS = 10.0


def _normal_prior(prior_mean: float, prior_var: float):
    if not prior_var > 0:
        raise DomainError(f"prior variance must be positive, got {prior_var!r}")
    sd = math.sqrt(prior_var)

    def sample(rng, m):
        return rng.normal(prior_mean, sd, size=(m, 1))

    box = ((prior_mean - _SEARCH_SDS * sd, prior_mean + _SEARCH_SDS * sd),)
    return sample, box


def laplace_inverse_cdf(u, theta=0.0, b=LAPLACE_SCALE):
    h = np.asarray(u) - 0.5
    return theta - b * np.sign(h) * np.log1p(-2.0 * np.abs(h))


def _gaussian_mean(thetas, spec):
    t = thetas[..., 0]
    name = spec.name
    if name in ("mean", "median"):
        return t
    if name == "variance":
        return np.ones_like(t)
    if name == "mad":
        return np.full_like(t, std_normal_quantile(0.75))
    if name == "moment4":
        return t**4 + 6 * t**2 + 3
    if name == "moment6":
        return t**6 + 15 * t**4 + 45 * t**2 + 15
    raise UnsupportedError(f"gaussian model has no mean map for {name!r}")


def _laplace_mean(thetas, spec):
    t = thetas[..., 0]
    name = spec.name
    b = LAPLACE_SCALE
    if name in ("mean", "median"):
        return t
    if name == "variance":
        return np.ones_like(t)  # 2 b^2 with b = 1/sqrt(2)
    if name == "mad":
        return np.full_like(t, b * math.log(2.0))
    # raw moments of theta + Y with E Y^2 = 2b^2 = 1, E Y^4 = 24b^4 = 6, E Y^6 = 720b^6 = 90
    if name == "moment4":
        return t**4 + 6 * t**2 + 6
    if name == "moment6":
        return t**6 + 15 * t**4 + 90 * t**2 + 90
    raise UnsupportedError(f"laplace model has no mean map for {name!r}")


def gaussian_model(prior_mean: float = 0.0, prior_var: float = 4.0) -> ModelSpec:
    """y_i ~ N(theta, 1) with theta ~ N(prior_mean, prior_var)."""
    sample, box = _normal_prior(prior_mean, prior_var)

    def simulate(thetas, n, rng):
        thetas = np.asarray(thetas, dtype=float).reshape(-1, 1)
        return thetas + rng.standard_normal((thetas.shape[0], n))

    return ModelSpec("gaussian", 1, "scalar", sample, simulate, box, _gaussian_mean, ("theta",))


def laplace_model(prior_mean: float = 0.0, prior_var: float = 4.0) -> ModelSpec:
    """y_i ~ Laplace(theta, 1/sqrt(2)), drawn by inverse CDF."""
    sample, box = _normal_prior(prior_mean, prior_var)

    def simulate(thetas, n, rng):
        thetas = np.asarray(thetas, dtype=float).reshape(-1, 1)
        return laplace_inverse_cdf(rng.random((thetas.shape[0], n)), thetas)

    return ModelSpec("laplace", 1, "scalar", sample, simulate, box, _laplace_mean, ("theta",))
