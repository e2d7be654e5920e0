"""g-and-k quantile distribution with A=0, B=1."""

from __future__ import annotations

import numpy as np

from ..numerics import DomainError, std_normal_quantile
from .base import ModelSpec, UnsupportedError

__all__ = ["gk_quantile", "gk_quantile_model", "K_RANGE", "G_RANGE"]

K_RANGE = (-0.5, 5.0)
G_RANGE = (0.0, 4.0)
_C = 0.8


def gk_quantile(p, A=0.0, B=1.0, g=0.0, k=0.0):
    """Q(p; A, B, g, k) = A + B (1 + c (1-e^{-gz})/(1+e^{-gz})) (1+z^2)^k z, z = z(p)."""
    z = std_normal_quantile(p)
    return _from_z(z, A, B, g, k)


def _from_z(z, A, B, g, k):
    e = np.exp(-np.asarray(g) * z)
    skew = 1.0 + _C * (1.0 - e) / (1.0 + e)
    return A + B * skew * (1.0 + z * z) ** k * z


def gk_quantile_model(variant: str = "M1_g_zero") -> ModelSpec:
    """Either ``M1_g_zero`` (parameter k, g fixed at 0) or ``M2_free_g`` (parameters g, k)."""
    if variant == "M1_g_zero":
        name, dim, names = "gk1", 1, ("k",)
        box = (K_RANGE,)

        def split(thetas):
            return np.zeros_like(thetas[..., 0]), thetas[..., 0]
    elif variant == "M2_free_g":
        name, dim, names = "gk2", 2, ("g", "k")
        box = (G_RANGE, K_RANGE)

        def split(thetas):
            return thetas[..., 0], thetas[..., 1]
    else:
        raise DomainError(f"unknown g-and-k variant {variant!r}")

    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])

    def prior(rng, m):
        return lo + (hi - lo) * rng.random((m, dim))

    def simulate(thetas, n, rng):
        thetas = np.asarray(thetas, dtype=float).reshape(-1, dim)
        g, k = split(thetas)
        u = rng.random((thetas.shape[0], n))
        # u == 0 has probability 2^-53 per draw but would break z(u)
        u[u == 0.0] = np.nextafter(0.0, 1.0)
        z = std_normal_quantile(u)
        return _from_z(z, 0.0, 1.0, g[:, None], k[:, None])

    def mean(thetas, spec):
        if spec.func.__name__ != "stat_quantile":
            raise UnsupportedError(f"{name} has no mean map for {spec.name!r}")
        g, k = split(thetas)
        return gk_quantile(spec.params[0], 0.0, 1.0, g, k)

    return ModelSpec(name, dim, "scalar", prior, simulate, box, mean, names)
