"""Compatibility of a summary statistic with each model.

A model is compatible when the true asymptotic mean mu0 of the statistic
lies in the closure of its mean set {mu_i(theta)}. Exactly one compatible
model means model choice on that statistic is consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..numerics import DomainError
from ..stats import StatisticSpec, parse_statistics
from .base import ModelSpec, UnsupportedError

__all__ = ["ModelFit", "CompatibilityReport", "min_mean_distance", "compatibility_report",
           "TOL_COMPAT"]

TOL_COMPAT = 1e-3
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ModelFit:
    model: str
    infimum: float
    argmin: tuple[float, ...]
    compatible: bool


@dataclass(frozen=True)
class CompatibilityReport:
    statistics: tuple[str, ...]
    true_model: int
    true_theta: tuple[float, ...]
    mu0: tuple[float, ...]
    fits: tuple[ModelFit, ModelFit]

    @property
    def discriminant(self) -> bool:
        return sum(f.compatible for f in self.fits) == 1

    @property
    def verdict(self) -> str:
        return "discriminant" if self.discriminant else "non-discriminant"


def _grid(box, points):
    axes = [np.linspace(lo, hi, points) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, len(box)), [a[1] - a[0] for a in axes]


def _golden(f, lo, hi, iters=60):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def min_mean_distance(model: ModelSpec, specs: Sequence[str | StatisticSpec], mu0,
                      points: int = 512, refine_steps: int = 40) -> tuple[float, np.ndarray]:
    """inf |mu(theta) - mu0| over the model's search box.

    Dense grid scan, then coordinate descent with golden-section line
    searches inside a bracket that halves every step.
    """
    specs = parse_statistics(specs)
    mu0 = np.asarray(mu0, dtype=float)
    box = model.search_box
    if len(box) != model.param_dim:
        raise DomainError(f"model {model.name!r} has no search box")

    def dist(theta):
        return float(np.linalg.norm(model.mean_map(theta, specs) - mu0))

    grid, spacing = _grid(box, points)
    d = np.linalg.norm(model.mean_map(grid, specs) - mu0, axis=-1)
    best = grid[int(np.argmin(d))].copy()
    best_d = float(d.min())
    half = np.asarray(spacing, dtype=float)
    for _ in range(refine_steps):
        for i, (lo, hi) in enumerate(box):
            def along(x, i=i):
                th = best.copy()
                th[i] = x
                return dist(th)
            x, fx = _golden(along, max(lo, best[i] - half[i]), min(hi, best[i] + half[i]))
            if fx < best_d:
                best[i], best_d = x, fx
        half *= 0.5
        if best_d == 0.0:
            break
    return best_d, best


def compatibility_report(m1: ModelSpec, m2: ModelSpec, specs: Sequence[str | StatisticSpec],
                         truth: tuple[int, Sequence[float]], tol: float = TOL_COMPAT,
                         points: int = 512, refine_steps: int = 40) -> CompatibilityReport:
    """Diagnose whether ``specs`` can discriminate ``m1`` from ``m2``.

    ``truth`` is ``(model index in {1, 2}, true parameter)``; mu0 is the
    true model's mean map at that parameter.
    """
    specs = parse_statistics(specs)
    models = (m1, m2)
    for m in models:
        if not m.has_mean_map:
            raise UnsupportedError(f"model {m.name!r} has no mean map")
    idx, theta = truth
    if idx not in (1, 2):
        raise DomainError("true model index must be 1 or 2")
    mu0 = models[idx - 1].mean_map(np.asarray(theta, dtype=float), specs)
    fits = []
    for m in models:
        inf, arg = min_mean_distance(m, specs, mu0, points, refine_steps)
        fits.append(ModelFit(m.name, inf, tuple(float(x) for x in arg), inf < tol))
    return CompatibilityReport(
        statistics=tuple(s.name for s in specs),
        true_model=idx,
        true_theta=tuple(float(x) for x in np.atleast_1d(theta)),
        mu0=tuple(float(x) for x in mu0),
        fits=(fits[0], fits[1]),
    )
