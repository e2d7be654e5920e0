"""Summary statistics.

Every statistic reduces the last axis of a scalar sample (or the
loci/population/copy axes of a microsatellite dataset) and keeps any
leading batch axes, so a whole block of simulated datasets is summarised
in one call.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .numerics import DomainError, ShapeError, order_index

__all__ = [
    "MicrosatDataset",
    "StatisticSpec",
    "StatisticError",
    "stat_mean",
    "stat_median",
    "stat_variance",
    "stat_mad",
    "stat_moment",
    "stat_quantile",
    "stat_delta_mu_sq",
    "compose_statistics",
    "get_statistic",
    "parse_statistics",
]


class StatisticError(DomainError):
    """A statistic failed on its input; ``spec`` names the culprit."""

    def __init__(self, spec: str, message: str):
        super().__init__(f"statistic {spec!r}: {message}")
        self.spec = spec


@dataclass(frozen=True)
class MicrosatDataset:
    """Integer allele sizes indexed ``[locus, population, gene copy]``.

    Populations are stored 0-based along axis 1 (population 1 at index 0).
    """

    alleles: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alleles)
        if a.ndim != 3 or a.shape[1] != 3 or a.shape[0] < 1 or a.shape[2] < 1:
            raise ShapeError(f"expected (n_loci, 3, copies) allele array, got shape {a.shape}")
        if not np.issubdtype(a.dtype, np.integer):
            raise DomainError("allele sizes must be integers")
        object.__setattr__(self, "alleles", a)

    @property
    def n_loci(self) -> int:
        return self.alleles.shape[0]

    @property
    def copies(self) -> int:
        return self.alleles.shape[2]

    def __len__(self):
        return self.n_loci


def _scalar(x) -> np.ndarray:
    if isinstance(x, MicrosatDataset):
        raise DomainError("scalar statistic applied to a microsatellite dataset")
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a[None]
    if a.shape[-1] == 0:
        raise DomainError("empty sample")
    return a


def _out(r):
    r = np.asarray(r)
    return float(r) if r.ndim == 0 else r


def stat_mean(s):
    return _out(np.mean(_scalar(s), axis=-1))


def stat_median(s):
    """Sample median; even n averages the two central order statistics."""
    return _out(np.median(_scalar(s), axis=-1))


def stat_variance(s):
    a = _scalar(s)
    if a.shape[-1] < 2:
        raise DomainError("variance needs at least two observations")
    return _out(np.var(a, axis=-1, ddof=1))


def stat_mad(s):
    """Median absolute deviation med(|y - med(y)|), without rescaling."""
    a = _scalar(s)
    med = np.median(a, axis=-1, keepdims=True)
    return _out(np.median(np.abs(a - med), axis=-1))


def stat_moment(s, k: int):
    """Raw (uncentred) moment n^-1 sum y_i^k."""
    if int(k) != k or k < 1:
        raise DomainError(f"moment order must be a positive integer, got {k!r}")
    a = _scalar(s)
    return _out(np.mean(a ** int(k), axis=-1))


def stat_quantile(s, p: float):
    """Empirical quantile as the ceil(p*n)-th order statistic."""
    a = _scalar(s)
    k = order_index(p, a.shape[-1])
    return _out(np.partition(a, k - 1, axis=-1)[..., k - 1])


def stat_delta_mu_sq(s, j1: int, j2: int):
    """(delta mu)^2 between populations j1 and j2 (1-based).

    Mean over loci of the squared difference of population mean allele
    sizes. Accepts a ``MicrosatDataset`` or a raw array with leading batch
    axes ending in ``(n_loci, 3, copies)``.
    """
    if j1 not in (1, 2, 3) or j2 not in (1, 2, 3) or j1 == j2:
        raise DomainError(f"invalid population pair ({j1}, {j2})")
    a = s.alleles if isinstance(s, MicrosatDataset) else np.asarray(s)
    if a.ndim < 3 or a.shape[-2] != 3:
        raise DomainError("(delta mu)^2 needs a microsatellite dataset")
    means = a.mean(axis=-1)
    diff = means[..., j1 - 1] - means[..., j2 - 1]
    return _out(np.mean(diff * diff, axis=-1))


@dataclass(frozen=True)
class StatisticSpec:
    name: str
    kind: str  # "scalar" or "microsat"
    func: Callable = field(repr=False, compare=False)
    params: tuple = ()
    output_dim: int = 1

    def __call__(self, data):
        return self.func(data, *self.params)


_FIXED = {
    "mean": StatisticSpec("mean", "scalar", stat_mean),
    "median": StatisticSpec("median", "scalar", stat_median),
    "variance": StatisticSpec("variance", "scalar", stat_variance),
    "mad": StatisticSpec("mad", "scalar", stat_mad),
}


def get_statistic(name: str) -> StatisticSpec:
    """Look up a statistic by its config name.

    Besides the fixed names, ``moment<k>``, ``q<percent>`` and
    ``dmu<j1><j2>`` are parsed (e.g. ``moment4``, ``q10``, ``dmu13``).
    """
    if name in _FIXED:
        return _FIXED[name]
    m = re.fullmatch(r"moment(\d+)", name)
    if m and int(m.group(1)) >= 1:
        return StatisticSpec(name, "scalar", stat_moment, (int(m.group(1)),))
    m = re.fullmatch(r"q(\d{1,2}|100)", name)
    if m and int(m.group(1)) >= 1:
        return StatisticSpec(name, "scalar", stat_quantile, (int(m.group(1)) / 100.0,))
    m = re.fullmatch(r"dmu([123])([123])", name)
    if m and m.group(1) != m.group(2):
        return StatisticSpec(name, "microsat", stat_delta_mu_sq, (int(m.group(1)), int(m.group(2))))
    raise DomainError(f"unknown statistic {name!r}")


def parse_statistics(names: Sequence[str | StatisticSpec]) -> list[StatisticSpec]:
    return [n if isinstance(n, StatisticSpec) else get_statistic(n) for n in names]


def compose_statistics(specs: Sequence[str | StatisticSpec], s) -> np.ndarray:
    """Concatenate statistic outputs in spec order.

    A single sample gives shape ``(d,)``; a batch gives ``(batch..., d)``.
    """
    specs = parse_statistics(specs)
    if not specs:
        raise DomainError("no statistics requested")
    cols = []
    for spec in specs:
        try:
            cols.append(np.asarray(spec(s), dtype=float))
        except (DomainError, ShapeError) as exc:
            raise StatisticError(spec.name, str(exc)) from exc
    return np.stack(cols, axis=-1)
