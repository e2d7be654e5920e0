from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from ..numerics import DomainError, SeedSpec
from ..stats import MicrosatDataset, StatisticSpec, parse_statistics

__all__ = ["ModelSpec", "UnsupportedError"]


class UnsupportedError(DomainError):
    """The model has no analytic mean map for a requested statistic."""


@dataclass(frozen=True)
class ModelSpec:
    """A generative model: prior, simulator and (optionally) mean map.

    ``prior_batch(rng, m)`` returns an ``(m, param_dim)`` array.
    ``simulate_batch(thetas, n, rng)`` returns a batch of datasets with a
    leading axis of length ``len(thetas)``; ``n`` is the sample size
    (number of loci for microsatellite models).
    ``mean_fn(thetas, spec)`` maps ``(..., param_dim)`` parameters to the
    asymptotic mean of one statistic, or raises ``UnsupportedError``.
    ``search_box`` bounds the parameter region scanned by the
    compatibility diagnostic (the prior support, truncated if unbounded).
    """

    name: str
    param_dim: int
    data_kind: str
    prior_batch: Callable[[np.random.Generator, int], np.ndarray] = field(repr=False)
    simulate_batch: Callable[[np.ndarray, int, np.random.Generator], Any] = field(repr=False)
    search_box: tuple[tuple[float, float], ...] = ()
    mean_fn: Callable[[np.ndarray, StatisticSpec], np.ndarray] | None = field(default=None, repr=False)
    param_names: tuple[str, ...] = ()

    def prior_sampler(self, seed: SeedSpec) -> np.ndarray:
        return self.prior_batch(seed.rng(), 1)[0]

    def simulator(self, theta, n: int, seed: SeedSpec):
        theta = np.asarray(theta, dtype=float).reshape(1, self.param_dim)
        data = self.simulate_batch(theta, n, seed.rng())[0]
        return MicrosatDataset(data) if self.data_kind == "microsat" else data

    @property
    def has_mean_map(self) -> bool:
        return self.mean_fn is not None

    def mean_map(self, theta, specs: Sequence[str | StatisticSpec]) -> np.ndarray:
        """Asymptotic means of the composed statistics at ``theta``.

        ``theta`` may be a grid of shape ``(..., param_dim)``; the result
        then has shape ``(..., d)``.
        """
        if self.mean_fn is None:
            raise UnsupportedError(f"model {self.name!r} has no mean map")
        theta = np.asarray(theta, dtype=float)
        if theta.ndim == 0:
            theta = theta[None]
        if theta.shape[-1] != self.param_dim:
            raise DomainError(f"model {self.name!r} takes {self.param_dim} parameter(s)")
        specs = parse_statistics(specs)
        cols = [np.broadcast_to(self.mean_fn(theta, s), theta.shape[:-1]) for s in specs]
        return np.stack(cols, axis=-1).astype(float)
