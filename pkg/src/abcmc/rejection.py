"""Rejection ABC for choosing between two models.

Reference tables are simulated in fixed-size blocks. Each block draws from
its own stream derived from (seed, model, block index), so a table is
bit-identical whatever the number of workers or the order blocks finish in.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .models.base import ModelSpec
from .numerics import DomainError, SeedSpec, ShapeError, WeightedDistanceSpec, empirical_quantile
from .numerics import weighted_distance
from .stats import StatisticSpec, compose_statistics, parse_statistics

__all__ = [
    "AbcConfig",
    "AbcResult",
    "InsufficientAcceptanceError",
    "ReferenceTable",
    "SimulationError",
    "block_rows_for",
    "build_reference_table",
    "max_workers",
    "posterior_predictive_sample",
    "run_rejection",
    "simulate_summaries",
]

# upper bound on simulated values held per block
_BLOCK_BUDGET = 2_000_000


class InsufficientAcceptanceError(DomainError):
    """No accepted parameter for a model whose posterior is needed."""


class SimulationError(RuntimeError):
    def __init__(self, model: str, block: int, cause: Exception):
        super().__init__(f"model {model!r}, block {block}: {cause}")
        self.model = model
        self.block = block


def max_workers() -> int:
    cap = os.environ.get("ABCMC_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def block_rows_for(model: ModelSpec, n: int) -> int:
    """Rows per simulation block; depends only on the design, never on workers."""
    if model.data_kind == "microsat":
        # genealogy arrays cost ~ 2 * 3 * copies nodes per locus; use a
        # conservative 300-node proxy when the design is not visible here
        cost = n * 600
    else:
        cost = n
    return int(max(1, min(1000, _BLOCK_BUDGET // max(cost, 1))))


def simulate_summaries(model: ModelSpec, thetas: np.ndarray | None, count: int, n: int,
                       specs: Sequence[StatisticSpec], seed: SeedSpec, label: str,
                       block_rows: int | None = None, workers: int | None = None
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Simulate ``count`` datasets and summarise them.

    With ``thetas=None`` parameters come from the prior; otherwise row i is
    simulated at ``thetas[i]``. Returns ``(params, summaries)``.
    """
    specs = parse_statistics(specs)
    block_rows = block_rows or block_rows_for(model, n)
    n_blocks = math.ceil(count / block_rows)

    def run(b):
        lo, hi = b * block_rows, min(count, (b + 1) * block_rows)
        rng = seed.derive(label, b).rng()
        try:
            th = model.prior_batch(rng, hi - lo) if thetas is None else thetas[lo:hi]
            data = model.simulate_batch(th, n, rng)
            return np.asarray(th, dtype=float), compose_statistics(specs, data)
        except Exception as exc:  # noqa: BLE001 - re-raised with provenance
            raise SimulationError(model.name, b, exc) from exc

    workers = workers or max_workers()
    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(b) for b in range(n_blocks)]
    if not parts:
        return np.zeros((0, model.param_dim)), np.zeros((0, len(specs)))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass
class ReferenceTable:
    model_index: np.ndarray  # (N,) values in {1, 2}
    params: np.ndarray  # (N, k) NaN-padded to the larger parameter dimension
    summaries: np.ndarray  # (N, d)
    statistics: tuple[str, ...]
    models: tuple[str, str] = ("m1", "m2")
    sample_size: int = 0
    seed: SeedSpec | None = None
    block_rows: tuple[int, int] = (0, 0)

    def __post_init__(self):
        n = len(self.model_index)
        if self.params.shape[0] != n or self.summaries.shape[0] != n:
            raise ShapeError("table columns have different lengths")
        if self.summaries.ndim != 2 or self.summaries.shape[1] != len(self.statistics):
            raise ShapeError("summary width does not match the statistic list")

    def __len__(self):
        return len(self.model_index)

    @property
    def dim(self) -> int:
        return self.summaries.shape[1]

    @property
    def counts(self) -> dict[int, int]:
        return {i: int(np.sum(self.model_index == i)) for i in (1, 2)}

    def select(self, statistics: Sequence[str | StatisticSpec]) -> "ReferenceTable":
        """View restricted to a subset of the summary columns."""
        names = [s.name if isinstance(s, StatisticSpec) else s for s in statistics]
        try:
            cols = [self.statistics.index(nm) for nm in names]
        except ValueError as exc:
            raise ShapeError(f"table lacks statistic: {exc}") from None
        return ReferenceTable(self.model_index, self.params, self.summaries[:, cols], tuple(names),
                              self.models, self.sample_size, self.seed, self.block_rows)

    def restrict(self, model: int) -> "ReferenceTable":
        """Rows simulated under one model only."""
        keep = self.model_index == model
        return ReferenceTable(self.model_index[keep], self.params[keep], self.summaries[keep],
                              self.statistics, self.models, self.sample_size, self.seed,
                              self.block_rows)

    def sidecar(self) -> dict:
        return {
            "statistics": list(self.statistics),
            "models": list(self.models),
            "counts": {str(k): v for k, v in self.counts.items()},
            "sample_size": self.sample_size,
            "block_rows": list(self.block_rows),
            "seed": None if self.seed is None else {"root_seed": self.seed.root_seed,
                                                    "stream_id": self.seed.stream_id},
        }

    def to_csv(self, path) -> Path:
        """Columnar CSV plus a ``.json`` sidecar with specs and seed."""
        path = Path(path)
        k = self.params.shape[1]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["model_index"] + [f"param_{i + 1}" for i in range(k)]
                       + [f"T_{j + 1}" for j in range(self.dim)])
            for m, p, s in zip(self.model_index, self.params, self.summaries):
                w.writerow([int(m)] + ["" if np.isnan(x) else repr(float(x)) for x in p]
                           + [repr(float(x)) for x in s])
        path.with_suffix(".json").write_text(json.dumps(self.sidecar(), indent=2))
        return path

    @classmethod
    def from_csv(cls, path) -> "ReferenceTable":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        k = sum(h.startswith("param_") for h in header)
        mi = np.array([int(r[0]) for r in body], dtype=np.int64)
        params = np.array([[float(x) if x else np.nan for x in r[1:1 + k]] for r in body]).reshape(-1, k)
        summ = np.array([[float(x) for x in r[1 + k:]] for r in body]).reshape(len(body), -1)
        seed = meta.get("seed")
        return cls(mi, params, summ, tuple(meta["statistics"]), tuple(meta["models"]),
                   meta["sample_size"], SeedSpec(**seed) if seed else None,
                   tuple(meta["block_rows"]))


def build_reference_table(m1: ModelSpec, m2: ModelSpec, specs: Sequence[str | StatisticSpec],
                          n_per_model: int, sample_size: int, seed: SeedSpec,
                          workers: int | None = None) -> ReferenceTable:
    """Simulate ``n_per_model`` prior-predictive rows under each model."""
    if n_per_model < 1:
        raise DomainError("need at least one row per model")
    specs = parse_statistics(specs)
    k = max(m1.param_dim, m2.param_dim)
    idx, params, summ, blocks = [], [], [], []
    for i, m in ((1, m1), (2, m2)):
        br = block_rows_for(m, sample_size)
        th, s = simulate_summaries(m, None, n_per_model, sample_size, specs, seed,
                                   f"table/{i}", br, workers)
        padded = np.full((n_per_model, k), np.nan)
        padded[:, :m.param_dim] = th
        idx.append(np.full(n_per_model, i, dtype=np.int64))
        params.append(padded)
        summ.append(s)
        blocks.append(br)
    return ReferenceTable(np.concatenate(idx), np.concatenate(params), np.concatenate(summ),
                          tuple(s.name for s in specs), (m1.name, m2.name), sample_size, seed,
                          tuple(blocks))


@dataclass(frozen=True)
class AbcConfig:
    n_total: int = 10_000
    tolerance_quantile: float = 0.01
    distance: WeightedDistanceSpec = WeightedDistanceSpec()

    def __post_init__(self):
        if not 0 < self.tolerance_quantile <= 1:
            raise DomainError("tolerance quantile must lie in (0, 1]")
        if self.n_total < 2 or self.n_total % 2:
            raise DomainError("n_total must be a positive even number")

    @property
    def n_per_model(self) -> int:
        return self.n_total // 2

    def to_dict(self) -> dict:
        return {"n_total": self.n_total, "tolerance_quantile": self.tolerance_quantile,
                "distance": {"kind": self.distance.kind,
                             "weights": None if self.distance.weights is None
                             else list(self.distance.weights)}}

    @classmethod
    def from_dict(cls, d: dict) -> "AbcConfig":
        dist = d.get("distance") or {}
        w = dist.get("weights")
        return cls(int(d["n_total"]), float(d["tolerance_quantile"]),
                   WeightedDistanceSpec(dist.get("kind", "euclidean"),
                                        None if w is None else tuple(w)))


@dataclass
class AbcResult:
    tolerance: float
    accepted: np.ndarray  # row indices into the table
    posterior_prob_m1: float
    accepted_params: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def posterior_prob_m2(self) -> float:
        return 1.0 - self.posterior_prob_m1

    @property
    def bayes_factor_12(self) -> float:
        p = self.posterior_prob_m1
        return math.inf if p == 1.0 else p / (1.0 - p)

    @property
    def n_accepted(self) -> dict[int, int]:
        return {i: len(self.accepted_params.get(i, ())) for i in (1, 2)}

    def to_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "n_accepted": {str(k): v for k, v in self.n_accepted.items()},
            "posterior_prob_m1": self.posterior_prob_m1,
            "posterior_prob_m2": self.posterior_prob_m2,
            "bayes_factor_12": self.bayes_factor_12,
            "accepted": [int(i) for i in self.accepted],
            "accepted_params": {str(k): [[None if np.isnan(x) else float(x) for x in row]
                                         for row in v]
                                for k, v in self.accepted_params.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def run_rejection(table: ReferenceTable, observed, cfg: AbcConfig) -> AbcResult:
    """Accept rows whose distance to ``observed`` is within the q-quantile of all distances."""
    observed = np.asarray(observed, dtype=float).ravel()
    if observed.shape != (table.dim,):
        raise ShapeError(f"observed summary has length {observed.size}, table has {table.dim}")
    if len(table) == 0:
        raise InsufficientAcceptanceError("empty reference table")
    dist = weighted_distance(table.summaries, observed, cfg.distance)
    tol = empirical_quantile(dist, cfg.tolerance_quantile)
    accepted = np.nonzero(dist <= tol)[0]
    models = table.model_index[accepted]
    n1 = int(np.sum(models == 1))
    params = {i: table.params[accepted[models == i]] for i in (1, 2)}
    return AbcResult(float(tol), accepted, n1 / len(accepted), params)


def posterior_predictive_sample(result: AbcResult, model: ModelSpec,
                                specs: Sequence[str | StatisticSpec], L: int, sample_size: int,
                                seed: SeedSpec, model_index: int = 1) -> np.ndarray:
    """Summaries of ``L`` fresh datasets at parameters resampled from the ABC posterior.

    Parameters come from the rows accepted under ``model_index`` by
    balanced resampling: each accepted row is used floor(L / m) times and
    the remaining draws are a uniform subset without replacement. Every
    draw is still marginally uniform over the accepted set, but the
    posterior sample is not re-randomised, which would inflate the variance
    of the predictive mean beyond its sample covariance / L.
    Returns an ``(L, d)`` array.
    """
    if L < 1:
        raise DomainError("need L >= 1 posterior predictive draws")
    pool = result.accepted_params.get(model_index)
    if pool is None or len(pool) == 0:
        raise InsufficientAcceptanceError(
            f"no accepted parameters for model {model_index}; enlarge the table or the quantile")
    pool = np.asarray(pool)[:, :model.param_dim]
    reps, rest = divmod(L, len(pool))
    rng = seed.derive("posterior-pick").rng()
    pick = np.concatenate([np.tile(np.arange(len(pool)), reps),
                           np.sort(rng.choice(len(pool), size=rest, replace=False))])
    _, summ = simulate_summaries(model, pool[pick], L, sample_size, parse_statistics(specs),
                                 seed, "predictive")
    return summ

