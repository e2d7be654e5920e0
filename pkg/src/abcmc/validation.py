"""Monte Carlo check of whether a summary statistic can separate two models.

Under each model, parameters are drawn from the ABC posterior given the
observed summary, fresh datasets are simulated and summarised, and the two
posterior-predictive means are compared with a chi-square test. Failing to
reject equality means both models reproduce the observed mean, so the
statistic is unusable for choosing between them.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .models.base import ModelSpec
from .numerics import DomainError, SeedSpec, ShapeError, chi_square_sf, solve_spd
from .rejection import (AbcConfig, ReferenceTable,
                        build_reference_table, posterior_predictive_sample, run_rejection)
from .stats import MicrosatDataset, StatisticSpec, compose_statistics, parse_statistics

__all__ = [
    "REJECT",
    "FAIL_TO_REJECT",
    "ValidationReport",
    "estimate_predictive_mean",
    "common_mean_test",
    "validate_statistic_choice",
]

REJECT = "reject_H0_statistic_usable"
FAIL_TO_REJECT = "fail_to_reject_H0_statistic_inadequate"


@dataclass
class ValidationReport:
    mu_hat_1: list[float]
    mu_hat_2: list[float]
    V1: list[list[float]]
    V2: list[list[float]]
    statistic: float
    dof: int
    p_value: float
    regularized: bool
    alpha: float
    decision: str
    provenance: dict = field(default_factory=dict)

    @property
    def rejected(self) -> bool:
        return self.decision == REJECT

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def estimate_predictive_mean(draws) -> tuple[np.ndarray, np.ndarray]:
    """Mean of ``L`` summary vectors and the covariance of that mean (sample cov / L)."""
    x = np.asarray(draws, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    L = x.shape[0]
    if L < 2:
        raise DomainError("need at least two draws to estimate a covariance")
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1)) / L
    return mean, cov


def common_mean_test(mu1, cov1, mu2, cov2, alpha: float = 0.05) -> ValidationReport:
    """Chi-square test of equal means: (mu1-mu2)' (V1+V2)^-1 (mu1-mu2) ~ chi2_d."""
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=float))
    cov1 = np.atleast_2d(np.asarray(cov1, dtype=float))
    cov2 = np.atleast_2d(np.asarray(cov2, dtype=float))
    d = mu1.size
    if mu2.shape != (d,) or cov1.shape != (d, d) or cov2.shape != (d, d):
        raise ShapeError("means and covariances have mismatched dimensions")
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    diff = mu1 - mu2
    x, regularized = solve_spd(cov1 + cov2, diff)
    stat = max(0.0, float(diff @ x))
    p = chi_square_sf(stat, d)
    return ValidationReport(
        mu_hat_1=mu1.tolist(), mu_hat_2=mu2.tolist(), V1=cov1.tolist(), V2=cov2.tolist(),
        statistic=stat, dof=d, p_value=p, regularized=regularized, alpha=alpha,
        decision=REJECT if p < alpha else FAIL_TO_REJECT,
    )


def validate_statistic_choice(m1: ModelSpec, m2: ModelSpec, specs: Sequence[str | StatisticSpec],
                              observed, abc_cfg: AbcConfig, L: int = 500, alpha: float = 0.05,
                              seed: SeedSpec = SeedSpec(0), table: ReferenceTable | None = None,
                              per_model: bool = True) -> ValidationReport:
    """Full pipeline from an observed dataset to a test decision.

    ``table`` may be a prebuilt reference table (any superset of the
    requested statistic columns) so that replications share one table.
    With ``per_model`` the tolerance is the quantile of each model's own
    distances, so both posteriors get the same number of accepted draws;
    otherwise one joint rejection step is used and a model with no
    accepted rows raises ``InsufficientAcceptanceError``.
    """
    specs = parse_statistics(specs)
    if m1.data_kind == "microsat" and not isinstance(observed, MicrosatDataset):
        observed = MicrosatDataset(np.asarray(observed))
    sample_size = observed.n_loci if isinstance(observed, MicrosatDataset) else len(observed)
    t_obs = compose_statistics(specs, observed)
    if table is None:
        table = build_reference_table(m1, m2, specs, abc_cfg.n_per_model, sample_size,
                                      seed.derive("table"))
    table = table.select(specs)
    if table.sample_size and table.sample_size != sample_size:
        raise ShapeError(f"table simulated at size {table.sample_size}, observed size {sample_size}")

    if per_model:
        results = {i: run_rejection(table.restrict(i), t_obs, abc_cfg) for i in (1, 2)}
        tolerance = {str(i): results[i].tolerance for i in (1, 2)}
    else:
        joint = run_rejection(table, t_obs, abc_cfg)
        results = {1: joint, 2: joint}
        tolerance = {"joint": joint.tolerance}

    means = {}
    for i, m in ((1, m1), (2, m2)):
        draws = posterior_predictive_sample(results[i], m, specs, L, sample_size,
                                            seed.derive("predictive", i), model_index=i)
        means[i] = estimate_predictive_mean(draws)

    report = common_mean_test(means[1][0], means[1][1], means[2][0], means[2][1], alpha)
    report.provenance = {
        "seed": {"root_seed": seed.root_seed, "stream_id": seed.stream_id},
        "statistics": [s.name for s in specs],
        "observed_summary": t_obs.tolist(),
        "abc": abc_cfg.to_dict(),
        "per_model_tolerance": per_model,
        "tolerance": tolerance,
        "n_accepted": {str(i): results[i].n_accepted[i] for i in (1, 2)},
        "L": L,
        "sample_size": sample_size,
    }
    return report

