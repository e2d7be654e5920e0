"""Named experiment recipes and the replication runner.

Every named experiment expands to a fully explicit ``ExperimentConfig``;
``run_experiment`` consumes only that expansion, so a dumped
``config_expanded.json`` is enough to repeat a run bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .models import (PopGenConfig, compatibility_report, gaussian_model, gk_quantile_model,
                     laplace_model, popgen_model)
from .models.base import ModelSpec
from .numerics import DomainError, SeedSpec, WeightedDistanceSpec, empirical_quantile
from .rejection import AbcConfig, build_reference_table, run_rejection
from .stats import compose_statistics, get_statistic, stat_median
from .validation import validate_statistic_choice

log = logging.getLogger(__name__)

__all__ = [
    "CONFIG_VERSION",
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "RECORD_FIELDS",
    "build_models",
    "expand_config",
    "run_experiment",
    "emit_compatibility_table",
    "summarize_records",
    "read_records",
]

CONFIG_VERSION = 1
EXPERIMENTS = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "validate_gl", "validate_popgen")
MODEL_IDS = ("gaussian", "laplace", "gk1", "gk2", "popgen1", "popgen2")

RECORD_FIELDS = [
    "statistics", "sample_size", "replication", "true_model", "true_param",
    "posterior_prob_m1", "tolerance", "n_accepted_m1", "n_accepted_m2",
    "test_statistic", "dof", "p_value", "regularized", "decision",
]


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ExperimentConfig:
    experiment_id: str
    models: tuple[str, str]
    prior: dict[str, float]
    statistic_sets: list[list[str]]
    sample_sizes: list[int]
    replications: int
    true_models: list[int]
    true_params: dict[str, list[float]]
    abc: AbcConfig
    seed: int = 0
    popgen: PopGenConfig | None = None
    validation: dict[str, Any] | None = None
    scale: float = 1.0
    notes: list[str] = field(default_factory=list)
    version: int = CONFIG_VERSION

    @property
    def all_statistics(self) -> list[str]:
        seen: list[str] = []
        for s in self.statistic_sets:
            seen += [x for x in s if x not in seen]
        return seen

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "experiment_id": self.experiment_id,
            "models": list(self.models),
            "prior": dict(self.prior),
            "statistic_sets": [list(s) for s in self.statistic_sets],
            "sample_sizes": list(self.sample_sizes),
            "replications": self.replications,
            "true_models": list(self.true_models),
            "true_params": {k: list(v) for k, v in self.true_params.items()},
            "abc": self.abc.to_dict(),
            "seed": self.seed,
            "popgen": None if self.popgen is None else self.popgen.to_dict(),
            "validation": None if self.validation is None else dict(self.validation),
            "scale": self.scale,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        def need(key):
            if key not in d:
                raise ConfigError(key, "missing field")
            return d[key]

        models = tuple(need("models"))
        if len(models) != 2:
            raise ConfigError("models", "exactly two models are compared")
        for i, m in enumerate(models):
            if m not in MODEL_IDS:
                raise ConfigError(f"models[{i}]", f"unknown model {m!r}")
        sets = need("statistic_sets")
        if not sets or not all(sets):
            raise ConfigError("statistic_sets", "need at least one non-empty statistic set")
        for i, s in enumerate(sets):
            for j, name in enumerate(s):
                try:
                    get_statistic(name)
                except DomainError as exc:
                    raise ConfigError(f"statistic_sets[{i}][{j}]", str(exc)) from None
        sizes = [int(n) for n in need("sample_sizes")]
        if not sizes or min(sizes) < 1:
            raise ConfigError("sample_sizes", "sizes must be positive")
        reps = int(need("replications"))
        if reps < 1:
            raise ConfigError("replications", "must be >= 1")
        truths = [int(t) for t in need("true_models")]
        if not truths or any(t not in (1, 2) for t in truths):
            raise ConfigError("true_models", "entries must be 1 or 2")
        true_params = {str(k): [float(x) for x in v] for k, v in need("true_params").items()}
        for t in truths:
            if str(t) not in true_params:
                raise ConfigError(f"true_params.{t}", "missing true parameter")
        try:
            abc = AbcConfig.from_dict(need("abc"))
        except (DomainError, KeyError, TypeError) as exc:
            raise ConfigError("abc", str(exc)) from None
        popgen = d.get("popgen")
        if popgen is not None:
            try:
                popgen = PopGenConfig.from_dict(popgen)
            except (DomainError, TypeError) as exc:
                raise ConfigError("popgen", str(exc)) from None
        elif any(m.startswith("popgen") for m in models):
            raise ConfigError("popgen", "population-genetics models need a popgen block")
        validation = d.get("validation")
        if validation is not None:
            for key in ("L", "alpha"):
                if key not in validation:
                    raise ConfigError(f"validation.{key}", "missing field")
            if int(validation["L"]) < 2:
                raise ConfigError("validation.L", "must be >= 2")
            if not 0 < float(validation["alpha"]) < 1:
                raise ConfigError("validation.alpha", "must lie in (0, 1)")
        seed = int(d.get("seed", 0))
        if not 0 <= seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        return cls(
            experiment_id=str(d.get("experiment_id", "custom")), models=models,
            prior={k: float(v) for k, v in need("prior").items()}, statistic_sets=[list(s) for s in sets],
            sample_sizes=sizes, replications=reps, true_models=truths, true_params=true_params,
            abc=abc, seed=seed, popgen=popgen, validation=validation,
            scale=float(d.get("scale", 1.0)), notes=list(d.get("notes", [])),
            version=int(d.get("version", CONFIG_VERSION)),
        )


def _scaled(x: int, scale: float, minimum: int = 1) -> int:
    return max(minimum, int(round(x * scale)))


def _table_size(n_total: int, scale: float, q: float) -> int:
    per_model = _scaled(n_total // 2, scale)
    # keep at least one accepted row per model at the fixed quantile
    per_model = max(per_model, math.ceil(1.0 / q))
    return 2 * per_model


_R_NOTE = ("assumption: replications not stated for this figure; R=100 taken from "
           "the quantile-model experiment")


def expand_config(experiment_id: str, scale: float = 1.0, seed: int = 0) -> ExperimentConfig:
    """Fully explicit configuration of a named experiment.

    ``scale`` multiplies table sizes, replication counts and the
    population-genetics loci and sample sizes; quantile levels are fixed.
    """
    if experiment_id not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {experiment_id!r}")
    if not scale > 0:
        raise ConfigError("scale", "must be positive")
    normal_prior = {"prior_mean": 0.0, "prior_var": 4.0}
    gl = dict(models=("gaussian", "laplace"), prior=normal_prior,
              true_params={"1": [0.0], "2": [0.0]})
    euclid = WeightedDistanceSpec("euclidean")

    def abc(n_total, q, dist=euclid):
        return AbcConfig(_table_size(n_total, scale, q), q, dist)

    def reps(r):
        return _scaled(r, scale)

    if experiment_id in ("fig1", "fig2", "fig3", "fig4"):
        stats = {"fig1": ["mean", "median", "variance"], "fig2": ["mad"],
                 "fig3": ["moment4"], "fig4": ["moment4", "moment6"]}[experiment_id]
        sizes = [10, 100, 1000] if experiment_id in ("fig1", "fig2") else [100, 1000, 10000]
        dist = WeightedDistanceSpec("euclidean", (1.0, 0.01)) if experiment_id == "fig4" else euclid
        cfg = ExperimentConfig(experiment_id=experiment_id, statistic_sets=[stats], sample_sizes=sizes,
                               replications=reps(100), true_models=[1, 2], abc=abc(10_000, 0.01, dist),
                               seed=seed, scale=scale, notes=[_R_NOTE], **gl)
    elif experiment_id == "fig5":
        cfg = ExperimentConfig(
            experiment_id="fig5", models=("gk1", "gk2"), prior={},
            statistic_sets=[["q10"], ["q10", "q90"], ["q10", "q40", "q60", "q90"]],
            sample_sizes=[100, 1000, 10000], replications=reps(100), true_models=[1, 2],
            true_params={"1": [2.0], "2": [1.0, 2.0]},
            abc=abc(10_000, 0.01, WeightedDistanceSpec("l1")), seed=seed, scale=scale)
    elif experiment_id == "fig6":
        pg = PopGenConfig(n_diploid=_scaled(50, scale), n_loci=_scaled(100, scale))
        cfg = ExperimentConfig(
            experiment_id="fig6", models=("popgen1", "popgen2"),
            prior={"prior_lo": 1e-4, "prior_hi": 1e-2},
            statistic_sets=[["dmu12"], ["dmu13", "dmu23"], ["dmu12", "dmu13", "dmu23"]],
            sample_sizes=sorted({_scaled(n, scale) for n in (5, 50, 100)}),
            replications=reps(100), true_models=[1, 2],
            true_params={"1": [0.005], "2": [0.005]},
            abc=abc(200_000, 0.005), seed=seed, popgen=pg, scale=scale)
    elif experiment_id == "validate_gl":
        cfg = ExperimentConfig(
            experiment_id="validate_gl",
            statistic_sets=[["mean", "median", "variance"], ["mean", "median", "variance", "mad"]],
            sample_sizes=[1000], replications=reps(100), true_models=[1], abc=abc(100_000, 0.01),
            seed=seed, validation={"L": 500, "alpha": 0.05, "per_model": True}, scale=scale,
            notes=["assumption: sample size not stated for this experiment; n=1000 used"],
            **gl)
    else:  # validate_popgen
        pg = PopGenConfig(n_diploid=_scaled(50, scale), n_loci=_scaled(100, scale))
        cfg = ExperimentConfig(
            experiment_id="validate_popgen", models=("popgen1", "popgen2"),
            prior={"prior_lo": 1e-4, "prior_hi": 1e-2},
            statistic_sets=[["dmu12"], ["dmu13", "dmu23"]], sample_sizes=[pg.n_loci],
            replications=reps(100), true_models=[1], true_params={"1": [0.005], "2": [0.005]},
            abc=abc(200_000, 0.005), seed=seed, popgen=pg,
            validation={"L": 500, "alpha": 0.05, "per_model": True}, scale=scale)
    return cfg


def build_models(cfg: ExperimentConfig) -> tuple[ModelSpec, ModelSpec]:
    def one(name):
        if name in ("gaussian", "laplace"):
            f = gaussian_model if name == "gaussian" else laplace_model
            return f(cfg.prior.get("prior_mean", 0.0), cfg.prior.get("prior_var", 4.0))
        if name in ("gk1", "gk2"):
            return gk_quantile_model("M1_g_zero" if name == "gk1" else "M2_free_g")
        pg = cfg.popgen or PopGenConfig()
        topo = "pop3_from_pop1" if name == "popgen1" else "pop3_from_pop2"
        return popgen_model(replace(pg, topology=topo), cfg.prior.get("prior_lo", 1e-4),
                            cfg.prior.get("prior_hi", 1e-2))

    return one(cfg.models[0]), one(cfg.models[1])


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _cell_key(rec: dict) -> tuple:
    return (rec["statistics"], str(rec["sample_size"]), str(rec["replication"]), str(rec["true_model"]))


def read_records(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("".join(lines))))


def _records_header() -> str:
    return ("# one row per (statistic set, sample size, replication, true model); "
            "posterior_prob_m1 is the accepted fraction from model 1; test columns are "
            "empty unless the experiment runs the validation test\n")


def _quartiles(xs: list[float]) -> dict:
    return {"n": len(xs), "q1": empirical_quantile(xs, 0.25), "median": stat_median(xs),
            "q3": empirical_quantile(xs, 0.75)}


def summarize_records(records: list[dict]) -> dict:
    """Per-cell quartiles of posterior_prob_m1 (and test outcomes when present).

    q1/q3 are ceil(q*n) order statistics, the median averages the two
    central values for even n.
    """
    cells: dict[tuple, list[dict]] = {}
    for r in records:
        key = (r["statistics"], int(r["sample_size"]), int(r["true_model"]))
        cells.setdefault(key, []).append(r)
    out = []
    for (stats, n, truth), rs in sorted(cells.items()):
        entry = {"statistics": stats, "sample_size": n, "true_model": truth,
                 "posterior_prob_m1": _quartiles([float(r["posterior_prob_m1"]) for r in rs])}
        if rs[0].get("p_value") not in (None, ""):
            ps = [float(r["p_value"]) for r in rs]
            entry["p_value"] = _quartiles(ps)
            entry["test_statistic"] = _quartiles([float(r["test_statistic"]) for r in rs])
            entry["rejection_rate"] = sum(r["decision"].startswith("reject") for r in rs) / len(rs)
        out.append(entry)
    return {"cells": out}


def _simulate_observed(model: ModelSpec, theta, n: int, seed: SeedSpec):
    return model.simulator(theta, n, seed)


def run_experiment(cfg: ExperimentConfig, out_dir, workers: int | None = None,
                   resume: bool = True) -> dict[str, Path]:
    """Run every replication cell and write records.csv, config_expanded.json, summary.json.

    With ``resume`` an existing records.csv produced by the same expanded
    configuration is kept and only missing cells are computed.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg_path, rec_path, sum_path = out / "config_expanded.json", out / "records.csv", out / "summary.json"
    text = cfg.to_json()

    done: dict[tuple, dict] = {}
    if resume and rec_path.exists() and cfg_path.exists() and cfg_path.read_text() == text:
        done = {_cell_key(r): r for r in read_records(rec_path)}
    cfg_path.write_text(text)

    m1, m2 = build_models(cfg)
    models = {1: m1, 2: m2}
    seed = SeedSpec(cfg.seed)
    union = cfg.all_statistics
    records = []
    for n in cfg.sample_sizes:
        wanted = [(r, t, "+".join(s)) for r in range(cfg.replications) for t in cfg.true_models
                  for s in cfg.statistic_sets]
        if all((s, str(n), str(r), str(t)) in done for r, t, s in wanted):
            records += [done[(s, str(n), str(r), str(t))] for r, t, s in wanted]
            continue
        log.info("%s: reference table for n=%d (%d rows)", cfg.experiment_id, n, cfg.abc.n_total)
        table = build_reference_table(m1, m2, union, cfg.abc.n_per_model, n,
                                      seed.derive("table", n), workers)
        for rep in range(cfg.replications):
            for truth in cfg.true_models:
                theta = cfg.true_params[str(truth)]
                obs = None
                for s_i, stats in enumerate(cfg.statistic_sets):
                    name = "+".join(stats)
                    key = (name, str(n), str(rep), str(truth))
                    if key in done:
                        records.append(done[key])
                        continue
                    if obs is None:
                        obs = _simulate_observed(models[truth], theta, n, seed.derive("obs", n, truth, rep))
                    t_obs = compose_statistics(stats, obs)
                    res = run_rejection(table.select(stats), t_obs, cfg.abc)
                    rec = {"statistics": name, "sample_size": n, "replication": rep,
                           "true_model": truth, "true_param": ";".join(_fmt(x) for x in theta),
                           "posterior_prob_m1": res.posterior_prob_m1, "tolerance": res.tolerance,
                           "n_accepted_m1": res.n_accepted[1], "n_accepted_m2": res.n_accepted[2]}
                    if cfg.validation is not None:
                        v = cfg.validation
                        report = validate_statistic_choice(
                            m1, m2, stats, obs, cfg.abc, int(v["L"]), float(v["alpha"]),
                            seed.derive("validate", n, truth, rep, s_i), table=table,
                            per_model=bool(v.get("per_model", True)))
                        rec.update(test_statistic=report.statistic, dof=report.dof,
                                   p_value=report.p_value, regularized=report.regularized,
                                   decision=report.decision)
                    records.append({k: _fmt(v) for k, v in rec.items()})
    with rec_path.open("w", newline="") as fh:
        fh.write(_records_header())
        w = csv.DictWriter(fh, fieldnames=RECORD_FIELDS, restval="", lineterminator="\n")
        w.writeheader()
        w.writerows(records)
    sum_path.write_text(json.dumps(summarize_records(read_records(rec_path)), indent=2) + "\n")
    return {"records": rec_path, "config": cfg_path, "summary": sum_path}


def emit_compatibility_table(cfg: ExperimentConfig, path=None) -> str:
    """CSV diagnosis of every statistic set under every configured truth.

    ``subset_verdict`` is discriminant when at least one truth leaves
    exactly one compatible model. Returns the CSV text and writes it to
    ``path`` when given.
    """
    m1, m2 = build_models(cfg)
    rows = []
    for stats in cfg.statistic_sets:
        reports = [compatibility_report(m1, m2, stats, (int(t), cfg.true_params[t]))
                   for t in sorted(cfg.true_params)]
        subset = "discriminant" if any(r.discriminant for r in reports) else "non-discriminant"
        for r in reports:
            rows.append({
                "statistics": "+".join(stats), "true_model": r.true_model,
                "true_param": ";".join(_fmt(x) for x in r.true_theta),
                "mu0": ";".join(_fmt(x) for x in r.mu0),
                "m1_infimum": _fmt(r.fits[0].infimum), "m1_compatible": _fmt(r.fits[0].compatible),
                "m2_infimum": _fmt(r.fits[1].infimum), "m2_compatible": _fmt(r.fits[1].compatible),
                "verdict": r.verdict, "subset_verdict": subset,
            })
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text

