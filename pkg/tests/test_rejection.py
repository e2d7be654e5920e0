import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abcmc.models import PopGenConfig, gaussian_model, laplace_model, popgen_model
from abcmc.numerics import DomainError, SeedSpec, ShapeError, WeightedDistanceSpec
from abcmc.rejection import (AbcConfig, AbcResult, InsufficientAcceptanceError, ReferenceTable,
                             SimulationError, build_reference_table, max_workers,
                             posterior_predictive_sample, run_rejection, simulate_summaries)
from abcmc.stats import compose_statistics

GAUSS, LAPLACE = gaussian_model(), laplace_model()


def table_from(summaries, models):
    summaries = np.asarray(summaries, float).reshape(len(models), -1)
    params = np.arange(len(models), dtype=float)[:, None]
    return ReferenceTable(np.asarray(models), params, summaries,
                          tuple(f"s{i}" for i in range(summaries.shape[1])))


class TestReferenceTable:
    def test_one_row_per_model(self):
        t = build_reference_table(GAUSS, LAPLACE, ["mean"], 1, 10, SeedSpec(0))
        assert len(t) == 2 and t.counts == {1: 1, 2: 1}

    def test_worker_count_does_not_matter(self):
        args = (GAUSS, LAPLACE, ["mean", "mad"], 2500, 50, SeedSpec(9))
        a = build_reference_table(*args, workers=1)
        b = build_reference_table(*args, workers=4)
        assert np.array_equal(a.summaries, b.summaries) and np.array_equal(a.params, b.params)

    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv("ABCMC_THREADS", "1")
        assert max_workers() == 1
        monkeypatch.setenv("ABCMC_THREADS", "junk")
        assert max_workers() >= 1

    def test_total_variance_oracle(self):
        # Var(mean of n draws) = Var(theta) + 1/n under a N(0, 4) prior
        t = build_reference_table(GAUSS, LAPLACE, ["mean"], 500, 100, SeedSpec(3))
        v = t.restrict(1).summaries[:, 0].var(ddof=1)
        assert abs(v / (4 + 1 / 100) - 1) < 0.25

    def test_select_and_restrict(self):
        t = build_reference_table(GAUSS, LAPLACE, ["mean", "variance", "mad"], 20, 30, SeedSpec(1))
        s = t.select(["mad", "mean"])
        assert s.statistics == ("mad", "mean")
        assert np.array_equal(s.summaries[:, 1], t.summaries[:, 0])
        assert set(t.restrict(2).model_index) == {2}
        with pytest.raises(ShapeError):
            t.select(["q10"])

    def test_csv_roundtrip(self, tmp_path):
        pg = PopGenConfig(n_diploid=2)
        m1 = popgen_model(pg)
        m2 = popgen_model(PopGenConfig(n_diploid=2, topology="pop3_from_pop2"))
        t = build_reference_table(m1, m2, ["dmu12", "dmu13"], 5, 3, SeedSpec(4))
        path = t.to_csv(tmp_path / "table.csv")
        side = json.loads(path.with_suffix(".json").read_text())
        assert side["statistics"] == ["dmu12", "dmu13"]
        back = ReferenceTable.from_csv(path)
        assert np.array_equal(back.summaries, t.summaries)
        assert np.array_equal(back.params, t.params)
        assert back.seed == t.seed and back.models == ("popgen1", "popgen2")
        header = path.read_text().splitlines()[0]
        assert header == "model_index,param_1,T_1,T_2"

    def test_nan_padding_for_unequal_dims(self, tmp_path):
        from abcmc.models import gk_quantile_model
        t = build_reference_table(gk_quantile_model("M1_g_zero"), gk_quantile_model("M2_free_g"),
                                  ["q10"], 3, 20, SeedSpec(0))
        assert t.params.shape == (6, 2)
        assert np.all(np.isnan(t.params[:3, 1])) and not np.any(np.isnan(t.params[3:]))
        back = ReferenceTable.from_csv(t.to_csv(tmp_path / "gk.csv"))
        assert np.array_equal(np.isnan(back.params), np.isnan(t.params))

    def test_simulation_error_carries_block(self):
        from dataclasses import replace

        def broken(thetas, n, rng):
            raise FloatingPointError("boom")
        bad = replace(GAUSS, simulate_batch=broken)
        with pytest.raises(SimulationError) as info:
            simulate_summaries(bad, None, 10, 5, ["mean"], SeedSpec(0), "x")
        assert info.value.block == 0 and "boom" in str(info.value)

    def test_bad_size(self):
        with pytest.raises(DomainError):
            build_reference_table(GAUSS, LAPLACE, ["mean"], 0, 10, SeedSpec(0))


class TestRejection:
    def test_quantile_example(self):
        t = table_from([0.1, 0.2, 0.3, 0.4], [1, 2, 1, 2])
        r = run_rejection(t, [0.0], AbcConfig(4, 0.5))
        assert r.tolerance == pytest.approx(0.2)
        assert list(r.accepted) == [0, 1]
        assert r.posterior_prob_m1 == 0.5 and r.bayes_factor_12 == 1.0

    def test_unanimous(self):
        t = table_from([0.0, 0.1, 5.0, 6.0], [1, 1, 2, 2])
        r = run_rejection(t, [0.0], AbcConfig(4, 0.5))
        assert r.posterior_prob_m1 == 1.0 and r.bayes_factor_12 == math.inf
        assert r.posterior_prob_m2 == 0.0
        payload = json.loads(r.to_json())
        assert payload["bayes_factor_12"] == math.inf

    def test_exact_match_accepted(self):
        rng = np.random.default_rng(0)
        s = rng.normal(size=(100, 2))
        t = table_from(s, [1] * 50 + [2] * 50)
        r = run_rejection(t, s[73], AbcConfig(100, 0.01))
        assert list(r.accepted) == [73]
        assert r.posterior_prob_m1 == 0.0

    def test_ties_are_all_accepted(self):
        t = table_from([1.0, 1.0, 1.0, 2.0], [1, 2, 2, 1])
        r = run_rejection(t, [0.0], AbcConfig(4, 0.25))
        assert len(r.accepted) == 3
        assert r.posterior_prob_m1 == pytest.approx(1 / 3)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            run_rejection(table_from([[1.0, 2.0]], [1]), [1.0], AbcConfig(2, 0.5))

    def test_accepted_params(self):
        t = table_from([0.0, 1.0, 2.0, 3.0], [1, 2, 1, 2])
        r = run_rejection(t, [0.6], AbcConfig(4, 0.5))
        assert r.n_accepted == {1: 1, 2: 1}
        assert r.accepted_params[1][0, 0] == 0.0 and r.accepted_params[2][0, 0] == 1.0

    def test_config(self):
        cfg = AbcConfig(100, 0.05, WeightedDistanceSpec("l1", (1.0, 2.0)))
        assert AbcConfig.from_dict(cfg.to_dict()) == cfg
        assert cfg.n_per_model == 50
        for bad in ((101, 0.1), (100, 0.0), (100, 1.5)):
            with pytest.raises(DomainError):
                AbcConfig(*bad)

    distinct = st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=80, unique=True)

    @given(distinct, st.floats(0.001, 1.0), st.randoms())
    def test_acceptance_count_and_permutation(self, xs, q, rnd):
        models = [1 + (i % 2) for i in range(len(xs))]
        t = table_from(xs, models)
        cfg = AbcConfig(2, q)
        r = run_rejection(t, [0.0], cfg)
        k = min(max(math.ceil(q * len(xs) - 1e-12 * max(1, q * len(xs))), 1), len(xs))
        # distinct values can still tie in |x|; the count is then at least k
        if len(set(abs(x) for x in xs)) == len(xs):
            assert len(r.accepted) == k
        else:
            assert len(r.accepted) >= k
        assert r.posterior_prob_m1 + r.posterior_prob_m2 == 1.0
        perm = list(range(len(xs)))
        rnd.shuffle(perm)
        tp = table_from([xs[i] for i in perm], [models[i] for i in perm])
        rp = run_rejection(tp, [0.0], cfg)
        assert sorted(perm[i] for i in rp.accepted) == sorted(r.accepted.tolist())
        assert rp.posterior_prob_m1 == r.posterior_prob_m1

    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=80),
           st.floats(0.001, 1.0), st.floats(0.001, 1.0))
    def test_monotone_in_quantile(self, xs, q1, q2):
        lo, hi = sorted((q1, q2))
        t = table_from(xs, [1 + (i % 2) for i in range(len(xs))])
        small = set(run_rejection(t, [0.0], AbcConfig(2, lo)).accepted.tolist())
        large = set(run_rejection(t, [0.0], AbcConfig(2, hi)).accepted.tolist())
        assert small <= large


class TestPredictive:
    def result_with(self, thetas, model=1):
        p = np.asarray(thetas, float)[:, None]
        return AbcResult(0.0, np.arange(len(p)), 1.0, {model: p, 3 - model: p[:0]})

    def test_single_atom(self):
        draws = posterior_predictive_sample(self.result_with([0.0]), GAUSS, ["mean"], 3, 20, SeedSpec(1))
        assert draws.shape == (3, 1) and len(set(draws[:, 0])) == 3

    def test_l_zero(self):
        with pytest.raises(DomainError):
            posterior_predictive_sample(self.result_with([0.0]), GAUSS, ["mean"], 0, 20, SeedSpec(1))

    def test_empty_pool(self):
        with pytest.raises(InsufficientAcceptanceError):
            posterior_predictive_sample(self.result_with([0.0], model=2), GAUSS, ["mean"], 5, 20,
                                        SeedSpec(1), model_index=1)

    def test_moment4_at_zero(self):
        draws = posterior_predictive_sample(self.result_with([0.0]), GAUSS, ["moment4"], 2000, 1000,
                                            SeedSpec(2))
        se = draws[:, 0].std(ddof=1) / math.sqrt(2000)
        assert abs(draws[:, 0].mean() - 3) < 4 * se

    def test_balanced_draws(self):
        # every accepted value is used floor(L/m) or floor(L/m)+1 times
        pool = np.array([-50.0, 0.0, 50.0])
        draws = posterior_predictive_sample(self.result_with(pool), GAUSS, ["mean"], 8, 1,
                                            SeedSpec(3))
        nearest = np.argmin(np.abs(draws[:, 0][:, None] - pool[None]), axis=1)
        counts = np.bincount(nearest, minlength=3)
        assert counts.sum() == 8 and counts.min() >= 2 and counts.max() <= 3

    def test_reproducible(self):
        a = posterior_predictive_sample(self.result_with([0.1, 0.5]), LAPLACE, ["mad"], 50, 30, SeedSpec(4))
        b = posterior_predictive_sample(self.result_with([0.1, 0.5]), LAPLACE, ["mad"], 50, 30, SeedSpec(4))
        assert np.array_equal(a, b)


def test_fig2_concentration_end_to_end():
    table = build_reference_table(GAUSS, LAPLACE, ["mad"], 5000, 1000, SeedSpec(2024))
    cfg = AbcConfig(10_000, 0.01)
    medians = {}
    for truth, model in ((1, GAUSS), (2, LAPLACE)):
        probs = [run_rejection(table, compose_statistics(["mad"], model.simulator([0.0], 1000,
                                                         SeedSpec(7).derive(truth, r))), cfg).posterior_prob_m1
                 for r in range(20)]
        medians[truth] = float(np.median(probs))
    assert medians[1] > 0.9 and medians[2] < 0.1
