import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from abcmc.models.gk import gk_quantile_model
from abcmc.models.location import LAPLACE_SCALE, laplace_inverse_cdf
from abcmc.numerics import DomainError, SeedSpec, ShapeError
from abcmc.stats import (MicrosatDataset, StatisticError, compose_statistics, get_statistic,
                         parse_statistics, stat_delta_mu_sq, stat_mad, stat_mean, stat_median,
                         stat_moment, stat_quantile, stat_variance)

NAMES = ["mean", "median", "variance", "mad", "moment4", "moment6", "q10", "q40", "q60", "q90"]

samples = hnp.arrays(np.float64, st.integers(2, 50), elements=st.floats(-1e3, 1e3))


@pytest.fixture(scope="module")
def normal_draws():
    return np.random.default_rng(11).standard_normal(100_000)


@pytest.fixture(scope="module")
def laplace_draws():
    return laplace_inverse_cdf(np.random.default_rng(12).random(100_000))


class TestExamples:
    def test_mean(self, normal_draws):
        assert stat_mean([1, 2, 3]) == 2
        assert stat_mean([4.5] * 7) == 4.5
        assert abs(stat_mean(normal_draws)) < 0.02

    def test_median(self):
        assert stat_median([3, 1, 2]) == 2
        assert stat_median([1, 2, 3, 4]) == 2.5
        assert stat_median([5]) == 5

    def test_variance(self, laplace_draws):
        assert stat_variance([1, 2, 3]) == 1
        assert stat_variance([2.0, 2.0, 2.0]) == 0
        assert abs(stat_variance(laplace_draws) - 1) < 0.05
        with pytest.raises(DomainError):
            stat_variance([1.0])

    def test_mad(self, normal_draws, laplace_draws):
        assert stat_mad([1, 2, 3, 4, 5]) == 1
        assert stat_mad([3.0] * 4) == 0
        # population mad: z(0.75) for N(0,1), b ln 2 for Laplace(0, b)
        assert abs(stat_mad(normal_draws) - 0.6744897501960817) < 0.02
        assert abs(stat_mad(laplace_draws) - LAPLACE_SCALE * np.log(2)) < 0.02
        assert LAPLACE_SCALE * np.log(2) == pytest.approx(0.4901, abs=1e-4)

    def test_moment(self, laplace_draws):
        assert stat_moment([1, -1, 2], 4) == 6
        assert stat_moment(np.zeros(5), 6) == 0
        assert abs(stat_moment(laplace_draws, 4) - 6) < 0.2
        with pytest.raises(DomainError):
            stat_moment([1.0], 0)

    def test_quantile(self):
        xs = np.arange(1, 11)
        assert stat_quantile(xs, 0.1) == 1
        assert stat_quantile(xs, 1.0) == 10
        assert stat_quantile(xs[::-1], 0.4) == 4

    def test_gk_quantile_statistic(self):
        y = gk_quantile_model("M1_g_zero").simulator([2.0], 100_000, SeedSpec(3))
        assert abs(stat_quantile(y, 0.1) - (-8.95)) < 0.15

    def test_compose(self):
        assert np.array_equal(compose_statistics(["mean", "median", "variance"], [1, 2, 3]), [2, 2, 1])
        assert np.array_equal(compose_statistics(["moment4", "moment6"], [0, 0]), [0, 0])
        # ceil(0.9 * 10) = 9th order statistic
        assert np.array_equal(compose_statistics(["q10", "q90"], np.arange(1, 11)), [1, 9])

    def test_batched_axes(self):
        data = np.random.default_rng(0).normal(size=(4, 30))
        out = compose_statistics(["mean", "mad", "q90"], data)
        assert out.shape == (4, 3)
        for i in range(4):
            assert np.array_equal(out[i], compose_statistics(["mean", "mad", "q90"], data[i]))


class TestDeltaMu:
    def test_identical_populations(self):
        a = np.random.default_rng(1).integers(-5, 5, size=(3, 1, 8))
        a = np.repeat(a, 3, axis=1)
        assert stat_delta_mu_sq(MicrosatDataset(a), 1, 2) == 0

    def test_one_locus(self):
        a = np.zeros((1, 3, 2), dtype=int)
        a[0, 0] = [4, 6]
        a[0, 1] = [3, 3]
        assert stat_delta_mu_sq(MicrosatDataset(a), 1, 2) == 4
        assert stat_delta_mu_sq(MicrosatDataset(a), 2, 1) == 4

    def test_average_over_loci(self):
        a = np.zeros((2, 3, 1), dtype=int)
        a[0, 2, 0] = 2
        a[1, 2, 0] = 4
        assert stat_delta_mu_sq(MicrosatDataset(a), 1, 3) == pytest.approx((4 + 16) / 2)

    @pytest.mark.parametrize("j1,j2", [(1, 1), (0, 2), (1, 4)])
    def test_bad_pairs(self, j1, j2):
        with pytest.raises(DomainError):
            stat_delta_mu_sq(MicrosatDataset(np.zeros((1, 3, 2), dtype=int)), j1, j2)

    def test_needs_microsat(self):
        with pytest.raises(StatisticError):
            compose_statistics(["dmu12"], np.zeros(10))
        with pytest.raises(StatisticError):
            compose_statistics(["mean"], MicrosatDataset(np.zeros((1, 3, 2), dtype=int)))

    def test_dataset_validation(self):
        with pytest.raises(ShapeError):
            MicrosatDataset(np.zeros((2, 2, 2), dtype=int))
        with pytest.raises(DomainError):
            MicrosatDataset(np.full((1, 3, 2), 0.5))

    @given(hnp.arrays(np.int64, st.tuples(st.integers(1, 6), st.just(3), st.integers(1, 6)),
                      elements=st.integers(-30, 30)),
           st.sampled_from([(1, 2), (1, 3), (2, 3)]))
    def test_symmetric_nonnegative(self, alleles, pair):
        ds = MicrosatDataset(alleles)
        a, b = stat_delta_mu_sq(ds, *pair), stat_delta_mu_sq(ds, pair[1], pair[0])
        assert a == b and a >= 0


class TestRegistry:
    def test_names(self):
        for name in NAMES + ["dmu12", "dmu13", "dmu23"]:
            assert get_statistic(name).name == name

    @pytest.mark.parametrize("bad", ["moment", "q101", "dmu11", "dmu14", "skew", ""])
    def test_unknown(self, bad):
        with pytest.raises(DomainError):
            get_statistic(bad)

    def test_parse_passthrough(self):
        spec = get_statistic("mad")
        assert parse_statistics([spec, "mean"])[0] is spec

    def test_empty(self):
        with pytest.raises(DomainError):
            compose_statistics([], [1.0, 2.0])


class TestProperties:
    @given(samples, st.floats(-1e3, 1e3))
    def test_translation_invariance(self, y, c):
        scale = max(1.0, float(np.max(np.abs(y))), abs(c))
        assert abs(stat_variance(y + c) - stat_variance(y)) <= 1e-12 * scale ** 2 * 1e2
        assert abs(stat_mad(y + c) - stat_mad(y)) <= 1e-12 * scale * 1e1

    @given(samples, st.floats(-100, 100).filter(lambda x: abs(x) > 1e-3))
    def test_scaling(self, y, lam):
        assert stat_mad(lam * y) == pytest.approx(abs(lam) * stat_mad(y), rel=1e-12, abs=1e-9)
        assert stat_variance(lam * y) == pytest.approx(lam ** 2 * stat_variance(y), rel=1e-12, abs=1e-9)

    @given(samples, st.sampled_from([2, 4, 6, 8]))
    def test_even_moments_nonnegative(self, y, k):
        assert stat_moment(y, k) >= 0

    @given(samples, st.lists(st.sampled_from(NAMES), min_size=1, max_size=6, unique=True))
    def test_compose_is_concatenation(self, y, names):
        out = compose_statistics(names, y)
        singles = [compose_statistics([n], y)[0] for n in names]
        assert np.array_equal(out, singles)

    @given(samples)
    def test_exact_translation_for_dyadic_shift(self, y):
        # shifting by a power of two with integer-valued data is exact
        yi = np.round(y)
        assert stat_variance(yi + 1024.0) == pytest.approx(stat_variance(yi), rel=1e-12, abs=1e-12)
        assert stat_mad(yi + 1024.0) == stat_mad(yi)
