import numpy as np
import numpy.testing as npt
import pytest

from stainforge.sampler import (
    EPS_STD,
    VirtualTemplate,
    derive_rng,
    mean_template,
    sample_scalar,
    sample_template,
)
from stainforge.stats import DistributionFamily, StyleDistribution

FAMILIES = [
    DistributionFamily("gaussian"),
    DistributionFamily("t", dof=5),
    DistributionFamily("uniform"),
    DistributionFamily("laplace"),
]


def _dist(space="lab", family=DistributionFamily("gaussian"), var=1.0):
    return StyleDistribution(
        space,
        mean_of_avg=np.array([60.0, 10.0, -5.0]),
        var_of_avg=np.full(3, var),
        mean_of_std=np.array([9.0, 4.0, 3.0]),
        var_of_std=np.full(3, var * 0.25),
        family=family,
        n_samples=50,
    )


class TestSampleScalar:
    @pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.kind)
    def test_moments_match(self, family):
        rng = np.random.default_rng(2024)
        draws = np.array([sample_scalar(family, 10.0, 2.0, rng) for _ in range(40000)])
        assert draws.mean() == pytest.approx(10.0, abs=0.05)
        assert draws.std() == pytest.approx(2.0, rel=0.03)

    def test_uniform_support_is_sqrt3_sigma(self):
        rng = np.random.default_rng(7)
        fam = DistributionFamily("uniform")
        draws = np.array([sample_scalar(fam, 0.0, 1.0, rng) for _ in range(20000)])
        half = np.sqrt(3.0)
        assert draws.min() >= -half and draws.max() <= half
        assert draws.max() > half * 0.999  # support actually reached

    @pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.kind)
    def test_zero_scale_returns_location_exactly(self, family):
        rng = np.random.default_rng(1)
        before = rng.bit_generator.state
        assert sample_scalar(family, -3.25, 0.0, rng) == -3.25
        assert rng.bit_generator.state == before  # no draw consumed

    def test_negative_scale_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            sample_scalar(DistributionFamily("gaussian"), 0.0, -1.0, np.random.default_rng(0))

    def test_heavier_tails_than_gaussian(self):
        rng = np.random.default_rng(42)
        n = 60000
        gauss = np.array([sample_scalar(DistributionFamily("gaussian"), 0, 1, rng) for _ in range(n)])
        heavy = np.array([sample_scalar(DistributionFamily("t", dof=5), 0, 1, rng) for _ in range(n)])
        assert np.mean(np.abs(heavy) > 3.0) > np.mean(np.abs(gauss) > 3.0)


class TestDeriveRng:
    def test_same_key_same_stream(self):
        a = derive_rng(123, 4).random(8)
        b = derive_rng(123, 4).random(8)
        npt.assert_array_equal(a, b)

    def test_different_indices_differ(self):
        a = derive_rng(123, 0).random(8)
        b = derive_rng(123, 1).random(8)
        assert not np.array_equal(a, b)

    def test_different_seeds_differ(self):
        a = derive_rng(1, 0).random(8)
        b = derive_rng(2, 0).random(8)
        assert not np.array_equal(a, b)

    def test_negative_seed_usable_and_stable(self):
        a = derive_rng(-5, 2).random(4)
        b = derive_rng(-5, 2).random(4)
        npt.assert_array_equal(a, b)


class TestSampleTemplate:
    def test_deterministic_given_state(self):
        d = _dist()
        t1 = sample_template(d, derive_rng(9, 0))
        t2 = sample_template(d, derive_rng(9, 0))
        npt.assert_array_equal(t1.avg, t2.avg)
        npt.assert_array_equal(t1.std, t2.std)
        assert t1.space == "lab"

    def test_zero_variance_equals_mean_template(self):
        d = StyleDistribution(
            "hsv",
            np.array([180.0, 0.4, 0.6]),
            np.zeros(3),
            np.array([30.0, 0.1, 0.05]),
            np.zeros(3),
            n_samples=10,
        )
        sampled = sample_template(d, derive_rng(0, 0))
        mean = mean_template(d)
        npt.assert_array_equal(sampled.avg, mean.avg)
        npt.assert_array_equal(sampled.std, mean.std)

    def test_avg_clamped_to_channel_range(self):
        d = StyleDistribution(
            "hsv",
            np.array([500.0, -2.0, 0.5]),  # out of range on purpose
            np.zeros(3),
            np.array([1.0, 0.1, 0.1]),
            np.zeros(3),
            n_samples=10,
        )
        t = mean_template(d)
        npt.assert_array_equal(t.avg, [360.0, 0.0, 0.5])

    def test_std_floored(self):
        d = StyleDistribution(
            "lab",
            np.array([50.0, 0.0, 0.0]),
            np.zeros(3),
            np.zeros(3),  # degenerate fitted std
            np.zeros(3),
            n_samples=10,
        )
        t = sample_template(d, derive_rng(3, 0))
        npt.assert_array_equal(t.std, [EPS_STD] * 3)

    @pytest.mark.parametrize("family", FAMILIES, ids=lambda f: f.kind)
    def test_template_moments(self, family):
        d = _dist(family=family, var=4.0)
        rng = derive_rng(1234, 0)
        avgs = np.array([sample_template(d, rng).avg for _ in range(8000)])
        npt.assert_allclose(avgs.mean(axis=0), d.mean_of_avg, atol=0.12)
        npt.assert_allclose(avgs.std(axis=0), np.sqrt(d.var_of_avg), rtol=0.05)

    def test_fixed_draw_order(self):
        # avg channels are drawn before std channels, each in index order
        d = _dist(family=DistributionFamily("gaussian"), var=1.0)
        rng = derive_rng(77, 0)
        t = sample_template(d, rng)
        rng2 = derive_rng(77, 0)
        manual_avg = [sample_scalar(d.family, m, np.sqrt(v), rng2) for m, v in zip(d.mean_of_avg, d.var_of_avg)]
        manual_std = [sample_scalar(d.family, m, np.sqrt(v), rng2) for m, v in zip(d.mean_of_std, d.var_of_std)]
        npt.assert_array_equal(t.avg, manual_avg)
        npt.assert_array_equal(t.std, manual_std)

    def test_template_is_plain_record(self):
        t = VirtualTemplate("lab", np.zeros(3), np.ones(3))
        assert t.space == "lab"
        assert t.avg.shape == (3,) and t.std.shape == (3,)


class TestFamilyShapes:
    def test_laplace_absolute_deviation_matches_scale(self):
        rng = np.random.default_rng(991)
        fam = DistributionFamily("laplace")
        draws = np.array([sample_scalar(fam, 0.0, 1.0, rng) for _ in range(100_000)])
        target = 1.0 / np.sqrt(2.0)  # mean absolute deviation of Laplace(0, b) is b
        assert abs(np.abs(draws).mean() - target) <= 0.02 * target


class TestFreshness:
    def test_consecutive_templates_all_differ(self):
        dist = StyleDistribution(
            "lab",
            np.array([60.0, 25.0, -8.0]),
            np.array([4.0, 2.0, 1.0]),
            np.array([7.0, 5.0, 4.0]),
            np.array([0.5, 0.3, 0.2]),
            n_samples=9,
        )
        rng = derive_rng(5, 0)
        seen = set()
        for _ in range(20):
            tpl = sample_template(dist, rng)
            seen.add(tpl.avg.tobytes() + tpl.std.tobytes())
        assert len(seen) == 20
