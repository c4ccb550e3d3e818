"""
Tests for cocycle_lab.deviation module.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from cocycle_lab.analytic import log_potential_I
from cocycle_lab.arithmetic import GOLDEN, cf_expand, liouville_surrogate
from cocycle_lab.deviation import (
    birkhoff_block_bound,
    birkhoff_sample,
    birkhoff_sum,
    deviation_measure,
    deviation_profile,
    excluded_rational_sum,
    exp_moment,
    finite_set_log_moment,
    ldt_experiment,
    rational_kernel_sum,
)
from cocycle_lab.errors import SingularStepError, ValidationError


class TestBirkhoffSum:
    """Tests for F_{n,zeta}(x)."""

    def test_single_term(self):
        zeta = 0.1 + 0.2j
        assert birkhoff_sum(zeta, 0.3, 1, GOLDEN) == pytest.approx(math.log(abs(0.3 - zeta)))
        assert birkhoff_sum(zeta, 1.3, 1, GOLDEN) == pytest.approx(math.log(abs(0.3 - zeta)))

    def test_hit_returns_minus_inf(self):
        assert birkhoff_sum(0.25, 0.25, 3, 0.1) == -math.inf

    def test_hit_strict(self):
        with pytest.raises(SingularStepError) as exc:
            birkhoff_sum(0.25 + 0j, 0.05, 4, Fraction(1, 10), strict=True)
        assert exc.value.k == 2

    def test_bad_n(self):
        with pytest.raises(ValidationError):
            birkhoff_sum(1j, 0.1, 0, GOLDEN)

    @pytest.mark.parametrize("p,q", [(1, 7), (3, 8), (5, 13)])
    def test_rational_step_matches_enumeration(self, p, q):
        """Bit-identical to the direct enumeration of the same points."""
        for x in (0.0, 0.137, 0.9):
            direct = rational_kernel_sum(0.3 + 0.1j, x, q, p)
            assert birkhoff_sum(0.3 + 0.1j, x, q, Fraction(p, q)) == direct

    def test_rational_sum_shift_invariant(self):
        q = 16
        for x in (0.01, 0.33, 0.71):
            a = rational_kernel_sum(0.4 + 0.05j, x, q)
            b = rational_kernel_sum(0.4 + 0.05j, x + 1 / q, q)
            assert a == pytest.approx(b, rel=1e-12, abs=1e-12)

    def test_kernel_bound_at_fibonacci(self, golden_cf):
        """|F_{q_s}(x) - q_s I(i)| <= 20 log q_s + |log dist(nearest point, i)|."""
        rng = np.random.default_rng(5)
        I_i = log_potential_I(1j)
        for s in range(5, 13):
            q = golden_cf.q(s)
            for x in rng.uniform(0, 1, size=10):
                deviation = abs(birkhoff_sum(1j, x, q, golden_cf) - q * I_i)
                points = (x + np.arange(q) * golden_cf.omega) % 1.0
                nearest = np.min(np.abs(points - 1j))
                assert deviation <= 20 * math.log(q) + abs(math.log(nearest))


class TestExcludedRationalSum:
    """Tests for the nearest-point-excluded rational sum."""

    def test_two_points(self):
        result = excluded_rational_sum(0.0, 0.3, 2)
        assert result.k0 == 1
        assert result.sum_excluding_nearest == pytest.approx(math.log(0.3))
        assert result.residual == pytest.approx(abs(math.log(0.3) - 2 * log_potential_I(0.3)))

    def test_shift_invariant(self):
        q = 64
        for x in (0.0123, 0.5, 0.87):
            a = excluded_rational_sum(x, 0.3 + 0.01j, q)
            b = excluded_rational_sum(x + 1 / q, 0.3 + 0.01j, q)
            assert a.residual == pytest.approx(b.residual, abs=1e-9)

    def test_q_must_be_at_least_two(self):
        with pytest.raises(ValidationError):
            excluded_rational_sum(0.1, 1j, 1)

    @pytest.mark.parametrize("zeta", [1j, 0.3, 3.0])
    def test_residual_budget(self, zeta):
        """residual / log q stays below 20 for q = 8..4096."""
        rng = np.random.default_rng(8)
        xs = rng.uniform(0, 1, size=64)
        for q in (2**j for j in range(3, 13)):
            worst = max(excluded_rational_sum(x, zeta, q).normalized for x in xs)
            assert worst <= 20


class TestBirkhoffSample:
    """Tests for F_n over an x-grid."""

    def test_mean_matches_potential(self, golden_cf):
        sample = birkhoff_sample(1j, golden_cf, golden_cf.q(12), 4096)
        assert golden_cf.q(12) == 233
        assert sample.mean_gap < 5e-3
        assert sample.excluded == 0
        assert sample.to_dict()["grid"] == 4096

    def test_real_zeta_excludes_hits(self):
        sample = birkhoff_sample(0.5, cf_expand(GOLDEN, 20), 10, 1024)
        assert sample.excluded >= 1
        assert np.isnan(sample.values[512])
        assert len(sample.csv_rows()) == 1024

    def test_workers_do_not_change_bits(self, golden_cf):
        serial = birkhoff_sample(0.2 + 0.3j, golden_cf, 89, 1500, workers=1)
        parallel = birkhoff_sample(0.2 + 0.3j, golden_cf, 89, 1500, workers=2)
        assert serial.values.tobytes() == parallel.values.tobytes()


class TestBlockBound:
    """Tests for the l q_s block estimate."""

    @pytest.mark.parametrize("zeta", [1j, 0.3, 0.7 + 0.01j])
    def test_holds(self, golden_cf, zeta):
        rng = np.random.default_rng(2)
        for x in rng.uniform(0, 1, size=8):
            for s, l in ((6, 1), (8, 1), (10, 1)):
                assert birkhoff_block_bound(zeta, x, golden_cf, s, l).holds

    def test_sizes(self, golden_cf):
        bound = birkhoff_block_bound(1j, 0.2, golden_cf, 8, 1)
        assert (bound.n, bound.q_s, bound.l) == (34, 34, 1)
        assert bound.set_distance <= 0.5

    def test_block_too_long(self, golden_cf):
        """2 q_8 = 68 is not below q_9 = 55."""
        with pytest.raises(ValidationError):
            birkhoff_block_bound(1j, 0.2, golden_cf, 8, 2)


class TestDeviationMeasure:
    """Tests for grid deviation-set measures."""

    def test_free_model_zero(self, free_model):
        profile = deviation_profile(free_model, 0.0, 30, 512)
        assert profile.L_n == pytest.approx(0.0, abs=1e-12)
        assert profile.measure(1e-6) == 0.0

    def test_grid_too_small(self, free_model):
        with pytest.raises(ValidationError):
            deviation_profile(free_model, 0.0, 10, 256)

    def test_wide_band_empty(self, amo_model):
        assert deviation_measure(amo_model, 0.3, 50, 2 * amo_model.M0 + 0.1, 512) == 0.0

    def test_monotone_in_delta(self, amo_model):
        profile = deviation_profile(amo_model, 0.0, 40, 1024)
        measures = [profile.measure(d) for d in (0.01, 0.05, 0.1, 0.5, 1.0)]
        assert all(b <= a for a, b in zip(measures, measures[1:]))

    def test_bad_delta(self, amo_model):
        with pytest.raises(ValidationError):
            deviation_measure(amo_model, 0.0, 10, 0.0, 512)


class TestLDTExperiment:
    """Tests for deviation reports across n."""

    def test_free_model_floor(self, free_model):
        report = ldt_experiment(free_model, 0.0, [10, 20, 40], 0.1, 512)
        assert report.measures == [0.0, 0.0, 0.0]
        assert report.fitted_rate is None
        assert not report.rate_negative
        assert report.floor == 1 / 512
        assert report.bound_rate == pytest.approx(-0.1)
        assert report.constants == {"c_abs": 1.0, "mu_guess": 1.0}

    def test_sharp_reference(self, free_model):
        report = ldt_experiment(
            free_model, 0.0, [10, 20, 40], 0.1, 512, c_abs=2.0, mu_guess=4.0,
            L_hat=1.5, sharp_rate_coefficient=0.01,
        )
        assert report.bound_rate == pytest.approx(-0.05)
        assert report.sharp_reference_rate == pytest.approx(-0.015)
        assert report.to_dict()["decreasing"] is False

    @pytest.mark.parametrize("n_list", [[10, 20], [10, 30, 20], [10, 10, 20]])
    def test_bad_n_list(self, free_model, n_list):
        with pytest.raises(ValidationError):
            ldt_experiment(free_model, 0.0, n_list, 0.1, 512)


class TestExpMoment:
    """Tests for the exponential moment of F_n - n I."""

    def test_small_sigma_near_one(self, golden_cf):
        estimate = exp_moment(1e-6, 1j, golden_cf, 89, 1024)
        assert estimate.value == pytest.approx(1.0, abs=1e-3)
        assert estimate.printed_exponent == pytest.approx(5 * math.log(2))

    def test_real_zeta_exclusion_small(self, golden_cf):
        estimate = exp_moment(0.1, 0.5, golden_cf, 100, 4096)
        assert estimate.excluded < 0.01 * 4096
        assert math.isfinite(estimate.log_value)

    def test_bounded_along_fibonacci(self, golden_cf):
        ns = [golden_cf.q(s) for s in range(8, 16)]
        ratios = [exp_moment(0.1, 1j, golden_cf, n, 2048).log_ratio for n in ns]
        assert stats.linregress(ns, ratios).slope <= 0.05
        assert max(ns) <= 1000

    def test_plain_float_has_no_beta(self):
        estimate = exp_moment(0.1, 1j, 0.3819660112501051, 21, 256)
        assert estimate.beta_hat is None
        assert estimate.to_dict()["five_beta_hat"] is None

    @pytest.mark.parametrize("sigma", [0.0, 1.0])
    def test_bad_sigma(self, golden_cf, sigma):
        with pytest.raises(ValidationError):
            exp_moment(sigma, 1j, golden_cf, 10, 64)


class TestFiniteSetMoment:
    """Tests for the finite-set log moment."""

    def test_single_point_sharp(self):
        """For one point the integral equals 2^s / (1 - s) exactly."""
        result = finite_set_log_moment([0.5], 0.5, 4096)
        assert result.holds
        assert result.value == pytest.approx(result.bound, rel=0.05)

    def test_several_points(self):
        result = finite_set_log_moment([0.1, 0.4, 0.7], 0.3, 2048)
        assert result.holds
        assert result.size == 3

    def test_invalid(self):
        with pytest.raises(ValidationError):
            finite_set_log_moment([], 0.5, 64)
        with pytest.raises(ValidationError):
            finite_set_log_moment([0.2], 1.0, 64)


@pytest.mark.slow
class TestDeskScaleLDT:
    """Large deviation trend on lambda = 10 almost Mathieu with golden frequency."""

    N_LIST = [100, 200, 400, 800]

    @pytest.fixture
    def L_hat(self, amo_model):
        return deviation_profile(amo_model, 0.0, 800, 8192).L_n

    def test_quarter_delta_below_grid_floor(self, amo_model, L_hat):
        """At delta = L_hat / 4 no grid point deviates: nothing to fit."""
        report = ldt_experiment(amo_model, 0.0, self.N_LIST, 0.25 * L_hat, 8192, L_hat=L_hat)
        assert max(report.measures) <= report.floor
        assert not report.rate_negative

    def test_measures_decrease(self, amo_model, L_hat):
        report = ldt_experiment(amo_model, 0.0, self.N_LIST, 0.01 * L_hat, 8192, L_hat=L_hat)
        nonzero = [m for m in report.measures if m > 0]
        assert len(nonzero) >= 2
        assert report.measures[0] > 10 * report.floor
        assert nonzero == report.measures[: len(nonzero)]
        assert all(b < a for a, b in zip(nonzero, nonzero[1:]))
        assert report.rate_negative

    def test_liouville_deviates_more_than_golden(self, amo_model):
        """Near 1/2 the orbit is almost 2-periodic, so u_n barely averages."""
        liouville = amo_model.with_omega(liouville_surrogate([1, 1, 10000]))
        golden = deviation_profile(amo_model, 0.0, 100, 1024)
        near_rational = deviation_profile(liouville, 0.0, 100, 1024)
        delta = 0.1 * golden.L_n
        assert near_rational.measure(delta) > 0.5
        assert near_rational.measure(delta) > 2 * golden.measure(delta)
