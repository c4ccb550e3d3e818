"""
Tests for cocycle_lab.cocycle module.
"""

import math

import numpy as np
import pytest

from cocycle_lab.analytic import TrigPolynomial
from cocycle_lab.arithmetic import GOLDEN, cf_expand
from cocycle_lab.cocycle import (
    JacobiModel,
    d_log,
    grid_log_norms,
    lower_bound_row_growth,
    one_step,
    orbit_products,
    orbit_zero_scan,
    scaled_product,
    spectral_norm,
)
from cocycle_lab.errors import SingularStepError, ValidationError


@pytest.fixture
def vanishing_model():
    """a(x) = 1 - exp(2 pi i x) has a real zero at x = 0."""
    a = TrigPolynomial({0: 1.0, 1: -1.0}, 0.5)
    return JacobiModel(1.0, a, 1.0, TrigPolynomial.cosine(2.0, 0.5), cf_expand(GOLDEN, 20))


class TestJacobiModel:
    """Tests for model construction and derived constants."""

    def test_schrodinger_constants(self, amo_model):
        assert amo_model.is_schrodinger
        assert amo_model.energy_window == pytest.approx((-22.0, 22.0))
        assert amo_model.M0 == pytest.approx(math.log(43.0))
        assert amo_model.D == pytest.approx(0.0, abs=1e-15)

    def test_jacobi_is_not_schrodinger(self, jacobi_model):
        assert not jacobi_model.is_schrodinger
        assert jacobi_model.rho == 0.4

    def test_drift_unit_modulus(self):
        """|a| = 1 on T gives D = log lambda_a."""
        a = TrigPolynomial({1: 1.0}, 0.5)
        model = JacobiModel(2.0, a, 1.0, TrigPolynomial.cosine(), cf_expand(GOLDEN, 10))
        assert model.D == pytest.approx(math.log(2.0), abs=1e-14)

    def test_drift_jensen(self):
        """mean log|3 + e(x)| = log 3, so D = log(3 lambda_a)."""
        a = TrigPolynomial({0: 3.0, 1: 1.0}, 0.5)
        model = JacobiModel(0.5, a, 1.0, TrigPolynomial.cosine(), cf_expand(GOLDEN, 10))
        assert model.D == pytest.approx(math.log(1.5), abs=1e-10)
        assert model.D_refinement < 1e-6
        assert model.D_dropped == 0

    def test_mean_of_d_is_twice_drift(self, jacobi_model):
        x = np.arange(2048) / 2048
        assert np.mean(d_log(jacobi_model, x)) == pytest.approx(2 * jacobi_model.D, abs=1e-8)

    def test_vanishing_a_drops_grid_point(self, vanishing_model):
        assert vanishing_model.D_dropped >= 1
        assert math.isfinite(vanishing_model.D)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"lambda_a": 0.0},
            {"lambda_v": -1.0},
            {"a": TrigPolynomial({}, 0.5)},
            {"v": TrigPolynomial({1: 1.0}, 0.5)},
        ],
    )
    def test_invalid(self, kwargs):
        args = {
            "lambda_a": 1.0,
            "a": TrigPolynomial.constant(1.0, 0.5),
            "lambda_v": 1.0,
            "v": TrigPolynomial.cosine(),
            "omega": cf_expand(GOLDEN, 10),
        }
        args.update(kwargs)
        with pytest.raises(ValidationError):
            JacobiModel(**args)

    def test_with_omega(self, amo_model):
        other = amo_model.with_omega(0.3)
        assert other.frequency == 0.3
        assert other.M0 == amo_model.M0
        assert amo_model.frequency == pytest.approx(GOLDEN.value)

    def test_sup_bound_on_window(self, jacobi_model):
        """||M^a(x)|| <= exp(M0) on T for every E in the energy window."""
        x = np.arange(1024) / 1024
        lo, hi = jacobi_model.energy_window
        for E in (lo, 0.0, hi):
            m11, m12, m21 = jacobi_model.entries(x, E)
            norms = [spectral_norm([[a, b], [c, 0]]) for a, b, c in zip(m11, m12, m21)]
            assert max(norms) <= math.exp(jacobi_model.M0)


class TestOneStep:
    """Tests for single factors."""

    def test_schrodinger_unimodular(self, amo_model):
        M, M_a = one_step(amo_model, 0.1, 0.3)
        assert np.linalg.det(M) == pytest.approx(1.0)
        assert M_a[0, 0] == pytest.approx(20 * math.cos(0.2 * math.pi) - 0.3)
        np.testing.assert_allclose(M, M_a)

    def test_analytic_det_modulus(self, jacobi_model):
        """|det M^a(z)| = exp(d(z))."""
        for z in (0.1, 0.37, 0.2 + 0.05j):
            _, M_a = one_step(jacobi_model, z, 0.7)
            assert abs(np.linalg.det(M_a)) == pytest.approx(math.exp(d_log(jacobi_model, z)))

    def test_raw_is_scaled_analytic(self, jacobi_model):
        M, M_a = one_step(jacobi_model, 0.21, -0.4)
        m21 = jacobi_model.lambda_a * jacobi_model.a(0.21 + jacobi_model.frequency)
        np.testing.assert_allclose(M * m21, M_a, atol=1e-14)

    def test_singular(self, vanishing_model):
        with pytest.raises(SingularStepError) as exc:
            one_step(vanishing_model, -vanishing_model.frequency, 0.0)
        assert exc.value.k == 0

    def test_spectral_norm_closed_form(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            assert spectral_norm(m) == pytest.approx(np.linalg.norm(m, 2))


class TestScaledProduct:
    """Tests for renormalised n-step products."""

    def test_free_rotation(self, free_model):
        """[[0, -1], [1, 0]]^4 = I."""
        P = scaled_product(free_model, 0.3, 0.0, 4, gauge="raw")
        np.testing.assert_array_equal(P.unit_matrix, np.eye(2))
        assert P.log_scale == 0.0

    def test_gauge_identities(self, jacobi_model):
        """Raw, analytic and unimodular products differ by scalar factors only."""
        x, E, n = 0.13, 0.4, 6
        raw = scaled_product(jacobi_model, x, E, n, gauge="raw")
        ana = scaled_product(jacobi_model, x, E, n, gauge="analytic")
        uni = scaled_product(jacobi_model, x, E, n, gauge="unimodular")
        ks = np.arange(1, n + 1)
        log_m21 = np.sum(np.log(np.abs(jacobi_model.lambda_a * jacobi_model.a(x + (ks + 1) * jacobi_model.frequency))))
        assert ana.log_scale == pytest.approx(raw.log_scale + log_m21, rel=1e-10)
        assert uni.log_scale == pytest.approx(ana.log_scale - ana.sum_d / 2, rel=1e-10)
        assert ana.sum_d == pytest.approx(np.sum(d_log(jacobi_model, x + ks * jacobi_model.frequency)))

    def test_unimodular_det(self, jacobi_model):
        P = scaled_product(jacobi_model, 0.27, 0.5, 4, gauge="unimodular")
        assert P.log_abs_det() == pytest.approx(0.0, abs=1e-8)

    def test_unit_matrix_has_unit_norm(self, amo_model):
        P = scaled_product(amo_model, 0.1, 1.0, 200)
        assert spectral_norm(P.unit_matrix) == pytest.approx(1.0)
        assert P.u == pytest.approx(P.log_scale / 200)

    def test_cocycle_property(self, jacobi_model):
        """M_{m+k}(x) = M_k(x + m w) M_m(x)."""
        x, E = 0.41, -0.2
        w = jacobi_model.frequency
        first = scaled_product(jacobi_model, x, E, 3, gauge="analytic")
        second = scaled_product(jacobi_model, x + 3 * w, E, 5, gauge="analytic")
        whole = scaled_product(jacobi_model, x, E, 8, gauge="analytic")
        joined = first.compose(second)
        assert joined.n == 8
        assert joined.log_scale == pytest.approx(whole.log_scale, rel=1e-10)
        np.testing.assert_allclose(joined.unit_matrix, whole.unit_matrix, atol=1e-10)
        assert joined.sum_d == pytest.approx(whole.sum_d)

    def test_compose_rejects_mixed_gauges(self, jacobi_model):
        a = scaled_product(jacobi_model, 0.1, 0.0, 2, gauge="raw")
        b = scaled_product(jacobi_model, 0.1, 0.0, 2, gauge="analytic")
        with pytest.raises(ValidationError):
            a.compose(b)

    def test_unknown_gauge(self, amo_model):
        with pytest.raises(ValidationError):
            scaled_product(amo_model, 0.1, 0.0, 3, gauge="polar")

    def test_singular_step_reported(self, vanishing_model):
        x = -2 * vanishing_model.frequency
        with pytest.raises(SingularStepError) as exc:
            scaled_product(vanishing_model, x, 0.0, 3, gauge="raw")
        assert exc.value.k == 1

    def test_batch_marks_singular_orbit(self, vanishing_model):
        w = vanishing_model.frequency
        batch = orbit_products(vanishing_model, [0.3, -2 * w], 0.0, 3, gauges=("unimodular", "analytic"))
        assert list(batch["unimodular"].singular_k) == [-1, 1]
        assert list(batch["analytic"].singular_k) == [-1, -1]


class TestOrbitHelpers:
    """Tests for zero scans and the row-growth lower bound."""

    def test_orbit_zero_scan(self, vanishing_model):
        w = vanishing_model.frequency
        assert orbit_zero_scan(vanishing_model, 0.0, 5, 1e-12) == [0]
        assert orbit_zero_scan(vanishing_model, -2 * w, 5, 1e-12) == [2]
        assert orbit_zero_scan(vanishing_model, 0.3, 5, 1e-12) == []
        assert orbit_zero_scan(vanishing_model, -6 * w, 5, 1e-12) == [6]

    def test_row_growth_below_norm(self, amo_model):
        for y0 in (0.0, 0.1, 0.3):
            bound = lower_bound_row_growth(amo_model, y0, 0.5, 30, x=0.2)
            u = scaled_product(amo_model, complex(0.2, y0), 0.5, 30, gauge="analytic").u
            assert bound <= u + 1e-12

    def test_row_growth_large_coupling(self, amo_model):
        """At lambda = 10 the first row grows roughly like log(lambda)."""
        assert lower_bound_row_growth(amo_model, 0.2, 0.0, 100) > 1.0


class TestGridLogNorms:
    """Tests for the batched grid kernel."""

    def test_matches_single_products(self, jacobi_model):
        grid = grid_log_norms(jacobi_model, 0.3, 10, 64, gauges=("unimodular", "analytic"))
        for j in (0, 17, 63):
            P = scaled_product(jacobi_model, j / 64, 0.3, 10, gauge="analytic")
            assert grid.log_norms["analytic"][j] == pytest.approx(P.log_scale, rel=1e-12)
            assert grid.sum_d[j] == pytest.approx(P.sum_d, rel=1e-12)
        assert not grid.dropped.any()

    def test_workers_do_not_change_bits(self, amo_model):
        serial = grid_log_norms(amo_model, 0.5, 20, 1100, workers=1)
        parallel = grid_log_norms(amo_model, 0.5, 20, 1100, workers=2)
        assert serial.log_norms["unimodular"].tobytes() == parallel.log_norms["unimodular"].tobytes()
