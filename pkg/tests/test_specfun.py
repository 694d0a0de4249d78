import math

import numpy as np
import pytest
import scipy.special
from scipy.integrate import quad

from conftest import bessel_series, rng
from vortexoam.specfun import (
    DomainError,
    IntegrationError,
    adaptive_integrate,
    beam_reconstruct,
    bessel_j,
    bessel_j_orders,
    composite_gauss,
    gauss_rule,
    graf_coefficients,
    graf_truncation,
)

# value frozen from the series oracle below (and cross-checked against scipy)
J2_AT_1 = 0.11490348493190048


class TestBesselJ:
    def test_zero_argument(self):
        assert bessel_j(0, 0.0) == 1.0
        assert bessel_j(3, 0.0) == 0.0

    def test_series_oracle_value(self):
        assert abs(bessel_series(2, 1.0) - J2_AT_1) < 1e-16
        assert abs(bessel_j(2, 1.0) - J2_AT_1) < 1e-14

    def test_negative_argument_rejected(self):
        with pytest.raises(DomainError):
            bessel_j(0, -1.0)

    def test_huge_order_rejected(self):
        with pytest.raises(DomainError):
            bessel_j(10**6 + 1, 1.0)

    def test_deep_order_underflows_to_zero(self):
        assert bessel_j(10**5, 10.0) == 0.0

    def test_parity(self):
        r = rng(1)
        for _ in range(200):
            n = int(r.integers(0, 40))
            x = float(r.uniform(0.0, 120.0))
            assert bessel_j(-n, x) == (-1.0) ** n * bessel_j(n, x)

    def test_recurrence_residual(self):
        r = rng(2)
        for _ in range(300):
            n = int(r.integers(1, 51)) * int(r.choice([-1, 1]))
            x = float(r.uniform(0.1, 100.0))
            res = bessel_j(n - 1, x) + bessel_j(n + 1, x) - (2.0 * n / x) * bessel_j(n, x)
            assert abs(res) < 1e-10

    @pytest.mark.parametrize("x", [1e-8, 0.5, 3.0, 7.9, 8.1, 29.0, 31.0, 180.0, 999.0])
    def test_against_scipy_grid(self, x):
        for n in range(0, 61, 5):
            assert abs(bessel_j(n, x) - scipy.special.jv(n, x)) < 1e-13

    def test_series_oracle_random(self):
        r = rng(3)
        for _ in range(100):
            n = int(r.integers(0, 12))
            x = float(r.uniform(0.0, 6.0))
            assert abs(bessel_j(n, x) - bessel_series(n, x)) < 1e-13

    def test_orders_block_matches_scalar(self):
        x = np.concatenate([np.array([0.0, 1e-7, 0.3]),
                            rng(4).uniform(0.5, 900.0, 60),
                            rng(5).uniform(900.0, 7000.0, 20)])
        block = bessel_j_orders(30, x)
        ref = np.array([[bessel_j(n, v) for v in x] for n in range(31)])
        assert np.max(np.abs(block - ref)) < 1e-12


class TestGaussRule:
    def test_midpoint_weight(self):
        rule = gauss_rule(1, -1.0, 1.0)
        assert abs(rule.apply(lambda x: np.ones_like(x)) - 2.0) < 1e-15

    def test_polynomial_exactness(self):
        rule = gauss_rule(5, 0.0, 1.0)
        assert abs(rule.apply(lambda x: x**4) - 0.2) < 1e-14
        # degree 2*order - 1 boundary
        rule = gauss_rule(3, 0.0, 1.0)
        assert abs(rule.apply(lambda x: x**5) - 1.0 / 6.0) < 1e-14

    def test_sine_integral(self):
        rule = gauss_rule(20, 0.0, math.pi)
        assert abs(rule.apply(np.sin) - 2.0) < 1e-12

    def test_invariants(self):
        for order, a, b in [(1, -1, 1), (7, 0, 2.5), (40, -3, 17)]:
            rule = gauss_rule(order, a, b)
            assert abs(np.sum(rule.weights) - (b - a)) < 1e-12 * (b - a)
            assert np.all(np.diff(rule.nodes) > 0)
            assert rule.nodes[0] > a and rule.nodes[-1] < b

    def test_invalid_interval(self):
        with pytest.raises(ValueError):
            gauss_rule(4, 1.0, 1.0)
        with pytest.raises(ValueError):
            gauss_rule(0, 0.0, 1.0)


# analytic reference integrals: (f, a, b, exact, split_points)
_ANALYTIC_CASES = [
    (lambda x: x, 0.0, 1.0, 0.5, ()),
    (lambda x: x**7, 0.0, 2.0, 32.0, ()),
    (lambda x: np.exp(-x), 0.0, 50.0, 1.0 - math.exp(-50.0), ()),
    (lambda x: np.sin(x), 0.0, math.pi, 2.0, ()),
    (lambda x: np.cos(40.0 * x), 0.0, 1.0, math.sin(40.0) / 40.0, ()),
    (lambda x: 1.0 / (1.0 + x * x), -1.0, 1.0, math.pi / 2.0, ()),
    (lambda x: -np.log(x), 0.0, 1.0, 1.0, (0.0,)),
    (lambda x: np.log(x) ** 2, 0.0, 1.0, 2.0, (0.0,)),
    (lambda x: 1.0 / np.sqrt(x), 0.0, 1.0, 2.0, (0.0,)),
    (lambda x: 1.0 / np.sqrt(np.abs(x - 0.5)), 0.0, 1.0, 2.0 * math.sqrt(2.0), (0.5,)),
    (lambda x: np.exp(x) * np.sin(20.0 * x), 0.0, 2.0,
     (math.exp(2.0) * (math.sin(40.0) - 20.0 * math.cos(40.0)) + 20.0) / 401.0, ()),
    (lambda x: x * np.abs(np.sin(x)), 0.0, 2.0 * math.pi, 4.0 * math.pi, (math.pi,)),
    (lambda x: np.sqrt(x) * np.log(x), 0.0, 1.0, -4.0 / 9.0, (0.0,)),
]


class TestAdaptiveIntegrate:
    @pytest.mark.parametrize("case", range(len(_ANALYTIC_CASES)))
    def test_analytic_integrals(self, case):
        f, a, b, exact, hints = _ANALYTIC_CASES[case]
        res = adaptive_integrate(f, a, b, 1e-11, split_points=hints)
        assert res.converged
        assert abs(res.value - exact) <= max(1e-11 * abs(exact), 5e-12)

    def test_oscillatory_bessel_identity(self):
        # d/dx [x J_1(x)] = x J_0(x)
        f = lambda x: scipy.special.jv(0, x) * x
        res = adaptive_integrate(f, 0.0, 40.0, 1e-12)
        assert abs(res.value - 40.0 * scipy.special.jv(1, 40.0)) < 1e-10

    def test_scipy_cross_check(self):
        f = lambda x: np.exp(-0.3 * x) * np.cos(3.0 * x)
        mine = adaptive_integrate(f, 0.0, 10.0, 1e-12)
        ref, _ = quad(f, 0.0, 10.0, epsabs=1e-14, epsrel=1e-13)
        assert abs(mine.value - ref) < 1e-11

    def test_nan_aborts_with_diagnostic(self):
        def bad(x):
            return np.where(x > 0.5, np.nan, x)

        with pytest.raises(IntegrationError):
            adaptive_integrate(bad, 0.0, 1.0, 1e-8)

    def test_budget_exhaustion_flagged(self):
        f = lambda x: 1.0 / np.sqrt(np.abs(x - math.pi / 6.0))
        res = adaptive_integrate(f, 0.0, 1.0, 1e-13, max_intervals=60)
        assert not res.converged
        assert res.error > 0

    def test_tuple_unpacking(self):
        value, err = adaptive_integrate(lambda x: x * x, 0.0, 1.0, 1e-12)
        assert abs(value - 1.0 / 3.0) < 1e-12
        assert err >= 0

    def test_composite_gauss_partition(self):
        nodes, weights = composite_gauss(np.array([0.0, 0.3, 1.0]), 6)
        assert abs(np.sum(weights * nodes**3) - 0.25) < 1e-14


class TestGrafCoefficients:
    def test_zero_displacement(self):
        gc = graf_coefficients(2, 0.0, 1e-12)
        assert gc.truncation == 0
        assert gc.coefficients == {0: 1.0}

    def test_center_coefficient(self):
        gc = graf_coefficients(0, 5.0, 1e-10)
        assert gc.truncation >= 5
        assert abs(gc.coefficient(0) - bessel_j(0, 5.0)) < 1e-15

    def test_sum_rule(self):
        for x in (0.5, 3.0, 7.0):
            gc = graf_coefficients(0, x, 1e-10)
            total = sum(v * v for v in gc.coefficients.values())
            assert total <= 1.0 + 1e-12
            assert abs(total - 1.0) < 1e-10

    def test_truncation_margin(self):
        for x in (1.0, 4.0, 9.0):
            assert graf_truncation(x) >= math.ceil(x) + 8


class TestBeamReconstruct:
    def test_on_axis_identity(self):
        k = 1.7
        got = beam_reconstruct(1, k, 0.0, 2.0, 0.3, 0)
        want = bessel_j(1, 2.0 * k) * np.exp(1j * 0.3)
        assert abs(got - want) < 1e-15

    def test_shifted_zero_order(self):
        # r' = 1 at phi' = pi/2 with R0 = 1: lab radius sqrt(2)
        got = beam_reconstruct(0, 1.0, 1.0, 1.0, math.pi / 2.0, 30)
        assert abs(got - bessel_j(0, math.sqrt(2.0))) < 1e-12

    @pytest.mark.parametrize("k_rho_R0,P", [(0.5, 20), (2.0, 25), (5.0, 32)])
    def test_grid_reconstruction(self, k_rho_R0, P):
        worst = 0.0
        for rp in np.linspace(0.1, 6.0, 10):
            for ph in np.linspace(0.0, 2.0 * math.pi, 10, endpoint=False):
                x = rp * math.cos(ph) + k_rho_R0
                y = rp * math.sin(ph)
                direct = (scipy.special.jv(3, math.hypot(x, y))
                          * np.exp(1j * 3.0 * math.atan2(y, x)))
                got = beam_reconstruct(3, 1.0, k_rho_R0, rp, ph, P)
                worst = max(worst, abs(got - direct))
        assert worst < 1e-10

    def test_error_decreases_with_truncation(self):
        k_rho_R0 = 2.0
        point = (1.7, 1.1)

        def err(P):
            x = point[0] * math.cos(point[1]) + k_rho_R0
            y = point[0] * math.sin(point[1])
            direct = (scipy.special.jv(1, math.hypot(x, y))
                      * np.exp(1j * math.atan2(y, x)))
            return abs(beam_reconstruct(1, 1.0, k_rho_R0, *point, P) - direct)

        errors = [err(P) for P in (2, 5, 8, 12, 20)]
        assert all(a >= b - 1e-15 for a, b in zip(errors, errors[1:]))
        assert errors[-1] < 1e-12
