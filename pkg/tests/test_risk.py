import json

import numpy as np
import pytest

from rkhsreg.covariance import CustomCovariance, GeneralizedWiener, OrnsteinUhlenbeck, Wiener, gram, quadratic_form
from rkhsreg.designs import midpoint_design, uniform_regular_design
from rkhsreg.estimators import LinearSmoother, Method, gm_weights, projection_weights, representer_values
from rkhsreg.kernels import ScaledKernel
from rkhsreg.risk import (
    AsymptoticRisk,
    RiskError,
    asymptotic_constants,
    asymptotic_imse,
    exact_bias,
    exact_variance,
    optimal_bandwidth_closed,
    optimal_bandwidth_exact,
    residual_norm2,
    risk_report,
    sigma2_xh,
    variance_gap_limit,
)
from rkhsreg.simulation import M1, M2
from tests.conftest import richardson_trapezoid_2d

CK = 100 / 231


def golden_section(f, a, b, tol=1e-10):
    """Plain golden-section search; an oracle independent of scipy."""
    invphi = (np.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    while b - a > tol:
        if f(c) < f(d):
            b, d = d, c
            c = b - invphi * (b - a)
        else:
            a, c = c, d
            d = a + invphi * (b - a)
    return 0.5 * (a + b)


class TestBiasVariance:
    def test_constant_curve_no_bias(self, quartic):
        d = midpoint_design(20)
        sm = gm_weights(ScaledKernel(0.5, 0.2, quartic), d)
        assert exact_bias(sm, lambda x: np.full(np.shape(x), 4.0), d) == pytest.approx(0.0, abs=1e-12)

    def test_linear_curve_symmetric_weights(self, quartic):
        d = midpoint_design(20)
        sm = gm_weights(ScaledKernel(0.5, 0.2, quartic), d)
        assert abs(exact_bias(sm, lambda x: 3 * x - 1, d)) < 1e-12

    def test_m1_projection_center(self, quartic):
        d = uniform_regular_design(100)
        sm = projection_weights(Wiener(), ScaledKernel(0.5, 0.1, quartic), d)
        assert abs(exact_bias(sm, M1, d)) < 0.01

    def test_variance_zero_and_selector(self):
        d = midpoint_design(4)
        assert exact_variance(LinearSmoother(Method.GASSER_MULLER, 0.5, 0.1, np.zeros(4)), Wiener(), d, 3) == 0.0
        e = LinearSmoother(Method.GASSER_MULLER, 0.5, 0.1, np.eye(4)[2])
        assert exact_variance(e, Wiener(), d, 5) == pytest.approx(d.points[2] / 5)

    def test_projection_variance_identity(self, quartic):
        d = midpoint_design(10)
        sk = ScaledKernel(0.4, 0.3, quartic)
        g = gram(Wiener(), d)
        f = representer_values(Wiener(), sk, d.points)
        v = exact_variance(projection_weights(Wiener(), sk, d), Wiener(), d, 7)
        assert v == pytest.approx(quadratic_form(g, f, f, fast_path=False) / 7, abs=1e-10)

    def test_bad_m(self):
        with pytest.raises(RiskError):
            exact_variance(LinearSmoother(Method.GASSER_MULLER, 0.5, 0.1, [1.0]), Wiener(), midpoint_design(1), 0)


class TestSigma2:
    @pytest.mark.parametrize("x", [0.3, 0.5, 0.8])
    @pytest.mark.parametrize("h", [0.05, 0.1, 0.15])
    def test_wiener_interior_identity(self, quartic, x, h):
        # for an interior window, sigma2 = x - C_K h / 2 exactly
        assert sigma2_xh(Wiener(), ScaledKernel(x, h, quartic)) == pytest.approx(x - CK * h / 2, abs=1e-13)

    def test_small_h_limit(self, quartic):
        assert sigma2_xh(Wiener(), ScaledKernel(0.5, 1e-4, quartic)) == pytest.approx(0.5, abs=1e-4)

    def test_ou_against_trapezoid(self, quartic):
        sk = ScaledKernel(0.5, 0.1, quartic)

        def integrand(s, t):
            return sk(s) * np.exp(-np.abs(s - t)) * sk(t)

        oracle = richardson_trapezoid_2d(integrand, 0.4, 0.6, 512)
        assert sigma2_xh(OrnsteinUhlenbeck(1.0), sk) == pytest.approx(oracle, abs=1e-8)

    def test_custom_matches_builtin(self, quartic):
        sk = ScaledKernel(0.2, 0.3, quartic)
        custom = CustomCovariance(lambda s, t: np.exp(-2.0 * np.abs(s - t)), alpha=lambda t: 4 * np.ones_like(t))
        assert sigma2_xh(custom, sk) == pytest.approx(sigma2_xh(OrnsteinUhlenbeck(2.0), sk), abs=1e-10)


class TestResidual:
    def test_decreases_with_n(self, quartic):
        sk = ScaledKernel(0.5, 0.3, quartic)
        r = [residual_norm2(Wiener(), sk, uniform_regular_design(n)) for n in (10, 20, 40, 80)]
        assert all(b < a for a, b in zip(r, r[1:]))
        assert min(r) >= 0.0

    def test_rate(self, quartic):
        sk = ScaledKernel(0.5, 0.3, quartic)
        ns = np.array([10, 20, 40, 80])
        scaled = [residual_norm2(Wiener(), sk, uniform_regular_design(n)) * n**2 for n in ns]
        assert 0.1 < min(scaled) and max(scaled) < 1.0

    @pytest.mark.parametrize("model", [Wiener(), OrnsteinUhlenbeck(1.0), GeneralizedWiener(2.0)])
    def test_nonnegative_before_clamp(self, quartic, model):
        for n in (5, 20, 80):
            for x in (0.0, 0.3, 0.9):
                d = midpoint_design(n)
                sk = ScaledKernel(x, 0.2, quartic)
                f = representer_values(model, sk, d.points)
                assert sigma2_xh(model, sk) - f @ gram(model, d).solve(f) >= -1e-12


class TestReport:
    def test_decomposition(self, quartic):
        rep = risk_report("pro", OrnsteinUhlenbeck(1.0), M1, quartic, midpoint_design(10), 0.3, 20)
        assert np.array_equal(rep.mse, rep.bias2 + rep.variance)
        assert rep.IMSE == pytest.approx(rep.Ibias2 + rep.Ivar, rel=1e-12)
        assert rep.grid.size == 201

    def test_serialization(self, quartic):
        rep = risk_report("gm", Wiener(), M1, quartic, midpoint_design(10), 0.335, 10, grid=11)
        lines = rep.to_csv().splitlines()
        assert lines[0] == "x,bias2,var,mse" and len(lines) == 12
        summary = json.loads(rep.to_json())
        assert set(summary) >= {"Ibias2", "Ivar", "IMSE", "h"}

    @pytest.mark.parametrize("method,h,ref", [("gm", 0.335, 4.658e-2), ("pro", 0.321, 4.530e-2)])
    def test_table_row_wiener(self, quartic, method, h, ref):
        rep = risk_report(method, Wiener(), M1, quartic, midpoint_design(10), h, 10)
        assert rep.IMSE == pytest.approx(ref, rel=0.10)

    def test_table_row_ou(self, quartic):
        rep = risk_report("pro", OrnsteinUhlenbeck(1.0), M1, quartic, midpoint_design(10), 0.187, 100)
        assert rep.IMSE == pytest.approx(9.453e-3, rel=0.10)

    def test_weight_density(self, quartic):
        d = midpoint_design(10)
        flat = risk_report("gm", Wiener(), M1, quartic, d, 0.3, 10)
        double = risk_report("gm", Wiener(), M1, quartic, d, 0.3, 10, w_density=lambda x: 2 * np.ones_like(x))
        assert double.IMSE == pytest.approx(2 * flat.IMSE, rel=1e-12)

    @pytest.mark.parametrize("h,m", [(0.0, 10), (1.0, 10), (0.3, 0)])
    def test_invalid(self, quartic, h, m):
        with pytest.raises(RiskError):
            risk_report("gm", Wiener(), M1, quartic, midpoint_design(10), h, m)

    def test_projection_variance_dominance(self, quartic):
        for model in (Wiener(), OrnsteinUhlenbeck(1.0)):
            for m in (10, 50, 100):
                d = midpoint_design(10)
                pro = risk_report("pro", model, M1, quartic, d, 0.25, m)
                gm = risk_report("gm", model, M1, quartic, d, 0.25, m)
                assert np.all(pro.variance <= gm.variance + 1e-12)


class TestAsymptotic:
    def test_constants_wiener_m1(self, quartic):
        c = asymptotic_constants(Wiener(), M1.gpp, quartic)
        assert c.R_bar == pytest.approx(0.5, abs=1e-14)
        assert c.alpha_bar == pytest.approx(1.0, abs=1e-14)
        assert c.gpp_bar == pytest.approx(120 / 7, rel=1e-12)  # int (60x(1-x)(1-2x))^2 = 120/7
        assert c.ou_term == pytest.approx(1.0)

    def test_derivative_root_is_closed_form(self, quartic):
        c = asymptotic_constants(Wiener(), M1.gpp, quartic)
        m = 10
        h_star = optimal_bandwidth_closed(c, m)
        deriv = -c.C_K * c.alpha_bar / (2 * m) + c.B**2 * h_star**3 * c.gpp_bar
        assert deriv == pytest.approx(0.0, abs=1e-14)

    def test_large_m_limit(self, quartic):
        c = asymptotic_constants(OrnsteinUhlenbeck(1.0), M2.gpp, quartic)
        assert asymptotic_imse(c, 0.2, 10**12) == pytest.approx(c.B**2 * 0.2**4 * c.gpp_bar / 4, rel=1e-9)

    def test_general_equals_gm(self, quartic):
        c = asymptotic_constants(Wiener(), M1.gpp, quartic)
        assert asymptotic_imse(c, 0.2, 10, "general") == asymptotic_imse(c, 0.2, 10, "gm")

    def test_wiener_flavor(self, quartic):
        c = asymptotic_constants(Wiener(), M1.gpp, quartic)
        gap = asymptotic_imse(c, 0.2, 10, "general") - asymptotic_imse(c, 0.2, 10, "wiener", n=50)
        assert gap == pytest.approx(c.A / (12 * 10 * 2500 * 0.2), rel=1e-12)
        with pytest.raises(RiskError):
            asymptotic_imse(c, 0.2, 10, "wiener")

    @pytest.mark.parametrize("m", [10, 100])
    def test_closed_vs_numeric(self, quartic, m):
        c = asymptotic_constants(Wiener(), M1.gpp, quartic)
        numeric = golden_section(lambda h: asymptotic_imse(c, h, m), 1e-3, 1.0)
        assert optimal_bandwidth_closed(c, m) == pytest.approx(numeric, rel=0.01)

    def test_scaling(self, quartic):
        c = asymptotic_constants(Wiener(), M1.gpp, quartic)
        assert optimal_bandwidth_closed(c, 80) == optimal_bandwidth_closed(c, 10) / 2

    def test_paper_variant(self, quartic):
        c = asymptotic_constants(Wiener(), M1.gpp, quartic)
        ratio = optimal_bandwidth_closed(c, 10, "paper") / optimal_bandwidth_closed(c, 10)
        assert ratio == pytest.approx(c.B ** (1 / 3), rel=1e-12)
        with pytest.raises(RiskError):
            optimal_bandwidth_closed(c, 10, "other")

    def test_flat_curvature(self, quartic):
        c = asymptotic_constants(Wiener(), lambda x: np.zeros_like(x), quartic)
        with pytest.raises(RiskError, match="no interior minimizer"):
            optimal_bandwidth_closed(c, 10)

    def test_alpha_positive(self):
        with pytest.raises(RiskError):
            AsymptoticRisk(1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0)


class TestExactBandwidth:
    def test_table_rows(self, quartic):
        d = midpoint_design(10)
        h, _ = optimal_bandwidth_exact("gm", Wiener(), M1, quartic, d, 10)
        assert h == pytest.approx(0.335, abs=0.03)
        h, _ = optimal_bandwidth_exact("pro", Wiener(), M1, quartic, d, 100, interval=(0.05, 0.6))
        assert h == pytest.approx(0.142, abs=0.03)
        h, _ = optimal_bandwidth_exact("gm", OrnsteinUhlenbeck(1.0), M1, quartic, d, 50)
        assert h == pytest.approx(0.236, abs=0.03)

    def test_is_local_minimum(self, quartic):
        d = midpoint_design(10)
        h, v = optimal_bandwidth_exact("pro", OrnsteinUhlenbeck(1.0), M1, quartic, d, 10)
        for dh in (-1e-3, 1e-3):
            assert risk_report("pro", OrnsteinUhlenbeck(1.0), M1, quartic, d, h + dh, 10).IMSE >= v - 1e-12

    def test_bad_interval(self, quartic):
        with pytest.raises(RiskError):
            optimal_bandwidth_exact("gm", Wiener(), M1, quartic, midpoint_design(10), 10, interval=(0.5, 0.2))


class TestVarianceGap:
    def test_wiener(self, quartic):
        assert variance_gap_limit(Wiener(), quartic, None, 0.3) == pytest.approx(5 / 84, abs=1e-12)

    def test_ou_doubles(self, quartic):
        ratio = variance_gap_limit(OrnsteinUhlenbeck(1.0), quartic, None, 0.5) / variance_gap_limit(Wiener(), quartic, None, 0.5)
        assert ratio == pytest.approx(2.0)

    def test_empirical_gap_approaches_limit(self, quartic):
        limit = variance_gap_limit(Wiener(), quartic, None, 0.5)
        for n in (20, 40, 80):
            d = uniform_regular_design(n)
            h = n ** (-1 / 3)
            sk = ScaledKernel(0.5, h, quartic)
            gap = exact_variance(gm_weights(sk, d), Wiener(), d, 1) - exact_variance(projection_weights(Wiener(), sk, d), Wiener(), d, 1)
            assert n**2 * h * gap == pytest.approx(limit, rel=0.25)
