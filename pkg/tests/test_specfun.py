import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpball.specfun import (
    PExponent,
    QuadratureError,
    QuadratureSpec,
    alpha,
    ball_volume,
    gauss_abs_moment,
    gg_abs_moment,
    log_ball_volume,
    log_gamma,
    quad,
    tail_integral,
    theta,
)

from conftest import trapezoid


class TestPExponent:
    def test_duals(self):
        assert PExponent(1).dual == math.inf
        assert PExponent(math.inf).dual == 1
        assert PExponent(2).dual == 2
        assert PExponent(3).dual == pytest.approx(1.5)

    @pytest.mark.parametrize("bad", [0, -1, float("nan")])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            PExponent(bad)

    @given(st.floats(1.0, 1e6))
    def test_holder_conjugate(self, p):
        pe = PExponent(p)
        assert 1 / pe.p + (0.0 if math.isinf(pe.dual) else 1 / pe.dual) == pytest.approx(1.0, rel=1e-9)


class TestQuadratureSpec:
    @pytest.mark.parametrize("rtol,limit", [(0, 100), (1e-3, 100), (1e-8, 8)])
    def test_rejects(self, rtol, limit):
        with pytest.raises(ValueError):
            QuadratureSpec(rtol, limit)

    def test_nonconvergence_reports_achieved_error(self):
        spec = QuadratureSpec(1e-12, 16)
        with pytest.raises(QuadratureError) as exc:
            quad(lambda t: math.sin(1.0 / t) / t, 1e-6, 1.0, spec)
        assert exc.value.achieved is not None


class TestLogGamma:
    def test_values(self):
        assert log_gamma(1.0) == 0.0
        assert log_gamma(0.5) == pytest.approx(math.log(math.sqrt(math.pi)), rel=1e-12)
        assert log_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-12)

    @pytest.mark.parametrize("x", [0.0, -1.0])
    def test_domain(self, x):
        with pytest.raises(ValueError):
            log_gamma(x)

    @given(st.floats(1e-3, 1e3))
    def test_against_mpmath(self, x):
        assert log_gamma(x) == pytest.approx(float(mp.loggamma(x)), rel=1e-12, abs=1e-13)

    @given(st.floats(0.01, 0.99))
    def test_reflection(self, x):
        lhs = log_gamma(x) + log_gamma(1 - x)
        assert lhs == pytest.approx(math.log(math.pi / math.sin(math.pi * x)), rel=1e-12, abs=1e-13)


class TestBallVolume:
    def test_values(self):
        assert ball_volume(2, 2) == pytest.approx(math.pi, rel=1e-13)
        assert ball_volume(2, 1) == pytest.approx(2.0, rel=1e-13)
        assert ball_volume(3, math.inf) == 8.0
        assert ball_volume(1, 1) == pytest.approx(2.0, rel=1e-13)
        assert ball_volume(3, 2) == pytest.approx(4 * math.pi / 3, rel=1e-13)

    @pytest.mark.parametrize("p", [50, 100])
    def test_large_p_limit(self, p):
        assert ball_volume(4, p) == pytest.approx(16.0, rel=0.01)

    def test_overflow_signalled(self):
        with pytest.raises(OverflowError):
            ball_volume(100_000, 0.1)
        assert math.isfinite(log_ball_volume(100_000, 0.1))


class TestAlpha:
    def test_lambda_zero(self):
        for p in (0.5, 1, 3):
            assert alpha(p, 0.0) == math.sqrt(math.pi)

    @given(st.floats(0.0, 50.0))
    @settings(max_examples=30)
    def test_gaussian_closed_form(self, lam):
        assert alpha(2, lam) == pytest.approx(math.sqrt(math.pi / (1 + lam)), rel=1e-9)

    def test_p1_against_trapezoid(self):
        ref = 2 * trapezoid(lambda t: np.exp(-t - t * t), 0.0, 12.0, 2_000_001)
        assert alpha(1, 1) == pytest.approx(ref, rel=1e-9)

    def test_p1_against_erfc(self):
        # 2 int_0^inf e^{-t - t^2} dt = sqrt(pi) e^{1/4} erfc(1/2)
        assert alpha(1, 1) == pytest.approx(math.sqrt(math.pi) * math.exp(0.25) * math.erfc(0.5), rel=1e-10)

    @pytest.mark.parametrize("p", [0.5, 1.0, 1.5, 3.0, 4.0])
    def test_monotonicity_in_lambda(self, p):
        lams = np.linspace(0.1, 10, 25)
        a = np.array([alpha(p, l) for l in lams])
        assert np.all(np.diff(a) < 0)
        assert np.all(np.diff(lams ** (1 / p) * a) > 0)


class TestMoments:
    def test_gauss(self):
        assert gauss_abs_moment(2) == pytest.approx(1.0, rel=1e-14)
        assert gauss_abs_moment(0) == pytest.approx(1.0, rel=1e-14)
        assert gauss_abs_moment(1) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-14)
        assert gauss_abs_moment(4) == pytest.approx(3.0, rel=1e-14)

    def test_gg(self):
        assert gg_abs_moment(2, 2) == pytest.approx(0.5, rel=1e-14)
        assert gg_abs_moment(1, 1) == pytest.approx(1.0, rel=1e-14)
        for p in (0.5, 1, 3):
            assert gg_abs_moment(p, 0) == pytest.approx(1.0, rel=1e-14)

    @pytest.mark.parametrize("p", [0.7, 1.0, 1.5, 2.5, 4.0])
    @pytest.mark.parametrize("q", [0.5, 1.0, 2.0, 3.0, 6.0])
    def test_gg_against_mpmath_quadrature(self, p, q):
        c = 2 * mp.gamma(1 + mp.mpf(1) / p)
        ref = 2 * mp.quad(lambda t: t**q * mp.exp(-t**p), [0, 1, 5, mp.inf]) / c
        assert gg_abs_moment(p, q) == pytest.approx(float(ref), rel=1e-8)


class TestTheta:
    def test_limits(self):
        assert theta(1e-8) / 2e-8 == pytest.approx(1.0, rel=1e-12)
        assert theta(40.0) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-14)

    def test_r1_against_quadrature(self):
        ref = float(mp.quad(lambda t: mp.exp(-t * t / 2), [-1, 1]))
        assert theta(1.0) == pytest.approx(ref, rel=1e-13)

    def test_monotone_shape(self):
        r = np.linspace(0.05, 6, 100)
        th = theta(r)
        assert np.all(np.diff(th) > 0)
        assert np.all(np.diff(th / r) < 0)


class TestTailIntegral:
    def test_exponential(self):
        for t in (0.1, 1.0, 5.0, 30.0):
            assert tail_integral(t, 1) == pytest.approx(math.exp(-t), rel=1e-12)

    def test_gaussian_tail(self):
        assert tail_integral(1.0, 2) == pytest.approx(math.sqrt(math.pi) / 2 * math.erfc(1.0), rel=1e-10)

    def test_p3_against_mpmath(self):
        ref = mp.quad(lambda u: mp.exp(-u**3), [2, 3, mp.inf])
        assert tail_integral(2.0, 3) == pytest.approx(float(ref), rel=1e-9)

    @given(st.floats(1.0, 6.0), st.floats(1.0, 5.0))
    @settings(max_examples=60)
    def test_sandwich(self, t, p):
        lo = math.exp(-t**p) / (2 * p * t ** (p - 1))
        hi = math.exp(-t**p) / (p * t ** (p - 1))
        v = tail_integral(t, p)
        assert lo * (1 - 1e-9) <= v <= hi * (1 + 1e-9)

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.5])
    def test_log_concave(self, p):
        t = np.linspace(0.1, 4.0, 20)
        lv = np.array([math.log(tail_integral(x, p)) for x in t])
        assert np.all(lv[1:-1] >= 0.5 * (lv[:-2] + lv[2:]) - 1e-10)
