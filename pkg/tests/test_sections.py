import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lpball import sections as S
from lpball.sections import (
    CubeDensity,
    ExtrapolationWarning,
    HeavyTailWarning,
    Subspace,
    TiltedDensity,
)
from lpball.specfun import gauss_abs_moment, theta
from lpball.stats import RngState, ks_one_sample

N = 100_000
A_GRID = np.linspace(0.02, 3.0, 50)


def erf_cube(k, r):
    return (theta(r) / math.sqrt(2 * math.pi)) ** k


class TestSubspaces:
    def test_full_rank_is_orthogonal(self):
        E = S.random_subspace(5, 5, RngState(1))
        assert np.allclose(E.basis @ E.basis.T, np.eye(5), atol=1e-12)
        assert np.allclose(E.basis.T @ E.basis, np.eye(5), atol=1e-12)

    def test_line_in_plane_uniform(self):
        ang = []
        for i in range(4000):
            b = S.random_subspace(2, 1, RngState(2).child(i)).basis[0]
            ang.append(math.atan2(b[1], b[0]))
        assert ks_one_sample(np.array(ang), lambda t: (t + math.pi) / (2 * math.pi))[2]

    def test_reproducible(self):
        a = S.random_subspace(7, 3, RngState(3)).basis
        b = S.random_subspace(7, 3, RngState(3)).basis
        assert np.array_equal(a, b)

    def test_diagonal(self):
        assert np.allclose(S.diagonal_subspace(2, 1).basis, [[1 / math.sqrt(2)] * 2])
        expect = np.array([[1, 0, 1, 0], [0, 1, 0, 1]]) / math.sqrt(2)
        assert np.allclose(S.diagonal_subspace(4, 2).basis, expect)
        with pytest.raises(ValueError):
            S.diagonal_subspace(5, 2)

    def test_invariants(self):
        with pytest.raises(ValueError):
            Subspace(np.array([[1.0, 1.0]]))
        with pytest.raises(ValueError):
            Subspace(np.eye(3)[:0])
        with pytest.raises(ValueError):
            S.random_subspace(2, 3, RngState(1))

    def test_text_roundtrip(self):
        E = S.random_subspace(4, 2, RngState(4))
        assert np.array_equal(Subspace.from_text(E.to_text()).basis, E.basis)


class TestSectionMoments:
    @pytest.mark.parametrize("p", [0.5, 1, 3])
    def test_full_space(self, p):
        n = 3
        exact = n * 2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)
        e = S.section_moment(S.random_subspace(n, n, RngState(5)), p, p, RngState(6), N)
        assert e.within(exact)
        assert S.cube_moment_exact(n, p) == pytest.approx(exact, rel=1e-13)

    @pytest.mark.parametrize("p", [0.5, 1, 2, 4])
    def test_diagonal_closed_form(self, p):
        e = S.section_moment(S.diagonal_subspace(2, 1), p, p, RngState(7), N)
        assert e.within(2 ** (1 - p / 2) * gauss_abs_moment(p))

    def test_beta_zero_and_domain(self):
        E = S.random_subspace(4, 2, RngState(8))
        assert S.section_moment(E, 1.5, 0, RngState(9), 1000).value == 1.0
        with pytest.raises(ValueError):
            S.section_moment(E, 1.5, -2, RngState(9), 1000)
        with pytest.warns(HeavyTailWarning):
            S.section_moment(E, 1.5, -1.5, RngState(9), 1000)

    def test_sphere_gauss_convert(self):
        assert S.sphere_gauss_convert(4, 0) == pytest.approx(1.0)
        assert S.sphere_gauss_convert(7, 2) == pytest.approx(7.0, rel=1e-13)
        assert S.sphere_gauss_convert(1, 1) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-13)
        with pytest.raises(ValueError):
            S.sphere_gauss_convert(3, -3)
        z = RngState(10).generator().standard_normal((N, 3))
        r = np.sqrt((z * z).sum(axis=1)) ** -1.2
        assert abs(r.mean() - S.sphere_gauss_convert(3, -1.2)) <= 3 * r.std() / math.sqrt(N)

    def test_ess(self):
        assert S.effective_sample_size(np.ones(50)) == pytest.approx(50)
        assert S.effective_sample_size(np.r_[1.0, np.zeros(9)]) == pytest.approx(1)


class TestTheorem8:
    @pytest.mark.parametrize("p", [0.5, 1, 2, 3, 4])
    def test_axis_aligned(self, p):
        assert S.theorem8_ratio(S.axis_subspace(5, 2), p, RngState(11), N).within(1.0)

    def test_full_dimension(self):
        assert S.theorem8_ratio(S.random_subspace(3, 3, RngState(12)), 1.5, RngState(13), N).within(1.0)

    def test_diagonal_decreasing(self):
        vals = []
        for p in (0.5, 1, 2, 3, 4):
            e = S.theorem8_ratio(S.diagonal_subspace(2, 1), p, RngState(14), N)
            assert e.within(2 ** (1 - p / 2))
            vals.append(e.value)
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_scan(self):
        E = S.random_subspace(8, 2, RngState(15))
        rep = S.theorem8_scan(E, [0.5, 1, 1.5, 2, 3, 4, 6], RngState(16), 50_000)
        assert rep["pass"]
        with pytest.raises(ValueError):
            S.theorem8_scan(E, [2, 1], RngState(16), 1000)

    def test_monotone_violations_helper(self):
        assert S.monotone_violations([1.0, 0.9, 0.8], [0.01] * 3) == []
        assert S.monotone_violations([1.0, 1.5], [0.01, 0.01]) == [(0, 1)]
        assert S.monotone_violations([1.0, 1.02], [0.01, 0.01]) == []
        assert S.monotone_violations([1.0, 0.5], [0.01, 0.01], "nondecreasing") == [(0, 1)]


class TestLaplace:
    def test_lambda_zero(self):
        assert S.laplace_functional(S.axis_subspace(3, 2), 1.5, 0.0, 0.5, RngState(17)).value == 1.0

    @pytest.mark.parametrize("lam", [0.1, 1.0, 3.0])
    def test_chi_square(self, lam):
        n = 3
        e = S.laplace_functional(S.random_subspace(n, n, RngState(18)), 2, lam, 1.0, RngState(19), N)
        assert e.within((1 + 2 * lam) ** (-n / 2))

    def test_cube_exact(self):
        # E exp(-lam |g|^p) in one dimension by quadrature
        for p, lam in [(1, 0.7), (3, 2.0)]:
            ref, _ = integrate.quad(lambda t: math.exp(-lam * abs(t) ** p - t * t / 2) / math.sqrt(2 * math.pi),
                                    -np.inf, np.inf, epsabs=0, epsrel=1e-12)
            assert S.laplace_cube_exact(2, p, lam) == pytest.approx(ref**2, rel=1e-9)

    def test_decays_to_zero(self):
        E = S.random_subspace(4, 2, RngState(20))
        vals = [S.laplace_functional(E, 1.5, lam, 1.0, RngState(21), 20_000).value for lam in (1, 10, 100, 1000)]
        assert all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-3

    def test_domain(self):
        E = S.axis_subspace(3, 1)
        with pytest.raises(ValueError):
            S.laplace_functional(E, 1, -1.0, 1.0, RngState(1))
        with pytest.raises(ValueError):
            S.laplace_functional(E, 1, 1.0, 1.5, RngState(1))


class TestProp18And20:
    def test_F_at_two_is_one(self):
        e = S.prop18_F(2.0, S.random_subspace(6, 3, RngState(22)), 1.3, RngState(23), 20_000)
        assert e.value == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("p", [0.5, 1, 3])
    def test_F_axis(self, p):
        assert S.prop18_F(p, S.axis_subspace(5, 2), 1.0, RngState(24), 10_000).value == pytest.approx(1.0, abs=1e-12)

    def test_F_scan(self):
        E = S.random_subspace(6, 2, RngState(25))
        rep = S.prop18_scan(E, [0.5, 1, 1.5, 2, 3, 4], 1.0, RngState(26), N)
        assert rep["pass"]
        Fs = {r["p"]: r["F"] for r in rep["rows"]}
        assert Fs[3] >= 1 and Fs[4] >= 1

    def test_r_at_zero_and_scans(self):
        E = S.random_subspace(6, 2, RngState(27))
        for p in (1.0, 1.5, 3.0, 4.0):
            rep = S.prop20_r(p, E, [0, 0.5, 1, 2, 5, 20], RngState(28), N)
            assert rep["estimates"][0].value == 1.0 and rep["estimates"][0].stderr == 0.0
            assert rep["pass"]

    def test_r_diagonal_quadrature(self):
        def lap(c, lam):
            v, _ = integrate.quad(lambda t: math.exp(-lam * c * abs(t) - t * t / 2) / math.sqrt(2 * math.pi),
                                  -np.inf, np.inf, epsabs=0, epsrel=1e-12)
            return v

        lams = [0.5, 2.0, 8.0]
        rep = S.prop20_r(1.0, S.diagonal_subspace(2, 1), lams, RngState(29), N)
        for lam, e in zip(lams, rep["estimates"]):
            assert e.within(lap(math.sqrt(2), lam) / lap(1.0, lam))

    def test_r_large_lambda_tends_to_volume_ratio(self):
        E = S.random_subspace(4, 1, RngState(30))
        v = S.volume_ratio(E, 1.5, RngState(31), N)
        r = S.prop20_r(1.5, E, [1e3], RngState(32), 400_000)["estimates"][0]
        assert v.value <= 1
        assert abs(r.value - v.value) <= 0.02


class TestPeaked:
    def test_density_normalized(self):
        for p, lam in [(0.5, 1.0), (1, 0.3), (2.5, 4.0), (4, 0.0)]:
            d = TiltedDensity(p, lam)
            tot = 2 * float(mp.quad(lambda t: d.pdf(float(t)), [0, d.cutoff / 4, d.cutoff, mp.inf]))
            assert tot == pytest.approx(1.0, abs=1e-8)
            assert d.mass(100.0) == pytest.approx(1.0, abs=1e-8)

    def test_identical(self):
        d = TiltedDensity(1.5, 0.7)
        rep = S.peaked_compare(d, d, A_GRID)
        assert rep["relation"] == "=" and rep["pass"]
        assert all(r["mass1"] == r["mass2"] for r in rep["rows"])

    @pytest.mark.parametrize("d1,d2,case,rel", [
        (TiltedDensity(2.5, 0.05), TiltedDensity(3.0, 2.0), "a", "<"),
        (TiltedDensity(0.5, 1.0), TiltedDensity(1.5, 1.0), "b", "<"),
        (TiltedDensity(1.0, 1.0), TiltedDensity(2.0, 3.0), "c", "<"),
        (TiltedDensity(1.0, 0.5), TiltedDensity(1.0, 2.0), "d", ">"),
        (TiltedDensity(3.0, 0.5), TiltedDensity(3.0, 2.0), "e", "<"),
    ])
    def test_cases(self, d1, d2, case, rel):
        rep = S.peaked_compare(d1, d2, A_GRID)
        assert (rep["case"], rep["relation"]) == (case, rel)
        assert rep["pass"]
        assert len(rep["rows"]) == 50

    def test_case_c_any_lambda(self):
        for l1, l2 in [(0.1, 10), (10, 0.1), (1, 1)]:
            assert S.peaked_compare(TiltedDensity(1, l1), TiltedDensity(2, l2), A_GRID)["pass"]

    def test_argument_order(self):
        d1, d2 = TiltedDensity(3.0, 2.0), TiltedDensity(2.5, 0.05)
        assert S.predicted_order(d1, d2) == ("a", ">")
        assert S.peaked_compare(d1, d2, A_GRID)["pass"]

    def test_gaussian_family(self):
        assert S.predicted_order(TiltedDensity(2, 0.3), TiltedDensity(2, 4.0)) == ("gaussian", "=")
        assert S.peaked_compare(TiltedDensity(2, 0.3), TiltedDensity(2, 4.0), A_GRID)["pass"]

    def test_no_case(self):
        # p < q < 2 with alpha(p) > alpha(q): no prediction
        d1, d2 = TiltedDensity(0.5, 0.01), TiltedDensity(1.5, 5.0)
        assert d1.norm_const > d2.norm_const
        rep = S.peaked_compare(d1, d2, A_GRID)
        assert rep["case"] is None and rep["pass"] is None

    def test_cube_density(self):
        for r in (0.3, 1.0, 2.5):
            d = CubeDensity(r)
            assert d.mass(10.0) == pytest.approx(1.0, abs=1e-12)
            assert d.mass_quad(10.0) == pytest.approx(1.0, abs=1e-10)
        assert S.cube_density_compare(2.0, 1.0, A_GRID)["pass"]
        assert S.cube_density_compare(0.8, 0.2, A_GRID)["pass"]
        with pytest.raises(ValueError):
            S.cube_density_compare(1.0, 2.0, A_GRID)


class TestLemmas:
    def test_lemma15(self):
        rep = S.lemma15_check(1, 2, 1.0)
        assert rep["pass"] and rep["gap"] > 0
        small = S.lemma15_check(1, 2, 1e-9)
        assert small["alpha_p"] == pytest.approx(math.sqrt(math.pi), rel=1e-8) and abs(small["gap"]) < 1e-8

    def test_lemma15_oracle(self):
        rep = S.lemma15_check(2, 4, 5.0)
        mp.mp.dps = 30
        lp = 5 / mp.gamma(mp.mpf(3) / 2)
        lq = 5 / mp.gamma(mp.mpf(5) / 2)
        ap = 2 * mp.quad(lambda t: mp.exp(-lp * t**2 - t**2), [0, mp.inf])
        aq = 2 * mp.quad(lambda t: mp.exp(-lq * t**4 - t**2), [0, 1, mp.inf])
        mp.mp.dps = 15
        assert rep["alpha_p"] == pytest.approx(float(ap), rel=1e-10)
        assert rep["alpha_q"] == pytest.approx(float(aq), rel=1e-10)
        assert rep["pass"]

    @pytest.mark.parametrize("p,lam", [(3, 0.5), (4, 1.0), (6, 2.0)])
    def test_lemma22(self, p, lam):
        assert S.lemma22_check(p, lam)["pass"]

    def test_convex_order_linear_equality(self):
        x = np.abs(RngState(33).generator().standard_normal(N))
        rep = S.power_convex_order_check(x, 1, 2)
        row = next(r for r in rep["rows"] if r["f"] == "linear")
        assert row["lhs"] == pytest.approx(1.0, rel=1e-12) and row["rhs"] == pytest.approx(1.0, rel=1e-12)
        assert rep["pass"]

    def test_convex_order_gaussian_square(self):
        x = np.abs(RngState(34).generator().standard_normal(N))
        row = next(r for r in S.power_convex_order_check(x, 1, 2)["rows"] if r["f"] == "square")
        # E(|g|/E|g|)^2 = pi/2 and E(g^2)^2 = 3
        assert abs(row["lhs"] - math.pi / 2) <= 4 * row["stderr"] + 0.02
        assert row["diff"] < -10 * row["stderr"]

    def test_convex_order_constant(self):
        rep = S.power_convex_order_check(np.full(1000, 2.5), 0.5, 3)
        assert all(abs(r["diff"]) < 1e-12 for r in rep["rows"]) and rep["pass"]

    def test_convex_order_tail_flag(self):
        x = RngState(35).generator().pareto(1.5, 10_000)
        assert S.power_convex_order_check(x, 1, 2)["heavy_tail"]


class TestCube:
    @pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
    def test_one_dimension(self, r):
        e = S.cube_section_gaussian(S.axis_subspace(1, 1), r, RngState(36), N)
        assert e.within(theta(r) / math.sqrt(2 * math.pi))

    @pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
    def test_diagonal(self, r):
        e = S.cube_section_gaussian(S.diagonal_subspace(2, 1), r, RngState(37), N)
        assert e.within(theta(r * math.sqrt(2)) / math.sqrt(2 * math.pi))
        assert theta(r * math.sqrt(2)) >= theta(r)

    def test_axis_product(self):
        e = S.cube_section_gaussian(S.axis_subspace(4, 3), 1.2, RngState(38), N)
        assert e.within(erf_cube(3, 1.2))
        assert S.gamma_cube(3, 1.2) == pytest.approx(erf_cube(3, 1.2), rel=1e-13)

    def test_axis_ratio_identically_one(self):
        rep = S.theorem9_scan(S.axis_subspace(5, 2), [0.5, 1, 2, 3], RngState(39), 20_000)
        assert all(r["ratio"] == 1.0 for r in rep["rows"]) and rep["pass"]

    def test_random_scan(self):
        E = S.random_subspace(6, 2, RngState(40))
        rep = S.theorem9_scan(E, [0.5, 1, 1.5, 2, 3], RngState(41), N)
        assert rep["pass"]
        assert all(r["ratio"] >= 1 - 3 * r["ratio_stderr"] for r in rep["rows"])
        assert rep["rows"][0]["ratio"] >= rep["rows"][-1]["ratio"]

    def test_theorem10(self):
        full = S.theorem10_bound(S.random_subspace(3, 3, RngState(42)), 1.0, RngState(43), 20_000)
        assert full["pass"]
        for n, k in [(4, 2), (6, 3), (6, 2)]:
            rep = S.theorem10_bound(S.diagonal_subspace(n, k), 1.0, RngState(44), 20_000)
            assert rep["margin"] == 0.0 and rep["pass"]
        strict = S.theorem10_bound(S.random_subspace(6, 2, RngState(45)), 1.0, RngState(46), N)
        assert strict["margin"] > 3 * strict["margin_stderr"]

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            S.theorem9_scan(S.axis_subspace(2, 1), [1, 0.5], RngState(1))


class TestBrascampLieb:
    def test_p2_equal(self):
        rep = S.bl_laplace_bound(S.random_subspace(5, 2, RngState(47)), 2, 1.0, RngState(48), 20_000)
        assert rep["lhs"] == pytest.approx(rep["rhs"], rel=1e-12) and rep["pass"]

    def test_lambda_zero(self):
        rep = S.bl_laplace_bound(S.random_subspace(5, 2, RngState(49)), 3, 0.0, RngState(50), 5000)
        assert rep["lhs"] == rep["rhs"] == 1.0

    @pytest.mark.parametrize("n,k", [(4, 2), (6, 3), (6, 2)])
    def test_diagonal_equality(self, n, k):
        rep = S.bl_laplace_bound(S.diagonal_subspace(n, k), 4, 0.7, RngState(51), 20_000)
        assert rep["lhs"] == pytest.approx(rep["rhs"], rel=1e-12) and rep["pass"]

    def test_random(self):
        rep = S.bl_laplace_bound(S.random_subspace(6, 2, RngState(52)), 4, 1.0, RngState(53), N)
        assert rep["pass"] and rep["margin"] > 0
        assert rep["rhs"] == pytest.approx(rep["rhs_exact"], rel=0.01)

    def test_corollary21(self):
        E = S.random_subspace(6, 2, RngState(54))
        assert S.corollary21_moments(E, 4, 0, 0, RngState(55), 5000)["positive_margin"] == 0.0
        rep = S.corollary21_moments(E, 4, 2, 1, RngState(56), N)
        assert rep["pass"] and rep["positive_margin"] > 3 * rep["positive_stderr"]
        d = S.corollary21_moments(S.diagonal_subspace(6, 2), 4, 4, 0.5, RngState(57), 20_000)
        assert abs(d["positive_margin"]) < 1e-9 and d["pass"]
        with pytest.raises(ValueError):
            S.corollary21_moments(E, 1.5, 1, 0.5, RngState(1))

    def test_corollary19(self):
        E = S.random_subspace(6, 3, RngState(58))
        rep2 = S.corollary19_suite(E, 2, 1.0, 1.0, RngState(59), 20_000)
        assert abs(rep2["positive_diff"]) < 1e-12 and abs(rep2["negative_diff"]) < 1e-12 and rep2["pass"]
        d1 = S.corollary19_suite(S.diagonal_subspace(2, 1), 1, 0.3, 1.0, RngState(60), 20_000)
        assert d1["positive_ratio"] == pytest.approx(math.sqrt(2), rel=1e-12) and d1["pass"]
        d4 = S.corollary19_suite(S.diagonal_subspace(2, 1), 4, 0.3, 1.0, RngState(61), 20_000)
        assert d4["positive_ratio"] == pytest.approx(2 ** (1 / 4 - 1 / 2), rel=1e-12) and d4["pass"]
        for p in (1.0, 3.0):
            assert S.corollary19_suite(E, p, 1.0, 1.0, RngState(62), N)["pass"]


class TestVolumeRatio:
    def test_axis_and_full(self):
        assert S.volume_ratio(S.axis_subspace(4, 2), 1.5, RngState(63), 10_000).value == pytest.approx(1.0, abs=1e-12)
        assert S.volume_ratio(S.random_subspace(3, 3, RngState(64)), 1.5, RngState(65)).value == 1.0

    def test_diamond_chord(self):
        # the diagonal of {|x| + |y| <= 1} is a chord of length sqrt(2); B_1^1 has length 2
        e = S.volume_ratio(S.diagonal_subspace(2, 1), 1.0, RngState(66), 10_000)
        assert e.value == pytest.approx(1 / math.sqrt(2), rel=1e-12)
        ex, resid = S.volume_ratio(S.diagonal_subspace(2, 1), 1.0, RngState(67), 400_000, method="extrapolate")
        assert ex.within(1 / math.sqrt(2), 4) and resid < 3

    def test_meyer_pajor_direction(self):
        for i in range(5):
            E = S.random_subspace(6, 2, RngState(68).child(i))
            assert S.volume_ratio(E, 1.0, RngState(69), 20_000).hi <= 1
            assert S.volume_ratio(E, 1.5, RngState(69), 20_000).lo <= 1
            assert S.volume_ratio(E, 4.0, RngState(69), 20_000).hi >= 1
            assert S.volume_ratio(E, 4.0, RngState(69), 20_000).lo >= 1

    def test_line_exact(self):
        # k = 1: the section is the segment of half-length 1 / ||u||_p
        E = S.random_subspace(4, 1, RngState(70))
        u = E.basis[0]
        expect = 1 / np.sum(np.abs(u) ** 3) ** (1 / 3)
        assert S.volume_ratio(E, 3.0, RngState(71), 1000).value == pytest.approx(expect, rel=1e-12)

    def test_extrapolation_agrees_and_flags_instability(self):
        E = S.random_subspace(4, 1, RngState(72))
        ex, resid = S.volume_ratio(E, 3.0, RngState(73), 200_000, method="extrapolate")
        u = E.basis[0]
        assert abs(ex.value - 1 / np.sum(np.abs(u) ** 3) ** (1 / 3)) <= 4 * ex.stderr + 0.005
        with pytest.warns(ExtrapolationWarning):
            S.volume_ratio(S.random_subspace(6, 3, RngState(74)), 1.0, RngState(75), 100_000, method="extrapolate")

    def test_bad_method(self):
        with pytest.raises(ValueError):
            S.volume_ratio(S.axis_subspace(2, 1), 1, RngState(1), method="nope")


@given(st.integers(2, 6), st.integers(0, 10**6), st.floats(0.3, 5.0))
@settings(max_examples=15, deadline=None)
def test_gauge_is_ambient_norm(n, seed, p):
    # scaling a point of E by its gauge lands on the boundary of the section
    E = S.random_subspace(n, max(1, n // 2), seed)
    z, x = S.gaussian_on(E, 10, seed)
    y = x / S.lp_norm(x, p)[:, None]
    assert np.allclose(S.lp_norm(y, p), 1.0)
    assert np.allclose(y @ E.basis.T @ E.basis, y, atol=1e-12)


def test_scan_csv():
    text = S.scan_csv([{"p": 1.0, "ratio": 0.5, "pass": True}], ["p", "ratio", "pass", "missing"])
    assert text.splitlines() == ["p,ratio,pass,missing", "1.0,0.5,true,"]
