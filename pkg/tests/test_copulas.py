import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate, special, stats

from rgcopula.copulas import (
    FAMILIES,
    CopulaFit,
    GasParams,
    conditional_cdf,
    constant_fit,
    copula_cdf,
    copula_density,
    copula_logpdf,
    copula_sample,
    copula_score,
    fisher_info,
    gas_filter,
    gas_fit,
    gas_simulate,
    inverse_transform,
    kendall_tau,
    transform,
)
from rgcopula.estimation import NGAS_TABLE2

RHO = 0.6042
POINTS = {
    "normal": [(-0.8, None), (-0.3, None), (0.0, None), (0.6042, None), (0.9, None)],
    "student_t": [(-0.5, 0.1), (0.0, 0.2), (0.3, 0.05), (0.6, 0.25), (0.8, 0.1)],
    "clayton": [(0.2, None), (0.8596, None), (1.5, None), (3.0, None), (6.0, None)],
    "rotated_gumbel": [(1.0, None), (1.2, None), (1.5819, None), (2.5, None), (4.0, None)],
    "sjc": [((0.1, 0.1), None), ((0.3, 0.05), None), ((0.05, 0.4), None),
            ((0.5, 0.5), None), ((0.2, 0.6), None)],
}
CASES = [(f, d, n) for f in FAMILIES for d, n in POINTS[f]]


def _ids(case):
    return f"{case[0]}-{case[1]}"


def _mass(family, delta, nu_inv):
    # integrate in normal-score coordinates, where the integrand is smooth
    def f(y, x):
        u, v = special.ndtr(x), special.ndtr(y)
        return float(copula_density(family, u, v, delta, nu_inv)) * stats.norm.pdf(x) * stats.norm.pdf(y)

    return integrate.dblquad(f, -8.5, 8.5, -8.5, 8.5, epsabs=1e-8, epsrel=1e-8)[0]


class TestDensity:
    def test_independence(self):
        u = np.random.default_rng(0).random((2, 50))
        np.testing.assert_allclose(copula_density("normal", u[0], u[1], 0.0), 1.0, atol=1e-14)
        np.testing.assert_allclose(copula_density("rotated_gumbel", u[0], u[1], 1.0), 1.0, atol=1e-12)

    def test_normal_against_scipy(self):
        u1, u2 = np.random.default_rng(1).random((2, 40))
        x1, x2 = stats.norm.ppf(u1), stats.norm.ppf(u2)
        joint = stats.multivariate_normal([0, 0], [[1, RHO], [RHO, 1]]).logpdf(np.c_[x1, x2])
        ref = joint - stats.norm.logpdf(x1) - stats.norm.logpdf(x2)
        np.testing.assert_allclose(copula_logpdf("normal", u1, u2, RHO), ref, rtol=1e-10)

    def test_student_against_scipy(self):
        u1, u2 = np.random.default_rng(2).random((2, 40))
        nu, rho = 6.0, 0.4
        x1, x2 = stats.t.ppf(u1, nu), stats.t.ppf(u2, nu)
        joint = stats.multivariate_t([0, 0], [[1, rho], [rho, 1]], df=nu).logpdf(np.c_[x1, x2])
        ref = joint - stats.t.logpdf(x1, nu) - stats.t.logpdf(x2, nu)
        np.testing.assert_allclose(copula_logpdf("student_t", u1, u2, rho, 1 / nu), ref, rtol=1e-8)

    @pytest.mark.parametrize("nu", [20.0, 60.0, 1e3, 1e5])
    def test_student_against_scipy_large_nu(self, nu):
        u1, u2 = np.random.default_rng(3).random((2, 40))
        rho = 0.3
        x1, x2 = stats.t.ppf(u1, nu), stats.t.ppf(u2, nu)
        joint = stats.multivariate_t([0, 0], [[1, rho], [rho, 1]], df=nu).logpdf(np.c_[x1, x2])
        ref = joint - stats.t.logpdf(x1, nu) - stats.t.logpdf(x2, nu)
        np.testing.assert_allclose(copula_logpdf("student_t", u1, u2, rho, 1 / nu), ref,
                                   rtol=1e-7, atol=1e-9)

    def test_student_smooth_in_nu_near_normal_limit(self):
        # a 1e-9 relative nudge in 1/nu moves the true sum by ~1e-13; the t quantile itself is
        # good to ~1e-11 here, so anything near 1e-6 would mean cancellation in the constant
        u1, u2 = np.random.default_rng(4).random((2, 1000))
        for nu_inv in (1e-7, 3e-7, 1e-5):
            a = np.sum(copula_logpdf("student_t", u1, u2, -0.1, nu_inv))
            b = np.sum(copula_logpdf("student_t", u1, u2, -0.1, nu_inv * (1 + 1e-9)))
            assert abs(a - b) < 1e-8
        normal = np.sum(copula_logpdf("normal", u1, u2, -0.1))
        assert np.sum(copula_logpdf("student_t", u1, u2, -0.1, 1e-7)) == pytest.approx(normal, abs=1e-3)

    @pytest.mark.parametrize("case", [c for c in CASES if c[0] != "student_t"], ids=_ids)
    def test_density_is_mixed_derivative_of_cdf(self, case):
        family, delta, nu_inv = case
        h = 1e-4
        for u, v in ((0.3, 0.4), (0.7, 0.2), (0.55, 0.85)):
            fd = (copula_cdf(family, u + h, v + h, delta) - copula_cdf(family, u + h, v - h, delta)
                  - copula_cdf(family, u - h, v + h, delta) + copula_cdf(family, u - h, v - h, delta))
            fd /= 4 * h * h
            assert float(copula_density(family, u, v, delta)) == pytest.approx(float(fd), rel=2e-5)

    @pytest.mark.slow
    @pytest.mark.parametrize("case", CASES, ids=_ids)
    def test_integrates_to_one(self, case):
        assert _mass(*case) == pytest.approx(1.0, abs=1e-4)

    @pytest.mark.parametrize("case", [c for c in CASES if c[0] != "sjc"], ids=_ids)
    def test_exchangeable(self, case):
        family, delta, nu_inv = case
        u1, u2 = np.random.default_rng(3).random((2, 30))
        np.testing.assert_allclose(copula_logpdf(family, u1, u2, delta, nu_inv),
                                   copula_logpdf(family, u2, u1, delta, nu_inv), rtol=1e-9, atol=1e-14)

    @pytest.mark.parametrize("family, delta", [("normal", 1.0), ("clayton", 0.0),
                                               ("rotated_gumbel", 0.9), ("sjc", (0.0, 0.2))])
    def test_inadmissible(self, family, delta):
        with pytest.raises(ValueError):
            copula_logpdf(family, 0.5, 0.5, delta)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            copula_logpdf("frank", 0.5, 0.5, 1.0)


class TestCdf:
    def test_normal_against_scipy(self):
        u1, u2 = np.random.default_rng(4).random((2, 20))
        mvn = stats.multivariate_normal([0, 0], [[1, RHO], [RHO, 1]])
        ref = [mvn.cdf([a, b]) for a, b in zip(stats.norm.ppf(u1), stats.norm.ppf(u2))]
        np.testing.assert_allclose(copula_cdf("normal", u1, u2, RHO), ref, atol=1e-7)

    @pytest.mark.parametrize("rho", [-0.99, -0.5, 0.0, 0.97, 0.999])
    def test_normal_extreme_correlations(self, rho):
        mvn = stats.multivariate_normal([0, 0], [[1, rho], [rho, 1]])
        for a, b in ((0.2, 0.3), (0.9, 0.6), (0.05, 0.95)):
            ref = mvn.cdf(stats.norm.ppf([a, b]))
            assert float(copula_cdf("normal", a, b, rho)) == pytest.approx(ref, abs=1e-7)

    @pytest.mark.parametrize("case", CASES, ids=_ids)
    def test_frechet_bounds_and_margins(self, case):
        family, delta, nu_inv = case
        for a, b in ((0.2, 0.3), (0.8, 0.6)):
            c = float(copula_cdf(family, a, b, delta, nu_inv))
            assert max(a + b - 1, 0) - 1e-12 <= c <= min(a, b) + 1e-12
        assert float(copula_cdf(family, 0.37, 1 - 1e-12, delta, nu_inv)) == pytest.approx(0.37, abs=1e-6)

    @pytest.mark.parametrize("case", CASES, ids=_ids)
    def test_conditional_is_derivative(self, case):
        family, delta, nu_inv = case
        h = 1e-6
        for a, b in ((0.3, 0.4), (0.75, 0.2)):
            fd = (copula_cdf(family, a + h, b, delta, nu_inv)
                  - copula_cdf(family, a - h, b, delta, nu_inv)) / (2 * h)
            assert float(conditional_cdf(family, b, a, delta, nu_inv)) == pytest.approx(float(fd), abs=2e-6)


class TestSampling:
    @pytest.mark.slow
    def test_normal_correlation(self):
        for rho in (0.0, RHO):
            u1, u2 = copula_sample("normal", rho, 10**6, seed=5)
            r = np.corrcoef(stats.norm.ppf(u1), stats.norm.ppf(u2))[0, 1]
            assert r == pytest.approx(rho, abs=0.005)

    @pytest.mark.slow
    def test_rotated_gumbel_tau(self):
        u1, u2 = copula_sample("rotated_gumbel", 1.5819, 10**6, seed=6)
        tau = stats.kendalltau(u1, u2).statistic
        assert tau == pytest.approx(1 - 1 / 1.5819, abs=0.005)

    @pytest.mark.parametrize("case", [c for c in CASES if c[0] != "sjc"], ids=_ids)
    def test_kendall_tau(self, case):
        family, delta, nu_inv = case
        u1, u2 = copula_sample(family, delta, 40_000, seed=7, nu_inv=nu_inv)
        assert stats.kendalltau(u1, u2).statistic == pytest.approx(kendall_tau(family, delta), abs=0.015)

    @pytest.mark.parametrize("case", CASES, ids=_ids)
    def test_rosenblatt_uniform(self, case):
        family, delta, nu_inv = case
        u1, u2 = copula_sample(family, delta, 5000, seed=8, nu_inv=nu_inv)
        e2 = conditional_cdf(family, u2, u1, delta, nu_inv)
        assert stats.kstest(e2, "uniform").pvalue > 0.001
        assert abs(stats.spearmanr(u1, e2).statistic) < 0.05

    def test_reproducible(self):
        a = copula_sample("clayton", 1.0, 100, seed=1)
        b = copula_sample("clayton", 1.0, 100, seed=1)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_inadmissible(self):
        with pytest.raises(ValueError):
            copula_sample("normal", 1.5, 10)


class TestTransforms:
    def test_centers(self):
        assert transform("normal", 0.0) == 0.0
        assert transform("rotated_gumbel", 0.0) == 2.0

    def test_logistic_form(self):
        k = np.linspace(-10, 10, 41)
        np.testing.assert_allclose(transform("normal", k), (1 - np.exp(-k)) / (1 + np.exp(-k)), atol=1e-15)

    @pytest.mark.parametrize("family", ["normal", "student_t", "rotated_gumbel", "clayton"])
    def test_round_trip(self, family):
        k = np.linspace(-10, 10, 201)
        np.testing.assert_allclose(inverse_transform(family, transform(family, k)), k, atol=1e-12)
        assert np.all(np.diff(transform(family, k)) > 0)


class TestScore:
    def test_vanishes_at_center(self):
        assert copula_score("normal", 0.5, 0.5, 0.0) == 0.0

    def test_positive_for_concordant_pair(self):
        assert copula_score("normal", 0.95, 0.95, 0.0) > 0
        h = 1e-6
        fd = (copula_logpdf("normal", 0.95, 0.95, h) - copula_logpdf("normal", 0.95, 0.95, -h)) / (2 * h)
        assert fd > 0

    def test_normal_matches_finite_difference(self):
        rng = np.random.default_rng(9)
        u1, u2 = rng.uniform(0.01, 0.99, (2, 100))
        rho = rng.uniform(-0.9, 0.9, 100)
        for a, b, r in zip(u1, u2, rho):
            h = 1e-5
            fd = (copula_logpdf("normal", a, b, r + h) - copula_logpdf("normal", a, b, r - h)) / (2 * h)
            s = copula_score("normal", a, b, r)
            assert abs(s - fd) <= 1e-5 * max(abs(fd), 1.0)

    def test_student_matches_finite_difference(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            a, b = rng.uniform(0.01, 0.99, 2)
            r, nu_inv = rng.uniform(-0.8, 0.8), rng.uniform(0.02, 0.3)
            h = 1e-5
            fd = (copula_logpdf("student_t", a, b, r + h, nu_inv)
                  - copula_logpdf("student_t", a, b, r - h, nu_inv)) / (2 * h)
            assert abs(copula_score("student_t", a, b, r, nu_inv) - fd) <= 1e-5 * max(abs(fd), 1.0)

    def test_score_has_mean_zero(self):
        for family, delta in (("normal", 0.4), ("rotated_gumbel", 1.6), ("clayton", 1.0)):
            u1, u2 = copula_sample(family, delta, 200_000, seed=11)
            s = copula_score(family, u1, u2, delta)
            assert abs(s.mean()) < 4 * s.std() / np.sqrt(s.size)


class TestFisherInfo:
    @staticmethod
    def _quadrature(rho):
        def f(y, x):
            u, v = special.ndtr(x), special.ndtr(y)
            s = copula_score("normal", u, v, rho)
            return float(s * s) * stats.multivariate_normal.pdf([x, y], cov=[[1, rho], [rho, 1]])

        return integrate.dblquad(f, -9, 9, -9, 9, epsabs=1e-9, epsrel=1e-8)[0]

    @pytest.mark.parametrize("rho", [0.0, 0.3, RHO, 0.85])
    def test_normal_against_quadrature(self, rho):
        assert fisher_info("normal", rho) == pytest.approx(self._quadrature(rho), rel=0.02)

    def test_normal_closed_form(self):
        rho = np.linspace(-0.9, 0.9, 13)
        np.testing.assert_allclose(fisher_info("normal", rho), (1 + rho**2) / (1 - rho**2) ** 2, rtol=0.02)

    def test_symmetric(self):
        for rho in (0.2, 0.5, 0.8):
            assert fisher_info("normal", rho) == pytest.approx(fisher_info("normal", -rho), rel=0.02)

    def test_positive(self):
        assert np.all(fisher_info("normal", np.linspace(-0.99, 0.99, 50)) > 0)
        assert np.all(fisher_info("rotated_gumbel", np.linspace(1.01, 20, 50)) > 0)
        assert np.all(fisher_info("student_t", np.linspace(-0.9, 0.9, 9), 0.1) > 0)

    def test_student_closed_form_against_mc(self):
        rho, nu_inv = 0.5, 0.125
        u1, u2 = copula_sample("student_t", rho, 400_000, seed=12, nu_inv=nu_inv)
        s = copula_score("student_t", u1, u2, rho, nu_inv)
        assert fisher_info("student_t", rho, nu_inv) == pytest.approx(np.mean(s * s), rel=0.02)

    def test_outside_grid_warns(self):
        with pytest.warns(UserWarning):
            fisher_info("rotated_gumbel", 1.0 + 1e-4)


pit = arrays(np.float64, 40, elements=st.floats(1e-6, 1 - 1e-6))


class TestGasFilter:
    @settings(max_examples=40, deadline=None)
    @given(pit, pit, st.floats(-2.0, 2.0))
    def test_frozen_dynamics_equal_constant_normal(self, u1, u2, w):
        path = gas_filter("normal", GasParams(w, 0.0, 0.0), u1, u2, kappa1=w)
        const = np.sum(copula_logpdf("normal", u1, u2, transform("normal", w)))
        assert path.loglik == pytest.approx(const, rel=1e-13, abs=1e-11)
        np.testing.assert_allclose(path.kappa, w, atol=0)

    @settings(max_examples=30, deadline=None)
    @given(pit, pit, st.floats(-2.0, 2.0), st.sampled_from(["rotated_gumbel", "student_t"]))
    def test_frozen_dynamics_equal_constant_others(self, u1, u2, w, family):
        nu_inv = 0.1 if family == "student_t" else None
        path = gas_filter(family, GasParams(w, 0.0, 0.0, nu_inv), u1, u2, kappa1=w)
        const = np.sum(copula_logpdf(family, u1, u2, transform(family, w), nu_inv))
        assert path.loglik == pytest.approx(const, rel=1e-12, abs=1e-10)

    def test_fixed_point(self):
        u1, u2 = copula_sample("normal", 0.3, 200, seed=13)
        p = GasParams(0.05, 0.0, 0.9)
        path = gas_filter("normal", p, u1, u2, kappa1=p.kappa_bar)
        np.testing.assert_allclose(path.kappa, p.kappa_bar, rtol=1e-14)

    def test_recursion_by_hand(self):
        u1, u2 = copula_sample("normal", 0.5, 50, seed=14)
        p = GasParams(0.02, 0.05, 0.95)
        path = gas_filter("normal", p, u1, u2, kappa1=0.8)
        k = 0.8
        for t in range(50):
            assert path.kappa[t] == pytest.approx(k, rel=1e-12)
            rho = transform("normal", k)
            s = copula_score("normal", u1[t], u2[t], rho)
            k = p.w + p.b * k + p.a * s / np.sqrt(fisher_info("normal", rho))
        assert path.kappa_next == pytest.approx(k, rel=1e-12)

    def test_tracks_simulated_path(self):
        u1, u2, truth = gas_simulate("normal", NGAS_TABLE2, 2000, seed=15)
        path = gas_filter("normal", NGAS_TABLE2, u1, u2, kappa1=NGAS_TABLE2.kappa_bar)
        assert np.mean(np.abs(path.delta - truth)) < 0.05

    @pytest.mark.parametrize("family, delta", [("normal", 0.6042), ("rotated_gumbel", 1.5819)])
    def test_scaled_score_unit_variance(self, family, delta):
        u1, u2 = copula_sample(family, delta, 100_000, seed=16)
        s = copula_score(family, u1, u2, delta) / np.sqrt(fisher_info(family, delta))
        assert s.var() == pytest.approx(1.0, abs=0.03)

    def test_bad_params(self):
        with pytest.raises(ValueError):
            GasParams(0.0, 0.1, 1.0)
        with pytest.raises(ValueError):
            GasParams(0.0, -0.1, 0.5)
        with pytest.raises(ValueError):
            gas_filter("clayton", GasParams(0.0, 0.1, 0.5), [0.5], [0.5])


class TestFit:
    def test_independent(self):
        u1, u2 = np.random.default_rng(17).random((2, 2000))
        assert abs(constant_fit("normal", u1, u2).delta) < 0.05

    def test_normal_recovery(self):
        u1, u2 = copula_sample("normal", RHO, 5000, seed=18)
        assert abs(constant_fit("normal", u1, u2).delta - RHO) < 0.03

    def test_rotated_gumbel_recovery(self):
        u1, u2 = copula_sample("rotated_gumbel", 1.6130, 5000, seed=19)
        assert abs(constant_fit("rotated_gumbel", u1, u2).delta - 1.6130) < 0.06

    def test_fit_beats_neighbors(self):
        u1, u2 = copula_sample("clayton", 1.2, 3000, seed=20)
        fit = constant_fit("clayton", u1, u2)
        for d in (fit.delta * 0.99, fit.delta * 1.01):
            assert np.sum(copula_logpdf("clayton", u1, u2, d)) < fit.loglik

    @pytest.mark.parametrize("family", ["student_t", "sjc"])
    def test_two_parameter_families(self, family):
        nu_inv = 0.2 if family == "student_t" else None
        u1, u2 = copula_sample("student_t", 0.5, 4000, seed=21, nu_inv=0.2)
        fit = constant_fit(family, u1, u2)
        assert fit.n_params == 2
        if family == "student_t":
            assert abs(fit.delta - 0.5) < 0.04
            assert abs(fit.nu_inv - nu_inv) < 0.07
        else:
            tl, tu = fit.delta
            assert 0 < tl < 1 and 0 < tu < 1

    def test_gas_on_constant_data(self):
        u1, u2 = copula_sample("normal", RHO, 3000, seed=22)
        const = constant_fit("normal", u1, u2)
        gas = gas_fit("normal", u1, u2)
        assert gas.loglik >= const.loglik - 1e-6
        assert gas.loglik - const.loglik < 2.0
        assert gas.gas.a < 0.05

    @pytest.mark.slow
    def test_gas_persistence_recovery(self):
        u1, u2, _ = gas_simulate("normal", NGAS_TABLE2, 5000, seed=23)
        fit = gas_fit("normal", u1, u2)
        assert abs(fit.gas.b - 0.9911) < 0.05

    @pytest.mark.slow
    def test_student_gas_collapses_to_normal(self):
        u1, u2, _ = gas_simulate("normal", NGAS_TABLE2, 3000, seed=24)
        tg = gas_fit("student_t", u1, u2)
        ng = gas_fit("normal", u1, u2)
        assert tg.gas.nu_inv < 0.03
        assert abs(tg.loglik - ng.loglik) < 2.0

    def test_dict_round_trip(self):
        u1, u2 = copula_sample("rotated_gumbel", 1.5, 1500, seed=25)
        for fit in (constant_fit("rotated_gumbel", u1, u2), gas_fit("rotated_gumbel", u1, u2)):
            back = CopulaFit.from_dict(fit.to_dict())
            assert back.filter(u1, u2).loglik == pytest.approx(fit.loglik, rel=1e-12)

    def test_gas_simulation_reproducible(self):
        a = gas_simulate("rotated_gumbel", GasParams(-0.05, 0.05, 0.9), 300, seed=26)
        b = gas_simulate("rotated_gumbel", GasParams(-0.05, 0.05, 0.9), 300, seed=26)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)
