"""Bulk energy density laws: families, conjugates, growth diagnostics."""

import numpy as np
import pytest
from scipy.integrate import quad

from orlicz_elastica import nfunction as nf


def all_builtin_families():
    """Representative parameter grid over the built-in families."""
    out = [nf.make_family("quadratic", lambda_tilde=0.5)]
    for kappa in (0.0, 1.0):
        for p in (1.5, 2.0, 3.0, 4.0):
            out.append(nf.make_family("power_kappa", kappa=kappa, p=p))
            out.append(nf.make_family("power_shifted", kappa=kappa, p=p))
            for beta in (0.5, 1.0):
                out.append(nf.make_family("log_corrected", kappa=kappa, p=p, beta=beta))
    return out


def exp_density():
    """phi(t) = e^t - t - 1: a valid convex density that is not doubling."""
    return nf.NFunction(
        lambda t: np.expm1(t) - t,
        lambda t: np.expm1(t),
        lambda t: np.exp(t),
    )


class TestFamilies:
    def test_power_kappa_zero_is_half_square(self):
        phi = nf.make_family("power_kappa", kappa=0.0, p=2.0)
        assert phi.value(2.0) == pytest.approx(2.0, abs=1e-15)

    def test_power_kappa_value_against_quadrature(self):
        # independent oracle: adaptive quadrature of the defining integrand
        phi = nf.make_family("power_kappa", kappa=1.0, p=3.0)
        ref = quad(lambda s: (1.0 + s) * s, 0.0, 1.0)[0]
        assert ref == pytest.approx(5.0 / 6.0, rel=1e-12)
        assert phi.value(1.0) == pytest.approx(ref, rel=1e-12)

    def test_quadratic_derivative(self):
        phi = nf.make_family("quadratic", lambda_tilde=1.0)
        t = np.linspace(-3.0, 3.0, 13)
        assert np.allclose(phi.deriv(t), 2.0 * t, rtol=0, atol=0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(tag="power_kappa", kappa=-1.0),
            dict(tag="power_kappa", p=1.0),
            dict(tag="power_shifted", p=0.5),
            dict(tag="log_corrected", beta=-0.1),
            dict(tag="quadratic", lambda_tilde=0.0),
            dict(tag="nope"),
        ],
    )
    def test_invalid_parameters_raise(self, kwargs):
        with pytest.raises(ValueError):
            nf.make_family(**kwargs)

    def test_evenness_and_odd_derivative(self):
        t = np.linspace(0.1, 8.0, 23)
        for phi in all_builtin_families():
            assert np.array_equal(phi.value(-t), phi.value(t))
            assert np.array_equal(phi.deriv(-t), -phi.deriv(t))
            assert np.array_equal(phi.deriv2(-t), phi.deriv2(t))
            assert phi.value(0.0) == 0.0
            assert phi.deriv(0.0) == 0.0
            assert np.all(phi.deriv(t) > 0.0)
            assert np.all(phi.deriv(t) * t >= 0.0)

    def test_value_reconstructs_from_derivative(self):
        # closed forms (or panel quadrature) vs an independent adaptive rule
        for phi in all_builtin_families():
            for t in (0.37, 1.0, 4.2, 19.0):
                ref = quad(phi.deriv, 0.0, t, limit=200)[0]
                assert abs(phi.value(t) - ref) <= 1e-10 * (1.0 + ref)

    def test_deriv2_is_finite_at_origin_for_singular_exponents(self):
        phi = nf.make_family("power_kappa", kappa=0.0, p=1.5)
        assert np.isfinite(phi.deriv2(0.0))
        phi = nf.make_family("log_corrected", kappa=0.0, p=1.5, beta=1.0)
        assert np.isfinite(phi.deriv2(0.0))


class TestConjugate:
    def test_half_square_is_self_conjugate(self):
        phi = nf.NFunction(lambda t: 0.5 * t * t, lambda t: t, lambda t: np.ones_like(t))
        assert nf.conjugate(phi, 3.0) == pytest.approx(4.5, rel=1e-10)

    def test_quartic_power_closed_form_and_grid_oracle(self):
        phi = nf.make_family("power_kappa", kappa=0.0, p=4.0)
        # closed form: conjugate of t^p/p is t^q/q with 1/p + 1/q = 1
        assert nf.conjugate(phi, 1.0) == pytest.approx(0.75, rel=1e-10)
        s = np.linspace(0.0, 4.0, 400001)
        grid_sup = np.max(s * 2.0 - phi.value(s))
        assert nf.conjugate(phi, 2.0) == pytest.approx(grid_sup, rel=1e-8)

    def test_zero_argument_is_exactly_zero(self):
        for phi in all_builtin_families():
            assert nf.conjugate(phi, 0.0) == 0.0

    def test_evenness_in_argument(self):
        phi = nf.make_family("power_shifted", kappa=1.0, p=3.0)
        assert nf.conjugate(phi, -2.5) == pytest.approx(nf.conjugate(phi, 2.5), rel=1e-12)

    def test_bounded_slope_raises_with_diagnostics(self):
        # phi' saturates at 1, so the conjugate is infinite for t > 1
        phi = nf.NFunction(
            lambda t: t - np.log1p(t),
            lambda t: t / (1.0 + t),
            lambda t: 1.0 / (1.0 + t) ** 2,
        )
        with pytest.raises(ArithmeticError, match="bracketing"):
            nf.conjugate(phi, 2.0)

    def test_fenchel_young_inequality_and_equality(self):
        rng = np.random.default_rng(42)
        for phi in [
            nf.make_family("power_kappa", kappa=1.0, p=3.0),
            nf.make_family("power_shifted", kappa=1.0, p=4.0),
            nf.make_family("log_corrected", kappa=1.0, p=2.0, beta=1.0),
        ]:
            s = rng.uniform(0.0, 6.0, 300)
            t = rng.uniform(0.0, float(phi.deriv(6.0)), 300)
            lhs = s * t
            rhs = phi.value(s) + nf.conjugate(phi, t)
            assert np.all(lhs <= rhs + 1e-10 * (1.0 + np.abs(rhs)))
            # equality at t = phi'(s)
            ts = phi.deriv(s)
            gap = np.abs(s * ts - (phi.value(s) + nf.conjugate(phi, ts)))
            assert np.max(gap / (1.0 + np.abs(s * ts))) < 1e-8


class TestDelta2:
    def test_pure_square_has_ratio_four(self):
        # symbolic oracle: phi(2t)/(phi(t)+1) = 4 phi(t)/(phi(t)+1) <= 4
        phi = nf.make_family("power_kappa", kappa=0.0, p=2.0)
        rep = nf.check_delta2(phi)
        assert rep.satisfied
        assert rep.C_observed <= 4.0 + 1e-12

    def test_exponential_fails(self):
        phi = exp_density()
        # oracle: the doubling ratio explodes along 10, 20, 40
        r = [phi.value(2.0 * t) / (phi.value(t) + 1.0) for t in (10.0, 20.0, 40.0)]
        assert r[1] > 100.0 * r[0] and r[2] > 100.0 * r[1]
        assert not nf.check_delta2(phi).satisfied
        assert not nf.check_delta2(phi, t_max=100.0).satisfied  # no-overflow regime

    def test_log_corrected_satisfied(self):
        rep = nf.check_delta2(nf.make_family("log_corrected", kappa=1.0, p=2.0, beta=1.0))
        assert rep.satisfied
        assert np.isfinite(rep.C_observed)

    def test_all_builtin_families_satisfied(self):
        for phi in all_builtin_families():
            rep = nf.check_delta2(phi)
            assert rep.satisfied, phi
            assert rep.C_observed <= 2.0 ** 4.5  # p <= 4 on the grid

    def test_parameter_validation(self):
        phi = all_builtin_families()[0]
        with pytest.raises(ValueError):
            nf.check_delta2(phi, t_max=-1.0)
        with pytest.raises(ValueError):
            nf.check_delta2(phi, samples=1)


class TestGoodPhiPrime:
    def test_half_square(self):
        phi = nf.NFunction(lambda t: 0.5 * t * t, lambda t: t, lambda t: np.ones_like(t))
        rep = nf.check_good_phi_prime(phi)
        assert rep.lower_ok
        assert rep.C_observed <= 2.0 + 1e-12
        assert rep.upper_bounded

    def test_power_kappa(self):
        rep = nf.check_good_phi_prime(nf.make_family("power_kappa", kappa=1.0, p=3.0))
        assert rep.lower_ok and rep.upper_bounded

    def test_exponential_lower_holds_but_upper_trend_flagged(self):
        rep = nf.check_good_phi_prime(exp_density(), t_max=100.0)
        assert rep.lower_ok
        assert not rep.upper_bounded

    def test_doubling_implies_bounded_upper_ratio(self):
        for phi in all_builtin_families():
            if nf.check_delta2(phi).satisfied:
                rep = nf.check_good_phi_prime(phi)
                assert rep.lower_ok
                assert np.isfinite(rep.C_observed) and rep.upper_bounded


class TestConvexity:
    def test_quadratic(self):
        assert nf.check_convexity(nf.make_family("quadratic", lambda_tilde=2.0))

    def test_log_corrected(self):
        assert nf.check_convexity(nf.make_family("log_corrected", kappa=0.0, p=2.0, beta=2.0))

    def test_fabricated_decreasing_derivative_fails(self):
        # value looks benign; the supplied derivative is not non-decreasing
        phi = nf.NFunction(
            lambda t: np.sqrt(1.0 + t * t) - 1.0,
            lambda t: 1.0 / (1.0 + t),
            lambda t: np.ones_like(t),
        )
        assert not nf.check_convexity(phi)

    def test_concave_value_fails_midpoint_test(self):
        phi = nf.NFunction(
            lambda t: np.sqrt(t),
            lambda t: 0.5 / np.sqrt(np.maximum(t, 1e-12)),
            lambda t: np.zeros_like(t),
        )
        assert not nf.check_convexity(phi)

    def test_sample_count_validation(self):
        with pytest.raises(ValueError):
            nf.check_convexity(all_builtin_families()[0], samples=2)
