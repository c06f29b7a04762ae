import math

import numpy as np
import pytest
from scipy import integrate

from tslim.constants import NORMALIZATION_PER_SAMPLE
from tslim.dynamics import (
    IntegratorConfig,
    ensemble_moments,
    propagate_gaussian_ou,
    simulate_langevin,
)
from tslim.errors import NumericalError, ValidationError
from tslim.linreg import (
    LimitKind,
    LinRegProblem,
    MPParams,
    asymptotic_terms,
    entropy_linreg,
    generate_teacher_problem,
    linreg_potential,
    log_partition_final,
    log_partition_init,
    mean_initial_loss,
    mp_density,
    mp_integral,
    mp_support,
    posterior,
    prior,
    sample_wishart_spectrum,
    tsl_asymptotic,
    tsl_finite,
    tsl_finite_average,
    tsl_limits,
    w2_linreg,
)
from tslim.thermo import (
    entropy_dynamic_gaussian,
    relative_entropy_gaussian,
    speed_limit,
    w2_gaussian,
)


@pytest.fixture
def scalar_problem() -> LinRegProblem:
    return LinRegProblem(X=np.array([[1.0]]), y=np.array([1.0]), lam=1.0, beta=1.0)


@pytest.fixture
def small_problem() -> LinRegProblem:
    return generate_teacher_problem(d=5, n=8, lam=0.7, beta=3.0, alpha=1.5, seed=4)


class TestScalarCase:
    def test_partition_functions(self, scalar_problem):
        assert log_partition_final(scalar_problem) == pytest.approx(
            0.5 * math.log(math.pi) - 0.25
        )
        assert log_partition_init(1.0, 1) == pytest.approx(0.5 * math.log(2 * math.pi))
        assert mean_initial_loss(scalar_problem) == pytest.approx(1.0)

    def test_entropy(self, scalar_problem):
        assert entropy_linreg(scalar_problem).value == pytest.approx(0.40343, abs=5e-6)

    def test_w2(self, scalar_problem):
        assert w2_linreg(scalar_problem) == pytest.approx(0.33578, abs=5e-6)

    def test_speed_limit(self, scalar_problem):
        report = tsl_finite(scalar_problem)
        assert report.t_sl == pytest.approx(0.8323, abs=5e-5)
        assert report.horizon_t is None
        assert report.entropy_normalization == NORMALIZATION_PER_SAMPLE

    def test_posterior(self, scalar_problem):
        post = posterior(scalar_problem)
        assert post.mean[0] == pytest.approx(0.5)
        assert post.covariance[0, 0] == pytest.approx(0.5)


class TestFiniteProblem:
    def test_posterior_is_gibbs_measure(self, small_problem):
        pot = linreg_potential(small_problem)
        post = posterior(small_problem)
        np.testing.assert_allclose(post.mean, pot.minimizer(), rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(
            post.covariance, np.linalg.inv(pot.A) / small_problem.beta, atol=1e-12
        )

    def test_w2_matches_general_formula(self, small_problem):
        expected = w2_gaussian(prior(small_problem), posterior(small_problem))
        assert w2_linreg(small_problem) == pytest.approx(expected, rel=1e-9)

    def test_entropy_is_relative_entropy_per_sample(self, small_problem):
        kl = relative_entropy_gaussian(prior(small_problem), posterior(small_problem))
        value = entropy_linreg(small_problem).value
        assert value * small_problem.n * small_problem.beta == pytest.approx(
            kl, rel=1e-9
        )

    def test_teacher_problem_is_reproducible(self):
        first = generate_teacher_problem(4, 6, 1.0, 1.0, 1.0, seed=9)
        second = generate_teacher_problem(4, 6, 1.0, 1.0, 1.0, seed=9)
        np.testing.assert_array_equal(first.X, second.X)
        np.testing.assert_allclose(first.y, first.X.T @ first.theta_star)

    def test_rotating_the_inputs_keeps_the_speed_limit(self, small_problem, rng):
        rotation, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        rotated = LinRegProblem(
            X=rotation @ small_problem.X,
            y=small_problem.y,
            lam=small_problem.lam,
            beta=small_problem.beta,
        )
        assert tsl_finite(rotated).t_sl == pytest.approx(
            tsl_finite(small_problem).t_sl, rel=1e-10
        )

    def test_teacher_norm_averages_to_alpha(self):
        alpha, d = 2.0, 50
        teachers = [
            generate_teacher_problem(d, 10, 1.0, 1.0, alpha, seed).theta_star
            for seed in range(100)
        ]
        squared = [float(theta @ theta) for theta in teachers]
        standard_error = alpha * math.sqrt(2 / d) / 10
        assert abs(np.mean(squared) - alpha) < 4 * standard_error

    @pytest.mark.slow
    def test_langevin_learning_respects_the_speed_limit(self):
        p = generate_teacher_problem(d=3, n=8, lam=1.0, beta=10.0, alpha=1.0, seed=0)
        pot = linreg_potential(p)
        start = prior(p)
        beta_inv = 1 / p.beta
        T = 10.0
        cfg = IntegratorConfig(
            dt=0.002,
            T=T,
            seed=1,
            n_realizations=2000,
            beta_inv=beta_inv,
            max_checkpoints=10,
        )
        learned = ensemble_moments(simulate_langevin(pot, start, cfg))
        assert w2_gaussian(learned, posterior(p)) < 0.02 * w2_linreg(p)

        law = propagate_gaussian_ou(pot, start, beta_inv, T)
        entropy = entropy_dynamic_gaussian(pot, start, beta_inv, T).value
        kl = relative_entropy_gaussian(start, posterior(p))
        assert entropy == pytest.approx(kl / p.beta, rel=1e-3)
        assert T >= speed_limit(w2_gaussian(start, law), entropy)
        # T_SL here is measured in units of the per-sample learning rate
        assert p.n * T >= tsl_finite(p).t_sl

    def test_seed_average(self):
        mean, reports = tsl_finite_average(4, 6, 1.0, 2.0, 1.0, seeds=[0, 1, 2])
        assert len(reports) == 3
        assert mean == pytest.approx(sum(r.t_sl for r in reports) / 3, rel=1e-12)

    def test_no_seeds(self):
        with pytest.raises(ValidationError, match="at least one seed"):
            tsl_finite_average(4, 6, 1.0, 1.0, 1.0, seeds=[])

    def test_target_length_mismatch(self):
        with pytest.raises(ValidationError, match="y: length 2"):
            LinRegProblem(X=np.ones((1, 3)), y=np.ones(2), lam=1.0, beta=1.0)

    def test_non_positive_weight_decay(self):
        with pytest.raises(ValidationError, match="lam"):
            LinRegProblem(X=np.ones((1, 1)), y=np.ones(1), lam=0.0, beta=1.0)

    def test_wishart_spectrum(self):
        spectrum = sample_wishart_spectrum(30, 60, seed=1)
        assert spectrum.shape == (30,)
        assert np.mean(spectrum) == pytest.approx(1.0, rel=0.1)


class TestMarchenkoPastur:
    def test_support(self):
        support = mp_support(4.0)
        assert support.gamma_minus == pytest.approx(1.0)
        assert support.gamma_plus == pytest.approx(9.0)
        assert support.atom_weight == pytest.approx(0.75)
        assert mp_support(0.5).atom_weight == 0.0

    def test_density_vanishes_outside_support(self):
        assert mp_density(0.01, 0.25) == 0.0
        assert mp_density(10.0, 0.25) == 0.0
        assert mp_density(1.0, 0.25) > 0.0

    def test_density_value(self):
        assert mp_density(2.0, 1.0) == pytest.approx(1 / (2 * math.pi), rel=1e-12)

    @pytest.mark.parametrize("gamma", [0.5, 4.0])
    def test_continuous_mass(self, gamma):
        support = mp_support(gamma)
        mass, _ = integrate.quad(
            mp_density, support.gamma_minus, support.gamma_plus, args=(gamma,)
        )
        assert mass == pytest.approx(min(1.0, 1 / gamma), rel=1e-6)

    @pytest.mark.parametrize("gamma", [0.1, 0.5, 1.0, 2.0, 10.0])
    def test_moments(self, gamma):
        assert mp_integral(np.ones_like, gamma) == pytest.approx(1.0, rel=1e-10)
        assert mp_integral(lambda s: s, gamma) == pytest.approx(1.0, rel=1e-10)
        assert mp_integral(lambda s: s**2, gamma) == pytest.approx(
            1.0 + gamma, rel=1e-10
        )

    def test_empirical_spectrum_follows_density(self):
        spectrum = sample_wishart_spectrum(400, 800, seed=2)
        empirical = np.mean(spectrum**2)
        assert empirical == pytest.approx(mp_integral(lambda s: s**2, 0.5), rel=0.02)

    def test_non_finite_integrand(self):
        with pytest.raises(NumericalError, match="not finite at the atom"):
            mp_integral(lambda s: 1.0 / s, 2.0)


class TestAsymptotic:
    def test_low_temperature_limit(self):
        mp = MPParams(gamma=2.0, lam=1.0, beta=1e6, alpha=1.0)
        assert tsl_asymptotic(mp) == pytest.approx(1.0, rel=0.01)
        assert tsl_limits(mp, LimitKind.BETA_INF) == pytest.approx(1.0, rel=1e-10)

    def test_low_temperature_without_mean_shift(self):
        mp = MPParams(gamma=2.0, lam=1.0, beta=1e6, alpha=1.0)
        assert tsl_asymptotic(mp, mean_shift=False) == pytest.approx(2.0, rel=0.01)
        wide = MPParams(gamma=0.5, lam=1.0, beta=1e6, alpha=1.0)
        assert tsl_asymptotic(wide, mean_shift=False) == pytest.approx(4.0, rel=0.01)
        assert tsl_limits(wide, "beta_inf", mean_shift=False) == pytest.approx(4.0)

    def test_many_samples_limit(self):
        mp = MPParams(gamma=1e-3, lam=0.5, beta=1.0, alpha=2.0)
        assert tsl_asymptotic(mp) == pytest.approx(1.959, rel=0.02)
        closer = MPParams(gamma=1e-5, lam=0.5, beta=1.0, alpha=2.0)
        assert tsl_asymptotic(closer) == pytest.approx(1.9955, rel=5e-4)
        assert tsl_limits(closer, LimitKind.N_INF) == 2.0
        # 2 (1 + alpha lambda), not 2 lambda alpha
        assert tsl_limits(closer, LimitKind.N_INF, mean_shift=False) == 4.0
        assert tsl_asymptotic(closer, mean_shift=False) == pytest.approx(4.0, rel=0.01)

    def test_high_temperature_limit(self):
        mp = MPParams(gamma=0.5, lam=1.0, beta=1e-6, alpha=1.0)
        assert tsl_asymptotic(mp) < 1e-3
        assert tsl_limits(mp, LimitKind.BETA_ZERO) == 0.0

    def test_many_parameters_limit(self):
        mp = MPParams(gamma=1e3, lam=1.0, beta=1.0, alpha=1.0)
        assert tsl_asymptotic(mp) < 0.1
        assert tsl_limits(mp, LimitKind.D_INF) == 0.0

    def test_low_temperature_limit_is_approached_from_below(self):
        limit = tsl_limits(
            MPParams(gamma=0.5, lam=1.0, beta=1.0, alpha=1.0), LimitKind.BETA_INF
        )
        assert limit == pytest.approx(2.0)
        values = np.array(
            [
                tsl_asymptotic(MPParams(gamma=0.5, lam=1.0, beta=10.0**k, alpha=1.0))
                for k in range(2, 7)
            ]
        )
        assert np.all(values < limit)
        assert np.all(np.diff(values) > 0)
        assert np.all(np.diff(limit - values) < 0)

    def test_limit_order_matters_for_many_parameters(self):
        cold = MPParams(gamma=1e3, lam=1.0, beta=1e6, alpha=1.0)
        assert tsl_limits(cold, LimitKind.BETA_INF) == pytest.approx(2e-3)
        assert tsl_asymptotic(cold) == pytest.approx(2e-3, rel=0.01)
        # 2 (1 + alpha lambda) once the 1/gamma weight of the continuous part is removed
        displayed = tsl_asymptotic(cold, mean_shift=False)
        assert cold.gamma * displayed == pytest.approx(4.0, rel=0.01)
        warm = MPParams(gamma=1e3, lam=1.0, beta=1.0, alpha=1.0)
        assert tsl_asymptotic(warm) == pytest.approx(8.32e-4, rel=0.02)
        assert tsl_limits(warm, LimitKind.D_INF) == 0.0

    def test_mean_shift_only_adds_entropy(self):
        mp = MPParams(gamma=0.8, lam=1.0, beta=2.0, alpha=1.0)
        with_shift = asymptotic_terms(mp)
        without = asymptotic_terms(mp, mean_shift=False)
        assert with_shift.numerator == without.numerator
        assert with_shift.denominator > without.denominator

    def test_unknown_limit(self):
        mp = MPParams(gamma=1.0, lam=1.0, beta=1.0, alpha=1.0)
        with pytest.raises(ValidationError, match="unknown limit 'gamma_inf'"):
            tsl_limits(mp, "gamma_inf")

    def test_invalid_parameters(self):
        with pytest.raises(ValidationError, match="gamma"):
            MPParams(gamma=0.0, lam=1.0, beta=1.0, alpha=1.0)
