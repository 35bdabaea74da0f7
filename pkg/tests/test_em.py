import math
import warnings

import numpy as np
import pytest
from conftest import enumerate_paths, random_model, usa_model
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import multivariate_normal

from minskycycles.em import (
    PARAM_NAMES,
    EstimationConfig,
    SingularInformationWarning,
    conditional_density,
    em_step,
    estimate,
    hamilton_filter,
    hessian_std_errors,
    initial_model,
    kim_smoother,
    model_to_params,
    pairwise_probabilities,
    params_to_model,
    std_errors,
    weighted_var_ols,
)
from minskycycles.errors import (
    DataError,
    DegenerateCovarianceError,
    EstimationError,
    SmootherError,
)
from minskycycles.model import (
    Covariance2,
    MsVarModel,
    RegimeCoefficients,
    Restriction,
    TransitionMatrix,
    series_from_arrays,
)
from minskycycles.montecarlo import simulate


def sample(model, T, seed):
    return simulate(model, T, seed).data


# -- conditional density -------------------------------------------------------

class TestDensity:
    A = RegimeCoefficients.full([[0.5, 0.1], [0.2, 0.3]])

    def test_zero_residual_unit_cov(self):
        lag = np.array([1.0, -2.0])
        d = conditional_density(self.A.matrix @ lag, lag, self.A, Covariance2(1, 0, 1))
        assert d == pytest.approx(1 / (2 * math.pi), abs=1e-15)
        assert d == pytest.approx(0.1591549, abs=1e-7)

    def test_unit_residual(self):
        lag = np.zeros(2)
        d = conditional_density([1.0, 0.0], lag, self.A, Covariance2(1, 0, 1))
        assert d == pytest.approx(math.exp(-0.5) / (2 * math.pi), abs=1e-15)
        assert d == pytest.approx(0.0965324, abs=1e-7)

    def test_correlated_against_integration(self):
        sigma = Covariance2(2.0, 0.5, 1.0)
        lag = np.zeros(2)
        d = conditional_density([0.3, -0.2], lag, self.A, sigma)
        ref = multivariate_normal(mean=[0, 0], cov=sigma.matrix).pdf([0.3, -0.2])
        assert d == pytest.approx(ref, rel=1e-12)
        mass, _ = integrate.dblquad(
            lambda b, a: conditional_density([a, b], lag, self.A, sigma),
            -12, 12, -12, 12, epsabs=1e-10,
        )
        assert mass == pytest.approx(1.0, abs=1e-7)

    def test_degenerate(self):
        with pytest.raises(DegenerateCovarianceError, match="degenerate covariance"):
            conditional_density([0, 0], [0, 0], self.A, Covariance2(1.0, 1.0, 1.0))


# -- filter and smoother -------------------------------------------------------

def identical_regimes(P, init=None):
    d = RegimeCoefficients.diagonal(0.4, -0.3)
    return MsVarModel(
        RegimeCoefficients.full(d.matrix), d,
        Covariance2(1.0, 0.2, 0.8), Covariance2(1.0, 0.2, 0.8),
        TransitionMatrix.from_matrix(P), init,
    )


class TestFilter:
    def test_identical_regimes_keep_init(self):
        m = identical_regimes(np.eye(2), (0.3, 0.7))
        obs = np.random.default_rng(1).normal(size=(20, 2))
        f = hamilton_filter(m, obs)
        np.testing.assert_allclose(f.filtered, np.tile([0.3, 0.7], (19, 1)), atol=1e-14)

    def test_absorbing_regime(self):
        m = usa_model().with_init((1.0, 0.0))
        m = MsVarModel(m.regime1, m.regime2, m.sigma1, m.sigma2,
                       TransitionMatrix(1.0, 0.0, 0.0, 1.0), (1.0, 0.0))
        f = hamilton_filter(m, sample(usa_model(), 30, 0))
        assert np.all(f.filtered[:, 0] == 1.0)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            m = random_model(rng)
            f = kim_smoother(hamilton_filter(m, rng.normal(size=(40, 2))), m.trans)
            for arr in (f.filtered, f.predicted, f.smoothed):
                np.testing.assert_allclose(arr.sum(axis=1), 1.0, atol=1e-10)
                assert arr.min() >= -1e-12 and arr.max() <= 1 + 1e-12
            assert math.isfinite(f.loglik)

    def test_predicted_starts_at_init(self, usa):
        f = hamilton_filter(usa, sample(usa, 20, 2))
        np.testing.assert_array_equal(f.predicted[0], usa.init_dist)
        assert f.filtered.shape == (19, 2)

    def test_outputs_read_only(self, usa):
        f = hamilton_filter(usa, sample(usa, 20, 2))
        with pytest.raises(ValueError):
            f.filtered[0, 0] = 0.5

    def test_rejects_bad_array(self, usa):
        with pytest.raises(DataError):
            hamilton_filter(usa, np.zeros((5, 3)))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 8))
    def test_enumeration_oracle(self, seed, T):
        rng = np.random.default_rng(seed)
        m = random_model(rng)
        obs = rng.normal(size=(T, 2))
        ll, marg = enumerate_paths(m, obs)
        f = kim_smoother(hamilton_filter(m, obs), m.trans)
        assert f.loglik == pytest.approx(ll, abs=1e-10)
        np.testing.assert_allclose(f.smoothed, marg, atol=1e-10)


class TestSmoother:
    def test_terminal_condition(self, usa):
        f = kim_smoother(hamilton_filter(usa, sample(usa, 25, 3)), usa.trans)
        np.testing.assert_array_equal(f.smoothed[-1], f.filtered[-1])

    def test_frozen_chain(self):
        base = usa_model()
        m = MsVarModel(base.regime1, base.regime2, base.sigma1, base.sigma2,
                       TransitionMatrix(1.0, 0.0, 0.0, 1.0), (1.0, 0.0))
        f = kim_smoother(hamilton_filter(m, sample(base, 30, 5)), m.trans)
        assert np.all(f.smoothed[:, 0] == 1.0)

    def test_zero_predicted_with_mass_raises(self):
        from minskycycles.em import FilterOutput
        filt = FilterOutput(
            filtered=[[0.5, 0.5], [0.5, 0.5]],
            predicted=[[0.5, 0.5], [1.0, 0.0]],
            loglik=0.0,
        )
        with pytest.raises(SmootherError):
            kim_smoother(filt, TransitionMatrix(0.5, 0.5, 0.5, 0.5))

    def test_pairwise_consistency(self, usa):
        data = sample(usa, 40, 8)
        f = kim_smoother(hamilton_filter(usa, data), usa.trans)
        xi = pairwise_probabilities(f, usa.trans)
        assert xi.shape == (38, 2, 2)
        np.testing.assert_allclose(xi.sum(axis=2), f.smoothed[:-1], atol=1e-12)
        np.testing.assert_allclose(xi.sum(axis=1), f.smoothed[1:], atol=1e-12)

    def test_pairwise_needs_smoothed(self, usa):
        with pytest.raises(DataError):
            pairwise_probabilities(hamilton_filter(usa, sample(usa, 20, 1)), usa.trans)


# -- EM ------------------------------------------------------------------------

def loglik(model, data):
    return hamilton_filter(model, data).loglik


class TestEmStep:
    def test_fixed_point_zero_noise(self):
        A = np.diag([0.6, -0.4])
        obs = np.empty((20, 2))
        obs[0] = (1.0, 1.0)
        for t in range(1, 20):
            obs[t] = A @ obs[t - 1]
        data = series_from_arrays(obs[:, 0], obs[:, 1])
        tiny = Covariance2(1e-8, 0.0, 1e-8)
        m = MsVarModel(RegimeCoefficients.full(A), RegimeCoefficients.diagonal(0.6, -0.4),
                       tiny, tiny, TransitionMatrix.from_diagonal(0.8, 0.7))
        new = em_step(m, data)
        np.testing.assert_allclose(model_to_params(new), model_to_params(m), atol=1e-10)
        np.testing.assert_allclose(new.init_dist, m.init_dist, atol=1e-10)

    def test_ascent_one_step(self):
        rng = np.random.default_rng(11)
        for seed in range(10):
            data = sample(usa_model(), 60, seed)
            start = random_model(rng)
            before = loglik(start, data)
            after = loglik(em_step(start, data), data)
            assert after >= before - 1e-8

    def test_deterministic_weights_give_ols(self):
        data = sample(usa_model(), 50, 21)
        base = usa_model()
        frozen = MsVarModel(base.regime1, base.regime2, base.sigma1, base.sigma2,
                            TransitionMatrix(1.0, 0.0, 0.0, 1.0), (1.0, 0.0))
        f = kim_smoother(hamilton_filter(frozen, data), frozen.trans)
        assert np.all(f.smoothed[:, 0] == 1.0)
        obs = data.as_array()
        Z, X = obs[1:], obs[:-1]
        A = weighted_var_ols(Z, X, f.smoothed[:, 0])
        # normal equations by explicit 2x2 inverse
        sxx = X.T @ X
        det = sxx[0, 0] * sxx[1, 1] - sxx[0, 1] * sxx[1, 0]
        inv = np.array([[sxx[1, 1], -sxx[0, 1]], [-sxx[1, 0], sxx[0, 0]]]) / det
        oracle = (inv @ (X.T @ Z)).T
        np.testing.assert_allclose(A, oracle, atol=1e-10)

    def test_regime2_stays_diagonal(self):
        data = sample(usa_model(), 60, 2)
        m = initial_model(data)
        for _ in range(25):
            m = em_step(m, data)
            assert m.regime2.a12 == 0.0 and m.regime2.a21 == 0.0
            assert m.regime2.restriction is Restriction.DIAGONAL
            assert m.regime1.restriction is Restriction.FULL
            assert abs(m.trans.p11 + m.trans.p12 - 1) <= 1e-12
            assert abs(m.trans.p21 + m.trans.p22 - 1) <= 1e-12


class TestEstimate:
    def test_usa_recovery_seed1(self):
        truth = usa_model()
        data = sample(truth, 200, 1)
        res = estimate(data, EstimationConfig(restarts=10, seed=0))
        np.testing.assert_allclose(res.model.regime1.matrix, truth.regime1.matrix, atol=0.15)
        assert res.model.regime1.a12 < 0 < res.model.regime1.a21
        assert res.converged

    def test_zero_iterations_returns_start(self):
        data = sample(usa_model(), 60, 3)
        res = estimate(data, EstimationConfig(max_iter=0, restarts=1, compute_se=False))
        assert res.model == initial_model(data)
        assert res.iterations == 0
        assert res.converged is False
        assert len(res.loglik_path) == 1

    def test_deterministic(self):
        data = sample(usa_model(), 80, 4)
        cfg = EstimationConfig(restarts=4, seed=123)
        a, b = estimate(data, cfg), estimate(data, cfg)
        assert a.model == b.model
        assert a.std_errors.tobytes() == b.std_errors.tobytes()
        assert a.loglik_path == b.loglik_path
        assert a.filter.smoothed.tobytes() == b.filter.smoothed.tobytes()

    def test_path_monotone_and_best_restart(self):
        data = sample(usa_model(), 80, 5)
        res = estimate(data, EstimationConfig(restarts=5, seed=1, compute_se=False))
        assert np.all(np.diff(res.loglik_path) >= -1e-8)
        assert res.loglik == res.loglik_path[-1]
        assert 0 <= res.restart < 5

    def test_total_failure_raises(self):
        flat = series_from_arrays(np.zeros(20), np.zeros(20))
        with pytest.raises(EstimationError):
            estimate(flat, EstimationConfig(restarts=2))

    @pytest.mark.parametrize("kwargs", [dict(max_iter=-1), dict(restarts=0), dict(tol=0.0)])
    def test_config_validation(self, kwargs):
        with pytest.raises(DataError):
            EstimationConfig(**kwargs)


# -- standard errors -----------------------------------------------------------

class TestStdErrors:
    @pytest.mark.parametrize("c", [0.5, 4.0, 250.0])
    def test_quadratic_probe(self, c):
        se, ok = hessian_std_errors(lambda th: -0.5 * c * (th[0] - 1.3) ** 2, np.array([1.3]))
        assert ok
        assert se[0] == pytest.approx(1 / math.sqrt(c), rel=0.02)

    def test_flat_direction_nan_with_warning(self):
        data = sample(usa_model(), 60, 6)
        d = RegimeCoefficients.diagonal(0.4, 0.3)
        dup = MsVarModel(RegimeCoefficients.full(d.matrix), d, Covariance2(1, 0, 1),
                         Covariance2(1, 0, 1), TransitionMatrix.from_diagonal(0.8, 0.8))
        with pytest.warns(SingularInformationWarning):
            se = std_errors(dup, data)
        assert np.isnan(se[PARAM_NAMES.index("p11")])
        assert np.isnan(se[PARAM_NAMES.index("p22")])

    def test_nonnegative_where_defined(self):
        data = sample(usa_model(), 120, 7)
        res = estimate(data, EstimationConfig(restarts=2))
        se = res.std_errors
        assert se.shape == (14,)
        assert np.all(se[np.isfinite(se)] >= 0)

    def test_sqrt_two_scaling(self):
        truth = usa_model()
        ratios = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SingularInformationWarning)
            for seed in range(50):
                full = simulate(truth, 400, seed).data
                half = series_from_arrays(full.y[:200], full.f[:200])
                ratios.append(std_errors(truth, half) / std_errors(truth, full))
        ratio = np.nanmedian(np.array(ratios), axis=0)
        np.testing.assert_allclose(ratio, math.sqrt(2), rtol=0.15)

    def test_param_round_trip(self, usa):
        theta = model_to_params(usa)
        back = params_to_model(theta, usa.init_dist)
        assert np.array_equal(model_to_params(back), theta)
        assert back.trans.p12 == pytest.approx(usa.trans.p12, abs=1e-15)
