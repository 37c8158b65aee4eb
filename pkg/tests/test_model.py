"""Unit tests for model containers, joint density pieces, and the generator."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from countmix.distributions import negbin_log_pmf, zinb_log_pmf
from countmix.model import (
    CovariateColumn,
    Dataset,
    Hyperparams,
    LINPRED_CLAMP,
    ModelSpec,
    ParamState,
    complete_log_likelihood,
    component_mean,
    generate_synthetic,
    log_prior,
)


class TestContainers:
    def test_hyperparam_defaults(self):
        h = Hyperparams()
        assert (h.alpha0, h.m0, h.s0, h.a0, h.b0, h.k_max) == (0.1, 0.0, 10.0, 0.0, 2.0, 10)

    @pytest.mark.parametrize("kwargs", [
        {"alpha0": 0.0}, {"s0": -1.0}, {"b0": 0.0}, {"k_max": 0},
    ])
    def test_hyperparam_validation(self, kwargs):
        with pytest.raises(ValueError):
            Hyperparams(**kwargs)

    def test_modelspec_validation(self):
        with pytest.raises(ValueError):
            ModelSpec("poisson")
        with pytest.raises(ValueError):
            ModelSpec("zinb", pi_prior=(0.0, 1.0))
        assert ModelSpec("zinb").zero_inflated
        assert not ModelSpec("nb").zero_inflated

    def test_dataset_requires_intercept(self):
        X = np.column_stack([np.full(4, 2.0), np.ones(4)])
        with pytest.raises(ValueError):
            Dataset(y=[1, 2, 3, 4], X=X, column_names=("a", "b"))

    def test_dataset_rejects_bad_outcomes(self):
        X = np.ones((3, 1))
        with pytest.raises(ValueError):
            Dataset(y=[1, -2, 3], X=X, column_names=("intercept",))
        with pytest.raises(ValueError):
            Dataset(y=[1.5, 2, 3], X=X, column_names=("intercept",))

    def test_dataset_rejects_nonfinite_covariates(self):
        X = np.ones((3, 2))
        X[1, 1] = np.nan
        with pytest.raises(ValueError):
            Dataset(y=[1, 2, 3], X=X, column_names=("intercept", "x"))

    def test_dataset_immutable(self, small_dataset):
        with pytest.raises(ValueError):
            small_dataset.y[0] = 99

    def test_state_validation(self, small_dataset):
        state = ParamState(
            c=np.array([0.5, 0.5]),
            beta=np.zeros((2, 2)),
            psi=np.ones(2),
            z=np.zeros(small_dataset.n, dtype=int),
        )
        state.validate(small_dataset)
        bad = state.copy()
        bad.psi[0] = -1.0
        with pytest.raises(ValueError):
            bad.validate()
        bad = state.copy()
        bad.c = np.array([0.7, 0.7])
        with pytest.raises(ValueError):
            bad.validate()
        with pytest.raises(ValueError):
            state.validate(small_dataset, ModelSpec("zinb"))


class TestComponentMean:
    def test_zero_coefficients(self):
        mean, clamped = component_mean(np.zeros(3), np.array([1.0, 2.0, -1.0]))
        assert mean == 1.0 and not clamped

    def test_intercept_only(self):
        mean, _ = component_mean(np.array([math.log(44.0), 0.0]), np.array([1.0, 0.0]))
        assert mean == pytest.approx(44.0, rel=1e-12)

    def test_arithmetic(self):
        mean, _ = component_mean(np.array([0.5, 0.25]), np.array([1.0, 2.0]))
        assert mean == pytest.approx(math.e, rel=1e-12)

    def test_clamp_flag(self):
        mean, clamped = component_mean(np.array([100.0]), np.array([1.0]))
        assert clamped and mean == pytest.approx(math.exp(LINPRED_CLAMP))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            component_mean(np.zeros(2), np.zeros(3))


def _random_state(rng, k, d, n, zinb=False):
    c = rng.dirichlet(np.full(k, 2.0))
    state = ParamState(
        c=c,
        beta=rng.normal(0, 0.8, size=(k, d)),
        psi=np.exp(rng.normal(0, 0.5, size=k)),
        z=rng.integers(0, k, size=n),
    )
    if zinb:
        state.pi = rng.uniform(0.05, 0.6, size=k)
    return state


class TestCompleteLogLikelihood:
    def test_single_observation(self):
        data = Dataset(y=[7], X=np.array([[1.0, 0.5]]), column_names=("intercept", "x"))
        state = ParamState(
            c=np.array([1.0]), beta=np.array([[1.0, 0.4]]), psi=np.array([2.0]),
            z=np.array([0]))
        mu = math.exp(1.0 + 0.4 * 0.5)
        assert complete_log_likelihood(state, data, ModelSpec("nb")) == pytest.approx(
            negbin_log_pmf(7, mu, 2.0), abs=1e-12)

    def test_duplicated_observation_doubles(self):
        X = np.array([[1.0, 0.5], [1.0, 0.5]])
        data = Dataset(y=[7, 7], X=X, column_names=("intercept", "x"))
        single = Dataset(y=[7], X=X[:1], column_names=("intercept", "x"))
        state = ParamState(
            c=np.array([1.0]), beta=np.array([[1.0, 0.4]]), psi=np.array([2.0]),
            z=np.array([0, 0]))
        one = ParamState(c=np.array([1.0]), beta=state.beta, psi=state.psi,
                         z=np.array([0]))
        spec = ModelSpec("nb")
        assert complete_log_likelihood(state, data, spec) == pytest.approx(
            2.0 * complete_log_likelihood(one, single, spec), abs=1e-10)

    def test_term_by_term(self, rng):
        n, k = 5, 2
        X = np.column_stack([np.ones(n), rng.standard_normal(n)])
        y = rng.poisson(4.0, size=n)
        data = Dataset(y=y, X=X, column_names=("intercept", "x"))
        state = _random_state(rng, k, 2, n)
        spec = ModelSpec("nb")
        expected = sum(
            negbin_log_pmf(int(y[i]), math.exp(float(X[i] @ state.beta[state.z[i]])),
                           float(state.psi[state.z[i]]))
            for i in range(n))
        assert complete_log_likelihood(state, data, spec) == pytest.approx(expected, abs=1e-9)

    def test_zinb_term_by_term(self, rng):
        n, k = 6, 2
        X = np.column_stack([np.ones(n), rng.standard_normal(n)])
        y = np.array([0, 3, 0, 1, 8, 0])
        data = Dataset(y=y, X=X, column_names=("intercept", "x"))
        state = _random_state(rng, k, 2, n, zinb=True)
        spec = ModelSpec("zinb")
        expected = sum(
            zinb_log_pmf(int(y[i]), float(state.pi[state.z[i]]),
                         math.exp(float(X[i] @ state.beta[state.z[i]])),
                         float(state.psi[state.z[i]]))
            for i in range(n))
        assert complete_log_likelihood(state, data, spec) == pytest.approx(expected, abs=1e-9)

    @given(seed=st.integers(min_value=0, max_value=10 ** 6))
    @settings(max_examples=30, deadline=None)
    def test_permutation_invariance(self, seed):
        gen = np.random.default_rng(seed)
        n, k = 12, 4
        X = np.column_stack([np.ones(n), gen.standard_normal(n)])
        data = Dataset(y=gen.poisson(3.0, size=n), X=X, column_names=("intercept", "x"))
        spec = ModelSpec("nb")
        state = _random_state(gen, k, 2, n)
        perm = gen.permutation(k)
        inv = np.argsort(perm)
        permuted = ParamState(c=state.c[perm], beta=state.beta[perm],
                              psi=state.psi[perm], z=inv[state.z])
        base = complete_log_likelihood(state, data, spec)
        assert complete_log_likelihood(permuted, data, spec) == pytest.approx(
            base, abs=1e-12 * max(1.0, abs(base)))

    def test_poisson_limit(self, rng):
        from countmix.distributions import log_gamma
        n = 30
        X = np.column_stack([np.ones(n), rng.standard_normal(n)])
        y = rng.poisson(6.0, size=n)
        data = Dataset(y=y, X=X, column_names=("intercept", "x"))
        beta = np.array([[math.log(6.0), 0.2]])
        state = ParamState(c=np.array([1.0]), beta=beta, psi=np.array([1e6]),
                           z=np.zeros(n, dtype=int))
        mu = np.exp(np.clip(X @ beta[0], -LINPRED_CLAMP, LINPRED_CLAMP))
        yf = y.astype(float)
        poisson = yf * np.log(mu) - mu - log_gamma(yf + 1.0)
        nb = complete_log_likelihood(state, data, ModelSpec("nb"))
        assert abs(nb - poisson.sum()) < 1e-4 * n


class TestLogPrior:
    def test_closed_form_single_component(self):
        # K=1: Dirichlet term vanishes; one beta at its prior mode and
        # psi = 1 give two known closed-form contributions.
        state = ParamState(c=np.array([1.0]), beta=np.array([[0.0]]),
                           psi=np.array([1.0]), z=np.array([0]))
        spec = ModelSpec("nb", Hyperparams(k_max=1))
        normal_term = -math.log(10.0 * math.sqrt(2.0 * math.pi))
        lognormal_term = -math.log(2.0 * math.sqrt(2.0 * math.pi))
        assert normal_term == pytest.approx(-3.221524, abs=1e-6)
        assert lognormal_term == pytest.approx(-1.612086, abs=1e-6)
        assert log_prior(state, spec) == pytest.approx(
            normal_term + lognormal_term, abs=1e-9)

    def test_boundary_is_minus_inf(self):
        state = ParamState(c=np.array([1.0, 0.0]), beta=np.zeros((2, 1)),
                           psi=np.ones(2), z=np.array([0]))
        spec = ModelSpec("nb", Hyperparams(k_max=2))
        assert log_prior(state, spec) == -math.inf

    def test_zinb_adds_beta_terms(self):
        base = ParamState(c=np.array([1.0]), beta=np.array([[0.0]]),
                          psi=np.array([1.0]), z=np.array([0]))
        zstate = base.copy()
        zstate.pi = np.array([0.3])
        h = Hyperparams(k_max=1)
        nb_val = log_prior(base, ModelSpec("nb", h))
        # Beta(1,1) prior density is 1 everywhere, so the values coincide.
        assert log_prior(zstate, ModelSpec("zinb", h)) == pytest.approx(nb_val, abs=1e-12)
        # A non-uniform prior shifts it by the Beta(2,2) log density.
        spec22 = ModelSpec("zinb", h, pi_prior=(2.0, 2.0))
        expected = nb_val + math.log(6.0 * 0.3 * 0.7)
        assert log_prior(zstate, spec22) == pytest.approx(expected, abs=1e-10)

    @given(seed=st.integers(min_value=0, max_value=10 ** 6))
    @settings(max_examples=30, deadline=None)
    def test_permutation_invariance(self, seed):
        gen = np.random.default_rng(seed)
        k = 4
        state = _random_state(gen, k, 3, 5)
        spec = ModelSpec("nb", Hyperparams(k_max=k))
        perm = gen.permutation(k)
        permuted = ParamState(c=state.c[perm], beta=state.beta[perm],
                              psi=state.psi[perm], z=np.argsort(perm)[state.z])
        base = log_prior(state, spec)
        assert log_prior(permuted, spec) == pytest.approx(base, abs=1e-12 * max(1.0, abs(base)))


class TestGenerateSynthetic:
    def test_near_poisson_mean(self):
        data, _ = generate_synthetic(
            c=[1.0], beta=[[math.log(5.0)]], psi=[1e6], n=10 ** 5,
            covariates=[], seed=0)
        se = math.sqrt(5.0 / data.n)
        assert abs(data.y.mean() - 5.0) < 3 * se

    def test_component_frequencies(self):
        c = np.array([0.06, 0.58, 0.37]) / 1.01
        _, z = generate_synthetic(
            c=c, beta=[[1.0], [2.0], [3.0]], psi=[1.0, 1.0, 1.0], n=10 ** 5,
            covariates=[], seed=1)
        freq = np.bincount(z, minlength=3) / z.size
        se = np.sqrt(c * (1 - c) / z.size)
        assert np.all(np.abs(freq - c) < 3 * se)

    def test_deterministic(self, two_component_truth):
        t = two_component_truth
        a, za = generate_synthetic(t["c"], t["beta"], t["psi"], 500,
                                   t["covariates"], seed=5)
        b, zb = generate_synthetic(t["c"], t["beta"], t["psi"], 500,
                                   t["covariates"], seed=5)
        assert a == b
        np.testing.assert_array_equal(za, zb)

    def test_simplex_violation(self):
        with pytest.raises(ValueError):
            generate_synthetic([0.06, 0.58, 0.37], np.zeros((3, 1)),
                               [1.0, 1.0, 1.0], 10, [], seed=0)

    def test_n_must_be_positive(self):
        with pytest.raises(ValueError):
            generate_synthetic([1.0], [[0.0]], [1.0], 0, [], seed=0)

    def test_zero_inflation_raises_zero_fraction(self):
        base, _ = generate_synthetic([1.0], [[math.log(8.0)]], [5.0], 20000,
                                     [], seed=2)
        inflated, _ = generate_synthetic([1.0], [[math.log(8.0)]], [5.0], 20000,
                                         [], seed=2, pi=[0.4])
        frac_base = (base.y == 0).mean()
        frac_infl = (inflated.y == 0).mean()
        assert frac_infl > frac_base + 0.3

    def test_binary_covariate(self):
        data, _ = generate_synthetic(
            [1.0], [[0.0, 0.0]], [1.0], 5000,
            [CovariateColumn("b", "binary", 0.25)], seed=3)
        col = data.X[:, 1]
        assert set(np.unique(col)) <= {0.0, 1.0}
        assert abs(col.mean() - 0.25) < 3 * math.sqrt(0.25 * 0.75 / 5000)
