"""Priors, likelihoods, and score assembly."""

import numpy as np
import pytest

from localsvgd import (
    Architecture,
    GaussianLikelihood,
    LogNormalPrior,
    PosteriorSpec,
    StandardNormalPrior,
    TrainConfig,
    TrainingSet,
    UniformBoxPrior,
    init_params,
    log_posterior,
    score,
    train,
)
from localsvgd.models import DoubleBananaModel
from localsvgd.models.base import ForwardModel, SurrogateModel


class ConstantModel(ForwardModel):
    """Returns a fixed vector regardless of input; zero Jacobian."""

    name = "constant"

    def __init__(self, value, input_dim):
        super().__init__()
        self.value = np.atleast_1d(np.asarray(value, dtype=float))
        self.input_dim = input_dim
        self.output_dim = self.value.shape[0]

    def _evaluate(self, x):
        return self.value

    def _jacobian(self, x):
        return np.zeros((self.output_dim, self.input_dim))


class LinearModel(ForwardModel):
    name = "linear"

    def __init__(self, a):
        super().__init__()
        self.a = np.asarray(a, dtype=float)
        self.output_dim, self.input_dim = self.a.shape

    def _evaluate(self, x):
        return self.a @ x

    def _jacobian(self, x):
        return self.a


def banana_spec():
    return PosteriorSpec(
        StandardNormalPrior(2),
        GaussianLikelihood(np.array([np.log(30.0)]), 0.3),
        DoubleBananaModel(),
    )


class TestLogPosterior:
    def test_double_banana_at_origin(self):
        # f(0,0) = 0, prior term 0: log pi = -(log 30)^2 / (2 * 0.09)
        assert log_posterior(banana_spec(), np.zeros(2)) == pytest.approx(
            -64.26746460569724, rel=1e-12
        )

    def test_uniform_prior_outside_support(self):
        spec = PosteriorSpec(
            UniformBoxPrior([0.0, 0.0], [1.0, 1.0]),
            GaussianLikelihood(np.zeros(1), 1.0),
            ConstantModel([0.0], 2),
        )
        assert log_posterior(spec, np.array([1.5, 0.5])) == -np.inf

    def test_same_output_same_density(self):
        spec = PosteriorSpec(
            UniformBoxPrior([-2.0], [2.0]),
            GaussianLikelihood(np.array([1.0]), 0.5),
            ConstantModel([0.3], 1),
        )
        assert log_posterior(spec, np.array([0.2])) == log_posterior(spec, np.array([-0.7]))

    def test_direct_banana_density_matches_split_form(self):
        # closed-form unnormalized density vs prior+likelihood assembly
        spec = banana_spec()
        rng = np.random.default_rng(3)
        y = np.log(30.0)
        for _ in range(20):
            x = rng.normal(size=2)
            fx = spec.model.evaluate(x)[0]
            direct = -0.5 * np.dot(x, x) - (y - fx) ** 2 / (2 * 0.3**2)
            assert log_posterior(spec, x) == pytest.approx(direct, rel=1e-12)


class TestScore:
    def test_prior_term_alone_with_zero_residual(self):
        spec = PosteriorSpec(
            StandardNormalPrior(2),
            GaussianLikelihood(np.array([0.7]), 0.2),
            ConstantModel([0.7], 2),
        )
        x = np.array([0.4, -1.1])
        np.testing.assert_array_equal(score(spec, x), -x)

    def test_banana_score_matches_finite_differences(self):
        spec = banana_spec()
        rng = np.random.default_rng(10)
        step = 1e-6
        for _ in range(20):
            x = rng.normal(size=2) * 0.8
            s = score(spec, x)
            fd = np.empty(2)
            for i in range(2):
                e = np.zeros(2)
                e[i] = step
                fd[i] = (log_posterior(spec, x + e) - log_posterior(spec, x - e)) / (2 * step)
            assert np.linalg.norm(s - fd) / np.linalg.norm(fd) < 1e-6

    def test_lognormal_prior_score_formula_and_fd(self):
        prior = LogNormalPrior(3)
        rng = np.random.default_rng(5)
        step = 1e-7
        for _ in range(10):
            x = np.exp(rng.normal(size=3))
            s = prior.score(x)
            np.testing.assert_allclose(s, -(np.log(x) + 1.0) / x, rtol=1e-14)
            fd = np.empty(3)
            for i in range(3):
                e = np.zeros(3)
                e[i] = step
                fd[i] = (prior.log_density(x + e) - prior.log_density(x - e)) / (2 * step)
            np.testing.assert_allclose(s, fd, rtol=1e-5, atol=1e-7)

    def test_uniform_support_projection(self):
        # a point outside the box is scored at the projected location
        lik = GaussianLikelihood(np.array([2.0]), 1.0)
        model = LinearModel(np.array([[1.0]]))
        spec = PosteriorSpec(UniformBoxPrior([0.0], [1.0]), lik, model)
        outside = score(spec, np.array([1.7]))
        at_edge = score(spec, np.array([1.0 - 1e-8]))
        np.testing.assert_array_equal(outside, at_edge)

    def test_surrogate_matches_analytic_on_linear_model(self):
        # train the emulator to convergence on f(x) = Ax, compare scores
        rng = np.random.default_rng(8)
        a = np.array([[1.5, -0.5], [0.2, 0.8]])
        exact = LinearModel(a)
        x_train = rng.uniform(-1, 1, size=(40, 2))
        data = TrainingSet(x_train, x_train @ a.T)
        arch = Architecture(2, 2, (16, 16))
        params = train(
            init_params(arch, 0),
            data,
            TrainConfig(learning_rate=3e-3, reg_constant=0.0, epochs=4000),
            rng_seed=1,
        )
        prior = StandardNormalPrior(2)
        lik = GaussianLikelihood(np.array([0.4, -0.2]), 0.5)
        spec_exact = PosteriorSpec(prior, lik, exact)
        spec_surr = PosteriorSpec(prior, lik, SurrogateModel(params))
        for _ in range(5):
            x = rng.uniform(-0.8, 0.8, size=2)
            np.testing.assert_allclose(
                score(spec_surr, x), score(spec_exact, x), rtol=0.05, atol=0.05
            )

    def test_prior_term_identical_across_model_types(self):
        # zero-residual points isolate the prior term bit-exactly
        prior = StandardNormalPrior(1)
        x = np.array([0.9])
        exact = LinearModel(np.array([[2.0]]))
        y = exact.evaluate(x)
        arch = Architecture(1, 1, (3,))
        surr = SurrogateModel(init_params(arch, 0))
        y_surr = surr.evaluate(x)
        s_exact = score(PosteriorSpec(prior, GaussianLikelihood(y, 1.0), exact), x)
        s_surr = score(PosteriorSpec(prior, GaussianLikelihood(y_surr, 1.0), surr), x)
        np.testing.assert_array_equal(s_exact, prior.score(x))
        np.testing.assert_array_equal(s_surr, prior.score(x))

    def test_batch_matches_single(self):
        spec = banana_spec()
        rng = np.random.default_rng(12)
        xs = rng.normal(size=(7, 2)) * 0.5
        batch = score(spec, xs)
        for i, x in enumerate(xs):
            np.testing.assert_allclose(batch[i], score(spec, x), rtol=1e-12)


class TestPriors:
    def test_uniform_box_validation(self):
        with pytest.raises(ValueError):
            UniformBoxPrior([0.0, 1.0], [1.0, 1.0])

    def test_lognormal_sampling_is_exp_of_normal(self):
        prior = LogNormalPrior(2)
        draws = prior.sample(np.random.default_rng(0), 5)
        ref = np.exp(np.random.default_rng(0).standard_normal((5, 2)))
        np.testing.assert_array_equal(draws, ref)

    def test_observation_dim_checked(self):
        with pytest.raises(ValueError):
            PosteriorSpec(
                StandardNormalPrior(2),
                GaussianLikelihood(np.zeros(3), 1.0),
                DoubleBananaModel(),
            )
