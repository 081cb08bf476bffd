"""Design point, error indicator, space-filling selection, and the outer loop."""

import numpy as np
import pytest

from localsvgd import (
    Architecture,
    EvalBudget,
    GaussianLikelihood,
    ParticleSet,
    RefinementConfig,
    StandardNormalPrior,
    TrainConfig,
    TrainingSet,
    design_point,
    error_indicator,
    init_params,
    refine_step,
    run_lsvgd,
    select_points,
)
from localsvgd.models.base import ForwardModel, SurrogateModel
from localsvgd.surrogate import mlp_forward


class QuadraticModel(ForwardModel):
    """Cheap stand-in: f(x) = (sum x^2, sum x)."""

    name = "quadratic"

    def __init__(self, dim=2):
        super().__init__()
        self.input_dim = dim
        self.output_dim = 2

    def _evaluate(self, x):
        return np.array([np.sum(x**2), np.sum(x)])


class FixedOutputModel(ForwardModel):
    name = "fixed"

    def __init__(self, value, dim=2):
        super().__init__()
        self.value = np.asarray(value, dtype=float)
        self.input_dim = dim
        self.output_dim = self.value.shape[0]

    def _evaluate(self, x):
        return self.value


def tiny_surrogate(dim=2, out=2, seed=0):
    return init_params(Architecture(dim, out, (4,)), seed)


def kahan_mean(points):
    """Compensated-summation column means (independent oracle)."""
    total = np.zeros(points.shape[1])
    comp = np.zeros(points.shape[1])
    for row in points:
        y = row - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total / points.shape[0]


class TestDesignPoint:
    def test_two_point_mean(self):
        pts = ParticleSet(np.array([[0.0, 0.0], [2.0, 2.0]]))
        np.testing.assert_array_equal(design_point(pts), [1.0, 1.0])

    def test_single_particle(self):
        pts = ParticleSet(np.array([[0.3, -0.4]]))
        np.testing.assert_array_equal(design_point(pts), [0.3, -0.4])

    def test_matches_kahan_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            pts = rng.normal(size=(50, 3)) * rng.uniform(0.1, 100.0)
            got = design_point(ParticleSet(pts))
            np.testing.assert_allclose(got, kahan_mean(pts), rtol=1e-14, atol=1e-14)


class TestErrorIndicator:
    def test_exact_surrogate_gives_zero(self):
        params = tiny_surrogate()
        x = np.array([0.2, 0.3])
        model = FixedOutputModel(mlp_forward(params, x))
        assert error_indicator(x, model, params) == 0.0

    def test_hand_computed_ratio(self):
        # ||f - fs|| / ||f|| = 0.5 / 5 with f = (3, 4), fs = (3, 4.5)
        model = FixedOutputModel(np.array([3.0, 4.0]))
        arch = Architecture(2, 2, (1,), activation="identity")
        net = init_params(arch, 0)
        net.theta[:] = 0.0
        net.theta[-2:] = np.array([3.0, 4.5])  # constant net via output biases
        assert error_indicator(np.zeros(2), model, net) == pytest.approx(0.1, rel=1e-12)

    def test_scale_invariance(self):
        arch = Architecture(2, 2, (1,), activation="identity")
        net = init_params(arch, 0)
        net.theta[:] = 0.0
        net.theta[-2:] = np.array([1.0, 2.0])
        x = np.zeros(2)
        base = error_indicator(x, FixedOutputModel([2.0, 1.0]), net)
        net.theta[-2:] *= 3.0
        scaled = error_indicator(x, FixedOutputModel([6.0, 3.0]), net)
        assert scaled == pytest.approx(base, rel=1e-12)

    def test_budget_and_counter_increment(self):
        params = tiny_surrogate()
        model = QuadraticModel()
        budget = EvalBudget()
        error_indicator(np.array([0.5, 0.5]), model, params, budget)
        assert budget.online_evals == 1
        assert model.eval_count == 1

    def test_degenerate_norm_falls_back_to_absolute(self):
        params = tiny_surrogate()
        x = np.array([0.1, 0.2])
        model = FixedOutputModel(np.zeros(2))
        expected = float(np.linalg.norm(mlp_forward(params, x)))
        with pytest.warns(UserWarning, match="absolute"):
            assert error_indicator(x, model, params) == pytest.approx(expected, rel=1e-12)


class TestSelectPoints:
    def test_self_selection_then_stop(self):
        x_star = np.array([0.5, 0.5])
        particles = ParticleSet(x_star[None, :])
        chosen = select_points(particles, x_star, None, q_max=3, radius=0.2)
        assert len(chosen) == 1
        np.testing.assert_array_equal(chosen[0], x_star)

    def test_one_dimensional_scenario(self):
        particles = ParticleSet(np.array([[0.1], [0.15], [1.0]]))
        existing = TrainingSet(np.array([[-1.0]]), np.array([[0.0]]))
        chosen = select_points(particles, np.array([0.0]), existing, q_max=2, radius=0.2)
        np.testing.assert_array_equal(np.array(chosen), [[0.1], [1.0]])

    def test_infeasible_radius_returns_empty(self):
        particles = ParticleSet(np.array([[0.0, 0.0], [0.1, 0.0]]))
        existing = TrainingSet(np.array([[0.05, 0.0]]), np.array([[0.0]]))
        assert select_points(particles, np.zeros(2), existing, q_max=5, radius=10.0) == []

    def test_feasibility_matches_brute_force(self):
        # every returned point is >= R from the pool and co-selections,
        # verified by exhaustive pairwise distances
        rng = np.random.default_rng(7)
        for trial in range(30):
            particles = ParticleSet(rng.normal(size=(int(rng.integers(3, 25)), 2)))
            n_existing = int(rng.integers(1, 8))
            existing = TrainingSet(rng.normal(size=(n_existing, 2)), rng.normal(size=(n_existing, 1)))
            radius = float(rng.uniform(0.05, 1.0))
            x_star = rng.normal(size=2)
            chosen = select_points(particles, x_star, existing, q_max=4, radius=radius)
            pool = list(existing.inputs)
            for p in chosen:
                assert all(np.linalg.norm(p - q) >= radius for q in pool)
                pool.append(p)


class TestRefineStep:
    def cfg(self):
        return RefinementConfig()

    def test_accurate_surrogate_is_noop(self):
        params = tiny_surrogate()
        pts = ParticleSet(np.array([[0.1, 0.1], [0.3, 0.2]]))
        x_star = design_point(ParticleSet(pts.points))
        model = FixedOutputModel(mlp_forward(params, x_star))
        trainset = TrainingSet(np.array([[5.0, 5.0]]), np.array([[0.0, 0.0]]))
        budget = EvalBudget()
        out_params, out_set, out_r, report = refine_step(
            pts, trainset, params, model, self.cfg(), 0.2, budget=budget
        )
        assert out_params is params and out_set is trainset and out_r == 0.2
        assert not report.refined
        assert budget.online_evals == 1  # only the indicator

    def test_infeasible_selection_shrinks_radius(self):
        params = tiny_surrogate()
        pts = ParticleSet(np.array([[0.0, 0.0], [0.01, 0.0]]))
        model = QuadraticModel()
        trainset = TrainingSet(np.array([[0.005, 0.0]]), np.array([[0.0, 0.005]]))
        budget = EvalBudget()
        out_params, out_set, out_r, report = refine_step(
            pts, trainset, params, model, self.cfg(), 0.2, budget=budget
        )
        assert out_r == 0.2 * 0.8
        assert out_params is params
        assert out_set.size == trainset.size
        assert report.radius_shrunk and not report.retrained
        assert budget.online_evals == 1

    def test_single_feasible_point_kept_but_no_retrain(self):
        params = tiny_surrogate()
        pts = ParticleSet(np.array([[1.0, 0.0], [1.01, 0.0]]))
        model = QuadraticModel()
        trainset = TrainingSet(np.array([[-5.0, 0.0]]), np.array([[25.0, -5.0]]))
        budget = EvalBudget()
        _, out_set, out_r, report = refine_step(
            pts, trainset, params, model, self.cfg(), 0.2, budget=budget
        )
        assert out_set.size == 2  # the one added pair stays in the pool
        assert out_r == pytest.approx(0.16)
        assert report.single_point_no_retrain and not report.retrained
        assert budget.online_evals == 2

    def test_full_refinement_budget_and_growth(self):
        params = tiny_surrogate()
        rng = np.random.default_rng(5)
        pts = ParticleSet(rng.normal(size=(20, 2)) * 3.0)
        model = QuadraticModel()
        trainset = TrainingSet(np.array([[50.0, 50.0]]), np.array([[5000.0, 100.0]]))
        budget = EvalBudget()
        _, out_set, _, report = refine_step(
            pts,
            trainset,
            params,
            model,
            self.cfg(),
            0.2,
            budget=budget,
            train_cfg=TrainConfig(epochs=0),
        )
        assert len(report.points_added) == 5
        assert out_set.size == trainset.size + 5
        assert budget.online_evals == 6  # 5 new points + 1 indicator


class TestRunLsvgd:
    def setup_problem(self, seed=0):
        rng = np.random.default_rng(seed)
        model = QuadraticModel()
        prior = StandardNormalPrior(2)
        truth = np.array([0.4, -0.3])
        y = model.evaluate(truth)
        model.eval_count = 0
        lik = GaussianLikelihood(y, 0.3)
        design = rng.normal(size=(8, 2))
        trainset = TrainingSet(design, model.evaluate_batch(design))
        model.eval_count = 0
        particles = ParticleSet(prior.sample(rng, 25))
        return model, prior, lik, trainset, particles

    def run(self, cfg, seed=0, epochs=150):
        model, prior, lik, trainset, particles = self.setup_problem(seed)
        return run_lsvgd(
            particles,
            trainset,
            model,
            prior,
            lik,
            cfg,
            rng_seed=seed,
            surrogate_init=tiny_surrogate(2, 2, seed),
            offline_train_cfg=TrainConfig(epochs=epochs, learning_rate=3e-3),
            refine_train_cfg=TrainConfig(epochs=epochs // 2, learning_rate=3e-3),
        ), model

    def test_zero_outer_iterations(self):
        cfg = RefinementConfig(i_max=0)
        (particles, _, trainset, budget, trace), _ = self.run(cfg)
        assert trace == []
        assert budget.online_evals == 0
        assert trainset.size == 8

    def test_budget_bound_and_counter_audit(self):
        cfg = RefinementConfig(i_max=6, t_inner=5)
        (particles, _, trainset, budget, trace), model = self.run(cfg)
        assert budget.online_evals <= cfg.eval_bound
        assert budget.offline_evals == 8
        # the exact model was touched online exactly as often as reported
        assert model.eval_count == budget.online_evals
        # trace-replay audit: indicator (1) + points added per outer step
        replayed = sum(1 + len(rec["points_added"]) for rec in trace)
        assert replayed == budget.online_evals

    def test_monotone_radius_and_separation(self):
        cfg = RefinementConfig(i_max=6, t_inner=5)
        (particles, _, trainset, budget, trace), _ = self.run(cfg)
        radii = [cfg.radius] + [rec["radius"] for rec in trace]
        assert all(b <= a for a, b in zip(radii, radii[1:]))
        shrinks = sum(rec["radius_shrunk"] for rec in trace)
        assert radii[-1] == pytest.approx(cfg.radius * cfg.rho**shrinks)
        # every online-added point respects the radius active when added
        pool = list(self.setup_problem(0)[3].inputs)
        for rec in trace:
            r_at_add = rec["radius"] / (cfg.rho if rec["radius_shrunk"] else 1.0)
            for p in rec["points_added"]:
                assert all(np.linalg.norm(p - q) >= r_at_add - 1e-12 for q in pool)
                pool.append(p)

    def test_trace_replay_is_bit_identical(self):
        cfg = RefinementConfig(i_max=4, t_inner=5)
        (p1, s1, t1, b1, trace1), _ = self.run(cfg, seed=3)
        (p2, s2, t2, b2, trace2), _ = self.run(cfg, seed=3)
        np.testing.assert_array_equal(p1.points, p2.points)
        np.testing.assert_array_equal(s1.theta, s2.theta)
        assert b1 == b2
        for r1, r2 in zip(trace1, trace2):
            np.testing.assert_array_equal(r1["particles"], r2["particles"])
            assert r1["error"] == r2["error"]

    def test_exact_surrogate_never_grows_pool(self):
        # an identity-activation net representing f(x) = Ax exactly: the
        # indicator stays below tol, so the pool never grows
        a = np.array([[1.0, 2.0], [0.5, -1.0]])

        class LinModel(ForwardModel):
            name = "lin"
            input_dim = 2
            output_dim = 2

            def _evaluate(self, x):
                return a @ x

        rng = np.random.default_rng(2)
        arch = Architecture(2, 2, (2,), activation="identity")
        exact_net = init_params(arch, 0)
        exact_net.theta[:] = 0.0
        exact_net.layers()[0][0][:] = a
        exact_net.layers()[1][0][:] = np.eye(2)

        model = LinModel()
        design = rng.normal(size=(6, 2))
        trainset = TrainingSet(design, model.evaluate_batch(design))
        model.eval_count = 0
        prior = StandardNormalPrior(2)
        lik = GaussianLikelihood(model.evaluate(np.array([0.3, 0.1])), 0.5)
        model.eval_count = 0
        cfg = RefinementConfig(i_max=4, t_inner=3)
        _, _, out_set, budget, trace = run_lsvgd(
            ParticleSet(prior.sample(rng, 15)),
            trainset,
            model,
            prior,
            lik,
            cfg,
            rng_seed=0,
            surrogate_init=exact_net,
            offline_train_cfg=TrainConfig(epochs=0),
            refine_train_cfg=TrainConfig(epochs=0),
        )
        assert out_set.size == 6
        assert all(not rec["refined"] for rec in trace)
        assert budget.online_evals == cfg.i_max  # indicator evals only
