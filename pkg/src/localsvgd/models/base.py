"""Uniform evaluation-counting interface for forward maps."""

import numpy as np


class ForwardModel:
    """Evaluable map ``f: R^d -> R^n`` with an evaluation counter.

    Subclasses implement ``_evaluate`` (and optionally ``_jacobian``).
    ``eval_count`` increments by exactly one per evaluated point, which is
    what the online-budget audits rely on.
    """

    name: str = "forward-model"
    input_dim: int
    output_dim: int

    def __init__(self):
        self.eval_count = 0

    @property
    def has_jacobian(self) -> bool:
        return type(self)._jacobian is not ForwardModel._jacobian

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise ValueError(f"{self.name} expects shape ({self.input_dim},), got {x.shape}")
        self.eval_count += 1
        return np.asarray(self._evaluate(x), dtype=float).reshape(self.output_dim)

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.stack([self.evaluate(x) for x in points])

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Exact input Jacobian, shape ``(n, d)``; not counted as an eval."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise ValueError(f"{self.name} expects shape ({self.input_dim},), got {x.shape}")
        return np.asarray(self._jacobian(x), dtype=float).reshape(self.output_dim, self.input_dim)

    def jacobian_batch(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.stack([self.jacobian(x) for x in points])

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _jacobian(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.name} exposes no exact Jacobian")


class SurrogateModel(ForwardModel):
    """Adapter presenting trained emulator parameters as a ForwardModel.

    Evaluations are cheap and tracked on a separate counter; they are never
    charged against the high-fidelity budget.
    """

    name = "surrogate"

    def __init__(self, params):
        super().__init__()
        self.params = params
        self.input_dim = params.arch.input_dim
        self.output_dim = params.arch.output_dim

    def _evaluate(self, x):
        from ..surrogate import mlp_forward

        return mlp_forward(self.params, x)

    def _jacobian(self, x):
        from ..surrogate import input_jacobian

        return input_jacobian(self.params, x)

    def evaluate_batch(self, points):
        from ..surrogate import mlp_forward

        points = np.atleast_2d(np.asarray(points, dtype=float))
        self.eval_count += points.shape[0]
        return mlp_forward(self.params, points)

    def jacobian_batch(self, points):
        from ..surrogate import input_jacobian_batch

        return input_jacobian_batch(self.params, np.atleast_2d(points))
