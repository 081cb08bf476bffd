"""Analytic double-banana forward map ``f(x) = log((1-x1)^2 + 100(x2-x1^2)^2)``.

The log argument is the Rosenbrock function; it vanishes only at (1, 1),
where the map is singular.
"""

import numpy as np

from ..errors import SingularModelError
from .base import ForwardModel


def _rosenbrock(x1, x2):
    return (1.0 - x1) ** 2 + 100.0 * (x2 - x1**2) ** 2


def double_banana_forward(x: np.ndarray) -> float:
    """Scalar log value; raises at the singular input (1, 1)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise ValueError(f"expected a 2-D point, got shape {x.shape}")
    g = _rosenbrock(x[0], x[1])
    if g <= 0.0:
        raise SingularModelError(f"log argument is {g} at x={x}")
    return float(np.log(g))


def double_banana_jacobian(x: np.ndarray) -> np.ndarray:
    """Gradient row ``(1, 2)``: derivative of the log-Rosenbrock map."""
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise ValueError(f"expected a 2-D point, got shape {x.shape}")
    x1, x2 = x
    g = _rosenbrock(x1, x2)
    if g <= 0.0:
        raise SingularModelError(f"log argument is {g} at x={x}")
    dg1 = -2.0 * (1.0 - x1) - 400.0 * x1 * (x2 - x1**2)
    dg2 = 200.0 * (x2 - x1**2)
    return np.array([[dg1 / g, dg2 / g]])


class DoubleBananaModel(ForwardModel):
    name = "double-banana"
    input_dim = 2
    output_dim = 1

    def _evaluate(self, x):
        return np.array([double_banana_forward(x)])

    def _jacobian(self, x):
        return double_banana_jacobian(x)

    def evaluate_batch(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        g = _rosenbrock(points[:, 0], points[:, 1])
        if np.any(g <= 0.0):
            raise SingularModelError("log argument vanished in batch evaluation")
        self.eval_count += points.shape[0]
        return np.log(g)[:, None]

    def jacobian_batch(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x1, x2 = points[:, 0], points[:, 1]
        g = _rosenbrock(x1, x2)
        if np.any(g <= 0.0):
            raise SingularModelError("log argument vanished in batch evaluation")
        dg1 = -2.0 * (1.0 - x1) - 400.0 * x1 * (x2 - x1**2)
        dg2 = 200.0 * (x2 - x1**2)
        return np.stack([dg1 / g, dg2 / g], axis=1)[:, None, :]
