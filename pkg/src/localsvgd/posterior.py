"""Log-target densities and score functions for Bayesian inversion.

The unnormalized log posterior is ``log p0(x) - ||(y - f(x)) / sigma||^2 / 2``
and its score decomposes as prior score plus ``J_f(x)^T (y - f(x)) / sigma^2``,
where the Jacobian comes either from an analytic model or from the trained
emulator.

Priors whose support is not all of R^d project score-evaluation points just
inside the boundary (offset 1e-8), so the transport loop stays well-defined
when particles step outside.
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .models.base import ForwardModel

_SUPPORT_EPS = 1e-8


class StandardNormalPrior:
    """Independent N(0, 1) components."""

    def __init__(self, dim: int):
        self.dim = dim

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal((n, self.dim))

    def log_density(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(-0.5 * np.dot(x, x))

    def score(self, x: np.ndarray) -> np.ndarray:
        return -np.asarray(x, dtype=float)

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float)

    def standardizer(self) -> tuple[np.ndarray, np.ndarray]:
        return np.zeros(self.dim), np.ones(self.dim)


class UniformBoxPrior:
    """Uniform density on an axis-aligned box; score is zero in the interior."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or np.any(self.lo >= self.hi):
            raise ValueError("uniform box needs lo < hi per dimension")
        self.dim = self.lo.shape[0]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))

    def log_density(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lo) or np.any(x > self.hi):
            return -np.inf
        return 0.0

    def score(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=float))

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lo + _SUPPORT_EPS, self.hi - _SUPPORT_EPS)

    def standardizer(self) -> tuple[np.ndarray, np.ndarray]:
        return 0.5 * (self.lo + self.hi), 0.5 * (self.hi - self.lo)


class LogNormalPrior:
    """Independent components with ``log(x_i) ~ N(0, 1)``; support x > 0."""

    def __init__(self, dim: int):
        self.dim = dim

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.exp(rng.standard_normal((n, self.dim)))

    def log_density(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            return -np.inf
        lx = np.log(x)
        return float(np.sum(-lx - 0.5 * lx**2))

    def score(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return -(np.log(x) + 1.0) / x

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(np.asarray(x, dtype=float), _SUPPORT_EPS)

    def standardizer(self) -> tuple[np.ndarray, np.ndarray]:
        mean = math.exp(0.5)
        std = math.sqrt((math.e - 1.0) * math.e)
        return np.full(self.dim, mean), np.full(self.dim, std)


Prior = Union[StandardNormalPrior, UniformBoxPrior, LogNormalPrior]


@dataclass(frozen=True)
class GaussianLikelihood:
    """Observations with independent Gaussian noise (scalar or per-component std)."""

    observations: np.ndarray
    noise_std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "observations", np.atleast_1d(np.asarray(self.observations, float)))
        std = np.asarray(self.noise_std, dtype=float)
        if std.ndim == 0:
            std = np.full(self.observations.shape, float(std))
        object.__setattr__(self, "noise_std", std)
        if std.shape != self.observations.shape:
            raise ValueError("noise_std must be scalar or match the observation shape")
        if np.any(std <= 0):
            raise ValueError("noise_std must be positive")

    def log_density(self, model_output: np.ndarray) -> float:
        r = (self.observations - model_output) / self.noise_std
        return float(-0.5 * np.dot(r, r))


@dataclass
class PosteriorSpec:
    """Prior + Gaussian likelihood + forward model (exact or surrogate)."""

    prior: Prior
    likelihood: GaussianLikelihood
    model: ForwardModel

    def __post_init__(self):
        if self.model.output_dim != self.likelihood.observations.shape[0]:
            raise ValueError(
                f"model outputs {self.model.output_dim} values but there are "
                f"{self.likelihood.observations.shape[0]} observations"
            )


def log_posterior(spec: PosteriorSpec, x: np.ndarray) -> float:
    """Unnormalized log target; ``-inf`` outside the prior support."""
    x = np.asarray(x, dtype=float)
    lp = spec.prior.log_density(x)
    if lp == -np.inf:
        return -np.inf
    return lp + spec.likelihood.log_density(spec.model.evaluate(x))


def score(spec: PosteriorSpec, x: np.ndarray) -> np.ndarray:
    """Gradient of the log target at ``x`` (single point or ``(N, d)`` batch).

    Points outside the prior support are projected just inside before the
    model and prior terms are evaluated.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = spec.prior.project(x[None, :] if single else x)

    fx = spec.model.evaluate_batch(pts)
    jac = spec.model.jacobian_batch(pts)
    resid = (spec.likelihood.observations[None, :] - fx) / spec.likelihood.noise_std[None, :] ** 2
    lik_term = np.einsum("nij,ni->nj", jac, resid)
    total = spec.prior.score(pts) + lik_term
    return total[0] if single else total


def make_score_function(spec: PosteriorSpec):
    """Vectorized score callable for the transport loop."""
    return lambda points: score(spec, points)
