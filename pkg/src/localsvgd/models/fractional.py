"""Time-fractional diffusion forward models on the unit square.

Equation: Caputo time derivative of order ``alpha`` equals ``div(kappa grad u)``
plus a Gaussian-bump source decaying like ``exp(-t)``, with homogeneous
Neumann boundaries and zero initial condition.

Discretization: L1 scheme in time; second-order finite differences on a
vertex grid with ``m`` intervals per axis (``(m+1)^2`` nodes), Neumann
boundaries by ghost-node reflection.  Heterogeneous coefficients use
harmonic-mean face values.  Each implicit step solves one sparse SPD
system (trapezoid-weighted symmetrization) by preconditioned conjugate
gradients.

Two parameterizations share the solver:

* source-location: ``kappa = 1``; the 2-D parameter is the source center.
* diffusion-coefficient: fixed source centered at (0.25, 0.75); the 9-D
  parameter weights a radial-basis expansion of ``kappa``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, diags
from scipy.sparse.linalg import LinearOperator, cg

from ..errors import InvalidCoefficientError
from .base import ForwardModel

#: Width of the Gaussian source bump and of the diffusion-coefficient RBFs.
SOURCE_WIDTH = 0.1
RBF_LENGTH_SCALE = 0.15

#: Fixed source center of the diffusion-coefficient problem.
DIFFUSION_SOURCE_CENTER = (0.25, 0.75)

#: RBF centers of the permeability expansion: uniform 3x3 grid over [0.2, 0.8]^2.
DIFFUSION_RBF_CENTERS = np.array(
    [(0.2 + 0.3 * i, 0.2 + 0.3 * j) for i in range(3) for j in range(3)]
)


@dataclass(frozen=True)
class FractionalGrid:
    """Space-time discretization: ``m`` intervals per axis, step ``dt``."""

    m: int
    dt: float
    alpha: float
    final_time: float = 1.0

    def __post_init__(self):
        if self.m < 8:
            raise ValueError(f"spatial resolution m must be >= 8, got {self.m}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"fractional order must lie in (0, 1), got {self.alpha}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        steps = self.final_time / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(f"dt={self.dt} does not divide final_time={self.final_time}")

    @property
    def n_steps(self) -> int:
        return round(self.final_time / self.dt)

    @property
    def h(self) -> float:
        return 1.0 / self.m

    def node_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrids ``(X, Y)`` of node positions, shape ``(m+1, m+1)``."""
        axis = np.arange(self.m + 1) / self.m
        return np.meshgrid(axis, axis, indexing="ij")

    def refined(self, factor: int) -> "FractionalGrid":
        return FractionalGrid(self.m * factor, self.dt / factor, self.alpha, self.final_time)


@dataclass(frozen=True)
class SensorLayout:
    """Observation points (snapped to grid nodes) and times (step multiples)."""

    locations: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "locations", np.atleast_2d(np.asarray(self.locations, float)))
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        if self.locations.shape[1] != 2:
            raise ValueError("sensor locations must be 2-D points")

    @property
    def size(self) -> int:
        return self.locations.shape[0] * self.times.shape[0]

    @classmethod
    def uniform(cls, per_axis: int, times) -> "SensorLayout":
        """Uniform interior network: ``per_axis^2`` sensors at i/(per_axis+1)."""
        ticks = np.arange(1, per_axis + 1) / (per_axis + 1)
        locs = [(a, b) for a in ticks for b in ticks]
        return cls(np.array(locs), np.asarray(times, dtype=float))


@dataclass(frozen=True)
class SpaceTimeField:
    """Solution snapshots ``values[k, i, j]`` at time step k, node (i, j)."""

    values: np.ndarray
    grid: FractionalGrid


def caputo_l1_coefficients(alpha: float, k: int) -> np.ndarray:
    """L1-scheme history weights ``b_j = (j+1)^(1-alpha) - j^(1-alpha)``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {alpha}")
    if k < 1:
        raise ValueError("need at least one coefficient")
    j = np.arange(k, dtype=float)
    return (j + 1.0) ** (1.0 - alpha) - j ** (1.0 - alpha)


def _trapezoid_weights(m: int) -> np.ndarray:
    w = np.ones(m + 1)
    w[0] = w[-1] = 0.5
    return w


def _diffusion_operator(grid: FractionalGrid, kappa_nodes: np.ndarray):
    """Symmetrized Neumann operator ``DA`` and quadrature diagonal ``d``.

    ``DA`` is the trapezoid-weighted divergence-form stencil assembled from
    face contributions (harmonic-mean coefficients); it is symmetric
    negative semidefinite and annihilates constants, which is what the
    discrete conservation property rests on.
    """
    m = grid.m
    n = (m + 1) ** 2
    w = _trapezoid_weights(m)
    d_vec = np.outer(w, w).ravel()

    kap = np.asarray(kappa_nodes, dtype=float).reshape(m + 1, m + 1)
    idx = np.arange(n).reshape(m + 1, m + 1)
    inv_h2 = float(m) ** 2

    rows, cols, vals = [], [], []

    def add_faces(p, q, c):
        rows.extend([p, q, p, q])
        cols.extend([q, p, p, q])
        vals.extend([c, c, -c, -c])

    # x-direction faces (transverse trapezoid weight along y)
    kf = 2.0 * kap[:-1, :] * kap[1:, :] / (kap[:-1, :] + kap[1:, :])
    add_faces(idx[:-1, :].ravel(), idx[1:, :].ravel(), (kf * w[None, :]).ravel() * inv_h2)
    # y-direction faces
    kf = 2.0 * kap[:, :-1] * kap[:, 1:] / (kap[:, :-1] + kap[:, 1:])
    add_faces(idx[:, :-1].ravel(), idx[:, 1:].ravel(), (kf * w[:, None]).ravel() * inv_h2)

    da = coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    return d_vec, da


def _march(grid: FractionalGrid, d_vec, da, g_space, u0, cg_rtol: float) -> np.ndarray:
    """Implicit L1 time stepping; returns flat snapshots ``(n_steps+1, n)``."""
    n_steps = grid.n_steps
    n = d_vec.shape[0]
    b = caputo_l1_coefficients(grid.alpha, n_steps)
    mu = math.gamma(2.0 - grid.alpha) * grid.dt**grid.alpha

    system = (diags(d_vec) - mu * da).tocsr()
    inv_diag = 1.0 / system.diagonal()
    precond = LinearOperator((n, n), matvec=lambda r: inv_diag * r)

    u = np.empty((n_steps + 1, n))
    u[0] = u0
    for k in range(1, n_steps + 1):
        hist = b[k - 1] * u[0]
        if k >= 2:
            c = b[: k - 1] - b[1:k]
            hist = hist + c @ u[1:k][::-1]
        g_k = math.exp(-k * grid.dt) * g_space
        rhs = d_vec * (hist + mu * g_k)
        sol, info = cg(system, rhs, x0=u[k - 1], rtol=cg_rtol, atol=0.0, M=precond)
        if info != 0:
            raise FloatingPointError(f"conjugate-gradient solve failed at step {k} (info={info})")
        u[k] = sol
    return u


def _gaussian_bump(grid: FractionalGrid, center, width: float) -> np.ndarray:
    x, y = grid.node_coordinates()
    r2 = (x - center[0]) ** 2 + (y - center[1]) ** 2
    return np.exp(-0.5 * r2 / width**2).ravel()


def permeability_field(s: np.ndarray, weights: np.ndarray, centers=None, length_scale: float = RBF_LENGTH_SCALE):
    """Weighted RBF sum ``sum_i w_i exp(-0.5 ||s - c_i||^2 / ls^2)``.

    ``s`` may be a single point ``(2,)`` or a stack ``(P, 2)``.
    """
    if centers is None:
        centers = DIFFUSION_RBF_CENTERS
    s = np.asarray(s, dtype=float)
    weights = np.asarray(weights, dtype=float)
    centers = np.asarray(centers, dtype=float)
    if weights.shape[0] != centers.shape[0]:
        raise ValueError("one weight per center required")
    single = s.ndim == 1
    pts = s[None, :] if single else s
    r2 = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    vals = np.exp(-0.5 * r2 / length_scale**2) @ weights
    return float(vals[0]) if single else vals


def solve_fractional_heat(
    grid: FractionalGrid,
    parameter: np.ndarray,
    mode: str,
    *,
    zero_source: bool = False,
    initial_field=None,
    cg_rtol: float = 1e-10,
) -> SpaceTimeField:
    """Solve the time-fractional diffusion problem for one parameter value.

    ``mode`` selects the parameterization: ``"source-location"`` (parameter
    is the 2-D source center, unit coefficient) or
    ``"diffusion-coefficient"`` (parameter is the 9-D RBF weight vector,
    fixed source).  ``zero_source`` and ``initial_field`` are test hooks
    for the conservation and convergence checks.
    """
    parameter = np.asarray(parameter, dtype=float)
    n = (grid.m + 1) ** 2

    if mode == "source-location":
        kappa = np.ones(n)
        g_space = _gaussian_bump(grid, parameter, SOURCE_WIDTH)
    elif mode == "diffusion-coefficient":
        x, y = grid.node_coordinates()
        nodes = np.stack([x.ravel(), y.ravel()], axis=1)
        kappa = permeability_field(nodes, parameter)
        if np.min(kappa) <= 0.0:
            raise InvalidCoefficientError(
                f"permeability must be positive on the grid (min {np.min(kappa):.3e})"
            )
        g_space = _gaussian_bump(grid, DIFFUSION_SOURCE_CENTER, SOURCE_WIDTH)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    if zero_source:
        g_space = np.zeros(n)
    u0 = np.zeros(n) if initial_field is None else np.asarray(initial_field, float).ravel().copy()
    if u0.shape[0] != n:
        raise ValueError("initial field does not match the grid")

    d_vec, da = _diffusion_operator(grid, kappa)
    u = _march(grid, d_vec, da, g_space, u0, cg_rtol)
    return SpaceTimeField(u.reshape(grid.n_steps + 1, grid.m + 1, grid.m + 1), grid)


def weighted_spatial_mean(field: SpaceTimeField, step: int) -> float:
    """Trapezoid-rule spatial mean at one time step (the conserved quantity)."""
    w = _trapezoid_weights(field.grid.m)
    d = np.outer(w, w)
    return float(np.sum(d * field.values[step]) / np.sum(d))


def _snap_location(loc, m: int) -> tuple[int, int]:
    loc = np.asarray(loc, dtype=float)
    if np.any(loc < -1e-9) or np.any(loc > 1.0 + 1e-9):
        raise ValueError(f"sensor {loc} lies outside the unit square")
    i = int(round(loc[0] * m))
    j = int(round(loc[1] * m))
    return min(max(i, 0), m), min(max(j, 0), m)


def observe(field: SpaceTimeField, layout: SensorLayout) -> np.ndarray:
    """Field values at sensors, flattened time-major then location order."""
    grid = field.grid
    steps = []
    for t in layout.times:
        k = round(t / grid.dt)
        if abs(t - k * grid.dt) > 1e-9 or not 0 <= k <= grid.n_steps:
            raise ValueError(f"observation time {t} is not a step of dt={grid.dt}")
        steps.append(k)
    nodes = [_snap_location(loc, grid.m) for loc in layout.locations]
    out = np.empty(len(steps) * len(nodes))
    pos = 0
    for k in steps:
        for i, j in nodes:
            out[pos] = field.values[k, i, j]
            pos += 1
    return out


class HeatSourceModel(ForwardModel):
    """Source-location inversion map: center ``(x1, x2)`` to 18 sensor readings."""

    name = "heat-source"
    input_dim = 2

    def __init__(self, grid: FractionalGrid, layout: SensorLayout, cg_rtol: float = 1e-10):
        super().__init__()
        self.grid = grid
        self.layout = layout
        self.cg_rtol = cg_rtol
        self.output_dim = layout.size
        self._d_vec, self._da = _diffusion_operator(grid, np.ones((grid.m + 1) ** 2))

    def _evaluate(self, x):
        g_space = _gaussian_bump(self.grid, x, SOURCE_WIDTH)
        u = _march(self.grid, self._d_vec, self._da, g_space, np.zeros_like(g_space), self.cg_rtol)
        field = SpaceTimeField(
            u.reshape(self.grid.n_steps + 1, self.grid.m + 1, self.grid.m + 1), self.grid
        )
        return observe(field, self.layout)


class DiffusionCoefficientModel(ForwardModel):
    """Diffusion-coefficient inversion map: 9 RBF weights to 75 sensor readings."""

    name = "diffusion-coefficient"
    input_dim = 9

    def __init__(self, grid: FractionalGrid, layout: SensorLayout, cg_rtol: float = 1e-10):
        super().__init__()
        self.grid = grid
        self.layout = layout
        self.cg_rtol = cg_rtol
        self.output_dim = layout.size
        x, y = grid.node_coordinates()
        nodes = np.stack([x.ravel(), y.ravel()], axis=1)
        r2 = np.sum((nodes[:, None, :] - DIFFUSION_RBF_CENTERS[None, :, :]) ** 2, axis=2)
        self._rbf_basis = np.exp(-0.5 * r2 / RBF_LENGTH_SCALE**2)
        self._g_space = _gaussian_bump(grid, DIFFUSION_SOURCE_CENTER, SOURCE_WIDTH)

    def _evaluate(self, x):
        kappa = self._rbf_basis @ x
        if np.min(kappa) <= 0.0:
            raise InvalidCoefficientError(
                f"permeability must be positive on the grid (min {np.min(kappa):.3e})"
            )
        d_vec, da = _diffusion_operator(self.grid, kappa)
        u = _march(self.grid, d_vec, da, self._g_space, np.zeros_like(self._g_space), self.cg_rtol)
        field = SpaceTimeField(
            u.reshape(self.grid.n_steps + 1, self.grid.m + 1, self.grid.m + 1), self.grid
        )
        return observe(field, self.layout)
