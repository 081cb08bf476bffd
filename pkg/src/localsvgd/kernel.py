"""Gaussian RBF kernel with median-heuristic bandwidth.

The kernel is ``k(x, x') = exp(-||x - x'||^2 / h)`` for a positive
length-scale ``h``.  The bandwidth convention throughout the package is
``h = med^2 / log(N)`` where ``med`` is the median of the N(N-1)/2
distinct pairwise Euclidean distances of the current particle set
(natural logarithm).
"""

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DegenerateBandwidthError

#: Lower bound applied to the bandwidth so that late-stage particle
#: clustering cannot drive 1/h to infinity.
BANDWIDTH_FLOOR = 1e-12


def median_bandwidth(points: np.ndarray) -> float:
    """Median-heuristic bandwidth of a particle set.

    Args:
        points: Particle positions, shape ``(N, d)`` with ``N >= 2``.

    Returns:
        ``max(med^2 / log(N), BANDWIDTH_FLOOR)`` where ``med`` is the
        median over the distinct unordered particle pairs (self-pairs
        excluded; even-length medians average the two middle elements).

    Raises:
        ValueError: fewer than two particles.
        DegenerateBandwidthError: the median pairwise distance is exactly
            zero (at least half the particle pairs coincide).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    if n < 2:
        raise ValueError(f"median bandwidth needs at least 2 particles, got {n}")
    med = float(np.median(pdist(points)))
    if med == 0.0:
        raise DegenerateBandwidthError("median pairwise distance is zero")
    return max(med * med / np.log(n), BANDWIDTH_FLOOR)


def _check_pair(x: np.ndarray, x_prime: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    if x.shape != x_prime.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x_prime.shape}")
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    return x, x_prime


def rbf_evaluate(x: np.ndarray, x_prime: np.ndarray, h: float) -> float:
    """Kernel value ``exp(-||x - x'||^2 / h)``; lies in (0, 1]."""
    x, x_prime = _check_pair(x, x_prime, h)
    diff = x - x_prime
    return float(np.exp(-np.dot(diff, diff) / h))


def rbf_grad_first_arg(x: np.ndarray, x_prime: np.ndarray, h: float) -> np.ndarray:
    """Gradient of the kernel in its first argument.

    Returns ``-(2/h) (x - x') k(x, x', h)``.
    """
    x, x_prime = _check_pair(x, x_prime, h)
    diff = x - x_prime
    return -(2.0 / h) * diff * np.exp(-np.dot(diff, diff) / h)


def squared_distances(points: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape ``(N, N)``.

    Uses the dot-product expansion and floors at zero to absorb float
    cancellation.
    """
    points = np.asarray(points, dtype=float)
    sq = np.sum(points**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * points @ points.T
    return np.maximum(d2, 0.0)


def rbf_kernel_matrix(points: np.ndarray, h: float) -> np.ndarray:
    """Kernel Gram matrix ``K[i, j] = k(x_i, x_j, h)``."""
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    return np.exp(-squared_distances(points) / h)


def rbf_cross_matrix(a: np.ndarray, b: np.ndarray, h: float) -> np.ndarray:
    """Rectangular kernel matrix ``K[i, j] = k(a_i, b_j, h)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    aa = np.sum(a**2, axis=1)
    bb = np.sum(b**2, axis=1)
    d2 = np.maximum(aa[:, None] + bb[None, :] - 2.0 * a @ b.T, 0.0)
    return np.exp(-d2 / h)
