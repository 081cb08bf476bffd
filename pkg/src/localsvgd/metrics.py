"""Sample-quality and recovery-accuracy metrics."""

from typing import Optional

import numpy as np

from .kernel import median_bandwidth, rbf_cross_matrix, rbf_kernel_matrix


def mmd(a: np.ndarray, b: np.ndarray, h: Optional[float] = None) -> float:
    """Kernel maximum mean discrepancy between two sample sets.

    Square root of the biased (V-statistic) estimate, floored at zero
    before the root.  When ``h`` is omitted it is the median-heuristic
    bandwidth of ``b`` (the reference set), so every method compared
    against the same reference uses the same kernel.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if h is None:
        h = median_bandwidth(b)
    v_stat = (
        float(np.mean(rbf_kernel_matrix(a, h)))
        + float(np.mean(rbf_kernel_matrix(b, h)))
        - 2.0 * float(np.mean(rbf_cross_matrix(a, b, h)))
    )
    return float(np.sqrt(max(v_stat, 0.0)))


def rel_error(estimate_field: np.ndarray, truth_field: np.ndarray) -> float:
    """Relative Euclidean error ``||estimate - truth|| / ||truth||``."""
    estimate = np.asarray(estimate_field, dtype=float).ravel()
    truth = np.asarray(truth_field, dtype=float).ravel()
    if estimate.shape != truth.shape:
        raise ValueError(f"grid mismatch: {estimate.shape} vs {truth.shape}")
    denom = float(np.linalg.norm(truth))
    if denom == 0.0:
        raise ValueError("truth field has zero norm")
    return float(np.linalg.norm(estimate - truth)) / denom
