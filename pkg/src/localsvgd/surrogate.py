"""From-scratch multilayer-perceptron emulator of a forward map.

The network is a stack of affine layers with Swish activations on every
hidden layer and a purely affine output layer (regression targets are
unbounded).  Parameters live in one flat float64 vector; per-layer weight
and bias views are materialized on demand, which keeps the Adam update a
handful of whole-vector numpy operations.

Inputs are affinely standardized (``(x - shift) / scale``) before the
first layer.  The map is stored with the parameters and undone inside the
input Jacobian by the chain rule, so callers always work in raw
coordinates.
"""

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist
from scipy.special import expit


@dataclass(frozen=True)
class Architecture:
    """Layer sizes of the emulator.

    ``activation`` is ``"swish"`` in production; ``"identity"`` exists as a
    testing hook that turns the network into a product of affine maps.
    """

    input_dim: int
    output_dim: int
    hidden: tuple[int, ...]
    activation: str = "swish"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if len(self.hidden) < 1 or any(w < 1 for w in self.hidden):
            raise ValueError(f"need at least one hidden layer of width >= 1, got {self.hidden}")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be positive")
        if self.activation not in ("swish", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)

    @property
    def n_params(self) -> int:
        dims = self.layer_dims
        return sum(dims[k + 1] * dims[k] + dims[k + 1] for k in range(len(dims) - 1))


@dataclass(frozen=True)
class InputScaler:
    """Per-dimension affine standardization ``(x - shift) / scale``."""

    shift: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "shift", np.asarray(self.shift, dtype=float))
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=float))
        if self.shift.shape != self.scale.shape or self.shift.ndim != 1:
            raise ValueError("shift and scale must be 1-D arrays of equal length")
        if np.any(self.scale <= 0):
            raise ValueError("scale entries must be positive")

    @classmethod
    def identity(cls, dim: int) -> "InputScaler":
        return cls(np.zeros(dim), np.ones(dim))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.shift) / self.scale


class SurrogateParams:
    """Flat parameter vector plus architecture and input standardization."""

    def __init__(self, arch: Architecture, theta: np.ndarray, scaler: Optional[InputScaler] = None):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (arch.n_params,):
            raise ValueError(f"theta has {theta.shape}, architecture needs ({arch.n_params},)")
        if not np.all(np.isfinite(theta)):
            raise ValueError("parameters must be finite")
        self.arch = arch
        self.theta = theta
        self.scaler = scaler if scaler is not None else InputScaler.identity(arch.input_dim)
        if self.scaler.shift.shape[0] != arch.input_dim:
            raise ValueError("scaler dimension does not match architecture input_dim")

    def copy(self) -> "SurrogateParams":
        return SurrogateParams(self.arch, self.theta.copy(), self.scaler)

    def layers(self, theta: Optional[np.ndarray] = None) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-layer ``(W, b)`` views into the flat vector (no copies)."""
        vec = self.theta if theta is None else theta
        dims = self.arch.layer_dims
        out, offset = [], 0
        for k in range(len(dims) - 1):
            n_out, n_in = dims[k + 1], dims[k]
            w = vec[offset : offset + n_out * n_in].reshape(n_out, n_in)
            offset += n_out * n_in
            b = vec[offset : offset + n_out]
            offset += n_out
            out.append((w, b))
        return out


def swish(z):
    """Swish activation ``z * sigmoid(z)``, elementwise."""
    return z * expit(z)


def _swish_prime(z):
    s = expit(z)
    return s * (1.0 + z * (1.0 - s))


def _activation_pair(arch: Architecture):
    if arch.activation == "swish":
        return swish, _swish_prime
    return (lambda z: z), (lambda z: np.ones_like(z))


def init_params(
    arch: Architecture, rng_seed: int, scaler: Optional[InputScaler] = None
) -> SurrogateParams:
    """Fan-in-scaled Gaussian weights (std ``sqrt(2/fan_in)``), zero biases."""
    rng = np.random.default_rng(rng_seed)
    dims = arch.layer_dims
    theta = np.zeros(arch.n_params)
    offset = 0
    for k in range(len(dims) - 1):
        n_out, n_in = dims[k + 1], dims[k]
        theta[offset : offset + n_out * n_in] = rng.normal(
            0.0, np.sqrt(2.0 / n_in), size=n_out * n_in
        )
        offset += n_out * n_in + n_out  # biases stay zero
    return SurrogateParams(arch, theta, scaler)


def _as_batch(params: SurrogateParams, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != params.arch.input_dim:
        raise ValueError(f"input has shape {x.shape}, expected (..., {params.arch.input_dim})")
    return batch, single


def _forward_cached(params: SurrogateParams, batch: np.ndarray):
    """Forward pass returning output, hidden pre-activations, activations."""
    act, _ = _activation_pair(params.arch)
    layers = params.layers()
    z = params.scaler.apply(batch)
    pre, post = [], [z]
    for w, b in layers[:-1]:
        a = z @ w.T + b
        z = act(a)
        pre.append(a)
        post.append(z)
    w_out, b_out = layers[-1]
    return z @ w_out.T + b_out, pre, post


def mlp_forward(params: SurrogateParams, x: np.ndarray) -> np.ndarray:
    """Evaluate the network at ``x`` (shape ``(d,)`` or ``(N, d)``)."""
    batch, single = _as_batch(params, x)
    out, _, _ = _forward_cached(params, batch)
    return out[0] if single else out


@dataclass
class TrainingSet:
    """Accumulated (input, forward-model output) pairs."""

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.outputs = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise ValueError("inputs and outputs must have the same number of rows")
        if self.inputs.shape[0] < 1:
            raise ValueError("training set must be non-empty")
        if self.inputs.shape[0] > 1 and float(np.min(pdist(self.inputs))) < 1e-12:
            raise ValueError("duplicate input rows (pairwise distance < 1e-12)")

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    def extended(self, new_inputs: np.ndarray, new_outputs: np.ndarray) -> "TrainingSet":
        return TrainingSet(
            np.vstack([self.inputs, np.atleast_2d(new_inputs)]),
            np.vstack([self.outputs, np.atleast_2d(new_outputs)]),
        )


@dataclass(frozen=True)
class TrainConfig:
    """Adam training hyperparameters.

    ``batch_size=None`` means full batch (stable and cheap at the training
    set sizes the refinement loop produces); explicit values are clamped to
    the training-set size.
    """

    learning_rate: float = 5e-4
    reg_constant: float = 1e-6
    epochs: int = 5000
    batch_size: Optional[int] = None
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8

    def resolve_batch(self, n: int) -> int:
        if self.batch_size is None:
            return n
        return min(self.batch_size, n)


def loss(params: SurrogateParams, data: TrainingSet, beta: float) -> float:
    """Mean squared residual norm plus ``beta * ||theta||^2``."""
    resid = data.outputs - mlp_forward(params, data.inputs)
    return float(np.sum(resid**2) / data.size + beta * np.dot(params.theta, params.theta))


def _gradient_flat(
    params: SurrogateParams, inputs: np.ndarray, outputs: np.ndarray, beta: float
) -> np.ndarray:
    """Reverse-mode gradient of the loss on ``(inputs, outputs)``."""
    _, actp = _activation_pair(params.arch)
    out, pre, post = _forward_cached(params, inputs)
    n = inputs.shape[0]
    grad = 2.0 * beta * params.theta
    gviews = params.layers(grad)
    layers = params.layers()

    delta = (2.0 / n) * (out - outputs)  # (n, d_out)
    for k in range(len(layers) - 1, -1, -1):
        w, _ = layers[k]
        gw, gb = gviews[k]
        gw += delta.T @ post[k]
        gb += delta.sum(axis=0)
        if k > 0:
            delta = (delta @ w) * actp(pre[k - 1])
    return grad


def param_gradient(params: SurrogateParams, data: TrainingSet, beta: float) -> np.ndarray:
    """Exact gradient of :func:`loss` in the flat parameter layout."""
    return _gradient_flat(params, data.inputs, data.outputs, beta)


def input_jacobian(params: SurrogateParams, x: np.ndarray) -> np.ndarray:
    """Jacobian ``d f_i / d x_j`` at a single point, shape ``(n, d)``."""
    batch, single = _as_batch(params, x)
    if not single:
        raise ValueError("input_jacobian expects a single point; use input_jacobian_batch")
    return input_jacobian_batch(params, batch)[0]


def input_jacobian_batch(params: SurrogateParams, x: np.ndarray) -> np.ndarray:
    """Jacobians at each row of ``x``, shape ``(N, n, d)``.

    Forward accumulation through the layer chain, including the
    standardization map (a constant ``1/scale`` per input column).
    """
    batch, _ = _as_batch(params, x)
    _, actp = _activation_pair(params.arch)
    layers = params.layers()
    _, pre, _ = _forward_cached(params, batch)

    w1, _ = layers[0]
    jac = np.broadcast_to(w1 / params.scaler.scale[None, :], (batch.shape[0], *w1.shape)).copy()
    for k, a in enumerate(pre):
        jac = actp(a)[:, :, None] * jac
        w_next, _ = layers[k + 1]
        jac = np.einsum("oh,nhd->nod", w_next, jac)
    return jac


def train(
    params_init: SurrogateParams,
    data: TrainingSet,
    cfg: TrainConfig,
    rng_seed: int,
) -> SurrogateParams:
    """Minibatch Adam over shuffled data for ``cfg.epochs`` epochs.

    Monotone-acceptance guard: if the result has a higher full-set loss
    than ``params_init``, the initial parameters are returned unchanged and
    a warning is emitted.  Deterministic for a fixed seed.
    """
    if cfg.epochs == 0:
        return params_init
    rng = np.random.default_rng(rng_seed)
    beta = cfg.reg_constant
    b1, b2 = cfg.adam_betas
    batch = cfg.resolve_batch(data.size)

    work = params_init.copy()
    m = np.zeros_like(work.theta)
    v = np.zeros_like(work.theta)
    t = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(data.size)
        for start in range(0, data.size, batch):
            idx = perm[start : start + batch]
            g = _gradient_flat(work, data.inputs[idx], data.outputs[idx], beta)
            t += 1
            m = b1 * m + (1.0 - b1) * g
            v = b2 * v + (1.0 - b2) * g**2
            m_hat = m / (1.0 - b1**t)
            v_hat = v / (1.0 - b2**t)
            work.theta -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)

    if loss(work, data, beta) > loss(params_init, data, beta):
        warnings.warn("training did not improve the full-set loss; keeping initial parameters")
        return params_init
    return work


def warm_start_refine(
    pretrained: SurrogateParams,
    data: TrainingSet,
    cfg: TrainConfig,
    rng_seed: int,
) -> SurrogateParams:
    """Retrain starting from already-fitted parameters (transfer learning)."""
    return train(pretrained, data, cfg, rng_seed)


def save_params(params: SurrogateParams, path) -> None:
    """Write a self-describing JSON checkpoint (bit-exact round trip)."""
    payload = {
        "architecture": {
            "input_dim": params.arch.input_dim,
            "output_dim": params.arch.output_dim,
            "hidden": list(params.arch.hidden),
            "activation": params.arch.activation,
        },
        "scaler": {
            "shift": params.scaler.shift.tolist(),
            "scale": params.scaler.scale.tolist(),
        },
        "theta": params.theta.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_params(path) -> SurrogateParams:
    with open(path) as fh:
        payload = json.load(fh)
    arch = Architecture(
        input_dim=payload["architecture"]["input_dim"],
        output_dim=payload["architecture"]["output_dim"],
        hidden=tuple(payload["architecture"]["hidden"]),
        activation=payload["architecture"]["activation"],
    )
    scaler = InputScaler(
        np.asarray(payload["scaler"]["shift"]), np.asarray(payload["scaler"]["scale"])
    )
    return SurrogateParams(arch, np.asarray(payload["theta"]), scaler)
