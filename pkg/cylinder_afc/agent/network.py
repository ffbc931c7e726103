"""
Dense networks with hand-written backpropagation and Adam.

Layers compute y = x @ W + b with ReLU between hidden layers and a linear
output. Inputs may be a single vector or a batch of row vectors.
"""

import json
import logging
import os
import struct
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
LOG_2 = float(np.log(2.0))

CHECKPOINT_MAGIC = b"AFCNET\0\0"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<8sII")
_ADAM = struct.Struct("<ddddQ")


@dataclass
class Mlp:
    sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @classmethod
    def create(cls, sizes: Sequence[int], rng: np.random.Generator) -> "Mlp":
        """Uniform fan-in initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"Invalid layer sizes {sizes}")
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(sizes, weights, biases)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> List[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "Mlp":
        return Mlp(self.sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class Gradients:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    inputs: np.ndarray

    def parameters(self) -> List[np.ndarray]:
        return [g for pair in zip(self.weights, self.biases) for g in pair]


@dataclass
class ForwardCache:
    inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]
    single: bool


def forward(net: Mlp, x: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
    """
    Evaluate the network.

    Args:
        net: Network
        x: Input vector (in,) or batch (B, in)

    Returns:
        Tuple of (output, cache for backward)
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.ndim != 2 or h.shape[1] != net.sizes[0]:
        raise ValueError(f"Expected input of width {net.sizes[0]}, got shape {x.shape}")

    inputs, pre = [], []
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(h)
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < net.n_layers - 1 else z

    out = h[0] if single else h
    return out, ForwardCache(inputs, pre, single)


def backward(net: Mlp, cache: ForwardCache, grad_out: np.ndarray) -> Gradients:
    """
    Gradients of sum(output * grad_out) with respect to parameters and input.

    Batch gradients are summed over rows; callers fold any 1/B into grad_out.
    """
    g = np.asarray(grad_out, dtype=float)
    if cache.single:
        g = g[None, :]

    grads_w: List[np.ndarray] = [None] * net.n_layers
    grads_b: List[np.ndarray] = [None] * net.n_layers
    for i in reversed(range(net.n_layers)):
        if i < net.n_layers - 1:
            g = g * (cache.pre_activations[i] > 0.0)
        grads_w[i] = cache.inputs[i].T @ g
        grads_b[i] = g.sum(axis=0)
        g = g @ net.weights[i].T

    return Gradients(grads_w, grads_b, g[0] if cache.single else g)


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def create(cls, net: Mlp, lr: float) -> "AdamState":
        params = net.parameters()
        return cls(lr=lr, m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(net: Mlp, grads: Gradients, state: AdamState) -> Mlp:
    """Bias-corrected Adam descent step, applied to ``net`` in place."""
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(net.parameters(), grads.parameters(), state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return net


def polyak_update(target: Mlp, source: Mlp, tau: float) -> Mlp:
    """target <- (1 - tau) * target + tau * source, in place."""
    for t, s in zip(target.parameters(), source.parameters()):
        t *= 1.0 - tau
        t += tau * s
    return target


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def log_one_minus_tanh_sq(u: np.ndarray) -> np.ndarray:
    """Stable log(1 - tanh(u)^2)."""
    return 2.0 * (LOG_2 - u - softplus(-2.0 * u))


@dataclass
class SquashedSample:
    """
    Reparameterized tanh-Gaussian draw a = scale * tanh(mean + std * noise).

    The derivative fields are elementwise and hold the noise fixed.
    """

    action: np.ndarray
    log_prob: np.ndarray
    pre_tanh: np.ndarray
    std: np.ndarray
    noise: np.ndarray
    scale: float
    log_std_active: np.ndarray

    @property
    def d_action_d_pre(self) -> np.ndarray:
        t = np.tanh(self.pre_tanh)
        return self.scale * (1.0 - t * t)

    @property
    def d_log_prob_d_mean(self) -> np.ndarray:
        return 2.0 * np.tanh(self.pre_tanh)

    @property
    def d_log_prob_d_log_std(self) -> np.ndarray:
        grad = -1.0 + 2.0 * np.tanh(self.pre_tanh) * self.std * self.noise
        return grad * self.log_std_active

    @property
    def d_pre_d_log_std(self) -> np.ndarray:
        return self.std * self.noise * self.log_std_active


def gaussian_head_sample(
    mean: np.ndarray,
    log_std: np.ndarray,
    noise: np.ndarray,
    scale: float = 1.5,
    log_std_bounds: Tuple[float, float] = (-20.0, 2.0),
) -> SquashedSample:
    """
    Squash a Gaussian sample into (-scale, scale) with its log-density.

    Args:
        mean: Pre-squash mean, (act,) or (B, act)
        log_std: Unclipped log standard deviation, same shape
        noise: Standard normal draw, same shape
        scale: Action bound
        log_std_bounds: Clip range for log_std

    Returns:
        SquashedSample; log_prob sums over the last axis
    """
    mean = np.asarray(mean, dtype=float)
    raw = np.asarray(log_std, dtype=float)
    noise = np.asarray(noise, dtype=float)
    lo, hi = log_std_bounds
    clipped = np.clip(raw, lo, hi)
    active = ((raw >= lo) & (raw <= hi)).astype(float)
    std = np.exp(clipped)
    u = mean + std * noise

    log_prob = (
        -0.5 * noise ** 2 - clipped - 0.5 * LOG_2PI - np.log(scale) - log_one_minus_tanh_sq(u)
    ).sum(axis=-1)
    return SquashedSample(scale * np.tanh(u), log_prob, u, std, noise, scale, active)


def squashed_log_prob(action, mean, log_std, scale: float = 1.5) -> np.ndarray:
    """Log-density of a given squashed action under the tanh-Gaussian head."""
    action = np.asarray(action, dtype=float)
    u = np.arctanh(action / scale)
    std = np.exp(log_std)
    noise = (u - mean) / std
    return (
        -0.5 * noise ** 2 - log_std - 0.5 * LOG_2PI - np.log(scale) - log_one_minus_tanh_sq(u)
    )


def _write_arrays(f, arrays: Sequence[np.ndarray]) -> None:
    for a in arrays:
        f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def unpack(self, fmt: struct.Struct) -> tuple:
        values = fmt.unpack_from(self.data, self.offset)
        self.offset += fmt.size
        return values

    def array(self, shape: Tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape))
        if self.offset + 8 * count > len(self.data):
            raise ValueError("Checkpoint is truncated")
        a = np.frombuffer(self.data, dtype="<f8", count=count, offset=self.offset).reshape(shape).astype(float)
        self.offset += 8 * count
        return a


def save_checkpoint(
    file_path: str,
    net: Mlp,
    adam: Optional[AdamState] = None,
    rng_state: Optional[Dict[str, Any]] = None,
) -> None:
    """
    Write a network checkpoint.

    Layout: magic, version, layer count and sizes, parameters as
    little-endian float64, an Adam block flag with optional moments, then
    the RNG state as a length-prefixed JSON blob.
    """
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    with open(file_path, "wb") as f:
        f.write(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(net.sizes)))
        f.write(struct.pack(f"<{len(net.sizes)}I", *net.sizes))
        _write_arrays(f, net.parameters())

        f.write(struct.pack("<B", 1 if adam is not None else 0))
        if adam is not None:
            f.write(_ADAM.pack(adam.lr, adam.beta1, adam.beta2, adam.eps, adam.step))
            _write_arrays(f, adam.m)
            _write_arrays(f, adam.v)

        blob = json.dumps(rng_state).encode("utf-8")
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)


def load_checkpoint(file_path: str) -> Tuple[Mlp, Optional[AdamState], Optional[Dict[str, Any]]]:
    """
    Read a checkpoint written by save_checkpoint.

    Returns:
        Tuple of (network, Adam state or None, RNG state or None)
    """
    if not os.path.exists(file_path):
        raise FileNotFoundError(f"Checkpoint not found: {file_path}")
    with open(file_path, "rb") as f:
        reader = _Reader(f.read())

    magic, version, n_sizes = reader.unpack(_HEADER)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"{file_path} is not a network checkpoint")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"Unsupported checkpoint version {version} in {file_path}")
    sizes = tuple(reader.unpack(struct.Struct(f"<{n_sizes}I")))

    shapes = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        shapes.extend([(fan_in, fan_out), (fan_out,)])
    params = [reader.array(s) for s in shapes]
    net = Mlp(sizes, params[0::2], params[1::2])

    adam = None
    (has_adam,) = reader.unpack(struct.Struct("<B"))
    if has_adam:
        lr, beta1, beta2, eps, step = reader.unpack(_ADAM)
        m = [reader.array(s) for s in shapes]
        v = [reader.array(s) for s in shapes]
        adam = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=step, m=m, v=v)

    (length,) = reader.unpack(struct.Struct("<I"))
    rng_state = json.loads(reader.data[reader.offset:reader.offset + length].decode("utf-8"))
    return net, adam, rng_state
