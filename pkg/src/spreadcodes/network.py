"""Generative network parameterizing the Gaussian search distribution.

A small fully connected net with a fixed all-ones input maps its weights to
the mean vector of an uncorrelated Gaussian over all chips of a code family.
Two hidden tanh layers of width 2*K*l feed a tanh output layer, so every
mean component stays strictly inside (-1, +1). The per-component variance is
a fixed constant; only the mean is learned.

The fixed input makes the net a smooth reparameterization of the mean: the
score gradient for a sampled point x backpropagates (x - mu) / variance
through the output layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NetworkConfig",
    "ProposalParams",
    "init_network",
    "forward",
    "log_prob",
    "grad_log_prob",
    "backprop_mean_gradient",
    "adam_step",
    "flatten",
    "unflatten",
    "grad_norm",
    "save_checkpoint",
    "load_checkpoint",
]

MEAN_LOWER = -1.0
MEAN_UPPER = 1.0
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Largest double strictly inside the output bounds; float64 tanh rounds to
# exactly +/-1 once saturated, and the mean must stay strictly interior.
_ONE_INTERIOR = float(np.nextafter(1.0, 0.0))

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkConfig:
    num_codes: int
    code_length: int

    def __post_init__(self):
        if self.num_codes < 1 or self.code_length < 2:
            raise ValueError(
                f"bad dimensions: num_codes={self.num_codes}, code_length={self.code_length}"
            )

    @property
    def output_dim(self) -> int:
        return self.num_codes * self.code_length

    @property
    def hidden_size(self) -> int:
        return 2 * self.output_dim

    @property
    def layer_dims(self) -> tuple[int, ...]:
        d, h = self.output_dim, self.hidden_size
        return (d, h, h, d)


@dataclass
class ProposalParams:
    """All learnable weights plus the optimizer's moment buffers.

    weights[i] has shape (fan_out, fan_in); biases[i] has shape (fan_out,).
    adam_step mutates weights/biases and the moments in place.
    """

    config: NetworkConfig
    variance: float
    weights: list = field(repr=False)
    biases: list = field(repr=False)
    adam_m: list = field(repr=False)
    adam_v: list = field(repr=False)
    step: int = 0

    def theta_size(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def is_finite(self) -> bool:
        # Summing propagates any NaN/Inf; cheaper than a full isfinite mask.
        return all(np.isfinite(a.sum()) for a in self.weights + self.biases)


def init_network(cfg: NetworkConfig, seed, variance: float = 0.1) -> ProposalParams:
    """Seeded scaled-uniform initialization.

    Hidden weights are uniform in +/- 1/sqrt(fan_in); the output layer uses
    half that scale and biases start at zero, keeping every initial mean
    component well inside (-0.5, 0.5) so the first proposal is near-uniform
    over bit patterns.
    """
    if variance <= 0:
        raise ValueError(f"variance must be positive, got {variance}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    dims = cfg.layer_dims
    weights, biases = [], []
    for layer in range(len(dims) - 1):
        fan_in, fan_out = dims[layer], dims[layer + 1]
        scale = 1.0 / np.sqrt(fan_in)
        if layer == len(dims) - 2:
            scale *= 0.5
        weights.append(rng.uniform(-scale, scale, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    zeros_like = lambda arrs: [np.zeros_like(a) for a in arrs]
    return ProposalParams(
        config=cfg,
        variance=float(variance),
        weights=weights,
        biases=biases,
        adam_m=zeros_like(weights) + zeros_like(biases),
        adam_v=zeros_like(weights) + zeros_like(biases),
    )


def _activations(params: ProposalParams) -> list:
    """Layer outputs for the fixed all-ones input, output layer last."""
    if not params.is_finite():
        raise FloatingPointError("network parameters contain non-finite values")
    h = np.ones(params.config.output_dim)
    outs = []
    for w, b in zip(params.weights, params.biases):
        h = np.tanh(w @ h + b)
        outs.append(h)
    outs[-1] = np.clip(outs[-1], -_ONE_INTERIOR, _ONE_INTERIOR)
    return outs


def forward(params: ProposalParams) -> np.ndarray:
    """Mean vector of the proposal distribution, each component in (-1, 1)."""
    return _activations(params)[-1]


def log_prob(params: ProposalParams, x: np.ndarray, mean: np.ndarray | None = None) -> float:
    """Log density of x under the diagonal Gaussian centered at the net output."""
    x = np.asarray(x, dtype=np.float64)
    dim = params.config.output_dim
    if x.shape != (dim,):
        raise ValueError(f"x must have shape ({dim},), got {x.shape}")
    mu = forward(params) if mean is None else mean
    var = params.variance
    quad = -np.sum((x - mu) ** 2) / (2.0 * var)
    return float(quad - 0.5 * dim * np.log(2.0 * np.pi * var))


def backprop_mean_gradient(params: ProposalParams, dmean: np.ndarray, activations: list | None = None) -> tuple[list, list]:
    """Gradient of dmean . mean(theta) w.r.t. every weight and bias.

    Standard backprop through the tanh stack; the all-ones input is fixed and
    carries no gradient. Returns (weight_grads, bias_grads) shaped like the
    parameters. Passing the activations of the current forward pass avoids
    recomputing it.
    """
    outs = _activations(params) if activations is None else activations
    inputs = [np.ones(params.config.output_dim)] + outs[:-1]
    weight_grads = [None] * len(params.weights)
    bias_grads = [None] * len(params.biases)
    delta = np.asarray(dmean, dtype=np.float64)
    for layer in range(len(params.weights) - 1, -1, -1):
        dz = delta * (1.0 - outs[layer] ** 2)  # tanh'(z) = 1 - tanh(z)^2
        weight_grads[layer] = np.outer(dz, inputs[layer])
        bias_grads[layer] = dz
        if layer > 0:
            delta = params.weights[layer].T @ dz
    return weight_grads, bias_grads


def grad_log_prob(params: ProposalParams, x: np.ndarray) -> tuple[list, list]:
    """Gradient of log p(x) w.r.t. all network parameters."""
    x = np.asarray(x, dtype=np.float64)
    dim = params.config.output_dim
    if x.shape != (dim,):
        raise ValueError(f"x must have shape ({dim},), got {x.shape}")
    mu = forward(params)
    return backprop_mean_gradient(params, (x - mu) / params.variance)


def flatten(weight_arrays: list, bias_arrays: list) -> np.ndarray:
    """Concatenate parameter (or gradient) arrays into one flat vector."""
    return np.concatenate([a.ravel() for a in weight_arrays + bias_arrays])


def unflatten(params: ProposalParams, vec: np.ndarray) -> tuple[list, list]:
    """Split a flat vector back into weight/bias arrays shaped like params."""
    ws, bs, pos = [], [], 0
    for ref in params.weights:
        ws.append(vec[pos : pos + ref.size].reshape(ref.shape))
        pos += ref.size
    for ref in params.biases:
        bs.append(vec[pos : pos + ref.size].reshape(ref.shape))
        pos += ref.size
    if pos != vec.size:
        raise ValueError(f"flat vector has {vec.size} entries, expected {pos}")
    return ws, bs


def grad_norm(grads: tuple[list, list]) -> float:
    ws, bs = grads
    return float(np.sqrt(sum(float(np.sum(g**2)) for g in ws + bs)))


def adam_step(params: ProposalParams, grads: tuple[list, list], lr: float) -> ProposalParams:
    """One Adam update (in place); raises on non-finite gradients.

    Training must abort loudly on divergence rather than continue with
    poisoned parameters.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    weight_grads, bias_grads = grads
    flat_grads = weight_grads + bias_grads
    for g in flat_grads:
        if not np.isfinite(g.sum()):
            raise FloatingPointError("non-finite gradient; aborting the update")
    targets = params.weights + params.biases
    params.step += 1
    t = params.step
    bc1 = 1.0 - ADAM_BETA1**t
    bc2 = 1.0 - ADAM_BETA2**t
    # Folding the bias corrections into the step size and epsilon gives the
    # textbook update with fewer full-array temporaries.
    step_size = lr * np.sqrt(bc2) / bc1
    eps = ADAM_EPS * np.sqrt(bc2)
    for target, g, m, v in zip(targets, flat_grads, params.adam_m, params.adam_v):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        sq = np.multiply(g, g)
        sq *= 1.0 - ADAM_BETA2
        v += sq
        denom = np.sqrt(v)
        denom += eps
        update = np.divide(m, denom, out=denom)
        update *= step_size
        target -= update
    if not params.is_finite():
        raise FloatingPointError("non-finite parameters after update")
    return params


def save_checkpoint(path, params: ProposalParams, extra: dict | None = None) -> None:
    """Dump config, weights, and optimizer state; enough to resume bit-exactly."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "num_codes": params.config.num_codes,
        "code_length": params.config.code_length,
        "variance": params.variance,
        "step": params.step,
        "extra": extra or {},
    }
    arrays = {}
    for i, w in enumerate(params.weights):
        arrays[f"w{i}"] = w
    for i, b in enumerate(params.biases):
        arrays[f"b{i}"] = b
    for i, m in enumerate(params.adam_m):
        arrays[f"m{i}"] = m
    for i, v in enumerate(params.adam_v):
        arrays[f"v{i}"] = v
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path) -> tuple[ProposalParams, dict]:
    """Inverse of save_checkpoint; returns (params, extra)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        cfg = NetworkConfig(meta["num_codes"], meta["code_length"])
        n_layers = len(cfg.layer_dims) - 1
        weights = [data[f"w{i}"] for i in range(n_layers)]
        biases = [data[f"b{i}"] for i in range(n_layers)]
        moments_m = [data[f"m{i}"] for i in range(2 * n_layers)]
        moments_v = [data[f"v{i}"] for i in range(2 * n_layers)]
    params = ProposalParams(
        config=cfg,
        variance=float(meta["variance"]),
        weights=weights,
        biases=biases,
        adam_m=moments_m,
        adam_v=moments_v,
        step=int(meta["step"]),
    )
    return params, meta["extra"]
