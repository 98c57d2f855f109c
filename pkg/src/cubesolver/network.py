"""Joint value/policy network, written directly against numpy.

The body is a stack of fully connected elu layers.  Two heads branch off the
body output: the value head ends in a single linear unit, the policy head in 12
logits that go through a softmax.  Parameters are kept in an ordered dict so
checkpoints and gradient checks can walk them in a fixed order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from . import cube


@dataclass
class NetworkConfig:
    body_layer_sizes: list[int] = field(default_factory=lambda: [256, 128])
    value_head_sizes: list[int] = field(default_factory=lambda: [64])
    policy_head_sizes: list[int] = field(default_factory=lambda: [64])
    input_size: int = cube.ENCODING_SIZE
    policy_output_size: int = cube.NUM_MOVES
    learning_rate: float = 1e-4
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-8
    policy_loss_weight: float = 1.0
    dtype: str = "float64"

    def validate(self, for_cube: bool = True) -> None:
        sizes = self.body_layer_sizes + self.value_head_sizes + self.policy_head_sizes
        if not self.body_layer_sizes or any(int(s) < 1 for s in sizes):
            raise ValueError(f"layer sizes must be >= 1 and the body non-empty: {sizes}")
        if self.policy_output_size != cube.NUM_MOVES:
            raise ValueError("policy head must have one output per move (12)")
        if for_cube and self.input_size != cube.ENCODING_SIZE:
            raise ValueError(f"cube networks take {cube.ENCODING_SIZE} inputs, got {self.input_size}")
        if not 0.0 <= self.rmsprop_decay < 1.0 or self.learning_rate <= 0:
            raise ValueError("bad optimizer settings")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"unsupported dtype {self.dtype}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(**d)


DESK_NETWORK = NetworkConfig()
PAPER_NETWORK = NetworkConfig(
    body_layer_sizes=[4096, 2048], value_head_sizes=[512], policy_head_sizes=[512]
)


def layer_specs(config: NetworkConfig) -> list[tuple[str, int, int]]:
    """(name, fan_in, fan_out) for every dense layer, in checkpoint order."""
    specs = []
    prev = config.input_size
    for i, size in enumerate(config.body_layer_sizes):
        specs.append((f"body.{i}", prev, size))
        prev = size
    trunk = prev
    for head, hidden, out in (
        ("value", config.value_head_sizes, 1),
        ("policy", config.policy_head_sizes, config.policy_output_size),
    ):
        prev = trunk
        for i, size in enumerate(hidden):
            specs.append((f"{head}.{i}", prev, size))
            prev = size
        specs.append((f"{head}.out", prev, out))
    return specs


class NetworkParams:
    """Weights, biases and RMSProp accumulators.

    ``weights`` maps ``"<layer>.W"`` / ``"<layer>.b"`` to arrays; ``accum``
    has the same keys and shapes.
    """

    def __init__(self, config: NetworkConfig, weights: dict, accum: dict | None = None):
        self.config = config
        self.weights = weights
        self.accum = accum if accum is not None else {k: np.zeros_like(v) for k, v in weights.items()}

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            self.config,
            {k: v.copy() for k, v in self.weights.items()},
            {k: v.copy() for k, v in self.accum.items()},
        )

    def num_parameters(self) -> int:
        return sum(v.size for v in self.weights.values())

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.weights.values()])

    def equal(self, other: "NetworkParams") -> bool:
        """Bit-identical weights and optimizer state."""
        return all(
            np.array_equal(a[k], b[k])
            for a, b in ((self.weights, other.weights), (self.accum, other.accum))
            for k in a
        ) and self.weights.keys() == other.weights.keys()


class Prediction(NamedTuple):
    value: np.ndarray   # (B,)
    policy: np.ndarray  # (B, 12)
    logits: np.ndarray  # (B, 12)


class NonFiniteError(FloatingPointError):
    def __init__(self, where: str):
        super().__init__(f"non-finite values at {where}")
        self.where = where


def init_params(config: NetworkConfig, seed: int) -> NetworkParams:
    """Glorot-normal weights (variance 2 / (fan_in + fan_out)), zero biases."""
    rng = np.random.default_rng(seed)
    dtype = np.dtype(config.dtype)
    weights = {}
    for name, fan_in, fan_out in layer_specs(config):
        std = np.sqrt(2.0 / (fan_in + fan_out))
        weights[f"{name}.W"] = (rng.standard_normal((fan_in, fan_out)) * std).astype(dtype)
        weights[f"{name}.b"] = np.zeros(fan_out, dtype=dtype)
    return NetworkParams(config, weights)


def elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0)))


def elu_grad(x):
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0)))


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check(arr, where):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(where)


def _run(params: NetworkParams, first_pre: np.ndarray, keep: bool):
    """Shared forward from the first body pre-activation on."""
    w = params.weights
    cfg = params.config
    cache = []
    z = first_pre
    h = None
    for i in range(len(cfg.body_layer_sizes)):
        name = f"body.{i}"
        if i > 0:
            z = h @ w[f"{name}.W"] + w[f"{name}.b"]
        h = elu(z)
        _check(h, name)
        if keep:
            cache.append((name, z, h))
    trunk = h
    outs = {}
    for head, hidden in (("value", cfg.value_head_sizes), ("policy", cfg.policy_head_sizes)):
        h = trunk
        for i in range(len(hidden)):
            name = f"{head}.{i}"
            z = h @ w[f"{name}.W"] + w[f"{name}.b"]
            h = elu(z)
            _check(h, name)
            if keep:
                cache.append((name, z, h))
        name = f"{head}.out"
        out = h @ w[f"{name}.W"] + w[f"{name}.b"]
        _check(out, name)
        outs[head] = out
    value = outs["value"][:, 0]
    logits = outs["policy"]
    return Prediction(value, softmax(logits), logits), cache


def forward(params: NetworkParams, x) -> Prediction:
    """Evaluate a batch of flattened encodings, shape (B, input_size).

    A single 20x24 grid or 480-vector is accepted and treated as B = 1.
    """
    x = np.asarray(x, dtype=params.config.dtype)
    x = x.reshape(-1, params.config.input_size)
    w = params.weights
    pred, _ = _run(params, x @ w["body.0.W"] + w["body.0.b"], keep=False)
    return pred


def forward_states(params: NetworkParams, states: np.ndarray) -> Prediction:
    """Evaluate an (n, 20) uint8 state array.

    The encoding is one-hot, so the first layer is a sum of 20 weight rows;
    this skips building the dense 480-wide input.
    """
    states = np.asarray(states)
    if states.ndim == 1:
        states = states[None, :]
    idx = cube._FLAT_INDEX[cube._SLOTS, states]
    w = params.weights
    pre = w["body.0.W"][idx].sum(axis=1) + w["body.0.b"]
    pred, _ = _run(params, pre, keep=False)
    return pred


class Batch(NamedTuple):
    x: np.ndarray             # (B, input_size)
    value_target: np.ndarray  # (B,)
    policy_target: np.ndarray  # (B,) int
    weight: np.ndarray        # (B,)


def make_batch(samples) -> Batch:
    """Build a Batch from (encoding, value_target, policy_target, weight) tuples."""
    xs, vs, ps, ws = zip(*samples)
    return Batch(
        np.stack([np.asarray(x, dtype=np.float64).ravel() for x in xs]),
        np.asarray(vs, dtype=np.float64),
        np.asarray(ps, dtype=np.intp),
        np.asarray(ws, dtype=np.float64),
    )


def loss_and_gradients(params: NetworkParams, batch: Batch, with_parts: bool = False):
    """Weighted value MSE plus policy cross-entropy, and its gradient.

    loss = sum_i w_i [(v_i - y_i)^2 + c * CE_i] / sum_i w_i, with c the
    configured policy loss weight.  Returns ``(loss, grads)``, or
    ``(loss, grads, (value_loss, policy_loss))`` when ``with_parts``.
    """
    x, yv, yp, wt = batch
    if len(yv) == 0:
        raise ValueError("empty batch")
    wt = np.asarray(wt, dtype=np.float64)
    if np.any(wt <= 0):
        raise ValueError("sample weights must be positive")
    cfg = params.config
    w = params.weights
    x = np.asarray(x, dtype=cfg.dtype).reshape(len(yv), cfg.input_size)
    pred, cache = _run(params, x @ w["body.0.W"] + w["body.0.b"], keep=True)

    norm = wt / wt.sum()
    n = len(yv)
    rows = np.arange(n)
    diff = pred.value - yv
    shifted = pred.logits - pred.logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    ce = -log_probs[rows, yp]
    value_loss = float(np.dot(norm, diff**2))
    policy_loss = float(np.dot(norm, ce))
    loss = value_loss + cfg.policy_loss_weight * policy_loss
    if not np.isfinite(loss):
        raise NonFiniteError("loss")

    d_value = (2.0 * norm * diff)[:, None]
    d_logits = pred.policy.copy()
    d_logits[rows, yp] -= 1.0
    d_logits *= (cfg.policy_loss_weight * norm)[:, None]

    acts = {name: h for name, _, h in cache}
    pres = {name: z for name, z, _ in cache}
    grads = {}
    trunk_name = f"body.{len(cfg.body_layer_sizes) - 1}"
    d_trunk = np.zeros_like(acts[trunk_name])
    for head, hidden, d_out in (
        ("value", cfg.value_head_sizes, d_value),
        ("policy", cfg.policy_head_sizes, d_logits),
    ):
        names = [f"{head}.{i}" for i in range(len(hidden))]
        inputs = [trunk_name] + names
        d = d_out
        layer = f"{head}.out"
        for below in reversed(inputs):
            h_in = acts[below]
            grads[f"{layer}.W"] = h_in.T @ d
            grads[f"{layer}.b"] = d.sum(axis=0)
            d = d @ w[f"{layer}.W"].T
            if below == trunk_name:
                d_trunk += d
            else:
                d = d * elu_grad(pres[below])
                layer = below
    d = d_trunk
    for i in reversed(range(len(cfg.body_layer_sizes))):
        name = f"body.{i}"
        d = d * elu_grad(pres[name])
        h_in = x if i == 0 else acts[f"body.{i - 1}"]
        grads[f"{name}.W"] = h_in.T @ d
        grads[f"{name}.b"] = d.sum(axis=0)
        if i > 0:
            d = d @ w[f"{name}.W"].T

    grads = {k: grads[k].astype(cfg.dtype, copy=False) for k in w}
    if with_parts:
        return loss, grads, (value_loss, policy_loss)
    return loss, grads


def rmsprop_step(params: NetworkParams, grads: dict, config: NetworkConfig | None = None,
                 inplace: bool = False) -> NetworkParams:
    cfg = config or params.config
    out = params if inplace else params.copy()
    decay, lr, eps = cfg.rmsprop_decay, cfg.learning_rate, cfg.rmsprop_epsilon
    for k, g in grads.items():
        if out.weights[k].shape != g.shape:
            raise ValueError(f"gradient shape mismatch for {k}: {g.shape} vs {out.weights[k].shape}")
        acc = out.accum[k]
        acc *= decay
        acc += (1.0 - decay) * g * g
        out.weights[k] -= lr * g / np.sqrt(acc + eps)
    return out


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

MAGIC = b"CUBENET\x00"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIII")


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


def save_checkpoint(params: NetworkParams, config: NetworkConfig | None = None,
                    metadata: dict | None = None) -> bytes:
    """Serialize to the versioned binary layout described in docs/formats.md."""
    config = config or params.config
    meta = dict(metadata or {})
    meta.setdefault("iteration", 0)
    meta["encoding_layout_version"] = cube.ENCODING_LAYOUT_VERSION
    keys = list(params.weights)
    header = {
        "config": config.to_dict(),
        "metadata": meta,
        "arrays": [[k, list(params.weights[k].shape)] for k in keys],
    }
    text = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, cube.ENCODING_LAYOUT_VERSION, len(text)), text]
    for table in (params.weights, params.accum):
        for k in keys:
            parts.append(np.ascontiguousarray(table[k], dtype="<f8").tobytes())
    return b"".join(parts)


def load_checkpoint(data: bytes, expected_layout: int = cube.ENCODING_LAYOUT_VERSION):
    """Inverse of save_checkpoint: returns (params, config, metadata)."""
    if len(data) < _HEADER.size:
        raise CheckpointTruncatedError("checkpoint shorter than its fixed header")
    magic, version, layout, text_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic bytes)")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"checkpoint format {version}, expected {FORMAT_VERSION}")
    if layout != expected_layout:
        raise CheckpointVersionError(f"encoding layout {layout}, this build expects {expected_layout}")
    offset = _HEADER.size
    if len(data) < offset + text_len:
        raise CheckpointTruncatedError("checkpoint header text is truncated")
    header = json.loads(data[offset:offset + text_len])
    offset += text_len
    config = NetworkConfig.from_dict(header["config"])
    expected = {}
    for name, fan_in, fan_out in layer_specs(config):
        expected[f"{name}.W"] = (fan_in, fan_out)
        expected[f"{name}.b"] = (fan_out,)
    manifest = [(k, tuple(shape)) for k, shape in header["arrays"]]
    if dict(manifest) != expected or len(manifest) != len(expected):
        raise CheckpointShapeError("array manifest does not match the stored network config")
    total = 2 * sum(int(np.prod(s)) for _, s in manifest) * 8
    if len(data) - offset < total:
        raise CheckpointTruncatedError(f"expected {total} bytes of parameters, found {len(data) - offset}")
    if len(data) - offset > total:
        raise CheckpointShapeError("trailing bytes after parameter arrays")
    tables = []
    for _ in range(2):
        table = {}
        for k, shape in manifest:
            count = int(np.prod(shape))
            arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
            table[k] = arr.astype(config.dtype)
            offset += count * 8
        tables.append(table)
    return NetworkParams(config, tables[0], tables[1]), config, header["metadata"]
