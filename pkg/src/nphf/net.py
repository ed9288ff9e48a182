"""Dense residual network for cost-to-go regression, written directly on
numpy: forward pass, analytic backpropagation, Adam, finite-difference
gradient verification, and a binary weight-file format.

Layer stack (all dense layers keep weights as (out, in) row-major):

    input -> dense(first_hidden) -> ReLU
          -> dense(block_width)  -> ReLU
          -> num_blocks x [dense -> ReLU -> dense -> add skip -> ReLU]
          -> dense(1)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    CorruptModelError,
    DimensionMismatchError,
    InputError,
    TrainingDivergedError,
)

MODEL_MAGIC = b"NPHF1\x00"
MODEL_VERSION = 1

_DTYPES = {"float32": np.float32, "float64": np.float64}


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    first_hidden: int = 400
    block_width: int = 128
    num_blocks: int = 2
    dtype: str = "float32"

    def __post_init__(self):
        if min(self.input_dim, self.first_hidden, self.block_width) < 1:
            raise InputError("all layer dimensions must be >= 1")
        if self.num_blocks < 0:
            raise InputError("num_blocks must be >= 0")
        if self.dtype not in _DTYPES:
            raise InputError(f"dtype must be one of {sorted(_DTYPES)}, got {self.dtype!r}")

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(out, in) shape of every dense layer, in storage order."""
        shapes = [
            (self.first_hidden, self.input_dim),
            (self.block_width, self.first_hidden),
        ]
        for _ in range(self.num_blocks):
            shapes.append((self.block_width, self.block_width))
            shapes.append((self.block_width, self.block_width))
        shapes.append((1, self.block_width))
        return shapes

    def param_count(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes())


def paper_scale(input_dim: int) -> ModelConfig:
    """The full-size architecture: 5000-wide input expansion, four 1000-wide
    residual blocks."""
    return ModelConfig(input_dim, first_hidden=5000, block_width=1000, num_blocks=4)


class HeuristicModel:
    """Weights of the residual regressor. Mutated only by optimizer steps."""

    def __init__(self, config: ModelConfig, weights: list[np.ndarray], biases: list[np.ndarray]):
        shapes = config.layer_shapes()
        if [w.shape for w in weights] != shapes or [b.shape for b in biases] != [
            (o,) for o, _ in shapes
        ]:
            raise DimensionMismatchError("parameter shapes do not match the config")
        self.config = config
        self.weights = weights
        self.biases = biases

    @property
    def dtype(self):
        return _DTYPES[self.config.dtype]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "HeuristicModel":
        return HeuristicModel(
            self.config,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def astype(self, dtype: str) -> "HeuristicModel":
        np_dtype = _DTYPES[dtype]
        return HeuristicModel(
            replace(self.config, dtype=dtype),
            [w.astype(np_dtype) for w in self.weights],
            [b.astype(np_dtype) for b in self.biases],
        )

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        return forward(self, batch)

    def forward(self, batch: np.ndarray) -> np.ndarray:
        return forward(self, batch)


def init(config: ModelConfig, seed: int) -> HeuristicModel:
    """He-scaled normal weights (variance 2/fan_in), zero biases."""
    rng = np.random.default_rng(seed)
    dtype = _DTYPES[config.dtype]
    weights, biases = [], []
    for out_dim, in_dim in config.layer_shapes():
        std = np.sqrt(2.0 / in_dim)
        weights.append(rng.normal(0.0, std, size=(out_dim, in_dim)).astype(dtype))
        biases.append(np.zeros(out_dim, dtype=dtype))
    return HeuristicModel(config, weights, biases)


def zeros(config: ModelConfig) -> HeuristicModel:
    """All-zero parameters; outputs exactly 0 for any input. Test hook."""
    dtype = _DTYPES[config.dtype]
    weights = [np.zeros(s, dtype=dtype) for s in config.layer_shapes()]
    biases = [np.zeros(s[0], dtype=dtype) for s in config.layer_shapes()]
    return HeuristicModel(config, weights, biases)


def _check_batch(model: HeuristicModel, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=model.dtype)
    if batch.ndim != 2 or batch.shape[1] != model.config.input_dim:
        raise DimensionMismatchError(
            f"expected inputs of shape (batch, {model.config.input_dim}), got {batch.shape}"
        )
    return batch


def _forward_cached(model: HeuristicModel, x: np.ndarray):
    """Returns (outputs (B,), activation cache for backprop)."""
    w, b = model.weights, model.biases
    nb = model.config.num_blocks
    a0 = np.maximum(x @ w[0].T + b[0], 0)
    a1 = np.maximum(a0 @ w[1].T + b[1], 0)
    block_in, block_u, block_s = [], [], []
    a = a1
    for k in range(nb):
        wa, ba = w[2 + 2 * k], b[2 + 2 * k]
        wb, bb = w[3 + 2 * k], b[3 + 2 * k]
        u = np.maximum(a @ wa.T + ba, 0)
        s = a + (u @ wb.T + bb)
        block_in.append(a)
        block_u.append(u)
        block_s.append(s)
        a = np.maximum(s, 0)
    out = (a @ w[-1].T + b[-1])[:, 0]
    return out, (x, a0, a1, block_in, block_u, block_s, a)


def forward(model: HeuristicModel, batch: np.ndarray) -> np.ndarray:
    """Scalar output per input row. Deterministic in (weights, input)."""
    batch = _check_batch(model, batch)
    out, _ = _forward_cached(model, batch)
    return out


def mse_and_gradients(model: HeuristicModel, batch: np.ndarray, targets: np.ndarray):
    """Mean-squared-error loss plus analytic gradients for every parameter,
    ordered like model.parameters()."""
    x = _check_batch(model, batch)
    y = np.asarray(targets, dtype=model.dtype)
    if y.shape != (x.shape[0],):
        raise DimensionMismatchError(
            f"expected targets of shape ({x.shape[0]},), got {y.shape}"
        )
    if x.shape[0] == 0:
        raise InputError("empty training batch")
    w, b = model.weights, model.biases
    nb = model.config.num_blocks
    out, (x0, a0, a1, block_in, block_u, block_s, a_last) = _forward_cached(model, x)
    diff = out - y
    loss = float(np.mean(diff.astype(np.float64) ** 2))

    gw = [None] * len(w)
    gb = [None] * len(b)
    dout = (2.0 / x.shape[0]) * diff.astype(model.dtype)
    d = dout[:, None]
    gw[-1] = d.T @ a_last
    gb[-1] = d.sum(axis=0)
    da = d @ w[-1]
    for k in range(nb - 1, -1, -1):
        wa = w[2 + 2 * k]
        wb = w[3 + 2 * k]
        ds = da * (block_s[k] > 0)
        gw[3 + 2 * k] = ds.T @ block_u[k]
        gb[3 + 2 * k] = ds.sum(axis=0)
        du = ds @ wb
        dzu = du * (block_u[k] > 0)
        gw[2 + 2 * k] = dzu.T @ block_in[k]
        gb[2 + 2 * k] = dzu.sum(axis=0)
        da = ds + dzu @ wa
    dz1 = da * (a1 > 0)
    gw[1] = dz1.T @ a0
    gb[1] = dz1.sum(axis=0)
    dz0 = (dz1 @ w[1]) * (a0 > 0)
    gw[0] = dz0.T @ x0
    gb[0] = dz0.sum(axis=0)

    grads = []
    for wg, bg in zip(gw, gb):
        grads.append(wg)
        grads.append(bg)
    return loss, grads


@dataclass
class AdamState:
    """Per-parameter moment accumulators plus hyperparameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = None
    v: list = None

    @classmethod
    def for_model(cls, model: HeuristicModel, lr: float = 1e-3) -> "AdamState":
        params = model.parameters()
        return cls(
            lr=lr,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> None:
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**state.step
    corr2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)


def train_step(
    model: HeuristicModel,
    optimizer: AdamState,
    batch: np.ndarray,
    targets: np.ndarray,
) -> float:
    """One Adam step on the MSE against `targets`. Returns the pre-update loss."""
    loss, grads = mse_and_gradients(model, batch, targets)
    if not np.isfinite(loss):
        raise TrainingDivergedError(f"training loss is non-finite ({loss}) at step {optimizer.step + 1}")
    adam_step(model.parameters(), grads, optimizer)
    return loss


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    worst_param: int
    worst_index: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def gradient_check(
    config: ModelConfig,
    seed: int,
    tolerance: float = 1e-4,
    fd_step: float = 1e-5,
    batch_size: int = 4,
) -> GradCheckResult:
    """Compare analytic gradients against central finite differences on a
    random batch, in 64-bit. Relative error is floored at unit magnitude so
    dead-ReLU parameters with true zero gradient do not false-fail."""
    model = init(replace(config, dtype="float64"), seed)
    rng = np.random.default_rng(seed + 1)
    x = rng.normal(0.0, 1.0, size=(batch_size, config.input_dim))
    y = rng.normal(2.0, 1.0, size=batch_size)
    _, grads = mse_and_gradients(model, x, y)

    def loss_at() -> float:
        out = forward(model, x)
        return float(np.mean((out - y) ** 2))

    worst = (0.0, 0, 0)
    for p_idx, (param, grad) in enumerate(zip(model.parameters(), grads)):
        flat = param.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + fd_step
            hi = loss_at()
            flat[i] = orig - fd_step
            lo = loss_at()
            flat[i] = orig
            fd = (hi - lo) / (2 * fd_step)
            rel = abs(fd - gflat[i]) / max(1.0, abs(fd), abs(gflat[i]))
            if rel > worst[0]:
                worst = (rel, p_idx, i)
    return GradCheckResult(worst[0], worst[1], worst[2], tolerance)


# -- weight file format --------------------------------------------------------
#
# magic "NPHF1\0" | version byte | u32 LE header length | JSON header
# | every dense layer in order: weights (row-major by output neuron) then its
#   bias vector, all little-endian float32.


@dataclass(frozen=True)
class LoadedModel:
    """A model plus the input-layout metadata stored alongside it."""

    model: HeuristicModel
    n: int
    with_actions: bool


def save_model(path, model: HeuristicModel, n: int, with_actions: bool) -> None:
    """Models are persisted in float32; a float64 model is downcast."""
    cfg = model.config
    header = {
        "config": {
            "input_dim": cfg.input_dim,
            "first_hidden": cfg.first_hidden,
            "block_width": cfg.block_width,
            "num_blocks": cfg.num_blocks,
        },
        "n": n,
        "with_actions": with_actions,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(bytes([MODEL_VERSION]))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def load_model(path) -> LoadedModel:
    blob = Path(path).read_bytes()
    pre = len(MODEL_MAGIC)
    if len(blob) < pre + 5 or blob[:pre] != MODEL_MAGIC:
        raise CorruptModelError(f"{path}: not a model weight file")
    if blob[pre] != MODEL_VERSION:
        raise CorruptModelError(f"{path}: unsupported model format version {blob[pre]}")
    (header_len,) = struct.unpack_from("<I", blob, pre + 1)
    off = pre + 5
    if len(blob) < off + header_len:
        raise CorruptModelError(f"{path}: truncated header")
    try:
        header = json.loads(blob[off : off + header_len].decode())
        cfg = ModelConfig(dtype="float32", **header["config"])
        n = int(header["n"])
        with_actions = bool(header["with_actions"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CorruptModelError(f"{path}: bad model header: {exc}") from exc
    off += header_len
    body = blob[off:]
    if len(body) != 4 * cfg.param_count():
        raise CorruptModelError(
            f"{path}: expected {4 * cfg.param_count()} parameter bytes, found {len(body)}"
        )
    flat = np.frombuffer(body, dtype="<f4")
    weights, biases = [], []
    pos = 0
    for out_dim, in_dim in cfg.layer_shapes():
        weights.append(flat[pos : pos + out_dim * in_dim].reshape(out_dim, in_dim).copy())
        pos += out_dim * in_dim
        biases.append(flat[pos : pos + out_dim].copy())
        pos += out_dim
    return LoadedModel(HeuristicModel(cfg, weights, biases), n, with_actions)


def require_layout(loaded: LoadedModel, n: int, with_actions: bool) -> None:
    """Reject a model whose stored input layout cannot encode this data."""
    if loaded.n != n or loaded.with_actions != with_actions:
        raise DimensionMismatchError(
            f"model expects n={loaded.n}, with_actions={loaded.with_actions}; "
            f"data needs n={n}, with_actions={with_actions}"
        )
