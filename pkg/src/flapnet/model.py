"""From-scratch LSTM binary classifier.

One LSTM layer reads the feature sequence; inverted dropout is applied to
the final hidden state, and a single sigmoid unit produces the flapping
probability. Training minimizes binary cross-entropy with Adam, stops when
validation accuracy has not improved for ``patience`` epochs, and restores
the best-epoch weights.

All gradients are exact (backpropagation through time over the full
sequence); tests check them against central finite differences. The
sequential recurrence runs through :mod:`flapnet.kernels`.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .augmentation import DEFAULT_Z_SLACK, sample_augmentation_arrays, shift_arrays
from .data import Clip, clip_arrays
from .errors import ValidationError
from .features import FeatureSelection, build_features, effective_dim, features_from_arrays

PROB_EPS = 1e-7

__all__ = [
    "ModelConfig",
    "ModelParameters",
    "AdamState",
    "TrainHistory",
    "EarlyStopping",
    "param_count",
    "param_breakdown",
    "init_parameters",
    "lstm_forward",
    "forward",
    "forward_pass",
    "forward_batch",
    "bce_loss",
    "backward",
    "backward_batch",
    "adam_step",
    "train",
    "predict",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    hidden_units: int
    learning_rate: float = 0.0005
    dropout_rate: float = 0.3
    max_epochs: int = 75
    patience: int = 10
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.hidden_units < 1:
            raise ValidationError("input_dim and hidden_units must be >= 1")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValidationError(f"dropout_rate {self.dropout_rate} outside [0, 1)")
        if self.learning_rate <= 0 or self.max_epochs < 1 or self.patience < 1 or self.batch_size < 1:
            raise ValidationError("learning_rate, max_epochs, patience, batch_size must be positive")


def param_breakdown(config: ModelConfig) -> tuple[int, int]:
    """(lstm, dense) scalar counts."""
    d, h = config.input_dim, config.hidden_units
    return 4 * ((d + h) * h + h), h + 1


def param_count(config: ModelConfig) -> int:
    lstm, dense = param_breakdown(config)
    return lstm + dense


@dataclass
class ModelParameters:
    """LSTM + dense weights. Gate order along the 4H axis is i, f, g, o."""

    W: np.ndarray  # (D, 4H) input kernel
    U: np.ndarray  # (H, 4H) recurrent kernel
    b: np.ndarray  # (4H,) gate bias
    w_out: np.ndarray  # (H,) dense weights
    b_out: np.ndarray  # (1,) dense bias

    def __post_init__(self) -> None:
        d, four_h = self.W.shape
        h = four_h // 4
        if four_h != 4 * h or self.U.shape != (h, four_h) or self.b.shape != (four_h,):
            raise ValidationError("inconsistent LSTM parameter shapes")
        if self.w_out.shape != (h,) or self.b_out.shape != (1,):
            raise ValidationError("inconsistent dense parameter shapes")

    @property
    def input_dim(self) -> int:
        return self.W.shape[0]

    @property
    def hidden_units(self) -> int:
        return self.U.shape[0]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.W, self.U, self.b, self.w_out, self.b_out)

    def n_scalars(self) -> int:
        return sum(a.size for a in self.arrays())

    def copy(self) -> "ModelParameters":
        return ModelParameters(*(a.copy() for a in self.arrays()))

    @classmethod
    def zeros(cls, input_dim: int, hidden_units: int) -> "ModelParameters":
        d, h = input_dim, hidden_units
        return cls(
            np.zeros((d, 4 * h)),
            np.zeros((h, 4 * h)),
            np.zeros(4 * h),
            np.zeros(h),
            np.zeros(1),
        )


def _glorot_uniform(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def _orthogonal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    # semi-orthogonal: orthonormal rows when rows <= cols
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q.T if rows < cols else q


def init_parameters(config: ModelConfig) -> ModelParameters:
    """Glorot-uniform input kernels, orthogonal recurrent kernel, zero biases
    except the forget-gate block, which starts at 1."""
    d, h = config.input_dim, config.hidden_units
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    W = _glorot_uniform(rng, (d, 4 * h))
    U = _orthogonal(rng, h, 4 * h)
    b = np.zeros(4 * h)
    b[h : 2 * h] = 1.0
    w_out = _glorot_uniform(rng, (h, 1))[:, 0]
    return ModelParameters(W, U, b, w_out, np.zeros(1))


@dataclass
class BatchCache:
    """Everything backward_batch needs from a forward pass."""

    x: np.ndarray  # (T, B, D)
    gi: np.ndarray
    gf: np.ndarray
    gg: np.ndarray
    go: np.ndarray
    cs: np.ndarray  # (T+1, B, H)
    hs: np.ndarray  # (T+1, B, H)
    tc: np.ndarray
    dropout_scale: np.ndarray | None  # (B, H), entries 0 or 1/keep
    dropped: np.ndarray  # (B, H) head input
    p_raw: np.ndarray  # (B,) sigmoid output before clamping
    has_head: bool = True


def _run_lstm(params: ModelParameters, x_tbd: np.ndarray):
    t_len, batch, _ = x_tbd.shape
    h = params.hidden_units
    gi = np.empty((t_len, batch, h))
    gf = np.empty((t_len, batch, h))
    gg = np.empty((t_len, batch, h))
    go = np.empty((t_len, batch, h))
    tc = np.empty((t_len, batch, h))
    cs = np.zeros((t_len + 1, batch, h))
    hs = np.zeros((t_len + 1, batch, h))
    kernels.forward_core(x_tbd, params.W, params.U, params.b, gi, gf, gg, go, cs, hs, tc)
    return gi, gf, gg, go, cs, hs, tc


def forward_batch(
    params: ModelParameters,
    x: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
    dropout_rate: float = 0.3,
) -> tuple[np.ndarray, BatchCache]:
    """Probabilities for a (B, T, D) batch, plus the backward cache."""
    if x.ndim != 3 or x.shape[2] != params.input_dim:
        raise ValidationError(
            f"input shape {x.shape} does not match input_dim {params.input_dim}"
        )
    x_tbd = np.ascontiguousarray(np.transpose(x, (1, 0, 2)))
    gi, gf, gg, go, cs, hs, tc = _run_lstm(params, x_tbd)
    h_last = hs[-1]
    if training and dropout_rate > 0.0:
        if rng is None:
            raise ValidationError("training-mode forward requires an rng for the dropout mask")
        keep = 1.0 - dropout_rate
        scale = (rng.random(h_last.shape) >= dropout_rate) / keep
        dropped = h_last * scale
    else:
        scale = None
        dropped = h_last
    z = dropped @ params.w_out + params.b_out[0]
    p_raw = 1.0 / (1.0 + np.exp(-z))
    p = np.clip(p_raw, PROB_EPS, 1.0 - PROB_EPS)
    cache = BatchCache(x_tbd, gi, gf, gg, go, cs, hs, tc, scale, dropped, p_raw)
    return p, cache


def backward_batch(params: ModelParameters, cache: BatchCache, y: np.ndarray) -> ModelParameters:
    """Exact gradients of the summed BCE loss over the batch."""
    t_len, batch, d = cache.x.shape
    h = params.hidden_units
    if not cache.has_head:
        raise ValidationError("cache comes from lstm_forward, not a full forward pass")
    if cache.gi.shape[2] != h or d != params.input_dim:
        raise ValidationError("cache does not match parameters")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != cache.p_raw.shape:
        raise ValidationError(f"labels shape {y.shape} does not match batch {cache.p_raw.shape}")

    p = np.clip(cache.p_raw, PROB_EPS, 1.0 - PROB_EPS)
    active = (cache.p_raw > PROB_EPS) & (cache.p_raw < 1.0 - PROB_EPS)
    dz_head = np.where(active, p - y, 0.0)

    dw_out = cache.dropped.T @ dz_head
    db_out = np.array([dz_head.sum()])
    dh = dz_head[:, None] * params.w_out[None, :]
    if cache.dropout_scale is not None:
        dh = dh * cache.dropout_scale

    dz = np.empty((t_len, batch, 4 * h))
    u_t = np.ascontiguousarray(params.U.T)
    kernels.backward_core(
        np.ascontiguousarray(dh), u_t, cache.gi, cache.gf, cache.gg, cache.go, cache.cs, cache.tc, dz
    )
    dz_flat = dz.reshape(t_len * batch, 4 * h)
    dW = cache.x.reshape(t_len * batch, d).T @ dz_flat
    dU = cache.hs[:t_len].reshape(t_len * batch, h).T @ dz_flat
    db = dz_flat.sum(axis=0)
    return ModelParameters(dW, dU, db, dw_out, db_out)


def lstm_forward(params: ModelParameters, x: np.ndarray) -> tuple[np.ndarray, BatchCache]:
    """Final hidden state for one (T, D) sequence (no head, no dropout)."""
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ValidationError(f"input shape {x.shape} does not match input_dim {params.input_dim}")
    x_tbd = np.ascontiguousarray(x[:, None, :])
    gi, gf, gg, go, cs, hs, tc = _run_lstm(params, x_tbd)
    cache = BatchCache(x_tbd, gi, gf, gg, go, cs, hs, tc, None, hs[-1], np.zeros(1), has_head=False)
    return hs[-1][0], cache


def forward_pass(
    params: ModelParameters,
    x: np.ndarray,
    training: bool = False,
    dropout_seed: int | None = None,
    dropout_rate: float = 0.3,
) -> tuple[float, BatchCache]:
    """(probability, cache) for one (T, D) sequence."""
    rng = None
    if training and dropout_rate > 0.0:
        if dropout_seed is None:
            raise ValidationError("training-mode forward requires dropout_seed")
        rng = np.random.default_rng(np.random.PCG64(dropout_seed))
    p, cache = forward_batch(params, x[None, :, :], training=training, rng=rng, dropout_rate=dropout_rate)
    return float(p[0]), cache


def forward(
    params: ModelParameters,
    x: np.ndarray,
    training: bool = False,
    dropout_seed: int | None = None,
    dropout_rate: float = 0.3,
) -> float:
    return forward_pass(params, x, training, dropout_seed, dropout_rate)[0]


def backward(params: ModelParameters, cache: BatchCache, y: int | float) -> ModelParameters:
    return backward_batch(params, cache, np.array([float(y)]))


def bce_loss(p: float, y: int | float) -> float:
    """Binary cross-entropy of one prediction; p is clamped away from {0, 1}."""
    p = min(max(float(p), PROB_EPS), 1.0 - PROB_EPS)
    y = float(y)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def _bce_mean(p: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


@dataclass
class AdamState:
    learning_rate: float
    m: ModelParameters
    v: ModelParameters
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7

    @classmethod
    def create(cls, params: ModelParameters, learning_rate: float) -> "AdamState":
        zeros = lambda: ModelParameters(*(np.zeros_like(a) for a in params.arrays()))
        return cls(learning_rate, zeros(), zeros())


def adam_step(
    params: ModelParameters, grads: ModelParameters, state: AdamState
) -> tuple[ModelParameters, AdamState]:
    """One in-place Adam update with bias correction."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for theta, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        theta -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


class EarlyStopping:
    """Stop after ``patience`` epochs without strict improvement; remembers
    the earliest best epoch."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -np.inf
        self.best_epoch = 0
        self.epochs_seen = 0
        self._bad = 0

    def update(self, value: float) -> bool:
        """Record one epoch's monitored value; True means stop now."""
        self.epochs_seen += 1
        if value > self.best:
            self.best = value
            self.best_epoch = self.epochs_seen
            self._bad = 0
            return False
        self._bad += 1
        return self._bad >= self.patience


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int = 0
    epochs_run: int = 0


def _accuracy(p: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((p > 0.5).astype(np.int64) == y.astype(np.int64)))


def _stack_features(
    items: Sequence[tuple[Clip, int]], selection: FeatureSelection, interpolate: bool
) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([build_features(clip, selection, interpolate) for clip, _ in items])
    y = np.array([label for _, label in items], dtype=np.float64)
    return x, y


def train(
    config: ModelConfig,
    train_set: Sequence[tuple[Clip, int]],
    val_set: Sequence[tuple[Clip, int]],
    augment: bool = False,
    *,
    selection: FeatureSelection,
    interpolate: bool = False,
    z_slack: float = DEFAULT_Z_SLACK,
) -> tuple[ModelParameters, TrainHistory]:
    """Train from scratch; returns the best-validation-epoch weights.

    Deterministic given config.seed and independent of the ordering of
    train_set (items are keyed by clip_id before the seeded shuffle). With
    augmentation enabled, fresh per-clip offsets are drawn every epoch.
    """
    if not train_set or not val_set:
        raise ValidationError("train_set and val_set must be non-empty")
    d = effective_dim(selection)
    if d != config.input_dim:
        raise ValidationError(
            f"config.input_dim {config.input_dim} does not match selection dim {d}"
        )

    items = sorted(train_set, key=lambda cy: cy[0].clip_id)
    arrays = [clip_arrays(clip) for clip, _ in items]
    y_train = np.array([label for _, label in items], dtype=np.float64)
    x_static = None
    if not augment:
        x_static = np.stack(
            [features_from_arrays(c, m, selection, interpolate) for c, m in arrays]
        )
    x_val, y_val = _stack_features(val_set, selection, interpolate)

    params = init_parameters(config)
    state = AdamState.create(params, config.learning_rate)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    dropout_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2]))
    id_hashes = [zlib.crc32(clip.clip_id.encode()) for clip, _ in items]

    stopper = EarlyStopping(config.patience)
    history = TrainHistory()
    best_params = params.copy()
    n = len(items)

    for epoch in range(1, config.max_epochs + 1):
        if augment:
            x_epoch = np.empty((n, x_val.shape[1], d))
            for i, (coords, det) in enumerate(arrays):
                seed = np.random.SeedSequence([config.seed, 3, epoch, id_hashes[i]])
                aug = sample_augmentation_arrays(
                    coords, det, int(seed.generate_state(1)[0]), z_slack
                )
                x_epoch[i] = features_from_arrays(shift_arrays(coords, det, aug), det, selection, interpolate)
        else:
            x_epoch = x_static

        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = x_epoch[idx], y_train[idx]
            p, cache = forward_batch(
                params, xb, training=True, rng=dropout_rng, dropout_rate=config.dropout_rate
            )
            grads = backward_batch(params, cache, yb)
            for g in grads.arrays():
                g /= len(idx)
            adam_step(params, grads, state)
            loss_sum += _bce_mean(p, yb) * len(idx)

        history.train_loss.append(loss_sum / n)
        p_val, _ = forward_batch(params, x_val, training=False)
        val_acc = _accuracy(p_val, y_val)
        history.val_accuracy.append(val_acc)

        improved = val_acc > stopper.best
        stop = stopper.update(val_acc)
        if improved:
            best_params = params.copy()
        if stop:
            break

    history.best_epoch = stopper.best_epoch
    history.epochs_run = stopper.epochs_seen
    return best_params, history


def predict(
    params: ModelParameters,
    clip: Clip,
    selection: FeatureSelection,
    interpolate: bool = False,
) -> float:
    """Eval-mode flapping probability; the label is p > 0.5."""
    x = build_features(clip, selection, interpolate)
    return forward(params, x, training=False)


def save_model(
    path: str | Path,
    params: ModelParameters,
    config: ModelConfig,
    *,
    selection: FeatureSelection | None = None,
    interpolate: bool = False,
) -> None:
    """Write a self-describing .npz: a JSON header plus the five weight
    arrays in fixed order (W, U, b, w_out, b_out), float64."""
    header = {
        "format": "flapnet-model",
        "format_version": 1,
        "input_dim": params.input_dim,
        "hidden_units": params.hidden_units,
        "dropout_rate": config.dropout_rate,
        "learning_rate": config.learning_rate,
        "max_epochs": config.max_epochs,
        "patience": config.patience,
        "batch_size": config.batch_size,
        "seed": config.seed,
        "selection": selection.kind if selection else None,
        "landmark": selection.landmark if selection else None,
        "interpolate": interpolate,
    }
    with open(path, "wb") as fh:
        np.savez(
            fh,
            header=json.dumps(header, sort_keys=True),
            W=params.W.astype(np.float64),
            U=params.U.astype(np.float64),
            b=params.b.astype(np.float64),
            w_out=params.w_out.astype(np.float64),
            b_out=params.b_out.astype(np.float64),
        )


def load_model(path: str | Path) -> tuple[ModelParameters, ModelConfig, dict]:
    """Read a model file; shape and parameter-count mismatches are errors."""
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            arrays = {k: np.asarray(data[k], dtype=np.float64) for k in ("W", "U", "b", "w_out", "b_out")}
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ValidationError(f"unreadable model file {path}: {exc}") from exc
    if header.get("format") != "flapnet-model":
        raise ValidationError(f"{path} is not a flapnet model file")
    d, h = int(header["input_dim"]), int(header["hidden_units"])
    config = ModelConfig(
        input_dim=d,
        hidden_units=h,
        learning_rate=float(header["learning_rate"]),
        dropout_rate=float(header["dropout_rate"]),
        max_epochs=int(header["max_epochs"]),
        patience=int(header["patience"]),
        batch_size=int(header["batch_size"]),
        seed=int(header["seed"]),
    )
    try:
        params = ModelParameters(**arrays)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if params.input_dim != d or params.hidden_units != h:
        raise ValidationError(
            f"{path}: arrays are sized for D={params.input_dim}, H={params.hidden_units}, "
            f"header says D={d}, H={h}"
        )
    if params.n_scalars() != param_count(config):
        raise ValidationError(
            f"{path}: {params.n_scalars()} scalars, expected {param_count(config)}"
        )
    meta = {
        "selection": FeatureSelection(header["selection"], header.get("landmark"))
        if header.get("selection")
        else None,
        "interpolate": bool(header.get("interpolate", False)),
    }
    return params, config, meta


def resolve_config(
    features: str,
    *,
    learning_rate: float | None = None,
    hidden_units: int | None = None,
    max_epochs: int | None = None,
    batch_size: int | None = None,
    seed: int = 0,
) -> tuple[ModelConfig, FeatureSelection]:
    """Per-representation defaults: all21 and six use 64 hidden units, the
    single-landmark representations 32; all21 trains at lr 5e-4, the rest at
    1e-2. Explicit overrides win."""
    selection = FeatureSelection.parse(features)
    defaults = {
        "all21": (64, 0.0005),
        "six": (64, 0.01),
        "one": (32, 0.01),
        "mean": (32, 0.01),
    }[selection.kind]
    h = hidden_units if hidden_units is not None else defaults[0]
    lr = learning_rate if learning_rate is not None else defaults[1]
    config = ModelConfig(
        input_dim=effective_dim(selection),
        hidden_units=h,
        learning_rate=lr,
        max_epochs=max_epochs if max_epochs is not None else 75,
        batch_size=batch_size if batch_size is not None else 32,
        seed=seed,
    )
    return config, selection
