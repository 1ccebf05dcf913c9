"""From-scratch convolutional classifier: two conv/batch-norm/ReLU/pool
blocks, dropout, a fully-connected layer and softmax, trained by SGD with
momentum and backpropagation.

All layers are implemented directly on NumPy arrays with explicit
backward passes so gradients can be checked against finite differences.
Convolutions are valid-region, stride 1; pooling runs along the time axis
only.  Training is deterministic given the seed.

Model file layout (little-endian)::

    magic "WTCN" | version u16 | descriptor length u32 |
    descriptor JSON (architecture + parameter names/shapes) |
    payload: all parameters as f64 in descriptor order
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, ClassifierMixin

from .classes import N_CLASSES
from .errors import DataError, FormatError, PayloadLengthError, TrainingDivergedError

MODEL_MAGIC = b"WTCN"
MODEL_VERSION = 1

_MODEL_HEADER = struct.Struct("<4sHI")


# ---------------------------------------------------------------------------
# architecture and model containers


@dataclass(frozen=True)
class BlockSpec:
    filters: int
    kernel: tuple  # (kh, kw)
    pool: int = 4
    pool_stride: int = 4


@dataclass(frozen=True)
class CnnArchitecture:
    input_shape: tuple = (6, 2500)
    blocks: tuple = (
        BlockSpec(filters=8, kernel=(3, 7)),
        BlockSpec(filters=16, kernel=(3, 5)),
    )
    n_classes: int = N_CLASSES
    p_drop: float = 0.6
    bn_eps: float = 1e-5
    bn_decay: float = 0.9

    def __post_init__(self):
        object.__setattr__(
            self,
            "blocks",
            tuple(
                b if isinstance(b, BlockSpec) else BlockSpec(**b) for b in self.blocks
            ),
        )
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        if not 0.0 <= self.p_drop < 1.0:
            raise ValueError("p_drop must lie in [0, 1)")

    def feature_shapes(self):
        """Shape after each block, starting from (1, H, W)."""
        c, h, w = 1, *self.input_shape
        shapes = []
        for blk in self.blocks:
            kh, kw = blk.kernel
            if kh > h or kw > w:
                raise ValueError(f"kernel {blk.kernel} does not fit input {(h, w)}")
            h, w = h - kh + 1, w - kw + 1
            if blk.pool > w:
                raise ValueError(f"pool region {blk.pool} exceeds width {w}")
            w = (w - blk.pool) // blk.pool_stride + 1
            c = blk.filters
            shapes.append((c, h, w))
        return shapes

    def flat_features(self) -> int:
        c, h, w = self.feature_shapes()[-1]
        return c * h * w

    def param_layout(self):
        """Ordered (name, shape) pairs; this order is the file order."""
        layout = []
        in_ch = 1
        for i, blk in enumerate(self.blocks, start=1):
            kh, kw = blk.kernel
            layout += [
                (f"conv{i}_w", (blk.filters, in_ch, kh, kw)),
                (f"conv{i}_b", (blk.filters,)),
                (f"bn{i}_gamma", (blk.filters,)),
                (f"bn{i}_beta", (blk.filters,)),
                (f"bn{i}_mean", (blk.filters,)),
                (f"bn{i}_var", (blk.filters,)),
            ]
            in_ch = blk.filters
        layout += [
            ("fc_w", (self.n_classes, self.flat_features())),
            ("fc_b", (self.n_classes,)),
        ]
        return layout

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "blocks": [
                {
                    "filters": b.filters,
                    "kernel": list(b.kernel),
                    "pool": b.pool,
                    "pool_stride": b.pool_stride,
                }
                for b in self.blocks
            ],
            "n_classes": self.n_classes,
            "p_drop": self.p_drop,
            "bn_eps": self.bn_eps,
            "bn_decay": self.bn_decay,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CnnArchitecture":
        return cls(
            input_shape=tuple(obj["input_shape"]),
            blocks=tuple(
                BlockSpec(
                    filters=b["filters"],
                    kernel=tuple(b["kernel"]),
                    pool=b["pool"],
                    pool_stride=b["pool_stride"],
                )
                for b in obj["blocks"]
            ),
            n_classes=obj["n_classes"],
            p_drop=obj["p_drop"],
            bn_eps=obj["bn_eps"],
            bn_decay=obj["bn_decay"],
        )


@dataclass
class CnnModel:
    """Versioned parameter container for the two-block network."""

    arch: CnnArchitecture
    params: dict
    version: int = MODEL_VERSION

    def copy(self) -> "CnnModel":
        return CnnModel(
            arch=self.arch,
            params={k: v.copy() for k, v in self.params.items()},
            version=self.version,
        )


@dataclass(frozen=True)
class TrainConfig:
    """SGD-with-momentum training configuration.

    The training split is reshuffled every epoch; 30% of the data (class
    stratified) is held out for validation; there is no L2 regularization.
    When ``halve_lr_on_loss_increase`` is set, an epoch whose mean training
    loss exceeds the previous epoch's is rolled back and the learning rate
    halved, so the accepted loss sequence is nonincreasing.
    """

    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 100
    batch_size: int = 16
    validation_fraction: float = 0.30
    seed: int = 0
    halve_lr_on_loss_increase: bool = True
    stop_at_val_accuracy: float | None = 1.0

    def __post_init__(self):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 2:
            raise ValueError("require positive learning rate, epochs >= 1, batch >= 2")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")


# ---------------------------------------------------------------------------
# layer primitives (forward + backward)


def _as_batched(x):
    """Lift 1-D/2-D/3-D inputs to (B, C, H, W); report the original ndim."""
    arr = np.asarray(x, dtype=np.float64)
    ndim = arr.ndim
    if ndim == 1:
        arr = arr[None, None, None, :]
    elif ndim == 2:
        arr = arr[None, None, :, :]
    elif ndim == 3:
        arr = arr[None, :, :, :]
    elif ndim != 4:
        raise ValueError(f"expected 1-4 dims, got {arr.ndim}")
    return arr, ndim


def _im2col(x, kh, kw):
    b, c, h, w = x.shape
    ho, wo = h - kh + 1, w - kw + 1
    cols = np.empty((b, c, kh, kw, ho, wo))
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = x[:, :, i : i + ho, j : j + wo]
    return cols.reshape(b, c * kh * kw, ho * wo), (ho, wo)


def conv_forward(x, kernels, biases):
    """Valid-region stride-1 cross-correlation, pre-activation.

    ``x`` is (B, C, H, W) (lower-dimensional inputs are lifted), kernels
    (F, C, kh, kw), biases (F,).  Returns (out, cache).
    """
    x, ndim = _as_batched(x)
    w = np.asarray(kernels, dtype=np.float64)
    b = np.asarray(biases, dtype=np.float64)
    if w.ndim != 4 or w.shape[1] != x.shape[1]:
        raise ValueError(f"kernels {w.shape} do not match input {x.shape}")
    if w.shape[2] > x.shape[2] or w.shape[3] > x.shape[3]:
        raise ValueError(f"kernel {w.shape[2:]} larger than input {x.shape[2:]}")
    if b.shape != (w.shape[0],):
        raise ValueError("biases must have one entry per output channel")
    cols, (ho, wo) = _im2col(x, w.shape[2], w.shape[3])
    w2 = w.reshape(w.shape[0], -1)
    out = np.matmul(w2[None, :, :], cols) + b[None, :, None]
    out = out.reshape(x.shape[0], w.shape[0], ho, wo)
    cache = (x.shape, cols, w, ndim)
    return out, cache


def conv_backward(dout, cache, need_dx=True):
    x_shape, cols, w, _ = cache
    b_, c, h, w_in = x_shape
    f = w.shape[0]
    kh, kw = w.shape[2], w.shape[3]
    ho, wo = h - kh + 1, w_in - kw + 1
    dout2 = dout.reshape(b_, f, ho * wo)
    w2 = w.reshape(f, -1)
    dw = np.matmul(dout2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    db = dout2.sum(axis=(0, 2))
    if not need_dx:
        return None, dw, db
    dcols = np.matmul(w2.T[None, :, :], dout2)
    dcols = dcols.reshape(b_, c, kh, kw, ho, wo)
    dx = np.zeros(x_shape)
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i : i + ho, j : j + wo] += dcols[:, :, i, j]
    return dx, dw, db


def batchnorm_forward(batch, gamma, beta, eps=1e-5, mode="train",
                      running_mean=None, running_var=None, decay=0.9):
    """Normalize by batch statistics (biased variance), then scale/shift.

    A 1-D input is one channel's batch; a 4-D input is normalized per
    channel over the batch and both spatial axes.  In inference mode the
    running statistics are used instead and must be provided.
    """
    x = np.asarray(batch, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if x.ndim == 1:
        axes, shape = (0,), ()
    elif x.ndim == 2:
        axes, shape = (0,), (1, -1)
    elif x.ndim == 4:
        axes, shape = (0, 2, 3), (1, -1, 1, 1)
    else:
        raise ValueError(f"expected 1-D, 2-D or 4-D batch, got {x.ndim}-D")
    g = gamma.reshape(shape) if shape else gamma
    b = beta.reshape(shape) if shape else beta
    n = int(np.prod([x.shape[a] for a in axes]))
    if mode == "train":
        if n < 2:
            raise ValueError("training-mode batch normalization needs >= 2 values")
        mu = x.mean(axis=axes)
        var = x.var(axis=axes)  # biased
        if running_mean is not None:
            running_mean *= decay
            running_mean += (1.0 - decay) * mu
            running_var *= decay
            running_var += (1.0 - decay) * var
    elif mode == "inference":
        if running_mean is None or running_var is None:
            raise ValueError("inference-mode batch normalization needs running stats")
        mu, var = running_mean, running_var
    else:
        raise ValueError(f"mode must be 'train' or 'inference', got {mode!r}")
    mu_b = mu.reshape(shape) if shape else mu
    inv_std = 1.0 / np.sqrt((var.reshape(shape) if shape else var) + eps)
    xhat = (x - mu_b) * inv_std
    out = g * xhat + b
    cache = (xhat, g, inv_std, axes, n)
    return out, cache


def batchnorm_backward(dout, cache):
    xhat, g, inv_std, axes, n = cache
    dgamma = (dout * xhat).sum(axis=axes)
    dbeta = dout.sum(axis=axes)
    dxhat = dout * g
    dx = (
        dxhat
        - dxhat.mean(axis=axes, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=axes, keepdims=True)
    ) * inv_std
    return dx, dgamma, dbeta


def relu(v):
    """Elementwise max(v, 0)."""
    return np.maximum(np.asarray(v, dtype=np.float64), 0.0)


def relu_backward(dout, pre_activation):
    return dout * (pre_activation > 0)


def maxpool_forward(x, pool, stride=None):
    """Max pooling along the time (last) axis.

    Accepts a 1-D row or a (B, C, H, W) stack; returns (out, cache).
    """
    if stride is None:
        stride = pool
    x, ndim = _as_batched(x)
    w = x.shape[3]
    if pool < 1 or pool > w:
        raise ValueError(f"pooling region {pool} invalid for width {w}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if stride == pool:
        # non-overlapping windows: contiguous reshape beats a strided view
        wo = (w - pool) // stride + 1
        windows = np.ascontiguousarray(x[:, :, :, : wo * pool]).reshape(
            *x.shape[:3], wo, pool
        )
    else:
        windows = sliding_window_view(x, pool, axis=3)[:, :, :, ::stride, :]
    arg = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
    cache = (x.shape, arg, pool, stride, ndim)
    if ndim == 1:
        return out[0, 0, 0], cache
    return out, cache


def maxpool_backward(dout, cache):
    x_shape, arg, pool, stride, ndim = cache
    if ndim == 1:
        dout = np.asarray(dout)[None, None, None, :]
    b, c, h, w = x_shape
    wo = arg.shape[3]
    dx = np.zeros(x_shape)
    if stride >= pool:
        # windows never overlap: scatter without accumulation
        dwin = np.zeros((b, c, h, wo, pool))
        np.put_along_axis(dwin, arg[..., None], dout[..., None], axis=-1)
        if stride == pool:
            dx[:, :, :, : wo * pool] = dwin.reshape(b, c, h, wo * pool)
        else:
            for j in range(pool):
                dx[:, :, :, j :: stride][:, :, :, :wo] += dwin[..., j]
    else:
        flat = np.zeros((b * c * h, w))
        rows = np.repeat(np.arange(b * c * h), wo)
        cols = (np.arange(wo) * stride + arg.reshape(-1, wo)).ravel()
        np.add.at(flat, (rows, cols), dout.reshape(-1))
        dx = flat.reshape(x_shape)
    if ndim == 1:
        return dx[0, 0, 0]
    return dx


def dropout(values, p_drop, mode="train", rng=None):
    """Inverted dropout: zero each element with probability ``p_drop`` and
    scale survivors by 1/(1 - p_drop); identity in inference mode.

    Returns (out, mask); the mask is None when nothing was dropped.
    """
    x = np.asarray(values, dtype=np.float64)
    if not 0.0 <= p_drop < 1.0:
        raise ValueError("p_drop must lie in [0, 1)")
    if mode == "inference" or p_drop == 0.0:
        return x.copy(), None
    if mode != "train":
        raise ValueError(f"mode must be 'train' or 'inference', got {mode!r}")
    if rng is None:
        rng = np.random.default_rng()
    elif isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    keep = rng.random(x.shape) >= p_drop
    scale = 1.0 / (1.0 - p_drop)
    return x * keep * scale, keep * scale


def softmax(scores):
    """Max-shifted softmax along the last axis."""
    s = np.asarray(scores, dtype=np.float64)
    shifted = s - s.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs, targets):
    """Mean negative log-likelihood of the integer ``targets``."""
    p = probs[np.arange(len(targets)), targets]
    return float(-np.mean(np.log(np.maximum(p, 1e-300))))


# ---------------------------------------------------------------------------
# full network


def init_params(arch: CnnArchitecture, rng) -> dict:
    params = {}
    for name, shape in arch.param_layout():
        if name.endswith("_w"):
            fan_in = int(np.prod(shape[1:]))
            params[name] = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
        elif name.endswith("_gamma"):
            params[name] = np.ones(shape)
        elif name.endswith("_var"):
            params[name] = np.ones(shape)
        else:  # biases, bn beta, bn mean
            params[name] = np.zeros(shape)
    return params


def _forward(params, arch, x, mode, rng=None, update_running=False):
    """Shared forward pass; returns (probs, caches)."""
    h = x
    caches = {"blocks": []}
    for i in range(1, len(arch.blocks) + 1):
        h, c_conv = conv_forward(h, params[f"conv{i}_w"], params[f"conv{i}_b"])
        blk = arch.blocks[i - 1]
        h, c_bn = batchnorm_forward(
            h,
            params[f"bn{i}_gamma"],
            params[f"bn{i}_beta"],
            eps=arch.bn_eps,
            mode=mode,
            running_mean=params[f"bn{i}_mean"] if (mode == "inference" or update_running) else None,
            running_var=params[f"bn{i}_var"] if (mode == "inference" or update_running) else None,
            decay=arch.bn_decay,
        )
        pre = h
        h = relu(h)
        h, c_pool = maxpool_forward(h, blk.pool, blk.pool_stride)
        caches["blocks"].append((c_conv, c_bn, pre, c_pool))
    drop_mode = mode if mode == "train" else "inference"
    h, drop_mask = dropout(h, arch.p_drop, mode=drop_mode, rng=rng)
    caches["drop_mask"] = drop_mask
    caches["drop_shape"] = h.shape
    flat = h.reshape(h.shape[0], -1)
    caches["flat"] = flat
    scores = flat @ params["fc_w"].T + params["fc_b"]
    probs = softmax(scores)
    return probs, caches


def _backward(params, arch, probs, targets, caches):
    """Gradient of mean cross-entropy w.r.t. every parameter and the input."""
    grads = {}
    b = probs.shape[0]
    dscores = probs.copy()
    dscores[np.arange(b), targets] -= 1.0
    dscores /= b
    flat = caches["flat"]
    grads["fc_w"] = dscores.T @ flat
    grads["fc_b"] = dscores.sum(axis=0)
    dflat = dscores @ params["fc_w"]
    dh = dflat.reshape(caches["drop_shape"])
    if caches["drop_mask"] is not None:
        dh = dh * caches["drop_mask"]
    for i in range(len(arch.blocks), 0, -1):
        c_conv, c_bn, pre, c_pool = caches["blocks"][i - 1]
        dh = maxpool_backward(dh, c_pool)
        dh = relu_backward(dh, pre)
        dh, dgamma, dbeta = batchnorm_backward(dh, c_bn)
        grads[f"bn{i}_gamma"] = dgamma
        grads[f"bn{i}_beta"] = dbeta
        dh, dw, db = conv_backward(dh, c_conv, need_dx=(i > 1))
        grads[f"conv{i}_w"] = dw
        grads[f"conv{i}_b"] = db
    return grads, dh


def cnn_loss_and_grads(params, arch, x, targets):
    """Training-mode loss and parameter gradients with dropout disabled.

    Pure in ``params`` (running statistics are not touched); used by the
    finite-difference gradient checks.
    """
    arch_nodrop = CnnArchitecture(
        input_shape=arch.input_shape,
        blocks=arch.blocks,
        n_classes=arch.n_classes,
        p_drop=0.0,
        bn_eps=arch.bn_eps,
        bn_decay=arch.bn_decay,
    )
    probs, caches = _forward(params, arch_nodrop, x, mode="train")
    loss = cross_entropy(probs, targets)
    grads, _ = _backward(params, arch_nodrop, probs, targets, caches)
    return loss, grads


def _image_data(image):
    if isinstance(image, np.ndarray):
        return np.asarray(image, dtype=np.float64)
    if hasattr(image, "data"):
        return np.asarray(image.data, dtype=np.float64)
    return np.asarray(image, dtype=np.float64)


def cnn_forward(model: CnnModel, image, mode="inference", rng=None):
    """Class probabilities for one image (or a stack of images)."""
    data = _image_data(image)
    if data.ndim == 2:
        x = data[None, None, :, :]
        squeeze = True
    elif data.ndim == 3:
        x = data[:, None, :, :]
        squeeze = False
    else:
        raise ValueError(f"expected a 2-D image or 3-D stack, got {data.ndim}-D")
    if x.shape[2:] != model.arch.input_shape:
        raise ValueError(
            f"image shape {x.shape[2:]} does not match model input {model.arch.input_shape}"
        )
    probs, _ = _forward(model.params, model.arch, x, mode=mode, rng=rng)
    return probs[0] if squeeze else probs


def _stratified_split(labels, fraction, rng):
    train_idx, val_idx = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        n_val = int(round(fraction * len(idx)))
        n_val = min(max(n_val, 1), len(idx) - 1)
        val_idx.extend(idx[:n_val])
        train_idx.extend(idx[n_val:])
    return np.sort(np.asarray(train_idx)), np.sort(np.asarray(val_idx))


def _accuracy(params, arch, x, y, batch=64):
    hits = 0
    for i in range(0, len(y), batch):
        probs, _ = _forward(params, arch, x[i : i + batch], mode="inference")
        hits += int((probs.argmax(axis=1) == y[i : i + batch]).sum())
    return hits / len(y)


def cnn_train(images, labels, config: TrainConfig | None = None,
              arch: CnnArchitecture | None = None):
    """Train the network; returns (model, history).

    The data is split 70/30 stratified by class, shuffled every epoch and
    optimized with SGD momentum.  The returned model is the parameter
    snapshot with the best validation accuracy across epochs.  ``history``
    records per-epoch accepted loss, validation accuracy and learning rate.
    """
    if config is None:
        config = TrainConfig()
    if arch is None:
        arch = CnnArchitecture()
    x = np.stack([_image_data(im) for im in images])[:, None, :, :]
    y = np.asarray(labels, dtype=np.int64)
    if x.shape[0] != y.shape[0]:
        raise DataError("images and labels must have equal length")
    if x.shape[2:] != arch.input_shape:
        raise DataError(f"images {x.shape[2:]} do not match architecture {arch.input_shape}")
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < 2:
        small = classes[counts.argmin()]
        raise DataError(f"class {small} has fewer than 2 samples")

    rng = np.random.default_rng(np.uint64(config.seed & 0xFFFFFFFFFFFFFFFF))
    train_idx, val_idx = _stratified_split(y, config.validation_fraction, rng)
    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    params = init_params(arch, rng)
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    lr = config.learning_rate
    prev_loss = np.inf
    best_acc = -1.0
    best_params = {k: v.copy() for k, v in params.items()}
    history = {
        "loss": [],
        "val_accuracy": [],
        "learning_rate": [],
        "train_indices": train_idx,
        "val_indices": val_idx,
    }

    n_train = len(y_train)
    for epoch in range(1, config.epochs + 1):
        snap_params = {k: v.copy() for k, v in params.items()}
        snap_velocity = {k: v.copy() for k, v in velocity.items()}
        order = rng.permutation(n_train)
        # fold a trailing singleton into the last full batch (batch norm
        # needs at least two samples)
        starts = list(range(0, n_train, config.batch_size))
        if len(starts) > 1 and n_train - starts[-1] == 1:
            starts.pop()
        loss_sum = 0.0
        for si, start in enumerate(starts):
            stop = starts[si + 1] if si + 1 < len(starts) else n_train
            batch = order[start:stop]
            xb, yb = x_train[batch], y_train[batch]
            probs, caches = _forward(
                params, arch, xb, mode="train", rng=rng, update_running=True
            )
            loss = cross_entropy(probs, yb)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            loss_sum += loss * len(batch)
            grads, _ = _backward(params, arch, probs, yb, caches)
            for name, g in grads.items():
                v = velocity[name]
                v *= config.momentum
                v -= lr * g
                params[name] += v
        epoch_loss = loss_sum / n_train

        if config.halve_lr_on_loss_increase and epoch_loss > prev_loss:
            params = snap_params
            velocity = snap_velocity
            lr *= 0.5
            history["loss"].append(prev_loss)
            history["val_accuracy"].append(
                history["val_accuracy"][-1] if history["val_accuracy"] else 0.0
            )
            history["learning_rate"].append(lr)
            continue

        prev_loss = epoch_loss
        val_acc = _accuracy(params, arch, x_val, y_val)
        history["loss"].append(epoch_loss)
        history["val_accuracy"].append(val_acc)
        history["learning_rate"].append(lr)
        if val_acc > best_acc:
            best_acc = val_acc
            best_params = {k: v.copy() for k, v in params.items()}
        if (
            config.stop_at_val_accuracy is not None
            and val_acc >= config.stop_at_val_accuracy
        ):
            break

    model = CnnModel(arch=arch, params=best_params)
    return model, history


# ---------------------------------------------------------------------------
# model file I/O


def save_model(model: CnnModel, path) -> None:
    layout = model.arch.param_layout()
    descriptor = {
        "architecture": model.arch.to_dict(),
        "params": [{"name": n, "shape": list(s)} for n, s in layout],
    }
    desc_bytes = json.dumps(descriptor, sort_keys=True).encode("utf-8")
    chunks = [
        _MODEL_HEADER.pack(MODEL_MAGIC, model.version, len(desc_bytes)),
        desc_bytes,
    ]
    for name, shape in layout:
        arr = model.params[name]
        if arr.shape != shape:
            raise ValueError(f"parameter {name} has shape {arr.shape}, expected {shape}")
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_model(path) -> CnnModel:
    raw = Path(path).read_bytes()
    if len(raw) < _MODEL_HEADER.size:
        raise FormatError("file too short for model header")
    magic, version, desc_len = _MODEL_HEADER.unpack_from(raw)
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MODEL_MAGIC!r}")
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}")
    offset = _MODEL_HEADER.size
    if len(raw) < offset + desc_len:
        raise PayloadLengthError("model descriptor truncated")
    try:
        descriptor = json.loads(raw[offset : offset + desc_len])
        arch = CnnArchitecture.from_dict(descriptor["architecture"])
        entries = [(e["name"], tuple(e["shape"])) for e in descriptor["params"]]
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad model descriptor: {exc}") from exc
    offset += desc_len
    params = {}
    for name, shape in entries:
        count = int(np.prod(shape))
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise PayloadLengthError(f"model payload truncated at parameter {name}")
        params[name] = (
            np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
            .reshape(shape)
            .copy()
        )
        offset += nbytes
    if offset != len(raw):
        raise PayloadLengthError("model payload has trailing bytes")
    return CnnModel(arch=arch, params=params, version=version)


# ---------------------------------------------------------------------------
# sklearn-style wrapper


class CnnVehicleClassifier(ClassifierMixin, BaseEstimator):
    """fit/predict interface over :func:`cnn_train` / :func:`cnn_forward`."""

    def __init__(
        self,
        learning_rate=0.01,
        momentum=0.9,
        epochs=100,
        batch_size=16,
        validation_fraction=0.30,
        seed=0,
        halve_lr_on_loss_increase=True,
        stop_at_val_accuracy=1.0,
        arch=None,
    ):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.epochs = epochs
        self.batch_size = batch_size
        self.validation_fraction = validation_fraction
        self.seed = seed
        self.halve_lr_on_loss_increase = halve_lr_on_loss_increase
        self.stop_at_val_accuracy = stop_at_val_accuracy
        self.arch = arch

    def fit(self, X, y):
        config = TrainConfig(
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            epochs=self.epochs,
            batch_size=self.batch_size,
            validation_fraction=self.validation_fraction,
            seed=self.seed,
            halve_lr_on_loss_increase=self.halve_lr_on_loss_increase,
            stop_at_val_accuracy=self.stop_at_val_accuracy,
        )
        self.model_, self.history_ = cnn_train(X, y, config, self.arch)
        return self

    def predict_proba(self, X):
        data = np.stack([_image_data(im) for im in X])
        return cnn_forward(self.model_, data)

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)
