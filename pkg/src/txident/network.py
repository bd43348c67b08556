"""From-scratch CNN classifier and training loop (numpy only).

Five 1-D convolution layers (each followed by factor-2 max pooling) over the
600-sample window with I/Q as two input channels, then six dense layers.
Every layer uses ELU except the softmax output. Gradients come from manual
backpropagation, verified against finite differences in the test suite, and
are applied with Adam. L1 regularization acts on dense weights only.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .dataset import Dataset, Split, batch_iter

CHECKPOINT_MAGIC = b"TXIDNET1"


@dataclass(frozen=True)
class Arch:
    """Architecture descriptor; the default is the experiment network."""

    conv_channels: tuple[int, ...] = (64, 64, 128, 128, 128)
    kernel_sizes: tuple[int, ...] = (7, 5, 5, 3, 3)
    dense_widths: tuple[int, ...] = (256, 128, 128, 64, 32)
    n_classes: int = 21
    input_len: int = 600
    in_channels: int = 2

    def __post_init__(self):
        if len(self.conv_channels) != len(self.kernel_sizes):
            raise ValueError("conv_channels and kernel_sizes must have equal length")
        if any(k % 2 == 0 for k in self.kernel_sizes):
            raise ValueError("kernel sizes must be odd (same-padding)")

    def conv_output_len(self) -> int:
        n = self.input_len
        for _ in self.conv_channels:
            n //= 2
        return n

    def dense_sizes(self) -> list[tuple[int, int]]:
        feature_ch = self.conv_channels[-1] if self.conv_channels else self.in_channels
        widths = [self.conv_output_len() * feature_ch, *self.dense_widths, self.n_classes]
        return list(zip(widths[:-1], widths[1:]))


@dataclass
class NetworkParams:
    conv_w: list[np.ndarray]  # each (K, C_in, C_out)
    conv_b: list[np.ndarray]
    dense_w: list[np.ndarray]  # each (n_in, n_out)
    dense_b: list[np.ndarray]
    arch: Arch

    def arrays(self) -> list[np.ndarray]:
        """All parameter tensors in declaration order."""
        out = []
        for w, b in zip(self.conv_w, self.conv_b):
            out += [w, b]
        for w, b in zip(self.dense_w, self.dense_b):
            out += [w, b]
        return out

    def map(self, fn) -> "NetworkParams":
        return NetworkParams(
            conv_w=[fn(a) for a in self.conv_w],
            conv_b=[fn(a) for a in self.conv_b],
            dense_w=[fn(a) for a in self.dense_w],
            dense_b=[fn(a) for a in self.dense_b],
            arch=self.arch,
        )


@dataclass
class TrainConfig:
    batch_size: int = 128
    epochs: int = 35
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l1_lambda: float = 1e-5
    seed: int = 0
    normalize_windows: bool = False


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0


def init_network(arch: Arch, seed: int, dtype=np.float32) -> NetworkParams:
    """Fan-in-scaled uniform weights, zero biases; deterministic given seed."""
    rng = np.random.default_rng(seed)
    conv_w, conv_b = [], []
    c_in = arch.in_channels
    for c_out, k in zip(arch.conv_channels, arch.kernel_sizes):
        bound = 1.0 / np.sqrt(k * c_in)
        conv_w.append(rng.uniform(-bound, bound, (k, c_in, c_out)).astype(dtype))
        conv_b.append(np.zeros(c_out, dtype=dtype))
        c_in = c_out
    dense_w, dense_b = [], []
    for n_in, n_out in arch.dense_sizes():
        bound = 1.0 / np.sqrt(n_in)
        dense_w.append(rng.uniform(-bound, bound, (n_in, n_out)).astype(dtype))
        dense_b.append(np.zeros(n_out, dtype=dtype))
    return NetworkParams(conv_w, conv_b, dense_w, dense_b, arch)


def init_adam(params: NetworkParams) -> AdamState:
    return AdamState(
        m=[np.zeros_like(a) for a in params.arrays()],
        v=[np.zeros_like(a) for a in params.arrays()],
        step=0,
    )


def _elu(x: np.ndarray) -> np.ndarray:
    # Branch-free: exact x on the positive side, expm1 on the other.
    return np.maximum(x, 0) + np.expm1(np.minimum(x, 0))


def _elu_grad(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return (x > 0) + (x <= 0) * (y + 1)


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-padding 1-D convolution as a sum of k shifted batched GEMMs."""
    batch, length, _ = x.shape
    k = w.shape[0]
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    y = np.zeros((batch, length, w.shape[2]), dtype=x.dtype)
    for j in range(k):
        y += xp[:, j : j + length] @ w[j]
    return y + b, xp


def _conv_backward(dy: np.ndarray, xp: np.ndarray, w: np.ndarray):
    k, c_in, c_out = w.shape
    batch, length, _ = dy.shape
    pad = k // 2
    dw = np.empty_like(w)
    dxp = np.zeros_like(xp)
    for j in range(k):
        dw[j] = np.matmul(xp[:, j : j + length].transpose(0, 2, 1), dy).sum(axis=0)
        dxp[:, j : j + length] += dy @ w[j].T
    db = dy.sum(axis=(0, 1))
    return dxp[:, pad : pad + length], dw, db


def _pool_forward(x: np.ndarray):
    batch, length, ch = x.shape
    half = length // 2
    a = x[:, 0 : half * 2 : 2]
    b = x[:, 1 : half * 2 : 2]
    keep_first = a >= b  # ties go to the earlier sample
    return np.where(keep_first, a, b), keep_first, length


def _pool_backward(dy: np.ndarray, keep_first: np.ndarray, length: int):
    batch, half, ch = dy.shape
    dx = np.zeros((batch, length, ch), dtype=dy.dtype)
    dx[:, 0 : half * 2 : 2] = dy * keep_first
    dx[:, 1 : half * 2 : 2] = dy * ~keep_first
    return dx


def _forward_cached(params: NetworkParams, x: np.ndarray):
    arch = params.arch
    if x.shape[1:] != (arch.input_len, arch.in_channels):
        raise ValueError(
            f"expected input shape (B, {arch.input_len}, {arch.in_channels}), got {x.shape}"
        )
    h = np.ascontiguousarray(x, dtype=params.arrays()[0].dtype)
    conv_cache = []
    for w, b in zip(params.conv_w, params.conv_b):
        pre, xp = _conv_forward(h, w, b)
        act = _elu(pre)
        pooled, keep_first, length = _pool_forward(act)
        conv_cache.append((xp, pre, act, keep_first, length))
        h = pooled
    flat_shape = h.shape
    h = h.reshape(h.shape[0], -1)
    dense_cache = []
    n_dense = len(params.dense_w)
    for i, (w, b) in enumerate(zip(params.dense_w, params.dense_b)):
        pre = h @ w + b
        if i < n_dense - 1:
            act = _elu(pre)
            dense_cache.append((h, pre, act))
            h = act
        else:
            dense_cache.append((h, pre, None))
            h = pre
    logits = h
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    probs = e / e.sum(axis=1, keepdims=True)
    return probs, z, (conv_cache, flat_shape, dense_cache)


def forward(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Class probabilities for a batch of (input_len, 2) windows."""
    probs, _, _ = _forward_cached(params, x)
    return probs


def loss_and_grads(
    params: NetworkParams, x: np.ndarray, labels: np.ndarray, l1_lambda: float = 0.0
) -> tuple[float, NetworkParams]:
    """Mean cross-entropy (+ L1 on dense weights) and its full gradient."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= params.arch.n_classes:
        raise ValueError("label out of range")
    probs, z, (conv_cache, flat_shape, dense_cache) = _forward_cached(params, x)
    batch = x.shape[0]
    rows = np.arange(batch)
    lse = np.log(np.exp(z).sum(axis=1))
    loss = float((lse - z[rows, labels]).mean())
    if l1_lambda:
        loss += l1_lambda * sum(float(np.abs(w).sum()) for w in params.dense_w)

    dtype = probs.dtype
    dlogits = probs.copy()
    dlogits[rows, labels] -= 1.0
    dlogits /= dtype.type(batch)

    dense_dw, dense_db = [], []
    grad = dlogits
    n_dense = len(params.dense_w)
    for i in range(n_dense - 1, -1, -1):
        h_in, pre, act = dense_cache[i]
        if i < n_dense - 1:
            grad = grad * _elu_grad(pre, act)
        dense_dw.append(h_in.T @ grad)
        dense_db.append(grad.sum(axis=0))
        grad = grad @ params.dense_w[i].T
    dense_dw.reverse()
    dense_db.reverse()
    if l1_lambda:
        for dw, w in zip(dense_dw, params.dense_w):
            dw += dtype.type(l1_lambda) * np.sign(w)

    grad = grad.reshape(flat_shape)
    conv_dw, conv_db = [], []
    for i in range(len(params.conv_w) - 1, -1, -1):
        xp, pre, act, keep_first, length = conv_cache[i]
        grad = _pool_backward(grad, keep_first, length)
        grad = grad * _elu_grad(pre, act)
        grad, dw, db = _conv_backward(grad, xp, params.conv_w[i])
        conv_dw.append(dw)
        conv_db.append(db)
    conv_dw.reverse()
    conv_db.reverse()

    grads = NetworkParams(conv_dw, conv_db, dense_dw, dense_db, params.arch)
    return loss, grads


def adam_step(
    params: NetworkParams, grads: NetworkParams, state: AdamState, cfg: TrainConfig
) -> tuple[NetworkParams, AdamState]:
    """One bias-corrected Adam update; returns new params and state."""
    t = state.step + 1
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    new_arrays, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        dtype = p.dtype.type
        m2 = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v2 = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        update = (m2 / bc1) / (np.sqrt(v2 / bc2) + cfg.eps)
        new_arrays.append((p - dtype(cfg.learning_rate) * update).astype(p.dtype))
        new_m.append(m2.astype(p.dtype))
        new_v.append(v2.astype(p.dtype))
    n_conv = len(params.conv_w)
    new_params = NetworkParams(
        conv_w=new_arrays[0 : 2 * n_conv : 2],
        conv_b=new_arrays[1 : 2 * n_conv : 2],
        dense_w=new_arrays[2 * n_conv :: 2],
        dense_b=new_arrays[2 * n_conv + 1 :: 2],
        arch=params.arch,
    )
    return new_params, AdamState(m=new_m, v=new_v, step=t)


def evaluate(
    params: NetworkParams,
    ds: Dataset,
    split: Split,
    part: str = "test",
    batch_size: int = 256,
    normalize: bool = False,
) -> tuple[float, np.ndarray]:
    """Accuracy and confusion matrix (rows = true class) on one split part."""
    n = params.arch.n_classes
    confusion = np.zeros((n, n), dtype=np.int64)
    for x, y in batch_iter(ds, split, part, batch_size, normalize=normalize):
        pred = forward(params, x).argmax(axis=1)
        np.add.at(confusion, (y, pred), 1)
    total = confusion.sum()
    if total == 0:
        raise ValueError(f"split part {part!r} is empty")
    accuracy = float(np.trace(confusion) / total)
    return accuracy, confusion


def train(
    ds: Dataset, split: Split, arch: Arch, cfg: TrainConfig
) -> tuple[NetworkParams, list[tuple[int, float, float]]]:
    """Run the full training loop; returns final params and per-epoch history.

    History rows are (epoch, mean train loss, validation accuracy). Fully
    deterministic given the config seed: it derives the init and the
    per-epoch shuffle seeds.
    """
    for part in ("train", "val"):
        if len(split.part(part)) == 0:
            raise ValueError(f"split part {part!r} is empty")
    params = init_network(arch, cfg.seed)
    state = init_adam(params)
    history = []
    for epoch in range(cfg.epochs):
        epoch_seed = cfg.seed + 7919 * (epoch + 1)
        losses = []
        for x, y in batch_iter(
            ds, split, "train", cfg.batch_size, epoch_seed, cfg.normalize_windows
        ):
            loss, grads = loss_and_grads(params, x, y, cfg.l1_lambda)
            params, state = adam_step(params, grads, state, cfg)
            losses.append(loss)
        val_acc, _ = evaluate(params, ds, split, "val", normalize=cfg.normalize_windows)
        history.append((epoch, float(np.mean(losses)), val_acc))
    return params, history


def save_checkpoint(params: NetworkParams, path: str | Path) -> None:
    """Binary checkpoint: magic, JSON header, little-endian float32 tensors."""
    arrays = params.arrays()
    header = json.dumps(
        {"arch": asdict(params.arch), "shapes": [list(a.shape) for a in arrays]},
        sort_keys=True,
        separators=(",", ":"),
    ).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for a in arrays:
            f.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> NetworkParams:
    raw = Path(path).read_bytes()
    if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError("not a network checkpoint")
    off = len(CHECKPOINT_MAGIC)
    (hdr_len,) = struct.unpack_from("<I", raw, off)
    off += 4
    header = json.loads(raw[off : off + hdr_len])
    off += hdr_len
    arch_dict = dict(header["arch"])
    for key in ("conv_channels", "kernel_sizes", "dense_widths"):
        arch_dict[key] = tuple(arch_dict[key])
    arch = Arch(**arch_dict)
    arrays = []
    for shape in header["shapes"]:
        n = int(np.prod(shape)) if shape else 1
        arrays.append(np.frombuffer(raw, dtype="<f4", count=n, offset=off).reshape(shape).copy())
        off += 4 * n
    n_conv = len(arch.conv_channels)
    return NetworkParams(
        conv_w=arrays[0 : 2 * n_conv : 2],
        conv_b=arrays[1 : 2 * n_conv : 2],
        dense_w=arrays[2 * n_conv :: 2],
        dense_b=arrays[2 * n_conv + 1 :: 2],
        arch=arch,
    )


def save_history(history: list[tuple[int, float, float]], path: str | Path) -> None:
    lines = ["epoch,train_loss,val_acc"]
    lines += [f"{e},{loss:.6f},{acc:.6f}" for e, loss, acc in history]
    Path(path).write_text("\n".join(lines) + "\n")
