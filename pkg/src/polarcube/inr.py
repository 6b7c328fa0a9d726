"""Coordinate-network representation of a Stokes cube.

A small two-stage MLP maps (pixel x, pixel y, channel index) to the
4-vector at that coordinate.  The spatial stage consumes positionally
encoded (x, y) and produces a per-pixel feature vector; the spectral
stage consumes that feature together with the encoded channel index and
emits the Stokes vector.  Coordinates are normalized to [-1, 1] before
encoding.

Training minimizes mean squared error over valid coordinates with an
in-module Adam optimizer; gradients come from hand-rolled reverse-mode
backpropagation through the layer stack (no autograd framework).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, EmptySelectionError, TrainingDivergedError
from .image import StokesImage

__all__ = [
    "InrModel",
    "TrainReport",
    "inr_decode",
    "inr_forward",
    "inr_init",
    "inr_loss_and_grads",
    "inr_rate_curve",
    "inr_train",
    "parameter_count",
    "positional_encode",
]


def positional_encode(x, k: int) -> np.ndarray:
    """Fourier features [x, sin(w0 x), cos(w0 x), ..., sin(wk x), cos(wk x)].

    Frequencies are w_i = 2^i * pi for i = 0..k, so the output length is
    2k + 3 along a new trailing axis.
    """
    if k < 0:
        raise ValueError("encoding order k must be >= 0")
    x = np.asarray(x, dtype=float)
    freqs = (2.0 ** np.arange(k + 1)) * np.pi
    angles = x[..., None] * freqs  # (..., k+1)
    out = np.empty(x.shape + (2 * k + 3,))
    out[..., 0] = x
    out[..., 1::2] = np.sin(angles)
    out[..., 2::2] = np.cos(angles)
    return out


@dataclass
class InrModel:
    """Weights and metadata of the coordinate network.

    ``layers`` counts the ReLU-activated hidden blocks across both
    stages (the linear output head is extra); the first ``layers // 2``
    blocks form the spatial stage.  ``grid_shape`` = (H, W, C) records
    the coordinate normalization ranges.
    """

    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)
    layers: int = 8
    hidden_width: int = 256
    k_spatial: int = 10
    k_channel: int = 1
    grid_shape: tuple | None = None
    dtype: np.dtype = np.float64

    @property
    def spatial_blocks(self) -> int:
        return self.layers // 2

    @property
    def spatial_input_dim(self) -> int:
        return 2 * (2 * self.k_spatial + 3)

    @property
    def channel_encoding_dim(self) -> int:
        return 2 * self.k_channel + 3

    def copy_params(self):
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]


def parameter_count(model: InrModel) -> int:
    return sum(w.size for w in model.weights) + sum(b.size for b in model.biases)


def inr_init(layers: int = 8, hidden_width: int = 256, seed: int = 0, k_spatial: int = 10,
             k_channel: int = 1, grid_shape=None, dtype=np.float64) -> InrModel:
    """Fresh model with symmetric uniform init scaled by 1/sqrt(fan_in)."""
    if layers < 2:
        raise ValueError("need at least 2 hidden blocks (one per stage)")
    model = InrModel(
        layers=layers,
        hidden_width=hidden_width,
        k_spatial=k_spatial,
        k_channel=k_channel,
        grid_shape=tuple(grid_shape) if grid_shape is not None else None,
        dtype=np.dtype(dtype),
    )
    w = hidden_width
    dims = [(model.spatial_input_dim, w)]
    dims += [(w, w)] * (model.spatial_blocks - 1)
    dims += [(w + model.channel_encoding_dim, w)]
    dims += [(w, w)] * (layers - model.spatial_blocks - 1)
    dims += [(w, 4)]
    rng = np.random.default_rng(seed)
    for fan_in, fan_out in dims:
        bound = np.sqrt(6.0 / fan_in)
        model.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(model.dtype))
        model.biases.append(np.zeros(fan_out, dtype=model.dtype))
    return model


def _normalize(value, extent):
    if extent <= 1:
        return np.zeros_like(np.asarray(value, dtype=float))
    return 2.0 * np.asarray(value, dtype=float) / (extent - 1) - 1.0


def _encode_inputs(model: InrModel, px, py, c):
    px, py, c = np.broadcast_arrays(
        np.asarray(px, dtype=float), np.asarray(py, dtype=float), np.asarray(c, dtype=float)
    )
    if model.grid_shape is not None:
        h, w, nch = model.grid_shape
        px, py, c = _normalize(px, w), _normalize(py, h), _normalize(c, nch)
    enc_sp = np.concatenate(
        [positional_encode(px, model.k_spatial), positional_encode(py, model.k_spatial)], axis=-1
    )
    enc_ch = positional_encode(c, model.k_channel)
    return enc_sp.astype(model.dtype), enc_ch.astype(model.dtype)


def _forward(model: InrModel, enc_sp, enc_ch, want_cache=False):
    inputs, gates = [], []
    x = enc_sp
    n_hidden = model.layers
    for i in range(n_hidden):
        if i == model.spatial_blocks:
            x = np.concatenate([x, enc_ch], axis=-1)
        pre = x @ model.weights[i] + model.biases[i]
        gate = pre > 0
        if want_cache:
            inputs.append(x)
            gates.append(gate)
        x = pre * gate  # ReLU without leaving the model dtype
    if want_cache:
        inputs.append(x)
    out = x @ model.weights[-1] + model.biases[-1]
    return (out, inputs, gates) if want_cache else out


def inr_forward(model: InrModel, px, py, c) -> np.ndarray:
    """Evaluate the network; broadcasts over coordinate arrays."""
    enc_sp, enc_ch = _encode_inputs(model, px, py, c)
    lead = enc_sp.shape[:-1]
    out = _forward(model, enc_sp.reshape(-1, enc_sp.shape[-1]),
                   enc_ch.reshape(-1, enc_ch.shape[-1]))
    return out.reshape(*lead, 4)


def inr_loss_and_grads(model: InrModel, coords, targets):
    """Mean-squared-error loss and its gradient w.r.t. every parameter.

    ``coords`` is (B, 3) as (px, py, c); ``targets`` is (B, 4).  Returns
    ``(loss, weight_grads, bias_grads)`` with gradients computed by
    reverse-mode backpropagation through the cached activations.
    """
    coords = np.asarray(coords, dtype=float)
    targets = np.asarray(targets, dtype=model.dtype)
    if coords.ndim != 2 or coords.shape[1] != 3 or targets.shape != (coords.shape[0], 4):
        raise DimensionError("coords must be (B, 3) and targets (B, 4)")
    enc_sp, enc_ch = _encode_inputs(model, coords[:, 0], coords[:, 1], coords[:, 2])
    out, inputs, gates = _forward(model, enc_sp, enc_ch, want_cache=True)

    diff = out - targets
    loss = float(np.mean(diff * diff))
    g = (2.0 / diff.size) * diff

    w_grads = [None] * len(model.weights)
    b_grads = [None] * len(model.biases)
    w_grads[-1] = inputs[-1].T @ g
    b_grads[-1] = g.sum(axis=0)
    g = g @ model.weights[-1].T
    for i in range(model.layers - 1, -1, -1):
        g = g * gates[i]
        w_grads[i] = inputs[i].T @ g
        b_grads[i] = g.sum(axis=0)
        g = g @ model.weights[i].T
        if i == model.spatial_blocks:
            g = g[:, : model.hidden_width]  # drop the encoded-channel slice
    return loss, w_grads, b_grads


class _Adam:
    """Bias-corrected first/second-moment optimizer."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainReport:
    """Loss curve, final fit quality, and schedule bookkeeping."""

    loss_curve: list  # (step, mse) pairs
    lr_curve: list  # (step, learning rate) pairs
    final_mse: float
    final_psnr: float
    steps: int
    wall_clock_seconds: float
    base_lr: float
    schedule: str


def _cosine_lr(base_lr, step, total):
    return base_lr * 0.5 * (1.0 + np.cos(np.pi * step / max(total, 1)))


def inr_train(
    model: InrModel,
    img: StokesImage,
    steps: int,
    lr: float = 1e-3,
    batch_size: int | None = None,
    seed: int = 0,
    record_every: int = 100,
    schedule: str = "cosine",
):
    """Fit the model to the valid pixels of a Stokes cube.

    Coordinates are (column, row, channel) of every valid mask entry;
    ``batch_size=None`` uses full-batch steps (fully deterministic),
    otherwise batches are sampled with a seeded generator.  Raises
    TrainingDivergedError (carrying the last recorded parameter state)
    if the loss turns non-finite.

    Returns ``(model, TrainReport)``; the model is updated in place.
    """
    if schedule not in ("cosine", "constant"):
        raise ValueError("schedule must be 'cosine' or 'constant'")
    ys, xs, cs = np.nonzero(img.mask)
    if ys.size == 0:
        raise EmptySelectionError("image has no valid pixels to fit")
    if model.grid_shape is None:
        model.grid_shape = (img.height, img.width, img.channels)
    coords = np.stack([xs, ys, cs], axis=1).astype(float)
    targets = img.data[ys, xs, cs].astype(model.dtype)

    rng = np.random.default_rng(seed)
    optimizer = _Adam(model.weights + model.biases)
    loss_curve, lr_curve = [], []
    checkpoint, checkpoint_step = model.copy_params(), -1
    start = time.perf_counter()
    for step in range(steps):
        if batch_size is None or batch_size >= coords.shape[0]:
            batch_coords, batch_targets = coords, targets
        else:
            sel = rng.integers(0, coords.shape[0], size=batch_size)
            batch_coords, batch_targets = coords[sel], targets[sel]
        loss, w_grads, b_grads = inr_loss_and_grads(model, batch_coords, batch_targets)
        if not np.isfinite(loss):
            model.weights, model.biases = checkpoint
            raise TrainingDivergedError(
                f"loss became non-finite at step {step}",
                checkpoint=checkpoint,
                step=checkpoint_step,
            )
        step_lr = _cosine_lr(lr, step, steps) if schedule == "cosine" else lr
        if step % record_every == 0 or step == steps - 1:
            loss_curve.append((step, loss))
            lr_curve.append((step, step_lr))
            checkpoint, checkpoint_step = model.copy_params(), step
        optimizer.step(model.weights + model.biases, w_grads + b_grads, step_lr)
    elapsed = time.perf_counter() - start

    final_mse = _full_mse(model, coords, targets)
    peak = float(targets[:, 0].max())
    final_psnr = np.inf if final_mse == 0 else float(10.0 * np.log10(peak**2 / final_mse))
    report = TrainReport(
        loss_curve=loss_curve,
        lr_curve=lr_curve,
        final_mse=final_mse,
        final_psnr=final_psnr,
        steps=steps,
        wall_clock_seconds=elapsed,
        base_lr=lr,
        schedule=schedule,
    )
    return model, report


def _full_mse(model, coords, targets, chunk=65536):
    total, count = 0.0, 0
    for lo in range(0, coords.shape[0], chunk):
        sel = slice(lo, lo + chunk)
        out = inr_forward(model, coords[sel, 0], coords[sel, 1], coords[sel, 2])
        diff = out - targets[sel]
        total += float(np.sum(diff * diff))
        count += diff.size
    return total / count


def inr_rate_curve(fitted, width: int, height: int, bits_per_value: int = 32):
    """Rate-distortion rows for trained networks of varying size.

    ``fitted`` is an iterable of (model, mse) pairs; each becomes a row
    (layer count, parameter count, bits per pixel, mse).
    """
    from .io import Curve
    from .pca import bpp

    rows = [
        (m.layers, parameter_count(m),
         bpp(parameter_count(m) * bits_per_value, width, height), mse)
        for m, mse in fitted
    ]
    return Curve(columns=["layers", "parameters", "bpp", "mse"], rows=rows)


def inr_decode(model: InrModel, dims=None, wavelengths=None, chunk_rows: int = 64) -> StokesImage:
    """Evaluate the network on a full (H, W, C) coordinate grid."""
    if dims is None:
        dims = model.grid_shape
    if dims is None:
        raise DimensionError("decode dims are required for an untrained model")
    h, w, c = dims
    data = np.empty((h, w, c, 4))
    cols = np.arange(w, dtype=float)
    chans = np.arange(c, dtype=float)
    px = np.broadcast_to(cols[:, None], (w, c))
    ch = np.broadcast_to(chans[None, :], (w, c))
    for y0 in range(0, h, chunk_rows):
        y1 = min(y0 + chunk_rows, h)
        rows = np.arange(y0, y1, dtype=float)
        py = np.broadcast_to(rows[:, None, None], (y1 - y0, w, c))
        data[y0:y1] = inr_forward(
            model,
            np.broadcast_to(px, (y1 - y0, w, c)),
            py,
            np.broadcast_to(ch, (y1 - y0, w, c)),
        )
    return StokesImage(data, wavelengths)
