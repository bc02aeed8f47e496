"""Compact embedding network with margin-based classification heads.

The front end turns a signal into a fixed-size vector: a non-overlapping
rectangular-window STFT (unitary scaling), then per-frequency-bin pooling
over time. A small dense stack maps that vector to a 128-D embedding, and
one of three heads produces class scores: plain softmax on an affine
layer, norm-softmax on scaled cosines between the unit embedding and
unit class weights, or the same cosine geometry with an additive angular
margin on the target class. Gradients are analytic throughout, including
the normalizations and the margin, and are validated against central
finite differences in the test suite.

Training is plain SGD with momentum and an L2 weight-decay gradient
term, a step lr schedule, and fresh signal instances drawn every epoch.
Everything is deterministic given the seeds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import impair, waveform
from .errors import TrainingDivergedError, ValidationError
from .seeds import TRAIN_STREAM, rng_for

log = logging.getLogger(__name__)

STFT_SIZE = 128
EMBED_DIM = 128
LOG_MAG_FLOOR = -40.0
_COS_CLIP = 1.0 - 1e-7
_NORM_EPS = 1e-12


class HeadKind(Enum):
    SOFTMAX = "softmax"
    NORM_SOFTMAX = "norm_softmax"
    ARCFACE = "arcface"


def stft_frontend(signal, fft_size: int = STFT_SIZE) -> np.ndarray:
    """Unitary non-overlapping STFT as a (2, F, T) real/imag tensor."""
    x = np.asarray(signal, dtype=np.complex128)
    if x.ndim != 1:
        raise ValidationError(f"expected a 1-D signal, got shape {x.shape}")
    if len(x) < fft_size:
        raise ValidationError(
            f"need at least {fft_size} samples, got {len(x)}")
    n_seg = len(x) // fft_size
    frames = x[:n_seg * fft_size].reshape(n_seg, fft_size)
    spec = np.fft.fft(frames, axis=1) / np.sqrt(fft_size)
    spec = spec.T
    return np.stack([spec.real, spec.imag])


def pooled_features(stft: np.ndarray) -> np.ndarray:
    """Time-pooled per-bin statistics, 4F values for an F-bin STFT.

    Blocks, in order: mean log-magnitude, std log-magnitude, mean real
    part and mean imaginary part of the unit-normalized time columns.
    The log-magnitude is floored so silent segments stay finite.
    """
    if stft.ndim != 3 or stft.shape[0] != 2:
        raise ValidationError(f"expected a (2, F, T) tensor, got {stft.shape}")
    cols = stft[0] + 1j * stft[1]
    mag = np.abs(cols)
    logmag = np.log(np.maximum(mag, np.exp(LOG_MAG_FLOOR)))
    norms = np.linalg.norm(cols, axis=0)
    unit = cols / np.maximum(norms, _NORM_EPS)
    return np.concatenate([
        logmag.mean(axis=1),
        logmag.std(axis=1),
        unit.real.mean(axis=1),
        unit.imag.mean(axis=1),
    ])


def _glorot(rng: np.random.Generator, n_out: int, n_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-bound, bound, size=(n_out, n_in))


@dataclass
class EmbedModel:
    """Dense embedding network plus one classification head.

    Hidden layers use rectifier activations and biases; the embedding
    layer is linear without bias. The cosine heads keep their weight rows
    unit-norm (re-projected after every optimizer step).
    """

    head: HeadKind
    hidden_weights: list
    hidden_biases: list
    embed_weight: np.ndarray
    head_weight: np.ndarray
    head_bias: np.ndarray | None
    scale: float = 8.0
    margin: float = 0.5

    def __post_init__(self):
        if self.scale <= 0.0:
            raise ValidationError(f"scale must be positive, got {self.scale}")
        if not 0.0 <= self.margin < np.pi / 2:
            raise ValidationError(f"margin out of range: {self.margin}")
        if (self.head is HeadKind.SOFTMAX) != (self.head_bias is not None):
            raise ValidationError("head bias is for the softmax head only")

    @property
    def input_dim(self) -> int:
        return self.hidden_weights[0].shape[1]

    @property
    def embed_dim(self) -> int:
        return self.embed_weight.shape[0]

    @property
    def n_classes(self) -> int:
        return self.head_weight.shape[0]

    def parameters(self):
        """Named parameter arrays, in a fixed order."""
        out = []
        for i, (w, b) in enumerate(zip(self.hidden_weights, self.hidden_biases)):
            out.append((f"hidden_w{i}", w))
            out.append((f"hidden_b{i}", b))
        out.append(("embed_w", self.embed_weight))
        out.append(("head_w", self.head_weight))
        if self.head_bias is not None:
            out.append(("head_b", self.head_bias))
        return out


def init_model(input_dim: int, n_classes: int, head: HeadKind,
               hidden=(512, 256), embed_dim: int = EMBED_DIM,
               scale: float = 8.0, margin: float = 0.5,
               seed: int = 0) -> EmbedModel:
    if n_classes < 2:
        raise ValidationError(f"need at least 2 classes, got {n_classes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    fan_in = input_dim
    for width in hidden:
        weights.append(_glorot(rng, width, fan_in))
        biases.append(np.zeros(width))
        fan_in = width
    embed_w = _glorot(rng, embed_dim, fan_in)
    head_w = _glorot(rng, n_classes, embed_dim)
    head_b = np.zeros(n_classes) if head is HeadKind.SOFTMAX else None
    if head is not HeadKind.SOFTMAX:
        head_w /= np.maximum(
            np.linalg.norm(head_w, axis=1, keepdims=True), _NORM_EPS)
    return EmbedModel(head=head, hidden_weights=weights, hidden_biases=biases,
                      embed_weight=embed_w, head_weight=head_w,
                      head_bias=head_b, scale=scale, margin=margin)


def _forward_batch(model: EmbedModel, features: np.ndarray):
    """Runs the dense stack; returns activations needed for backprop."""
    x = np.asarray(features, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValidationError("non-finite features")
    if x.shape[-1] != model.input_dim:
        raise ValidationError(
            f"feature width {x.shape[-1]} does not match model "
            f"input {model.input_dim}")
    hs = [x]
    for w, b in zip(model.hidden_weights, model.hidden_biases):
        hs.append(np.maximum(hs[-1] @ w.T + b, 0.0))
    z = hs[-1] @ model.embed_weight.T
    return hs, z


def _normalize_rows(a: np.ndarray):
    norms = np.maximum(np.linalg.norm(a, axis=-1, keepdims=True), _NORM_EPS)
    return a / norms, norms


def _head_logits(model: EmbedModel, z: np.ndarray, labels=None):
    """Logits plus the intermediates the backward pass reuses."""
    if model.head is HeadKind.SOFTMAX:
        return z @ model.head_weight.T + model.head_bias, {}

    z_hat, z_norms = _normalize_rows(z)
    w_hat, _ = _normalize_rows(model.head_weight)
    cos = z_hat @ w_hat.T
    cache = {"z_hat": z_hat, "z_norms": z_norms, "w_hat": w_hat, "cos": cos}
    logits = model.scale * cos
    if model.head is HeadKind.ARCFACE and labels is not None and model.margin > 0.0:
        rows = np.arange(len(cos))
        c = np.clip(cos[rows, labels], -_COS_CLIP, _COS_CLIP)
        theta = np.arccos(c)
        easy = theta + model.margin > np.pi
        sin_theta = np.sqrt(1.0 - c * c)
        margined = np.where(
            easy,
            c - model.margin * np.sin(model.margin),
            np.cos(theta + model.margin))
        # d(margined)/d(cos) per target entry, for the backward pass
        slope = np.where(
            easy, 1.0,
            np.cos(model.margin) + np.sin(model.margin) * c / sin_theta)
        logits = logits.copy()
        logits[rows, labels] = model.scale * margined
        cache["target_slope"] = slope
    return logits, cache


def forward(model: EmbedModel, features, label=None):
    """Embedding and class logits for one feature vector."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    labels = None if label is None else np.atleast_1d(label)
    _, z = _forward_batch(model, x)
    logits, _ = _head_logits(model, z, labels)
    if model.head is not HeadKind.SOFTMAX:
        z = _normalize_rows(z)[0]
    if single:
        return z[0], logits[0]
    return z, logits


def loss_and_gradients(model: EmbedModel, features, labels):
    """Mean cross-entropy over a batch and exact parameter gradients."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.intp)
    if x.ndim != 2 or len(x) == 0:
        raise ValidationError("features must be a non-empty 2-D batch")
    if len(y) != len(x):
        raise ValidationError("one label per feature row required")
    if np.any(y < 0) or np.any(y >= model.n_classes):
        raise ValidationError("label outside class range")

    hs, z = _forward_batch(model, x)
    logits, cache = _head_logits(model, z, y)
    n = len(x)
    rows = np.arange(n)

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    loss = float(np.mean(
        np.log(exp.sum(axis=1)) - shifted[rows, y]))

    d_logits = probs.copy()
    d_logits[rows, y] -= 1.0
    d_logits /= n

    grads = {}
    if model.head is HeadKind.SOFTMAX:
        grads["head_w"] = d_logits.T @ z
        grads["head_b"] = d_logits.sum(axis=0)
        d_z = d_logits @ model.head_weight
    else:
        d_cos = model.scale * d_logits
        if "target_slope" in cache:
            d_cos[rows, y] *= cache["target_slope"]
        z_hat, z_norms = cache["z_hat"], cache["z_norms"]
        w_hat = cache["w_hat"]
        d_z_hat = d_cos @ w_hat
        d_w_hat = d_cos.T @ z_hat
        # back through row normalization: u_hat = u / |u|
        d_z = (d_z_hat - (d_z_hat * z_hat).sum(-1, keepdims=True) * z_hat) / z_norms
        w_norms = np.maximum(
            np.linalg.norm(model.head_weight, axis=1, keepdims=True), _NORM_EPS)
        grads["head_w"] = (
            d_w_hat - (d_w_hat * w_hat).sum(-1, keepdims=True) * w_hat) / w_norms

    grads["embed_w"] = d_z.T @ hs[-1]
    d_h = d_z @ model.embed_weight
    for i in reversed(range(len(model.hidden_weights))):
        d_a = d_h * (hs[i + 1] > 0.0)
        grads[f"hidden_w{i}"] = d_a.T @ hs[i]
        grads[f"hidden_b{i}"] = d_a.sum(axis=0)
        d_h = d_a @ model.hidden_weights[i]
    return loss, grads


def embed(model: EmbedModel, signal) -> np.ndarray:
    """Embedding of a raw signal of any length >= the STFT size."""
    feats = pooled_features(stft_frontend(signal))
    z, _ = forward(model, feats)
    return z


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 128
    lr: float = 0.025
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_drop_epochs: tuple = (15, 18)
    lr_drop_factor: float = 10.0
    instances_per_class: int = 50
    snr_range_db: tuple = (3.0, 30.0)
    sigma_rfo: float = 0.02
    seed: int = 0

    def lr_at(self, epoch: int) -> float:
        drops = sum(1 for e in self.lr_drop_epochs if epoch >= e)
        return self.lr / self.lr_drop_factor ** drops


def build_instance_hook(protocol_specs, n_samples: int, config: TrainConfig,
                        channel: str | None = None):
    """Per-epoch feature generator over a set of protocols.

    Returns a callable epoch -> (features, labels) that synthesizes
    instances_per_class fresh impaired instances of every protocol,
    deterministically seeded by (protocol seed, epoch, instance index).
    """
    def epoch_features(epoch: int):
        feats, labels = [], []
        for cls, spec in enumerate(protocol_specs):
            for idx in range(config.instances_per_class):
                rng = rng_for(spec.seed, TRAIN_STREAM, epoch, idx)
                sig = waveform.synthesize_instance(spec, n_samples, rng)
                lo, hi = config.snr_range_db
                imp = impair.ImpairmentConfig(
                    sigma_rfo=config.sigma_rfo, channel=channel,
                    snr_db=rng.uniform(lo, hi))
                samples = impair.apply_impairments(
                    sig, imp, rng,
                    occupied_bandwidth=spec.bandwidth_fraction).samples
                feats.append(pooled_features(stft_frontend(samples)))
                labels.append(cls)
        return np.array(feats), np.array(labels, dtype=np.intp)

    return epoch_features


def sgd_epoch(model: EmbedModel, features, labels, lr: float,
              config: TrainConfig, velocity: dict, rng) -> float:
    """One shuffled pass; returns the mean batch loss."""
    order = rng.permutation(len(features))
    total = 0.0
    n_batches = 0
    for start in range(0, len(order), config.batch_size):
        batch = order[start:start + config.batch_size]
        loss, grads = loss_and_gradients(model, features[batch], labels[batch])
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"non-finite loss {loss}", step=n_batches)
        total += loss
        n_batches += 1
        for name, param in model.parameters():
            g = grads[name] + config.weight_decay * param
            v = velocity.setdefault(name, np.zeros_like(param))
            v *= config.momentum
            v += g
            param -= lr * v
        if model.head is not HeadKind.SOFTMAX:
            model.head_weight /= np.maximum(
                np.linalg.norm(model.head_weight, axis=1, keepdims=True),
                _NORM_EPS)
    return total / max(n_batches, 1)


def train(model: EmbedModel, epoch_features, config: TrainConfig):
    """SGD training loop; returns per-epoch mean losses."""
    velocity = {}
    history = []
    for epoch in range(config.epochs):
        feats, labels = epoch_features(epoch)
        lr = config.lr_at(epoch)
        rng = rng_for(config.seed, TRAIN_STREAM, epoch)
        try:
            mean_loss = sgd_epoch(model, feats, labels, lr, config,
                                  velocity, rng)
        except TrainingDivergedError as err:
            err.epoch = epoch
            log.error("training diverged at epoch %d: %s", epoch, err)
            raise
        history.append(mean_loss)
        log.info("epoch %d lr %.5f loss %.4f", epoch, lr, mean_loss)
    return history
