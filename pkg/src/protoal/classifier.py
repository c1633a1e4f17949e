"""Margin-penalized nearest-prototype classifier on the unit hypersphere.

A sample is embedded by a small trainable extractor (affine map + tanh,
followed by L2 normalization), compared against one unit prototype vector per
class by cosine, and scored through independent sigmoids:

    o_c = sigmoid(s * cos(theta_c))

During training the true class' cosine is replaced by the margin-shifted
cos(theta_y + m), which forces inter-class separation; at inference and
acquisition time the label is unknown, so no margin term appears anywhere.
Training minimizes the multi-label binary cross entropy of the one-hot target
under those sigmoids, by minibatch gradient descent with hand-derived
gradients (see ``grad``).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateVector,
    DimensionMismatch,
    InvalidLabel,
    NonFiniteLoss,
    ParseError,
    SchemaError,
)
from .hypersphere import (
    COS_CLAMP,
    clamp_cosine,
    l2_normalize,
    margin_cosine,
    margin_cosine_derivative,
)

OPTIMIZERS = ("sgd", "adam")


@dataclass
class HyperParams:
    """Everything the training loop needs besides the data.

    ``scale`` is the hypersphere radius s multiplying cosines into sigmoid
    logits; ``margin`` is the additive angular penalty m in radians.
    """

    d_in: int
    d_emb: int
    scale: float = 10.0
    margin: float = 0.3
    learning_rate: float = 1e-2
    epochs_per_round: int = 30
    batch_size: int = 32
    optimizer: str = "sgd"

    def validate(self) -> "HyperParams":
        if self.scale <= 0:
            raise SchemaError(f"scale must be positive, got {self.scale}")
        if not 0.0 <= self.margin < math.pi / 2:
            raise SchemaError(f"margin must be in [0, pi/2), got {self.margin}")
        if self.d_in < 1 or self.d_emb < 1:
            raise SchemaError("dimensions must be >= 1")
        if self.learning_rate <= 0:
            raise SchemaError("learning_rate must be positive")
        if self.epochs_per_round < 0:
            raise SchemaError("epochs_per_round must be >= 0")
        if self.batch_size < 1:
            raise SchemaError("batch_size must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise SchemaError(f"optimizer must be one of {OPTIMIZERS}")
        return self

    def to_dict(self) -> dict:
        return {
            "d_in": self.d_in,
            "d_emb": self.d_emb,
            "scale": self.scale,
            "margin": self.margin,
            "learning_rate": self.learning_rate,
            "epochs_per_round": self.epochs_per_round,
            "batch_size": self.batch_size,
            "optimizer": self.optimizer,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        try:
            hp = cls(
                d_in=int(d["d_in"]),
                d_emb=int(d["d_emb"]),
                scale=float(d.get("scale", 10.0)),
                margin=float(d.get("margin", 0.3)),
                learning_rate=float(d.get("learning_rate", 1e-2)),
                epochs_per_round=int(d.get("epochs_per_round", 30)),
                batch_size=int(d.get("batch_size", 32)),
                optimizer=str(d.get("optimizer", "sgd")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad hyperparameter config: {exc}") from exc
        return hp.validate()


@dataclass
class ModelParams:
    """Trainable state: the affine extractor and one unit prototype per class."""

    projection: np.ndarray  # (d_emb, d_in)
    bias: np.ndarray  # (d_emb,)
    prototypes: np.ndarray  # (num_classes, d_emb), rows unit-norm

    @property
    def num_classes(self) -> int:
        return self.prototypes.shape[0]

    @property
    def d_in(self) -> int:
        return self.projection.shape[1]

    @property
    def d_emb(self) -> int:
        return self.projection.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(
            projection=self.projection.copy(),
            bias=self.bias.copy(),
            prototypes=self.prototypes.copy(),
        )


@dataclass
class TrainStats:
    """Per-epoch mean training losses plus wall time for one fit call."""

    epoch_losses: list = field(default_factory=list)
    epochs: int = 0
    wall_time: float = 0.0


@dataclass
class Grads:
    """Gradient of the batch loss w.r.t. every parameter in ModelParams."""

    projection: np.ndarray
    bias: np.ndarray
    prototypes: np.ndarray


INIT_STD = 0.1  # weights are drawn from N(0, 0.01), i.e. std 0.1


def init_params(hp: HyperParams, num_classes: int, rng_seed: int) -> ModelParams:
    """Draw all weights i.i.d. from N(0, 0.01), then unit-normalize prototypes.

    Draw order is fixed (projection, bias, prototypes) so a seed fully
    determines the parameters.
    """
    hp.validate()
    if num_classes < 1:
        raise SchemaError("num_classes must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed)]))
    projection = rng.normal(0.0, INIT_STD, size=(hp.d_emb, hp.d_in))
    bias = rng.normal(0.0, INIT_STD, size=hp.d_emb)
    prototypes = rng.normal(0.0, INIT_STD, size=(num_classes, hp.d_emb))
    prototypes = _renormalize_rows(prototypes)
    return ModelParams(projection=projection, bias=bias, prototypes=prototypes)


def _renormalize_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    if np.any(norms <= 1e-12):
        raise NonFiniteLoss("prototype collapsed to zero norm")
    return mat / norms


def embed_batch(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """tanh(projection @ x + bias) rows, L2-normalized. X is (N, d_in)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.d_in:
        raise DimensionMismatch(
            f"expected features of length {params.d_in}, got {X.shape[1]}"
        )
    A = np.tanh(X @ params.projection.T + params.bias)
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    if np.any(norms <= 1e-12):
        raise DegenerateVector("activation collapsed to the zero vector")
    return A / norms


def embed(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Embed a single raw feature vector onto the unit sphere."""
    return embed_batch(params, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]


def cosine_scores_batch(params: ModelParams, F: np.ndarray) -> np.ndarray:
    """Per-class cosines for unit embeddings F (N, d_emb), clamped inside (-1, 1)."""
    return clamp_cosine(F @ params.prototypes.T)


def cosine_scores(params: ModelParams, f: np.ndarray) -> np.ndarray:
    """Per-class cosines f . w_c for one unit embedding."""
    return cosine_scores_batch(params, np.asarray(f, dtype=np.float64).reshape(1, -1))[0]


def train_logits(cos_row: np.ndarray, y: int, hp: HyperParams) -> np.ndarray:
    """Training-time logits: s*cos for wrong classes, s*cos(theta+m) for class y."""
    cos_row = np.asarray(cos_row, dtype=np.float64)
    if not 0 <= y < cos_row.shape[0]:
        raise InvalidLabel(f"label {y} out of range for {cos_row.shape[0]} classes")
    logits = hp.scale * cos_row.copy()
    logits[y] = hp.scale * margin_cosine(cos_row[y], hp.margin)
    return logits


def score_probs_batch(params: ModelParams, F: np.ndarray, hp: HyperParams) -> np.ndarray:
    """Inference/acquisition probabilities sigma(s*cos); no margin term."""
    return _sigmoid(hp.scale * cosine_scores_batch(params, F))


def score_probs(params: ModelParams, f: np.ndarray, hp: HyperParams) -> np.ndarray:
    return score_probs_batch(params, np.asarray(f, dtype=np.float64).reshape(1, -1), hp)[0]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Stable in both tails: sigma(z) = exp(-softplus(-z)).
    return np.exp(-np.logaddexp(0.0, -z))


def _validate_labels(y: np.ndarray, num_classes: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("batch is empty")
    if np.any(y < 0) or np.any(y >= num_classes):
        bad = y[(y < 0) | (y >= num_classes)][0]
        raise InvalidLabel(f"label {bad} out of range for {num_classes} classes")
    return y


def _forward(params: ModelParams, X: np.ndarray, y: np.ndarray, hp: HyperParams):
    """Shared forward pass for loss and grad; returns intermediates."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = X.shape[0]
    A = np.tanh(X @ params.projection.T + params.bias)
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    F = A / norms
    cos_raw = F @ params.prototypes.T
    cos = clamp_cosine(cos_raw)
    rows = np.arange(n)
    cos_true = cos[rows, y]
    logits = hp.scale * cos
    logits[rows, y] = hp.scale * margin_cosine(cos_true, hp.margin)
    return X, A, norms, F, cos_raw, cos, logits


def per_sample_loss(params: ModelParams, X: np.ndarray, y: np.ndarray, hp: HyperParams) -> np.ndarray:
    """Per-sample BCE loss of the one-hot target under independent sigmoids.

    Computed as softplus terms so neither tail of the sigmoid underflows:
    -log sigma(l) = softplus(-l) and -log(1 - sigma(l)) = softplus(l).
    """
    y = _validate_labels(y, params.num_classes)
    # non-finite params are reported via NonFiniteLoss, not numpy warnings
    with np.errstate(invalid="ignore", over="ignore"):
        X, A, norms, F, cos_raw, cos, logits = _forward(params, X, y, hp)
        signs = np.ones_like(logits)
        signs[np.arange(X.shape[0]), y] = -1.0
        losses = np.logaddexp(0.0, signs * logits).sum(axis=1)
    return losses


def bce_loss(params: ModelParams, X: np.ndarray, y: np.ndarray, hp: HyperParams) -> float:
    """Mean per-sample loss over the batch; raises NonFiniteLoss on blow-up."""
    loss = float(per_sample_loss(params, X, y, hp).mean())
    if not math.isfinite(loss):
        raise NonFiniteLoss(f"training loss is {loss}")
    return loss


def grad(params: ModelParams, X: np.ndarray, y: np.ndarray, hp: HyperParams) -> Grads:
    """Analytic gradient of bce_loss w.r.t. projection, bias and prototypes.

    Chain rule through: sigmoid BCE -> margin_cosine (branch-aware) -> the
    cosine clamp -> L2 normalization of the activation -> tanh -> affine map.
    Prototypes are treated as free parameters here; the unit-norm invariant is
    restored by renormalizing after the optimizer step, not inside the loss.
    """
    y = _validate_labels(y, params.num_classes)
    X, A, norms, F, cos_raw, cos, logits = _forward(params, X, y, hp)
    n = X.shape[0]
    rows = np.arange(n)

    # dL/dlogit = (o - t) / n  for mean loss over the batch
    O = _sigmoid(logits)
    if not np.all(np.isfinite(O)):
        raise NonFiniteLoss("non-finite values in forward pass")
    G_logits = O.copy()
    G_logits[rows, y] -= 1.0
    G_logits /= n

    # dlogit/dcos: s everywhere, s * dphi/dcos on the true-class entries
    dlogit_dcos = np.full_like(cos, hp.scale)
    dlogit_dcos[rows, y] = hp.scale * margin_cosine_derivative(cos[rows, y], hp.margin)
    # the clamp has zero derivative outside its interior
    in_range = (cos_raw > -1.0 + COS_CLAMP) & (cos_raw < 1.0 - COS_CLAMP)
    G_cos = G_logits * dlogit_dcos * in_range

    g_proto = G_cos.T @ F
    G_F = G_cos @ params.prototypes
    # through F = A / ||A||: dL/dA = (G_F - (F . G_F) F) / ||A||
    G_A = (G_F - (F * G_F).sum(axis=1, keepdims=True) * F) / norms
    G_Z = (1.0 - A * A) * G_A
    g_proj = G_Z.T @ X
    g_bias = G_Z.sum(axis=0)
    return Grads(projection=g_proj, bias=g_bias, prototypes=g_proto)


def predict_batch(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """argmax_c cos(theta_c); ties go to the smallest class index."""
    F = embed_batch(params, X)
    return np.argmax(cosine_scores_batch(params, F), axis=1)


def predict(params: ModelParams, x: np.ndarray) -> int:
    return int(predict_batch(params, np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


class _AdamState:
    """Per-fit Adam moment buffers (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, params: ModelParams):
        self.t = 0
        self.m = Grads(
            projection=np.zeros_like(params.projection),
            bias=np.zeros_like(params.bias),
            prototypes=np.zeros_like(params.prototypes),
        )
        self.v = Grads(
            projection=np.zeros_like(params.projection),
            bias=np.zeros_like(params.bias),
            prototypes=np.zeros_like(params.prototypes),
        )

    def step(self, params: ModelParams, g: Grads, lr: float) -> None:
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        for name in ("projection", "bias", "prototypes"):
            gm = getattr(g, name)
            m = getattr(self.m, name)
            v = getattr(self.v, name)
            m *= b1
            m += (1 - b1) * gm
            v *= b2
            v += (1 - b2) * gm * gm
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            getattr(params, name)[...] -= lr * m_hat / (np.sqrt(v_hat) + eps)


def fit(
    params: ModelParams,
    X: np.ndarray,
    y: np.ndarray,
    hp: HyperParams,
    rng_seed: int,
) -> tuple[ModelParams, TrainStats]:
    """Shuffled minibatch gradient descent for hp.epochs_per_round epochs.

    Returns new parameters (the input object is not mutated) and per-epoch
    mean losses. Prototypes are renormalized to unit length after every
    optimizer step. Deterministic given the seed.
    """
    hp.validate()
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = _validate_labels(y, params.num_classes)
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch("feature/label counts differ")
    t0 = time.perf_counter()
    out = params.copy()
    stats = TrainStats()
    if hp.epochs_per_round == 0:
        stats.wall_time = time.perf_counter() - t0
        return out, stats

    rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed)]))
    adam = _AdamState(out) if hp.optimizer == "adam" else None
    n = X.shape[0]
    for _ in range(hp.epochs_per_round):
        perm = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, hp.batch_size):
            idx = perm[start : start + hp.batch_size]
            Xb, yb = X[idx], y[idx]
            loss = bce_loss(out, Xb, yb, hp)
            loss_sum += loss * idx.shape[0]
            g = grad(out, Xb, yb, hp)
            if adam is not None:
                adam.step(out, g, hp.learning_rate)
            else:
                out.projection -= hp.learning_rate * g.projection
                out.bias -= hp.learning_rate * g.bias
                out.prototypes -= hp.learning_rate * g.prototypes
            out.prototypes = _renormalize_rows(out.prototypes)
        epoch_loss = loss_sum / n
        if not math.isfinite(epoch_loss):
            raise NonFiniteLoss(f"epoch loss is {epoch_loss}")
        stats.epoch_losses.append(epoch_loss)
        stats.epochs += 1
    stats.wall_time = time.perf_counter() - t0
    return out, stats


# --- checkpoint format -------------------------------------------------------
#
# A checkpoint is one JSON document:
#   {"format": "protoal-checkpoint-v1",
#    "hyperparams": {...},          # HyperParams.to_dict()
#    "seed": int,                   # rng seed the model was initialized with
#    "projection": [[...], ...],    # (d_emb, d_in)
#    "bias": [...],                 # (d_emb,)
#    "prototypes": [[...], ...]}    # (num_classes, d_emb)
# Floats are written with Python repr (shortest round-trip), so save -> load
# reproduces every parameter bit-exactly.

CHECKPOINT_FORMAT = "protoal-checkpoint-v1"


def save_checkpoint(path, params: ModelParams, hp: HyperParams, seed: int) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "hyperparams": hp.to_dict(),
        "seed": int(seed),
        "projection": params.projection.tolist(),
        "bias": params.bias.tolist(),
        "prototypes": params.prototypes.tolist(),
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path) -> tuple[ModelParams, HyperParams, int]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise SchemaError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    try:
        hp = HyperParams.from_dict(doc["hyperparams"])
        params = ModelParams(
            projection=np.asarray(doc["projection"], dtype=np.float64),
            bias=np.asarray(doc["bias"], dtype=np.float64),
            prototypes=np.asarray(doc["prototypes"], dtype=np.float64),
        )
        seed = int(doc["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed checkpoint: {exc}") from exc
    if params.projection.shape != (hp.d_emb, hp.d_in) or params.bias.shape != (hp.d_emb,):
        raise SchemaError(f"{path}: checkpoint shapes disagree with hyperparams")
    return params, hp, seed
