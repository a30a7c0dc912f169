"""Per-flow inference engines.

The built-in engine is a multilayer perceptron with two hidden layers of
128 rectified-linear units and a softmax output, trained by mini-batch
gradient descent with momentum. Everything is plain numpy in float64 and
fully seeded, so identical inputs give bit-identical weight trajectories.

Engines hide behind a small duck-typed interface (`train`, `predict`,
`predict_batch`, `to_blob`) so alternative classifier families can slot
into a flow without touching fusion; only the MLP is implemented here.
"""

from __future__ import annotations

import struct
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DivergedLossError, EmptyDatasetError, ShapeMismatchError
from .ingest import Dataset
from .metrics import ConfusionCounts

INPUT_DIM = 28 * 28
HIDDEN_DIMS = (128, 128)

BLOB_MAGIC = b"MLPB"
BLOB_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer constants; recorded in the knowledgebase for replay."""

    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class MlpModel:
    """Weights of a 784 -> 128 -> 128 -> class_count perceptron.

    `weights[i]` maps layer i activations (rows in, columns out);
    `biases[i]` is added to the columns.
    """

    layer_dims: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        expected = [
            (self.layer_dims[i], self.layer_dims[i + 1])
            for i in range(len(self.layer_dims) - 1)
        ]
        actual = [w.shape for w in self.weights]
        if actual != expected:
            raise ShapeMismatchError(f"weight shapes {actual} do not chain {expected}")
        for b, (_, out) in zip(self.biases, expected):
            if b.shape != (out,):
                raise ShapeMismatchError(f"bias shape {b.shape} != ({out},)")

    @property
    def class_count(self) -> int:
        return self.layer_dims[-1]


@dataclass(frozen=True)
class Prediction:
    """One engine's output: the argmax vote plus the score vector.

    `discrete` tells fusion whether it may spread the vote across the
    scores; when True, downstream treats the prediction as one-hot.
    """

    class_vote: int
    scores: np.ndarray
    discrete: bool = True


def init_model(class_count: int, seed: int) -> MlpModel:
    """Seeded uniform init in +-sqrt(6 / (fan_in + fan_out)), zero biases."""
    dims = (INPUT_DIM,) + HIDDEN_DIMS + (class_count,)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_dims=dims, weights=weights, biases=biases)


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward(model: MlpModel, x: np.ndarray):
    # Returns hidden activations (post-relu) and output probabilities.
    activations = [x]
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        a = _softmax(z) if i == last else np.maximum(z, 0.0)
        activations.append(a)
    return activations


def _normalize(images: np.ndarray) -> np.ndarray:
    flat = np.asarray(images, dtype=np.float64).reshape(len(images), -1)
    if flat.shape[1] != INPUT_DIM:
        raise ShapeMismatchError(f"expected {INPUT_DIM} pixels, got {flat.shape[1]}")
    return flat / 255.0


def loss_and_gradients(model: MlpModel, x: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch and its parameter gradients.

    `x` is the normalized (n, 784) batch. Gradients come back as
    (weight grads, bias grads) lists matching the model layout.
    """
    n = len(x)
    acts = _forward(model, x)
    probs = acts[-1]
    picked = probs[np.arange(n), labels]
    loss = float(-np.log(np.clip(picked, 1e-300, None)).mean())

    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    w_grads = [None] * len(model.weights)
    b_grads = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        w_grads[i] = acts[i].T @ delta
        b_grads[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return loss, w_grads, b_grads


def mlp_train(dataset: Dataset, config: TrainConfig) -> MlpModel:
    """Train a fresh perceptron on the dataset.

    Deterministic for a fixed seed. Raises :class:`DivergedLossError` the
    moment the loss stops being finite, which is the signature of a bad
    learning rate.
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot train on an empty dataset")
    x = _normalize(dataset.images)
    labels = dataset.labels
    model = init_model(dataset.class_count, config.seed)
    velocity_w = [np.zeros_like(w) for w in model.weights]
    velocity_b = [np.zeros_like(b) for b in model.biases]
    rng = np.random.default_rng(config.seed + 1)

    for _ in range(config.epochs):
        order = rng.permutation(len(x))
        for start in range(0, len(x), config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, w_grads, b_grads = loss_and_gradients(model, x[batch], labels[batch])
            if not np.isfinite(loss):
                raise DivergedLossError(f"loss became {loss}; lower the learning rate")
            for i in range(len(model.weights)):
                velocity_w[i] = config.momentum * velocity_w[i] - config.learning_rate * w_grads[i]
                velocity_b[i] = config.momentum * velocity_b[i] - config.learning_rate * b_grads[i]
                model.weights[i] += velocity_w[i]
                model.biases[i] += velocity_b[i]
                if not np.isfinite(model.weights[i]).all():
                    raise DivergedLossError("weights became non-finite; lower the learning rate")
    return model


def predict_batch(model: MlpModel, images: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Votes and score matrix for a stack of raw images."""
    probs = _forward(model, _normalize(images))[-1]
    return probs.argmax(axis=1), probs


def mlp_predict(model: MlpModel, image: np.ndarray, discrete: bool = True) -> Prediction:
    """Single-image forward pass; argmax ties break toward the lowest id."""
    if np.asarray(image).shape not in ((28, 28), (INPUT_DIM,)):
        raise ShapeMismatchError(f"expected a 28x28 image, got {np.asarray(image).shape}")
    votes, probs = predict_batch(model, np.asarray(image)[None])
    return Prediction(class_vote=int(votes[0]), scores=probs[0], discrete=discrete)


def _flatten_params(model: MlpModel) -> np.ndarray:
    return np.concatenate(
        [w.ravel() for w in model.weights] + [b.ravel() for b in model.biases]
    )


def _param_view(model: MlpModel, flat_index: int):
    # Map a flat parameter index to the owning array and its local index.
    offset = 0
    for arr in model.weights + model.biases:
        if flat_index < offset + arr.size:
            return arr, flat_index - offset
        offset += arr.size
    raise IndexError(flat_index)


def gradient_check(
    model: MlpModel,
    sample: Tuple[np.ndarray, int],
    epsilon: float,
    n_params: int = 100,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks a seeded random subset of parameters on the cross-entropy loss
    of one sample. Per parameter the error is |ga - gn| / max(|ga|, |gn|),
    taken as zero when both magnitudes sit below 1e-8 (noise floor of the
    finite difference).
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must be in [1e-6, 1e-3], got {epsilon}")
    image, label = sample
    x = _normalize(np.asarray(image)[None])
    labels = np.array([label])

    _, w_grads, b_grads = loss_and_gradients(model, x, labels)
    analytic = np.concatenate(
        [g.ravel() for g in w_grads] + [g.ravel() for g in b_grads]
    )

    rng = np.random.default_rng(seed)
    total = analytic.size
    chosen = rng.choice(total, size=min(n_params, total), replace=False)

    worst = 0.0
    for flat_index in chosen:
        arr, local = _param_view(model, int(flat_index))
        original = arr.flat[local]
        arr.flat[local] = original + epsilon
        up, _, _ = loss_and_gradients(model, x, labels)
        arr.flat[local] = original - epsilon
        down, _, _ = loss_and_gradients(model, x, labels)
        arr.flat[local] = original
        numeric = (up - down) / (2.0 * epsilon)
        ga, gn = analytic[flat_index], numeric
        scale = max(abs(ga), abs(gn))
        if scale >= 1e-8:
            worst = max(worst, abs(ga - gn) / scale)
    return worst


def evaluate_flow(engine, dataset: Dataset) -> List[ConfusionCounts]:
    """One-vs-rest confusion counts of an engine's votes, one per class.

    For every class the four counts sum to the dataset size; TP + FN
    equals the class support.
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot evaluate on an empty dataset")
    votes, _ = engine.predict_batch(dataset.images)
    labels = dataset.labels
    out = []
    for d in range(dataset.class_count):
        vote_d = votes == d
        label_d = labels == d
        tp = int(np.sum(vote_d & label_d))
        fp = int(np.sum(vote_d & ~label_d))
        fn = int(np.sum(~vote_d & label_d))
        tn = int(np.sum(~vote_d & ~label_d))
        out.append(ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn))
    return out


@dataclass
class MlpEngine:
    """The default inference engine: one trained perceptron per flow."""

    class_count: int
    config: TrainConfig = field(default_factory=TrainConfig)
    probability_estimates: bool = False
    model: Optional[MlpModel] = None

    kind = "mlp"

    def train(self, dataset: Dataset) -> None:
        self.model = mlp_train(dataset, self.config)

    def predict(self, image: np.ndarray) -> Prediction:
        self._require_trained()
        return mlp_predict(self.model, image, discrete=not self.probability_estimates)

    def predict_batch(self, images: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        self._require_trained()
        return predict_batch(self.model, images)

    def _require_trained(self):
        if self.model is None:
            raise ValueError("engine is untrained; call train() first")

    def to_blob(self) -> bytes:
        """Pack the model: versioned header, layer dims, then row-major
        little-endian float64 weight and bias arrays per layer."""
        self._require_trained()
        m = self.model
        header = BLOB_MAGIC + struct.pack(
            "<IIB",
            BLOB_VERSION,
            len(m.layer_dims),
            1 if self.probability_estimates else 0,
        )
        header += struct.pack(f"<{len(m.layer_dims)}I", *m.layer_dims)
        chunks = [header]
        for w, b in zip(m.weights, m.biases):
            chunks.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
            chunks.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
        return b"".join(chunks)

    @classmethod
    def from_blob(cls, blob: bytes) -> "MlpEngine":
        if blob[:4] != BLOB_MAGIC:
            raise ValueError("not an MLP parameter blob")
        version, n_dims, prob_flag = struct.unpack("<IIB", blob[4:13])
        if version != BLOB_VERSION:
            raise ValueError(f"unsupported blob version {version}")
        dims = struct.unpack(f"<{n_dims}I", blob[13 : 13 + 4 * n_dims])
        offset = 13 + 4 * n_dims
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w_bytes = 8 * fan_in * fan_out
            weights.append(
                np.frombuffer(blob, dtype="<f8", count=fan_in * fan_out, offset=offset)
                .reshape(fan_in, fan_out)
                .copy()
            )
            offset += w_bytes
            biases.append(
                np.frombuffer(blob, dtype="<f8", count=fan_out, offset=offset).copy()
            )
            offset += 8 * fan_out
        model = MlpModel(layer_dims=dims, weights=weights, biases=biases)
        engine = cls(class_count=dims[-1], probability_estimates=bool(prob_flag))
        engine.model = model
        return engine
