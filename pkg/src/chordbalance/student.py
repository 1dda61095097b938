"""Linear softmax chord-frame classifier used for self-training rounds.

The model is deliberately small: softmax regression over 12-dimensional
chroma frames with a bias term, trained by full-batch gradient descent.
That keeps every training run deterministic for a given seed and fast
enough to rerun many times, which is what the surrounding experiment
loop actually needs; the interesting behaviour lives in the data, not
the classifier.

Model classes are root-qualified vocabulary classes rendered as chord
labels ("C:maj" ... "B:hdim7", plus "N"), because a linear model on raw
chroma cannot be root-invariant.  Mapping any model class through the
vocabulary reduction recovers the plain chord class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.ndimage import median_filter

from . import focal
from .annotations import Interval, TimedLabelSequence
from .chords import (
    CHORD_CLASSES,
    PITCH_NAMES,
    REPRESENTATIVE_QUALITY,
    label_to_string,
    map_to_class,
    parse_chord_label,
)

__all__ = [
    "ClassifierModel",
    "FeatureTrack",
    "PredictedSegments",
    "TrainParams",
    "TrainResult",
    "default_model_classes",
    "frame_accuracy",
    "frame_targets",
    "init_model",
    "load_model",
    "model_class_names",
    "predict_segments",
    "save_model",
    "train",
]

N_CHROMA = 12
_INIT_SCALE = 0.01


@dataclass
class FeatureTrack:
    """Chroma frames of one track at a fixed frame rate."""

    track_id: str
    frames: np.ndarray
    frame_rate: float = 10.0

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.ndim != 2 or self.frames.shape[1] != N_CHROMA:
            raise ValueError(f"frames must have shape (n, {N_CHROMA}), got {self.frames.shape}")
        if not np.isfinite(self.frames).all():
            raise ValueError(f"non-finite feature values in track {self.track_id!r}")
        if not self.frame_rate > 0:
            raise ValueError(f"frame rate must be positive, got {self.frame_rate}")

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def duration(self) -> float:
        return self.frames.shape[0] / self.frame_rate

    def frame_times(self) -> np.ndarray:
        """Frame midpoints in seconds."""
        return (np.arange(self.frames.shape[0]) + 0.5) / self.frame_rate


def model_class_names(chord_classes: Sequence[str]) -> tuple[str, ...]:
    """Root-qualified model class list for the given chord classes, plus N."""
    names = [
        f"{root}:{REPRESENTATIVE_QUALITY[cls]}"
        for cls in chord_classes
        for root in PITCH_NAMES
    ]
    names.append("N")
    return tuple(names)


def default_model_classes() -> tuple[str, ...]:
    """Every scoreable chord class at every root, plus N (109 classes)."""
    return model_class_names([c for c in CHORD_CLASSES if c not in ("N", "X")])


@dataclass
class TrainParams:
    """Gradient descent settings; the seed fixes the weight init."""

    learning_rate: float = 1.0
    epochs: int = 200
    seed: int = 0
    loss: str = "cross_entropy"
    gamma: float = 2.0
    class_weights: dict[str, float] | None = None
    patience: int | None = None

    def __post_init__(self) -> None:
        if self.loss not in ("cross_entropy", "focal"):
            raise ValueError(f"unknown loss kind {self.loss!r}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.patience is not None and self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "seed": self.seed,
            "loss": self.loss,
            "gamma": self.gamma,
            "class_weights": self.class_weights,
            "patience": self.patience,
        }


@dataclass
class ClassifierModel:
    """Softmax regression weights over a fixed model class list."""

    classes: tuple[str, ...]
    weights: np.ndarray  # (n_classes, 13), bias in the last column
    params: TrainParams = field(default_factory=TrainParams)

    def __post_init__(self) -> None:
        self.classes = tuple(self.classes)
        self.weights = np.asarray(self.weights, dtype=float)
        if "N" not in self.classes:
            raise ValueError("model class list must contain N")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("duplicate model classes")
        if self.weights.shape != (len(self.classes), N_CHROMA + 1):
            raise ValueError(
                f"weights must have shape ({len(self.classes)}, {N_CHROMA + 1}), got {self.weights.shape}"
            )
        if not np.isfinite(self.weights).all():
            raise ValueError("non-finite model weights")

    def logits(self, frames: np.ndarray) -> np.ndarray:
        x = np.asarray(frames, dtype=float)
        return x @ self.weights[:, :N_CHROMA].T + self.weights[:, N_CHROMA]

    def posteriors(self, frames: np.ndarray) -> np.ndarray:
        return _softmax(self.logits(frames))


@dataclass
class TrainResult:
    model: ClassifierModel
    final_loss: float
    epochs_run: int
    train_losses: list[float]
    val_losses: list[float] | None


@dataclass(frozen=True)
class PredictedSegments:
    """Constant-label segments with one confidence value per segment."""

    sequence: TimedLabelSequence
    confidences: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.confidences) != len(self.sequence.segments):
            raise ValueError("one confidence per segment required")
        for c in self.confidences:
            if not 0.0 <= c <= 1.0:
                raise ValueError(f"confidence {c} outside [0, 1]")


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def init_model(classes: Sequence[str], params: TrainParams) -> ClassifierModel:
    """Seeded small-normal weight init; same seed, same weights, bitwise."""
    rng = np.random.default_rng(params.seed)
    weights = rng.normal(0.0, _INIT_SCALE, (len(classes), N_CHROMA + 1))
    return ClassifierModel(tuple(classes), weights, params)


def _model_class_of(label, vocabulary: Sequence[str]) -> str:
    """Model class name for a reference label; out of vocabulary folds to N."""
    if not label.is_chord:
        return "N"
    cls = map_to_class(label, vocabulary)
    if cls in ("N", "X"):
        return "N"
    return f"{PITCH_NAMES[label.root]}:{REPRESENTATIVE_QUALITY[cls]}"


def frame_targets(
    track: FeatureTrack,
    labels: TimedLabelSequence,
    classes: Sequence[str],
    vocabulary: Sequence[str] = CHORD_CLASSES,
) -> np.ndarray:
    """Target class index per frame; uncovered frames fall to N."""
    index = {name: i for i, name in enumerate(classes)}
    n_index = index["N"]
    targets = np.full(len(track), n_index, dtype=int)
    segs = labels.segments
    si = 0
    for fi, t in enumerate(track.frame_times()):
        while si < len(segs) and segs[si][0].end <= t:
            si += 1
        if si < len(segs) and segs[si][0].start <= t:
            targets[fi] = index.get(_model_class_of(segs[si][1], vocabulary), n_index)
    return targets


def _class_weight_vector(classes: Sequence[str], weights: dict[str, float] | None,
                         vocabulary: Sequence[str]) -> np.ndarray | None:
    if weights is None:
        return None
    return np.asarray(
        [weights.get(map_to_class(parse_chord_label(c), vocabulary), 1.0) for c in classes],
        dtype=float,
    )


def train(
    corpus: Sequence[tuple[FeatureTrack, TimedLabelSequence]],
    params: TrainParams,
    classes: Sequence[str] | None = None,
    validation: Sequence[tuple[FeatureTrack, TimedLabelSequence]] | None = None,
    vocabulary: Sequence[str] = CHORD_CLASSES,
) -> TrainResult:
    """Full-batch gradient descent on the mean per-frame loss.

    With ``params.patience`` set and a validation corpus given, training
    stops once the validation loss has not improved for that many epochs
    and the best-validation weights are restored.  Zero epochs return
    the freshly initialized model unchanged.
    """
    if not corpus:
        raise ValueError("empty training corpus")
    classes = tuple(classes) if classes is not None else default_model_classes()
    model = init_model(classes, params)

    features = np.vstack([track.frames for track, _ in corpus])
    x = np.hstack([features, np.ones((features.shape[0], 1))])
    y = np.concatenate([frame_targets(track, labels, classes, vocabulary) for track, labels in corpus])
    n = x.shape[0]
    rows = np.arange(n)
    wvec = _class_weight_vector(classes, params.class_weights, vocabulary)
    frame_w = wvec[y] if wvec is not None else None

    use_val = validation is not None and len(validation) > 0 and params.patience is not None
    if use_val:
        vfeat = np.vstack([track.frames for track, _ in validation])
        vx = np.hstack([vfeat, np.ones((vfeat.shape[0], 1))])
        vy = np.concatenate(
            [frame_targets(track, labels, classes, vocabulary) for track, labels in validation]
        )

    gamma = params.gamma if params.loss == "focal" else 0.0
    loss_params = focal.FocalParams(gamma=gamma)

    def batch_loss(weights: np.ndarray, bx: np.ndarray, by: np.ndarray) -> float:
        probs = _softmax(bx @ weights.T)
        return focal.sequence_loss(probs, by, loss_params, class_weight_vector=wvec)

    w = model.weights
    train_losses: list[float] = []
    val_losses: list[float] = [] if use_val else None
    best_val = np.inf
    best_w = None
    best_epoch = 0
    stale = 0
    epochs_run = 0

    for epoch in range(params.epochs):
        probs = _softmax(x @ w.T)
        train_losses.append(focal.sequence_loss(probs, y, loss_params, class_weight_vector=wvec))
        if params.loss == "cross_entropy":
            grad = probs.copy()
            grad[rows, y] -= 1.0
        else:
            p_t = np.clip(probs[rows, y], loss_params.prob_floor, 1.0)
            grad = -probs
            grad[rows, y] += 1.0
            grad *= focal.focal_scalars(p_t, gamma)[:, None]
        if frame_w is not None:
            grad *= frame_w[:, None]
        w = w - params.learning_rate * (grad.T @ x) / n
        epochs_run = epoch + 1

        if use_val:
            vloss = batch_loss(w, vx, vy)
            val_losses.append(vloss)
            if vloss < best_val:
                best_val = vloss
                best_w = w.copy()
                best_epoch = epochs_run
                stale = 0
            else:
                stale += 1
                if stale >= params.patience:
                    break

    if use_val and best_w is not None:
        w = best_w
        epochs_run = best_epoch
    model = ClassifierModel(classes, w, params)
    final_loss = batch_loss(w, x, y)
    return TrainResult(model, final_loss, epochs_run, train_losses, val_losses)


def predict_segments(
    model: ClassifierModel,
    track: FeatureTrack,
    smoothing_window: int = 1,
) -> PredictedSegments:
    """Segment-level predictions for one track.

    Per-frame argmax labels, median-filtered over ``smoothing_window``
    frames (odd, >= 1; 1 means no smoothing), then constant runs become
    segments.  Segment confidence is the mean posterior of the emitted
    label over the segment's frames.  The segments exactly tile
    [0, duration).
    """
    if len(track) == 0:
        raise ValueError(f"empty track {track.track_id!r}")
    if smoothing_window < 1 or smoothing_window % 2 == 0:
        raise ValueError(f"smoothing window must be odd and >= 1, got {smoothing_window}")
    probs = model.posteriors(track.frames)
    idx = np.argmax(probs, axis=1)
    if smoothing_window > 1:
        idx = median_filter(idx, size=smoothing_window, mode="nearest")

    bounds = [0, *(int(b) for b in np.flatnonzero(np.diff(idx)) + 1), len(idx)]
    segments = []
    confidences = []
    rate = track.frame_rate
    for a, b in zip(bounds, bounds[1:]):
        cls = int(idx[a])
        segments.append((Interval(a / rate, b / rate), parse_chord_label(model.classes[cls])))
        confidences.append(float(np.clip(probs[a:b, cls].mean(), 0.0, 1.0)))
    sequence = TimedLabelSequence(track.track_id, tuple(segments))
    return PredictedSegments(sequence, tuple(confidences))


def frame_accuracy(
    model: ClassifierModel,
    corpus: Sequence[tuple[FeatureTrack, TimedLabelSequence]],
    vocabulary: Sequence[str] = CHORD_CLASSES,
) -> float:
    """Fraction of frames whose raw argmax matches the aligned target."""
    hits = 0
    total = 0
    for track, labels in corpus:
        y = frame_targets(track, labels, model.classes, vocabulary)
        pred = np.argmax(model.logits(track.frames), axis=1)
        hits += int((pred == y).sum())
        total += len(y)
    if total == 0:
        raise ValueError("no frames to score")
    return hits / total


def save_model(model: ClassifierModel, path: str | Path) -> None:
    """JSON snapshot: class list, weights and training params."""
    payload = {
        "classes": list(model.classes),
        "weights": model.weights.tolist(),
        "params": model.params.to_dict(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", "utf-8")


def load_model(path: str | Path) -> ClassifierModel:
    payload = json.loads(Path(path).read_text("utf-8"))
    raw = dict(payload["params"])
    params = TrainParams(
        learning_rate=raw["learning_rate"],
        epochs=raw["epochs"],
        seed=raw["seed"],
        loss=raw["loss"],
        gamma=raw["gamma"],
        class_weights=raw["class_weights"],
        patience=raw["patience"],
    )
    return ClassifierModel(tuple(payload["classes"]), np.asarray(payload["weights"]), params)
