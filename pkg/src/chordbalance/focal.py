"""Focal loss for per-frame chord class training.

For the probability ``p_t`` assigned to the true class, the focal loss
is ``(1 - p_t)^gamma * (-log p_t)``: the modulating factor shrinks the
contribution of already-confident frames, so gradient mass shifts toward
the hard (typically rare-class) frames.  Some write-ups print the
formula without the minus sign on the log; this module uses the standard
convention in which the loss is nonnegative and gamma = 0 degenerates to
plain cross-entropy.

Probabilities at or below zero are clamped to a small floor before the
log and the clamp is counted, so silently broken inputs surface in
pipeline diagnostics instead of as NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

__all__ = [
    "FocalParams",
    "GAMMA_PRESETS",
    "PROB_FLOOR",
    "clamp_count",
    "focal_loss",
    "focal_loss_grad",
    "focal_scalars",
    "reset_clamp_count",
    "sequence_loss",
]

PROB_FLOOR = 1e-12

# Modulation strengths worth sweeping; 2 is the usual default.
GAMMA_PRESETS = (1.0, 2.0, 5.0)

_clamp_events = 0


def clamp_count() -> int:
    """Number of probability-floor clamps since the last reset."""
    return _clamp_events


def reset_clamp_count() -> None:
    global _clamp_events
    _clamp_events = 0


def _note_clamps(n: int) -> None:
    global _clamp_events
    _clamp_events += int(n)


@dataclass(frozen=True)
class FocalParams:
    """Loss shape: modulation exponent, optional class weights, floor."""

    gamma: float = 2.0
    class_weights: Mapping[str, float] | None = None
    prob_floor: float = PROB_FLOOR

    def __post_init__(self) -> None:
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")
        if not 0 < self.prob_floor < 1:
            raise ValueError(f"prob_floor must be in (0, 1), got {self.prob_floor}")
        if self.class_weights is not None:
            for cls, w in self.class_weights.items():
                if not (w >= 0 and math.isfinite(w)):
                    raise ValueError(f"class weight for {cls!r} must be finite and >= 0, got {w}")


def focal_loss(p_t: float, gamma: float, prob_floor: float = PROB_FLOOR) -> float:
    """Focal loss of one frame given the true-class probability.

    Examples
    --------
    >>> round(focal_loss(0.5, 0.0), 6)
    0.693147
    """
    if not p_t <= 1.0 + 1e-9:
        raise ValueError(f"true-class probability {p_t} exceeds 1")
    if p_t < prob_floor:
        _note_clamps(1)
        p_t = prob_floor
    p_t = min(p_t, 1.0)
    return (1.0 - p_t) ** gamma * -math.log(p_t)


def focal_scalars(p_t: np.ndarray, gamma: float) -> np.ndarray:
    """Per-frame factor ``d FL / d p_t * p_t``.

    With softmax probabilities ``p`` and true class ``t`` the exact
    logit gradient is ``factor * (onehot_t - p)``, because
    ``d p_t / d z_j = p_t * (onehot_t[j] - p[j])``.  At gamma = 0 the
    factor is the constant -1 (cross-entropy).  The limit for p_t -> 1
    is 0 for every gamma > 0.
    """
    p = np.asarray(p_t, dtype=float)
    if gamma == 0:
        return np.full(p.shape, -1.0)
    u = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = gamma * p * u ** (gamma - 1.0) * np.log(p) - u**gamma
    return np.where(u > 0, raw, 0.0)


def focal_loss_grad(
    logits: np.ndarray,
    target: int,
    gamma: float,
    prob_floor: float = PROB_FLOOR,
) -> np.ndarray:
    """Exact gradient of the focal loss with respect to one frame's logits.

    Parameters
    ----------
    logits : array of shape (n_classes,)
    target : index of the true class
    gamma : modulation exponent, >= 0

    Returns
    -------
    ndarray of shape (n_classes,)
    """
    z = np.asarray(logits, dtype=float)
    if z.ndim != 1:
        raise ValueError(f"logits must be 1-D, got shape {z.shape}")
    if not 0 <= target < z.shape[0]:
        raise ValueError(f"target {target} out of range for {z.shape[0]} classes")
    shifted = z - z.max()
    p = np.exp(shifted)
    p /= p.sum()
    p_t = p[target]
    if p_t < prob_floor:
        _note_clamps(1)
        p_t = prob_floor
    direction = -p
    direction[target] += 1.0
    factor = focal_scalars(np.asarray([p_t]), gamma)[0]
    return factor * direction


def sequence_loss(frames: np.ndarray, targets: np.ndarray, params: FocalParams,
                  class_weight_vector: np.ndarray | None = None) -> float:
    """Class-weight-scaled mean focal loss over a frame sequence.

    Parameters
    ----------
    frames : array of shape (n_frames, n_classes)
        Per-frame probability rows, each summing to 1 within 1e-9.
    targets : int array of shape (n_frames,)
        True class index per frame.
    params : FocalParams
    class_weight_vector : optional per-class weight array
        Already aligned with the probability columns; takes precedence
        over ``params.class_weights`` (which is keyed by class name and
        must then be resolved by the caller).

    Returns
    -------
    float
        ``mean(w[target] * FL(p_t))`` with unit weights by default, so
        gamma = 0 and uniform weights give the mean cross-entropy.
    """
    probs = np.asarray(frames, dtype=float)
    idx = np.asarray(targets)
    if probs.ndim != 2:
        raise ValueError(f"frames must be 2-D, got shape {probs.shape}")
    if idx.shape != (probs.shape[0],):
        raise ValueError(f"frame/target length mismatch: {probs.shape[0]} frames, {idx.shape} targets")
    if probs.shape[0] == 0:
        raise ValueError("empty frame sequence")
    if idx.min() < 0 or idx.max() >= probs.shape[1]:
        raise ValueError("target index out of range")
    sums = probs.sum(axis=1)
    if np.abs(sums - 1.0).max() > 1e-9:
        worst = int(np.abs(sums - 1.0).argmax())
        raise ValueError(f"frame {worst} probabilities sum to {sums[worst]}, not 1")

    p_t = probs[np.arange(probs.shape[0]), idx]
    low = p_t < params.prob_floor
    if low.any():
        _note_clamps(low.sum())
    p_t = np.clip(p_t, params.prob_floor, 1.0)
    losses = (1.0 - p_t) ** params.gamma * -np.log(p_t)
    if class_weight_vector is not None:
        losses = losses * np.asarray(class_weight_vector, dtype=float)[idx]
    return float(losses.mean())
