"""Synthetic chroma corpus generator with a configurable chord-class mix.

Each chord class has a binary 12-bin template (chord tones at 1.0,
everything else 0.0) rooted at any pitch class; the no-chord symbol is a
uniform low-energy vector.  Tracks are filled with i.i.d. chord draws
from the configured class distribution, each rendered as template frames
plus Gaussian noise.  At sigma = 0 a nearest-template lookup recovers
the generated (class, root) pair exactly for every default-distribution
class; aug is the one class whose template is rotationally symmetric
(three roots share a pitch set), so it stays out of the default mix.

The default distribution mirrors the skew of real annotated corpora:
maj and min together hold almost 80 percent of the time, the rarest
class only 0.2 percent, and the remainder is no-chord.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .annotations import Interval, TimedLabelSequence, read_lab_file, write_lab_file
from .augment import derive_seed
from .chords import CHORD_CLASSES, NO_CHORD, REPRESENTATIVE_QUALITY, ChordLabel
from .student import FeatureTrack, N_CHROMA

__all__ = [
    "CHORD_CLASS_INTERVALS",
    "CorpusSpec",
    "DEFAULT_CLASS_DISTRIBUTION",
    "chord_template",
    "generate_corpus",
    "load_corpus",
    "nearest_template",
    "no_chord_template",
    "save_corpus",
    "spec_from_dict",
]

# Chord-tone offsets from the root per vocabulary class.
CHORD_CLASS_INTERVALS = {
    "maj": (0, 4, 7),
    "min": (0, 3, 7),
    "7": (0, 4, 7, 10),
    "min7": (0, 3, 7, 10),
    "maj7": (0, 4, 7, 11),
    "dim": (0, 3, 6),
    "hdim7": (0, 3, 6, 10),
    "aug": (0, 4, 8),
    "sus": (0, 5, 7),
}

_NO_CHORD_LEVEL = 0.1

DEFAULT_CLASS_DISTRIBUTION = {
    "maj": 0.63,
    "min": 0.161,
    "7": 0.069,
    "min7": 0.026,
    "maj7": 0.01,
    "dim": 0.004,
    "hdim7": 0.002,
    "N": 0.098,
}

MANIFEST_FORMAT = "chordbalance-corpus-v1"


def chord_template(chord_class: str, root: int) -> np.ndarray:
    """Binary chroma template for a rooted chord class."""
    if chord_class not in CHORD_CLASS_INTERVALS:
        raise ValueError(f"no template for class {chord_class!r}")
    template = np.zeros(N_CHROMA)
    for offset in CHORD_CLASS_INTERVALS[chord_class]:
        template[(root + offset) % N_CHROMA] = 1.0
    return template


def no_chord_template() -> np.ndarray:
    """Uniform low-energy vector standing in for untuned/silent audio."""
    return np.full(N_CHROMA, _NO_CHORD_LEVEL)


def nearest_template(frame: np.ndarray) -> tuple[str, int | None]:
    """(class, root) of the Euclidean-nearest template; root None for N."""
    frame = np.asarray(frame, dtype=float)
    best: tuple[str, int | None] = ("N", None)
    best_dist = float(np.sum((frame - no_chord_template()) ** 2))
    for cls in CHORD_CLASS_INTERVALS:
        for root in range(N_CHROMA):
            dist = float(np.sum((frame - chord_template(cls, root)) ** 2))
            if dist < best_dist:
                best_dist = dist
                best = (cls, root)
    return best


@dataclass(frozen=True)
class CorpusSpec:
    """Generation settings; two specs with equal fields generate equal corpora."""

    n_tracks: int = 16
    track_length_range: tuple[float, float] = (60.0, 90.0)
    chord_duration_range: tuple[float, float] = (1.0, 4.0)
    class_distribution: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_CLASS_DISTRIBUTION)
    )
    noise_sigma: float = 0.1
    frame_rate: float = 10.0
    seed: int = 0
    track_prefix: str = "synth"

    def __post_init__(self) -> None:
        object.__setattr__(self, "track_length_range", tuple(self.track_length_range))
        object.__setattr__(self, "chord_duration_range", tuple(self.chord_duration_range))
        object.__setattr__(self, "class_distribution", dict(self.class_distribution))
        if self.n_tracks < 1:
            raise ValueError(f"n_tracks must be >= 1, got {self.n_tracks}")
        if not self.frame_rate > 0:
            raise ValueError(f"frame rate must be positive, got {self.frame_rate}")
        if not self.noise_sigma >= 0:
            raise ValueError(f"noise sigma must be >= 0, got {self.noise_sigma}")
        # prefix lands in file names, so keep it path-safe
        if not self.track_prefix or "/" in self.track_prefix or "\\" in self.track_prefix:
            raise ValueError(f"invalid track prefix {self.track_prefix!r}")
        for name, (lo, hi) in (
            ("track_length_range", self.track_length_range),
            ("chord_duration_range", self.chord_duration_range),
        ):
            if not (lo > 0 and hi >= lo):
                raise ValueError(f"{name} must satisfy 0 < low <= high, got ({lo}, {hi})")
        if self.chord_duration_range[0] > self.track_length_range[1]:
            raise ValueError("infeasible spec: shortest chord exceeds longest track")
        probs = self.class_distribution
        if not probs:
            raise ValueError("class distribution must not be empty")
        for cls, p in probs.items():
            if cls not in CHORD_CLASSES or cls == "X":
                raise ValueError(f"invalid distribution class {cls!r}")
            if not p >= 0:
                raise ValueError(f"negative share for class {cls!r}")
        total = sum(probs.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"class distribution sums to {total}, not 1")

    def to_dict(self) -> dict:
        return {
            "n_tracks": self.n_tracks,
            "track_length_range": list(self.track_length_range),
            "chord_duration_range": list(self.chord_duration_range),
            "class_distribution": dict(self.class_distribution),
            "noise_sigma": self.noise_sigma,
            "frame_rate": self.frame_rate,
            "seed": self.seed,
            "track_prefix": self.track_prefix,
        }


def spec_from_dict(raw: Mapping) -> CorpusSpec:
    """Build a spec from parsed JSON, tolerating missing fields."""
    known = {f for f in CorpusSpec.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown corpus spec fields: {sorted(unknown)}")
    return CorpusSpec(**{k: v for k, v in raw.items()})


def _label_for(chord_class: str, root: int) -> ChordLabel:
    if chord_class == "N":
        return NO_CHORD
    return ChordLabel("chord", root, REPRESENTATIVE_QUALITY[chord_class])


def generate_corpus(spec: CorpusSpec) -> list[tuple[FeatureTrack, TimedLabelSequence]]:
    """Generate the corpus described by ``spec``.

    Per-track generation is independent: every track draws from its own
    RNG stream derived from the corpus seed and the track id, so the
    same spec always renders the same corpus, frame for frame.  Chord
    boundaries land on frame edges, which means every frame is covered
    by exactly one label.
    """
    classes = sorted(spec.class_distribution)
    shares = np.asarray([spec.class_distribution[c] for c in classes])
    shares = shares / shares.sum()
    fps = spec.frame_rate
    corpus = []
    for i in range(spec.n_tracks):
        tid = f"{spec.track_prefix}-{i:04d}"
        rng = np.random.default_rng(derive_seed(spec.seed, tid))
        n_frames = max(1, round(rng.uniform(*spec.track_length_range) * fps))
        frames = np.empty((n_frames, N_CHROMA))
        segments = []
        pos = 0
        while pos < n_frames:
            cls = classes[int(rng.choice(len(classes), p=shares))]
            dur = max(1, round(rng.uniform(*spec.chord_duration_range) * fps))
            end = min(pos + dur, n_frames)
            root = int(rng.integers(N_CHROMA)) if cls != "N" else 0
            template = no_chord_template() if cls == "N" else chord_template(cls, root)
            block = np.tile(template, (end - pos, 1))
            if spec.noise_sigma > 0:
                block = block + rng.normal(0.0, spec.noise_sigma, block.shape)
            frames[pos:end] = block
            segments.append((Interval(pos / fps, end / fps), _label_for(cls, root)))
            pos = end
        corpus.append((
            FeatureTrack(tid, frames, fps),
            TimedLabelSequence(tid, tuple(segments)),
        ))
    return corpus


def save_corpus(
    directory: str | Path,
    corpus: Sequence[tuple[FeatureTrack, TimedLabelSequence]],
    spec: CorpusSpec | None = None,
) -> None:
    """Persist a corpus: manifest.json, per-track features CSV and .lab."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": MANIFEST_FORMAT,
        "frame_rate": corpus[0][0].frame_rate if corpus else None,
        "tracks": [track.track_id for track, _ in corpus],
        "spec": spec.to_dict() if spec is not None else None,
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", "utf-8"
    )
    for track, labels in corpus:
        np.savetxt(directory / f"{track.track_id}.csv", track.frames, fmt="%.9f", delimiter=",")
        write_lab_file(directory / f"{track.track_id}.lab", labels)


def load_corpus(directory: str | Path) -> tuple[list[tuple[FeatureTrack, TimedLabelSequence]], dict]:
    """Load a corpus directory written by :func:`save_corpus`."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise ValueError(f"not a corpus directory (no manifest.json): {directory}")
    manifest = json.loads(manifest_path.read_text("utf-8"))
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"unsupported corpus format {manifest.get('format')!r} in {directory}")
    corpus = []
    for tid in manifest["tracks"]:
        frames = np.loadtxt(directory / f"{tid}.csv", delimiter=",", ndmin=2)
        labels = read_lab_file(directory / f"{tid}.lab", track_id=tid)
        corpus.append((FeatureTrack(tid, frames, manifest["frame_rate"]), labels))
    return corpus, manifest
