"""Synthetic corpus generator: templates, determinism, persistence."""

import json

import numpy as np
import pytest

from chordbalance.chords import map_to_class
from chordbalance.metrics import type_distribution
from chordbalance.synth import (
    CHORD_CLASS_INTERVALS,
    CorpusSpec,
    DEFAULT_CLASS_DISTRIBUTION,
    MANIFEST_FORMAT,
    chord_template,
    generate_corpus,
    load_corpus,
    nearest_template,
    no_chord_template,
    save_corpus,
    spec_from_dict,
)

ALL_BUT_AUG = {
    "maj": 0.15, "min": 0.15, "7": 0.1, "min7": 0.1, "maj7": 0.1,
    "dim": 0.1, "hdim7": 0.1, "sus": 0.1, "N": 0.1,
}


class TestTemplates:
    def test_interval_table(self):
        assert CHORD_CLASS_INTERVALS["maj"] == (0, 4, 7)
        assert CHORD_CLASS_INTERVALS["min"] == (0, 3, 7)
        assert CHORD_CLASS_INTERVALS["hdim7"] == (0, 3, 6, 10)
        for cls, offsets in CHORD_CLASS_INTERVALS.items():
            assert 3 <= len(offsets) <= 4

    def test_rooted_template(self):
        t = chord_template("maj", 0)
        np.testing.assert_array_equal(np.flatnonzero(t), [0, 4, 7])
        t = chord_template("min7", 5)
        np.testing.assert_array_equal(np.flatnonzero(t), [0, 3, 5, 8])  # {5, 8, 0, 3}

    def test_no_chord_template(self):
        np.testing.assert_array_equal(no_chord_template(), np.full(12, 0.1))

    def test_unknown_class_raises(self):
        with pytest.raises(ValueError):
            chord_template("N", 0)

    def test_nearest_template_identity(self):
        assert nearest_template(no_chord_template()) == ("N", None)
        for cls in CHORD_CLASS_INTERVALS:
            if cls == "aug":
                continue  # rotationally symmetric, three roots share a template
            for root in (0, 5, 11):
                assert nearest_template(chord_template(cls, root)) == (cls, root)


class TestCorpusSpec:
    def test_defaults(self):
        spec = CorpusSpec()
        assert spec.n_tracks == 16
        assert spec.track_length_range == (60.0, 90.0)
        assert spec.chord_duration_range == (1.0, 4.0)
        assert spec.noise_sigma == 0.1
        assert spec.frame_rate == 10.0
        assert spec.track_prefix == "synth"
        assert spec.class_distribution == DEFAULT_CLASS_DISTRIBUTION

    def test_default_distribution_shares(self):
        dist = DEFAULT_CLASS_DISTRIBUTION
        assert dist["maj"] == 0.63
        assert dist["min"] == 0.161
        assert dist["7"] == 0.069
        assert dist["min7"] == 0.026
        assert dist["maj7"] == 0.01
        assert dist["dim"] == 0.004
        assert dist["hdim7"] == 0.002
        assert dist["N"] == 0.098
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-9)
        assert dist["maj"] + dist["min"] == pytest.approx(0.791, abs=1e-9)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_tracks": 0},
            {"frame_rate": 0.0},
            {"noise_sigma": -0.1},
            {"track_length_range": (0.0, 60.0)},
            {"chord_duration_range": (4.0, 1.0)},
            {"track_length_range": (60.0, 90.0), "chord_duration_range": (100.0, 120.0)},
            {"class_distribution": {"maj": 0.5}},
            {"class_distribution": {"maj": 0.5, "banana": 0.5}},
            {"class_distribution": {"maj": 1.5, "min": -0.5}},
            {"class_distribution": {}},
            {"track_prefix": ""},
            {"track_prefix": "a/b"},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            CorpusSpec(**kwargs)

    def test_dict_round_trip(self):
        spec = CorpusSpec(n_tracks=3, seed=9, track_prefix="pool", noise_sigma=0.05)
        assert spec_from_dict(spec.to_dict()) == spec

    def test_dict_defaults_and_unknown_fields(self):
        assert spec_from_dict({"n_tracks": 2}) == CorpusSpec(n_tracks=2)
        with pytest.raises(ValueError, match="unknown"):
            spec_from_dict({"n_tracks": 2, "wat": 1})


class TestGenerate:
    def test_single_class_distribution(self):
        spec = CorpusSpec(
            n_tracks=2,
            track_length_range=(20.0, 25.0),
            class_distribution={"maj": 1.0},
            seed=1,
        )
        for _, labels in generate_corpus(spec):
            assert all(map_to_class(lab) == "maj" for _, lab in labels.segments)

    def test_same_seed_bit_identical(self):
        spec = CorpusSpec(n_tracks=3, track_length_range=(20.0, 30.0), seed=5)
        a = generate_corpus(spec)
        b = generate_corpus(spec)
        for (ta, la), (tb, lb) in zip(a, b):
            np.testing.assert_array_equal(ta.frames, tb.frames)
            assert la == lb

    def test_tracks_independent_of_corpus_size(self):
        small = generate_corpus(CorpusSpec(n_tracks=2, track_length_range=(20.0, 25.0), seed=5))
        large = generate_corpus(CorpusSpec(n_tracks=4, track_length_range=(20.0, 25.0), seed=5))
        for (ts, ls), (tl, ll) in zip(small, large):
            np.testing.assert_array_equal(ts.frames, tl.frames)
            assert ls == ll

    def test_track_prefix_in_ids(self):
        corpus = generate_corpus(
            CorpusSpec(n_tracks=2, track_length_range=(20.0, 22.0), seed=0, track_prefix="pool")
        )
        assert [t.track_id for t, _ in corpus] == ["pool-0000", "pool-0001"]

    def test_labels_tile_every_frame(self):
        spec = CorpusSpec(n_tracks=3, track_length_range=(20.0, 30.0), seed=7)
        for track, labels in generate_corpus(spec):
            segs = labels.segments
            assert segs[0][0].start == 0.0
            assert segs[-1][0].end == pytest.approx(track.duration, abs=1e-12)
            for (a, _), (b, _) in zip(segs, segs[1:]):
                assert b.start == a.end
            # every frame midpoint sits inside exactly one segment
            covered = sum(
                ((iv.start <= t) and (t < iv.end))
                for t in track.frame_times()
                for iv, _ in segs
            )
            assert covered == len(track)

    def test_noiseless_frames_recover_ground_truth(self):
        spec = CorpusSpec(
            n_tracks=2,
            track_length_range=(15.0, 20.0),
            class_distribution=ALL_BUT_AUG,
            noise_sigma=0.0,
            seed=11,
        )
        for track, labels in generate_corpus(spec):
            si = 0
            segs = labels.segments
            for j, t in enumerate(track.frame_times()):
                while segs[si][0].end <= t:
                    si += 1
                label = segs[si][1]
                expected = ("N", None) if not label.is_chord else (map_to_class(label), label.root)
                assert nearest_template(track.frames[j]) == expected

    def test_distribution_converges_on_long_corpus(self):
        # about two hours of generated audio at the published shares
        spec = CorpusSpec(n_tracks=96, noise_sigma=0.0, seed=17)
        corpus = generate_corpus(spec)
        total_s = sum(t.duration for t, _ in corpus)
        assert total_s >= 7000
        dist = type_distribution([labels for _, labels in corpus])
        for cls, share in DEFAULT_CLASS_DISTRIBUTION.items():
            assert abs(dist.get(cls, 0.0) - share) <= 0.02


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        spec = CorpusSpec(n_tracks=2, track_length_range=(12.0, 15.0), seed=3, track_prefix="rt")
        corpus = generate_corpus(spec)
        save_corpus(tmp_path / "corpus", corpus, spec)
        loaded, manifest = load_corpus(tmp_path / "corpus")
        assert manifest["format"] == MANIFEST_FORMAT
        assert manifest["tracks"] == ["rt-0000", "rt-0001"]
        assert manifest["spec"] == spec.to_dict()
        for (t0, l0), (t1, l1) in zip(corpus, loaded):
            assert t1.track_id == t0.track_id
            assert t1.frame_rate == t0.frame_rate
            np.testing.assert_allclose(t1.frames, t0.frames, atol=1e-9)  # CSV keeps 9 decimals
            assert l1 == l0

    def test_load_rejects_non_corpus(self, tmp_path):
        with pytest.raises(ValueError, match="manifest"):
            load_corpus(tmp_path)
        (tmp_path / "manifest.json").write_text(json.dumps({"format": "other"}))
        with pytest.raises(ValueError, match="format"):
            load_corpus(tmp_path)
