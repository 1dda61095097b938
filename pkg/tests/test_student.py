"""Toy softmax classifier: training determinism, smoothing, serialization."""

import numpy as np
import pytest

from chordbalance.chords import CHORD_CLASSES, map_to_class, parse_chord_label
from chordbalance.annotations import Interval, TimedLabelSequence
from chordbalance.student import (
    ClassifierModel,
    FeatureTrack,
    PredictedSegments,
    TrainParams,
    default_model_classes,
    frame_accuracy,
    frame_targets,
    init_model,
    load_model,
    model_class_names,
    predict_segments,
    save_model,
    train,
)
from chordbalance.synth import CorpusSpec, generate_corpus


def clean_corpus(n_tracks=6, seed=3):
    spec = CorpusSpec(
        n_tracks=n_tracks,
        track_length_range=(40.0, 60.0),
        noise_sigma=0.0,
        seed=seed,
        track_prefix="clean",
    )
    return generate_corpus(spec)


def noisy_corpus(n_tracks=6, seed=9, sigma=0.3):
    spec = CorpusSpec(
        n_tracks=n_tracks,
        track_length_range=(25.0, 40.0),
        noise_sigma=sigma,
        seed=seed,
        track_prefix="noisy",
    )
    return generate_corpus(spec)


class TestFeatureTrack:
    def test_duration_and_frame_times(self):
        track = FeatureTrack("t", np.zeros((10, 12)), frame_rate=10.0)
        assert len(track) == 10
        assert track.duration == 1.0
        np.testing.assert_allclose(track.frame_times(), np.arange(10) / 10 + 0.05)

    @pytest.mark.parametrize(
        "frames,rate",
        [
            (np.zeros((4, 11)), 10.0),
            (np.zeros(12), 10.0),
            (np.full((2, 12), np.nan), 10.0),
            (np.zeros((2, 12)), 0.0),
        ],
    )
    def test_validation(self, frames, rate):
        with pytest.raises(ValueError):
            FeatureTrack("t", frames, frame_rate=rate)


class TestModelClasses:
    def test_default_list(self):
        classes = default_model_classes()
        assert len(classes) == 109  # 9 chord classes at 12 roots, plus N
        assert classes[-1] == "N"
        assert len(set(classes)) == 109
        for name in classes:
            label = parse_chord_label(name)
            assert map_to_class(label) in CHORD_CLASSES

    def test_model_class_names_subset(self):
        names = model_class_names(["maj", "min"])
        assert len(names) == 25
        assert names[0] == "C:maj" and names[12] == "C:min" and names[-1] == "N"


class TestClassifierModel:
    def test_validation(self):
        with pytest.raises(ValueError, match="contain N"):
            ClassifierModel(("C:maj",), np.zeros((1, 13)))
        with pytest.raises(ValueError, match="duplicate"):
            ClassifierModel(("N", "N"), np.zeros((2, 13)))
        with pytest.raises(ValueError, match="shape"):
            ClassifierModel(("C:maj", "N"), np.zeros((2, 12)))
        with pytest.raises(ValueError, match="finite"):
            ClassifierModel(("C:maj", "N"), np.full((2, 13), np.inf))

    def test_posteriors_are_distributions(self):
        model = init_model(default_model_classes(), TrainParams(seed=4))
        probs = model.posteriors(np.random.default_rng(0).normal(0, 1, (20, 12)))
        assert probs.shape == (20, 109)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert (probs > 0).all()


class TestFrameTargets:
    def test_alignment_and_gap_fill(self):
        classes = ("C:maj", "D:min", "N")
        track = FeatureTrack("t", np.zeros((10, 12)), frame_rate=10.0)
        labels = TimedLabelSequence.build(
            "t", [(Interval(0.0, 0.5), parse_chord_label("C:maj"))]
        )
        targets = frame_targets(track, labels, classes)
        np.testing.assert_array_equal(targets, [0, 0, 0, 0, 0, 2, 2, 2, 2, 2])

    def test_unknown_reference_folds_to_n(self):
        classes = ("C:maj", "N")
        track = FeatureTrack("t", np.zeros((4, 12)), frame_rate=10.0)
        labels = TimedLabelSequence.build(
            "t", [(Interval(0.0, 0.4), parse_chord_label("X"))]
        )
        np.testing.assert_array_equal(frame_targets(track, labels, classes), [1, 1, 1, 1])

    def test_root_specific_targets(self):
        classes = ("C:maj", "D:maj", "N")
        track = FeatureTrack("t", np.zeros((4, 12)), frame_rate=10.0)
        labels = TimedLabelSequence.build(
            "t", [(Interval(0.0, 0.4), parse_chord_label("D:maj6"))]
        )
        # maj6 reduces to the maj class at root D
        np.testing.assert_array_equal(frame_targets(track, labels, classes), [1, 1, 1, 1])


class TestTrain:
    def test_noiseless_corpus_trains_to_high_accuracy(self):
        corpus = clean_corpus()
        result = train(corpus, TrainParams(learning_rate=5.0, epochs=200, seed=0))
        assert frame_accuracy(result.model, corpus) >= 0.99
        assert result.epochs_run == 200
        assert len(result.train_losses) == 200
        assert result.val_losses is None

    def test_zero_epochs_returns_init(self):
        corpus = clean_corpus(n_tracks=2)
        params = TrainParams(epochs=0, seed=7)
        result = train(corpus, params)
        np.testing.assert_array_equal(result.model.weights, init_model(default_model_classes(), params).weights)
        assert result.epochs_run == 0

    def test_same_seed_is_bit_identical(self):
        corpus = clean_corpus(n_tracks=3)
        params = TrainParams(learning_rate=2.0, epochs=40, seed=21)
        a = train(corpus, params)
        b = train(corpus, params)
        np.testing.assert_array_equal(a.model.weights, b.model.weights)
        assert a.train_losses == b.train_losses

    def test_focal_gamma_zero_matches_cross_entropy(self):
        corpus = noisy_corpus(n_tracks=3)
        ce = train(corpus, TrainParams(learning_rate=2.0, epochs=30, seed=5, loss="cross_entropy"))
        fl = train(corpus, TrainParams(learning_rate=2.0, epochs=30, seed=5, loss="focal", gamma=0.0))
        np.testing.assert_array_equal(ce.model.weights, fl.model.weights)
        assert ce.train_losses == fl.train_losses

    def test_training_reduces_loss(self):
        corpus = noisy_corpus(n_tracks=4)
        result = train(corpus, TrainParams(learning_rate=2.0, epochs=60, seed=2, loss="focal", gamma=2.0))
        assert result.final_loss < result.train_losses[0]

    def test_empty_corpus_raises(self):
        with pytest.raises(ValueError):
            train([], TrainParams())

    def test_param_validation(self):
        with pytest.raises(ValueError):
            TrainParams(loss="hinge")
        with pytest.raises(ValueError):
            TrainParams(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainParams(epochs=-1)
        with pytest.raises(ValueError):
            TrainParams(patience=0)


class TestEarlyStopping:
    def test_requires_both_validation_and_patience(self):
        corpus = noisy_corpus(n_tracks=3)
        val = noisy_corpus(n_tracks=2, seed=10)
        no_patience = train(corpus, TrainParams(epochs=10, seed=1), validation=val)
        assert no_patience.val_losses is None
        no_val = train(corpus, TrainParams(epochs=10, seed=1, patience=3))
        assert no_val.val_losses is None

    def test_stops_and_restores_best_weights(self):
        corpus = noisy_corpus(n_tracks=2, sigma=0.5)
        val = noisy_corpus(n_tracks=2, seed=10, sigma=0.5)
        params = TrainParams(learning_rate=60.0, epochs=300, seed=1, patience=5)
        result = train(corpus, params, validation=val)
        assert result.val_losses is not None
        assert result.epochs_run <= params.epochs
        best = int(np.argmin(result.val_losses)) + 1
        assert result.epochs_run == best
        if len(result.val_losses) < params.epochs:  # patience actually fired
            assert len(result.val_losses) == best + params.patience
        assert min(result.val_losses) == result.val_losses[result.epochs_run - 1]


class TestPredictSegments:
    def arrow_model(self):
        # logits pick the chroma bin each class row points at
        classes = ("C:maj", "D:min", "N")
        weights = np.zeros((3, 13))
        weights[0, 0] = 4.0
        weights[1, 2] = 4.0
        weights[2, 5] = 4.0
        return ClassifierModel(classes, weights)

    def frames_for(self, indices):
        bins = {0: 0, 1: 2, 2: 5}
        frames = np.zeros((len(indices), 12))
        for i, cls in enumerate(indices):
            frames[i, bins[cls]] = 1.0
        return FeatureTrack("t", frames, frame_rate=10.0)

    def test_constant_track_single_segment(self):
        track = self.frames_for([0] * 8)
        pred = predict_segments(self.arrow_model(), track)
        assert len(pred.sequence.segments) == 1
        iv, label = pred.sequence.segments[0]
        assert (iv.start, iv.end) == (0.0, 0.8)
        assert label == parse_chord_label("C:maj")

    def test_window_one_is_raw_argmax_runs(self):
        track = self.frames_for([0, 0, 0, 1, 0, 0, 0, 0, 1, 1])
        pred = predict_segments(self.arrow_model(), track, smoothing_window=1)
        labels = [str(lab) for _, lab in pred.sequence.segments]
        assert labels == ["C:maj", "D:min", "C:maj", "D:min"]

    def test_window_five_removes_isolated_flip(self):
        # hand trace: median of [0,0,0,1,0,0,0,0,1,1] over 5 frames
        # with edge replication gives [0]*8 + [1,1]
        track = self.frames_for([0, 0, 0, 1, 0, 0, 0, 0, 1, 1])
        pred = predict_segments(self.arrow_model(), track, smoothing_window=5)
        segs = pred.sequence.segments
        assert len(segs) == 2
        assert (segs[0][0].start, segs[0][0].end) == (0.0, 0.8)
        assert str(segs[0][1]) == "C:maj"
        assert (segs[1][0].start, segs[1][0].end) == (0.8, 1.0)
        assert str(segs[1][1]) == "D:min"

    def test_output_tiles_track_exactly(self):
        corpus = noisy_corpus(n_tracks=4)
        model = train(corpus[:2], TrainParams(learning_rate=2.0, epochs=30, seed=3)).model
        for track, _ in corpus:
            for window in (1, 5):
                pred = predict_segments(model, track, smoothing_window=window)
                segs = pred.sequence.segments
                assert segs[0][0].start == 0.0
                assert segs[-1][0].end == pytest.approx(track.duration, abs=1e-12)
                for (a, _), (b, _) in zip(segs, segs[1:]):
                    assert b.start == a.end

    def test_confidence_bounds(self):
        corpus = noisy_corpus(n_tracks=3)
        model = train(corpus[:2], TrainParams(learning_rate=2.0, epochs=30, seed=3)).model
        floor = 1.0 / len(model.classes)
        for track, _ in corpus:
            raw = predict_segments(model, track, smoothing_window=1)
            # without smoothing every frame's argmax posterior beats chance
            assert all(floor - 1e-12 <= c <= 1.0 for c in raw.confidences)
            smoothed = predict_segments(model, track, smoothing_window=5)
            assert all(0.0 <= c <= 1.0 for c in smoothed.confidences)

    def test_smoothing_never_beats_raw_segment_count(self):
        corpus = noisy_corpus(n_tracks=5)
        model = train(corpus[:3], TrainParams(learning_rate=2.0, epochs=50, seed=9)).model
        for track, _ in corpus:
            base = len(predict_segments(model, track, 1).sequence.segments)
            for window in (3, 5, 7, 9):
                assert len(predict_segments(model, track, window).sequence.segments) <= base

    def test_input_validation(self):
        model = self.arrow_model()
        with pytest.raises(ValueError):
            predict_segments(model, FeatureTrack("t", np.zeros((0, 12))))
        track = self.frames_for([0, 1])
        for window in (0, 2, -3):
            with pytest.raises(ValueError):
                predict_segments(model, track, smoothing_window=window)


class TestPredictedSegments:
    def test_validation(self):
        seq = TimedLabelSequence.build("t", [(Interval(0, 1), parse_chord_label("C:maj"))])
        with pytest.raises(ValueError):
            PredictedSegments(seq, (0.5, 0.6))
        with pytest.raises(ValueError):
            PredictedSegments(seq, (1.5,))


class TestSerialization:
    def test_round_trip(self, tmp_path):
        corpus = clean_corpus(n_tracks=2)
        params = TrainParams(learning_rate=2.0, epochs=25, seed=6, loss="focal", gamma=1.0, patience=None)
        trained = train(corpus, params).model
        path = tmp_path / "model.json"
        save_model(trained, path)
        loaded = load_model(path)
        assert loaded.classes == trained.classes
        np.testing.assert_array_equal(loaded.weights, trained.weights)
        assert loaded.params.to_dict() == trained.params.to_dict()

    def test_loaded_model_predicts_identically(self, tmp_path):
        corpus = noisy_corpus(n_tracks=2)
        trained = train(corpus, TrainParams(learning_rate=2.0, epochs=20, seed=8)).model
        path = tmp_path / "model.json"
        save_model(trained, path)
        loaded = load_model(path)
        track = corpus[0][0]
        a = predict_segments(trained, track, 5)
        b = predict_segments(loaded, track, 5)
        assert a.sequence == b.sequence
        assert a.confidences == b.confidences
