"""Class-imbalance mitigation toolkit for automatic chord recognition.

Pieces: a chord label model with a closed evaluation vocabulary,
duration-weighted metrics that surface rare-class behaviour, focal loss,
balanced pseudolabel excerpt selection, label-preserving augmentation, a
synthetic chroma corpus generator, a small deterministic classifier and
a self-training experiment driver tying it all together.
"""

from .annotations import (
    Interval,
    LabFormatError,
    TimedLabelSequence,
    matched_duration,
    merge_intervals,
    read_lab,
    read_lab_file,
    reference_duration,
    write_lab,
    write_lab_file,
)
from .augment import AugmentSpec, add_noise, derive_seed, pitch_shift
from .chords import (
    CHORD_CLASSES,
    ChordLabel,
    ChordParseError,
    NO_CHORD,
    UNKNOWN,
    label_to_string,
    map_to_class,
    parse_chord_label,
    transpose,
)
from .focal import FocalParams, focal_loss, focal_loss_grad, sequence_loss
from .metrics import (
    MetricsReport,
    PerTypeLedger,
    TrackPair,
    acqa,
    compute_report,
    csr,
    type_distribution,
    wcsr,
    wcsr_per_type,
)
from .pipeline import ExperimentConfig, IterationReport, PipelineError, compare_runs, run_experiment
from .selection import (
    ExcerptDataset,
    SelectionConfig,
    SelectionReport,
    compute_desired_duration,
    distribution_of_selection,
    select_balanced_subset,
)
from .student import (
    ClassifierModel,
    FeatureTrack,
    PredictedSegments,
    TrainParams,
    predict_segments,
    train,
)
from .synth import CorpusSpec, generate_corpus, load_corpus, save_corpus

__version__ = "0.1.0"
