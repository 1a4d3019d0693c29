"""Motion-to-rhythm extraction and dance-music alignment toolkit."""

from .audio import (
    AudioClip,
    BeatList,
    OnsetEnvelope,
    TempoEstimate,
    beats_from_rhythm,
    estimate_tempo,
    onset_envelope,
    pick_beats,
    read_wav,
)
from .inversion import (
    EncoderParams,
    FrozenModel,
    ModelDims,
    Sample,
    TrainingConfig,
    assemble_prompt_embeddings,
    batch_loss,
    batch_loss_and_gradients,
    build_frozen,
    genre_encoder_forward,
    gradcheck,
    init_encoder_params,
    make_teacher_student_dataset,
    reconstruction_loss,
    rhythm_encoder_forward,
    train,
)
from .metrics import (
    AggregateReport,
    AlignmentReport,
    PhaseAlignment,
    aggregate_reports,
    f1_score,
    match_beats,
    phase_align,
    tempo_difference,
)
from .pose import (
    ClipSpec,
    PoseSequence,
    interpolate_low_confidence,
    parse_pose_file,
    segment_clips,
    serialize_pose_file,
)
from .rhythm import (
    DirectionalVelocity,
    DiscreteAcceleration,
    RhythmConfig,
    RhythmSequence,
    TotalAcceleration,
    VelocityField,
    compute_velocity,
    detect_kinematic_beats,
    direction_discretize,
    discrete_acceleration,
    extract_rhythm,
    total_acceleration,
)

__all__ = [
    "AudioClip",
    "BeatList",
    "OnsetEnvelope",
    "TempoEstimate",
    "beats_from_rhythm",
    "estimate_tempo",
    "onset_envelope",
    "pick_beats",
    "read_wav",
    "EncoderParams",
    "FrozenModel",
    "ModelDims",
    "Sample",
    "TrainingConfig",
    "assemble_prompt_embeddings",
    "batch_loss",
    "batch_loss_and_gradients",
    "build_frozen",
    "genre_encoder_forward",
    "gradcheck",
    "init_encoder_params",
    "make_teacher_student_dataset",
    "reconstruction_loss",
    "rhythm_encoder_forward",
    "train",
    "AggregateReport",
    "AlignmentReport",
    "PhaseAlignment",
    "aggregate_reports",
    "f1_score",
    "match_beats",
    "phase_align",
    "tempo_difference",
    "ClipSpec",
    "PoseSequence",
    "interpolate_low_confidence",
    "parse_pose_file",
    "segment_clips",
    "serialize_pose_file",
    "DirectionalVelocity",
    "DiscreteAcceleration",
    "RhythmConfig",
    "RhythmSequence",
    "TotalAcceleration",
    "VelocityField",
    "compute_velocity",
    "detect_kinematic_beats",
    "direction_discretize",
    "discrete_acceleration",
    "extract_rhythm",
    "total_acceleration",
]

__version__ = "0.1.0"
