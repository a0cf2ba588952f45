"""Bias-aware graduate employment prediction.

Pipeline stages: per-major chi-square bias profiling, autoencoder embedding
of sparse semester grade matrices, adversarial minority-class augmentation,
and a gate-masked LSTM classifier trained under a pairwise bias
regularizer. Estimator classes follow the sklearn fit/transform/predict
conventions; the functional layer underneath is importable directly.
"""

from .autoencoder import (
    AcademicEmbedding,
    GradeAutoencoder,
    GradeMatrix,
    ae_forward,
    ae_train,
    build_c_matrix,
    embed_semesters,
)
from .bias import (
    BiasProfile,
    ChiSquareResult,
    ContingencyTable,
    bias_profile,
    bias_profiles,
    bias_report,
    chi_square_p,
    chi_square_test,
    contingency_table,
    p_value_weight,
)
from .classifier import (
    EmploymentLstm,
    SequenceModel,
    StudentSequence,
    TrainConfig,
    assemble_sequences,
    bias_penalty,
    bias_penalty_grad,
    l2_loss,
    predict_sequence,
    sequence_matrix,
    total_loss,
    total_loss_grads,
    train_classifier,
)
from .cohort import (
    ASPECTS,
    Cohort,
    GradeRecord,
    StudentRecord,
    SynthConfig,
    parse_cohort,
    read_cohort_dir,
    stratified_split,
    synth_cohort,
    uniform_bias_spec,
    write_cohort,
)
from .errors import NumericalError, ValidationError
from .experiments import ExperimentSpec, run_experiment
from .gan import AugmentedSet, GanConfig, GanParams, MinorityGan, balance, gan_train, generate
from .lstm import (
    LstmParams,
    MaskSet,
    backward,
    cell_forward,
    forward,
    identity_masks,
    init_lstm_params,
    predict_mode_forward,
    sample_masks,
)
from .metrics import MetricsReport, compute_metrics
from .pipeline import (
    ModelBundle,
    PipelineConfig,
    fit_pipeline,
    load_bundle,
    predict_cohort,
    save_bundle,
)

__version__ = "0.1.0"
