"""Exactly enumerable alignment objectives.

Thin Python surface over the C++ core: policies over an enumerable response
space, implicit rewards, the UNA loss family with DPO and Bradley-Terry
baselines, deterministic trainers, and the numeric oracle the whole library is
checked against.
"""

from una_lab._core import (
    Beta,
    BinaryLabel,
    CompareAs,
    Dataset,
    DifferenceLoss,
    Error,
    EvalRecord,
    ExplicitRewardModel,
    FeedbackKind,
    FeedbackRecord,
    LossKind,
    LossResult,
    PgEstimator,
    Policy,
    Prompt,
    Response,
    ResponseSet,
    SampledResponse,
    ScoreBounds,
    TrainConfig,
    TrainReport,
    Vocab,
    bt_probability,
    canonical_serialization,
    implicit_reward,
    implicit_score,
    ingest,
    kl_divergence,
    load_checkpoint,
    log_sigmoid,
    loss_dpo,
    loss_una_binary,
    loss_una_online,
    loss_una_pair,
    loss_una_score,
    normalize_score,
    oracle,
    response_probabilities,
    response_space_size,
    rm_accuracy,
    rm_loss,
    save_checkpoint,
    sigmoid,
    train_offline,
    train_online_una,
    train_policy_gradient_baseline,
    train_reward_model,
    unique_prompts,
    verify,
    write_dataset,
    write_metrics_csv,
)

__version__ = "0.1.0"

__all__ = [
    "Beta",
    "BinaryLabel",
    "CompareAs",
    "Dataset",
    "DifferenceLoss",
    "Error",
    "EvalRecord",
    "ExplicitRewardModel",
    "FeedbackKind",
    "FeedbackRecord",
    "LossKind",
    "LossResult",
    "PgEstimator",
    "Policy",
    "Prompt",
    "Response",
    "ResponseSet",
    "SampledResponse",
    "ScoreBounds",
    "TrainConfig",
    "TrainReport",
    "Vocab",
    "bt_probability",
    "canonical_serialization",
    "implicit_reward",
    "implicit_score",
    "ingest",
    "kl_divergence",
    "load_checkpoint",
    "log_sigmoid",
    "loss_dpo",
    "loss_una_binary",
    "loss_una_online",
    "loss_una_pair",
    "loss_una_score",
    "normalize_score",
    "oracle",
    "response_probabilities",
    "response_space_size",
    "rm_accuracy",
    "rm_loss",
    "save_checkpoint",
    "sigmoid",
    "train_offline",
    "train_online_una",
    "train_policy_gradient_baseline",
    "train_reward_model",
    "unique_prompts",
    "verify",
    "write_dataset",
    "write_metrics_csv",
]
