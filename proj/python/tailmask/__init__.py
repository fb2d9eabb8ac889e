"""Masked curriculum training and evaluation for long-tailed video scene graphs."""

from ._core import (
    Dataset,
    MaskSchedule,
    MaskSet,
    SynthConfig,
    annotations_from_json,
    corrupt_severity_parameter,
    cross_entropy_with_grad,
    default_config_json,
    entropy,
    evaluate_frames,
    format_delta,
    generate_epoch_masks,
    masked_predicate_loss,
    masking_ratio,
    multilabel_margin_with_grad,
    run_eval,
    run_robust,
    run_train,
    sample_target_counts,
    smooth_l1_with_grad,
    synth_longtail_dataset,
    zipf_probabilities,
)

__all__ = [
    "Dataset",
    "MaskSchedule",
    "MaskSet",
    "SynthConfig",
    "annotations_from_json",
    "corrupt_severity_parameter",
    "cross_entropy_with_grad",
    "default_config_json",
    "entropy",
    "evaluate_frames",
    "format_delta",
    "generate_epoch_masks",
    "masked_predicate_loss",
    "masking_ratio",
    "multilabel_margin_with_grad",
    "run_eval",
    "run_robust",
    "run_train",
    "sample_target_counts",
    "smooth_l1_with_grad",
    "synth_longtail_dataset",
    "zipf_probabilities",
]
