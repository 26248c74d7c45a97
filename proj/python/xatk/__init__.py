"""One-step black-box attack on post-hoc explanations.

Thin Python surface over the C++ core. Images and attribution maps are
numpy float64 arrays of shape (height, width, channels).
"""

from xatk._core import (
    AttackOutcome,
    ConfigError,
    DataError,
    EpochStats,
    FormatError,
    LabeledDataset,
    MicroNet,
    ResultRow,
    Rng,
    ShapeError,
    choose_attack_targets,
    compute_attribution,
    dataset_load,
    dataset_save,
    explanation_change_pct,
    generate_toy_dataset,
    ppm_read,
    ppm_write,
    prediction_change,
    read_result_csv,
    run_attack,
    run_sweep,
    select_running_up,
    ssim,
    write_result_csv,
)

__all__ = [
    "AttackOutcome",
    "ConfigError",
    "DataError",
    "EpochStats",
    "FormatError",
    "LabeledDataset",
    "MicroNet",
    "ResultRow",
    "Rng",
    "ShapeError",
    "choose_attack_targets",
    "compute_attribution",
    "dataset_load",
    "dataset_save",
    "explanation_change_pct",
    "generate_toy_dataset",
    "ppm_read",
    "ppm_write",
    "prediction_change",
    "read_result_csv",
    "run_attack",
    "run_sweep",
    "select_running_up",
    "ssim",
    "write_result_csv",
]
