"""Python bindings for the farma controller-distillation toolkit."""

from ._farma import (
    ArmaController,
    ConfigError,
    DatasetTooShort,
    RankDeficient,
    StageError,
    blend,
    lmpc_step,
    membership,
    run_example,
    run_mpc,
    saturate,
    solve_qp,
    train_arma,
    wrap_pi,
)

__all__ = [
    "ArmaController",
    "ConfigError",
    "DatasetTooShort",
    "RankDeficient",
    "StageError",
    "blend",
    "lmpc_step",
    "membership",
    "run_example",
    "run_mpc",
    "saturate",
    "solve_qp",
    "train_arma",
    "wrap_pi",
]
