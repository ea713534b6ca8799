"""Python bindings for the LogoRA C++ core."""

from ._core import (
    Dataset,
    LogoraError,
    Model,
    SynthConfig,
    dtw,
    dtw_brute_force,
    patch_count,
    patchify,
    synthesize,
    template_oracle_accuracy,
    train,
)

__all__ = [
    "Dataset",
    "LogoraError",
    "Model",
    "SynthConfig",
    "dtw",
    "dtw_brute_force",
    "patch_count",
    "patchify",
    "synthesize",
    "template_oracle_accuracy",
    "train",
]
