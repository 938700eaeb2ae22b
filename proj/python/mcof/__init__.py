"""Weakly supervised semantic segmentation from image-level labels."""

from ._mcof import (
    IGNORE,
    UNLABELED,
    Error,
    bayes_posterior,
    evaluate,
    extract_seeds,
    mean_field,
    overlay,
    run,
    segment,
    synthetic,
)

__all__ = [
    "IGNORE",
    "UNLABELED",
    "Error",
    "bayes_posterior",
    "evaluate",
    "extract_seeds",
    "mean_field",
    "overlay",
    "run",
    "segment",
    "synthetic",
]
