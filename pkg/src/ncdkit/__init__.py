"""ncdkit: joint-optimization novel-category discovery on synthetic
multi-view data, with exact desk-scale gradients and clustering evaluation."""

__version__ = "0.1.0"

from ncdkit.core import (
    ConfigError,
    DatasetSpec,
    Example,
    ForwardOutput,
    Hyperparams,
    InputError,
    NumericError,
    cosine_similarity,
    sharpen,
    softmax,
)

__all__ = [
    "ConfigError",
    "DatasetSpec",
    "Example",
    "ForwardOutput",
    "Hyperparams",
    "InputError",
    "NumericError",
    "cosine_similarity",
    "sharpen",
    "softmax",
    "__version__",
]
