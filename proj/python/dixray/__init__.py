"""Path-integrated explanation maps for vision models.

Thin re-export of the compiled core. The heavy lifting lives in the C++
library; this package exposes the model handles, map construction, rollout
variants, metrics, and map serialization.
"""

from dixray._dix import (
    AddressingError,
    CapabilityError,
    ConfigurationError,
    ExplanationMap,
    FormatError,
    LoadError,
    Model,
    NumericalError,
    ProtocolFailure,
    attention_rollout,
    gradient_rollout,
    integrated_gradients,
    layer_map,
    make_linear_model,
    make_reference_model,
    normalize_map,
    perturbation_auc,
    preset_map,
    preset_names,
    read_map,
    segmentation_scores,
    spearman,
    write_map,
)

__all__ = [
    "AddressingError",
    "CapabilityError",
    "ConfigurationError",
    "ExplanationMap",
    "FormatError",
    "LoadError",
    "Model",
    "NumericalError",
    "ProtocolFailure",
    "attention_rollout",
    "gradient_rollout",
    "integrated_gradients",
    "layer_map",
    "make_linear_model",
    "make_reference_model",
    "normalize_map",
    "perturbation_auc",
    "preset_map",
    "preset_names",
    "read_map",
    "segmentation_scores",
    "spearman",
    "write_map",
]

__version__ = "0.1.0"
