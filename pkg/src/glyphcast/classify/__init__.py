from glyphcast.classify.api import expected_dim, predict, predict_batch, train, train_references
from glyphcast.classify.artifact import (
    decode_payload,
    encode_payload,
    model_from_bytes,
    model_to_bytes,
    read_model,
    write_model,
)
from glyphcast.classify.nets import GradCheckResult, gradient_check
from glyphcast.classify.specs import KIND_SPECS, KindSpec, default_hyperparams, validate_hyperparams

__all__ = [
    "KIND_SPECS",
    "GradCheckResult",
    "KindSpec",
    "decode_payload",
    "default_hyperparams",
    "encode_payload",
    "expected_dim",
    "gradient_check",
    "model_from_bytes",
    "model_to_bytes",
    "predict",
    "predict_batch",
    "read_model",
    "train",
    "train_references",
    "validate_hyperparams",
    "write_model",
]
