"""Per-kind hyperparameter registry: required keys, defaults and value rules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, Mapping, Optional, Union

import numpy as np

from glyphcast.core import FeatureMode, ModelError, ModelKind
from glyphcast.features import DEFAULT_ANGULAR_BINS, DEFAULT_RADIAL_BINS

_ALL_MODES = frozenset(FeatureMode)


@dataclass(frozen=True)
class KindSpec:
    required: FrozenSet[str]
    defaults: Mapping[str, Any]
    optional: FrozenSet[str] = frozenset()
    positive_int: FrozenSet[str] = frozenset()   # must be integers >= 1
    positive_real: FrozenSet[str] = frozenset()  # must be finite reals > 0
    feature_modes: FrozenSet[FeatureMode] = _ALL_MODES
    extra_policy: str = "error"                  # ignore | error


KIND_SPECS: Dict[ModelKind, KindSpec] = {
    ModelKind.KNN: KindSpec(
        required=frozenset({"k"}),
        defaults={"k": 5},
        positive_int=frozenset({"k"}),
    ),
    ModelKind.SVM: KindSpec(
        required=frozenset({"lambda", "epochs"}),
        defaults={"lambda": 1e-4, "epochs": 50},
        positive_int=frozenset({"epochs"}),
        positive_real=frozenset({"lambda"}),
    ),
    ModelKind.RF: KindSpec(
        required=frozenset({"trees"}),
        defaults={"trees": 100},
        optional=frozenset({"min_leaf", "max_depth"}),
        positive_int=frozenset({"trees", "min_leaf"}),
    ),
    ModelKind.MLP: KindSpec(
        required=frozenset({"batch", "lr", "epochs"}),
        defaults={"batch": 256, "lr": 1e-3, "epochs": 10},
        optional=frozenset({"hidden"}),
        positive_int=frozenset({"batch", "epochs"}),
        positive_real=frozenset({"lr"}),
    ),
    ModelKind.CNN: KindSpec(
        required=frozenset({"batch", "lr", "epochs"}),
        defaults={"batch": 256, "lr": 1e-3, "epochs": 10},
        optional=frozenset({"channels", "dense"}),
        positive_int=frozenset({"batch", "epochs", "dense"}),
        positive_real=frozenset({"lr"}),
        feature_modes=frozenset({FeatureMode.RAW}),
    ),
    ModelKind.AISS: KindSpec(
        required=frozenset({"radial_bins", "angular_bins"}),
        defaults={"radial_bins": DEFAULT_RADIAL_BINS, "angular_bins": DEFAULT_ANGULAR_BINS},
        positive_int=frozenset({"radial_bins", "angular_bins"}),
        feature_modes=frozenset({FeatureMode.LOGPOLAR}),
    ),
}

def default_hyperparams(
    kind: Union[str, ModelKind], overrides: Optional[Mapping[str, Any]] = None
) -> Dict[str, Any]:
    """Built-in defaults for ``kind`` updated with ``overrides`` (e.g. configs/model.json)."""

    spec = KIND_SPECS[ModelKind.parse(kind)]
    hp = dict(spec.defaults)
    hp.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return hp


def validate_hyperparams(
    kind: Union[str, ModelKind], hyperparams: Mapping[str, Any]
) -> Dict[str, Any]:
    k = ModelKind.parse(kind)
    spec = KIND_SPECS[k]
    hp = dict(hyperparams)
    for key in sorted(spec.required):
        if key not in hp or hp[key] in (None, ""):
            raise ModelError(
                f"missing hyperparameter {key!r} for {k.value}", error_type="missing_param"
            )
    if spec.extra_policy == "error":
        unknown = sorted(set(hp) - spec.required - spec.optional)
        if unknown:
            raise ModelError(f"unknown hyperparameter(s) for {k.value}: {', '.join(unknown)}")
    for key in spec.positive_int:
        if key not in hp:
            continue
        value = hp[key]
        if isinstance(value, bool) or not float(value).is_integer() or int(value) < 1:
            raise ModelError(f"hyperparameter {key!r} must be a positive integer, got {value!r}")
        hp[key] = int(value)
    for key in spec.positive_real:
        if key not in hp:
            continue
        value = float(hp[key])
        if not np.isfinite(value) or value <= 0:
            raise ModelError(f"hyperparameter {key!r} must be positive, got {hp[key]!r}")
        hp[key] = value
    return hp

