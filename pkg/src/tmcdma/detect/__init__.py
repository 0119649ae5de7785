"""Multiuser detectors and the change-of-basis helpers."""

from .basis import (ConstellationPoint, TransformationMatrix,
                    apply_transformation, build_change_of_basis,
                    compose_transformations, constellation)
from .detectors import (DEFAULT_K_MAX, DETECTOR_IDS, DetectorOutcome,
                        detect_conventional, detect_decorrelator, detect_ml,
                        detect_nd, hard_sign, ml_metric)
from .tm import TmCache, TmParams, detect_tm

__all__ = [
    "ConstellationPoint", "TransformationMatrix", "apply_transformation",
    "build_change_of_basis", "compose_transformations", "constellation",
    "DEFAULT_K_MAX", "DETECTOR_IDS", "DetectorOutcome", "detect_conventional",
    "detect_decorrelator", "detect_ml", "detect_nd", "hard_sign", "ml_metric",
    "TmCache", "TmParams", "detect_tm",
]
