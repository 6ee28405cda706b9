from .lime import LimeConfig, SegmentAttribution, lime_explain, perturb, segment_uniform
from .shap import (
    ShapExplanation,
    SurrogateReport,
    fit_surrogate,
    global_shap,
    tree_shap,
)

__all__ = [
    "LimeConfig",
    "SegmentAttribution",
    "lime_explain",
    "perturb",
    "segment_uniform",
    "ShapExplanation",
    "SurrogateReport",
    "fit_surrogate",
    "global_shap",
    "tree_shap",
]
