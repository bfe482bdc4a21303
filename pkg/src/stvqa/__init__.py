"""No-reference video quality features from space-time chips and natural-statistics fits."""

from .config import PipelineConfig
from .errors import StvqaError
from .pipeline import Extractor, extract_features
from .schema import FEATURE_NAMES, N_FEATURES, FeatureVector

__all__ = [
    "FEATURE_NAMES",
    "N_FEATURES",
    "Extractor",
    "FeatureVector",
    "PipelineConfig",
    "StvqaError",
    "extract_features",
]

__version__ = "0.1.0"
