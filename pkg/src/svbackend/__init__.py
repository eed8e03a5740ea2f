"""Speaker-verification backend toolkit.

Post-embedding pipeline pieces: cosine trial scoring with adaptive
s-normalization, quality- and language-aware logistic-regression
calibration to log-likelihood-ratios, EER/MinDCF evaluation, calibration
trial construction, cross-lingual mini-batch planning, and a seeded
synthetic world generator for end-to-end validation.
"""

from .calibration import CalibrationModel, FitConfig
from .data import (
    EmbeddingTable,
    Gender,
    Label,
    PosteriorTable,
    ScoredTrial,
    Trial,
    Utterance,
)
from .metrics import DcfParams
from .sampler import BatchPlan, SamplerConfig
from .scoring import Cohort, SNormConfig
from .synthgen import World, WorldConfig
from .trials import TrialBuildConfig

__version__ = "0.1.0"

__all__ = [
    "BatchPlan",
    "CalibrationModel",
    "Cohort",
    "DcfParams",
    "EmbeddingTable",
    "FitConfig",
    "Gender",
    "Label",
    "PosteriorTable",
    "SNormConfig",
    "SamplerConfig",
    "ScoredTrial",
    "Trial",
    "TrialBuildConfig",
    "Utterance",
    "World",
    "WorldConfig",
    "__version__",
]
