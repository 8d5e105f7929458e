"""Detection-based object tracking and verb labelling of short videos."""

__version__ = "0.1.0"

from .config import PipelineConfig
from .corpus_io import (
                        DetectionBox,
                        DetectionStream,
                        FeatureSeries,
                        MotionField,
                        SourceInfo,
                        Track,
)
from .errors import VerbTrackError
from .pipeline import track_video

__all__ = [
                        "DetectionBox",
                        "DetectionStream",
                        "FeatureSeries",
                        "MotionField",
                        "PipelineConfig",
                        "SourceInfo",
                        "Track",
                        "VerbTrackError",
                        "__version__",
                        "track_video",
]
