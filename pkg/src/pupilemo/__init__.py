"""Pupil-diameter emotion recognition: ingest, cleaning, windowed features,
mRMR selection, multinomial gradient boosting and evaluation."""

from pupilemo.labels import LABELS, EmotionLabel

__version__ = "0.1.0"
MODEL_FORMAT_VERSION = 1

__all__ = ["LABELS", "EmotionLabel", "__version__", "MODEL_FORMAT_VERSION"]
