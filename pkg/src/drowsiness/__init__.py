"""Driver drowsiness estimation from EEG and EOG.

Pipeline: recordings (:mod:`dataset`) -> filtering and resampling (:mod:`dsp`)
-> blink-artifact removal (:mod:`ica`) -> epoch features (:mod:`features`)
-> PERCLOS levels (:mod:`labeling`) -> estimators (:mod:`models`)
-> evaluation schemes and reports (:mod:`evaluation`, :mod:`reporting`).
"""

from .dataset import Recording, SynthSpec, load_cohort, load_recording, synth_cohort, synth_recording, write_recording
from .errors import DrowsinessError
from .evaluation import SchemeSpec, classification_metrics, regression_metrics, run_scheme
from .labeling import DrowsinessLevel, ThresholdPair, compute_thresholds, discretize
from .models import EstimatorSpec, predict, train
from .pipeline import PipelineParams, prepare

__version__ = "0.1.0"

__all__ = [
    "Recording", "SynthSpec", "load_cohort", "load_recording", "synth_cohort", "synth_recording",
    "write_recording", "DrowsinessError", "SchemeSpec", "classification_metrics", "regression_metrics",
    "run_scheme", "DrowsinessLevel", "ThresholdPair", "compute_thresholds", "discretize",
    "EstimatorSpec", "predict", "train", "PipelineParams", "prepare",
]
