"""Dynamic per-subject PERCLOS discretization into three drowsiness levels.

Thresholds sit at fixed fractions of the subject's own PERCLOS range::

    th_minor = min + (max - min) * 0.125
    th_moder = min + (max - min) * 0.30

Intervals are half-open with the upper level winning at a boundary.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError, ValidationError

MINOR_FRACTION = 0.125
MODERATE_FRACTION = 0.30


class DrowsinessLevel(enum.IntEnum):
    Minor = 0
    Moderate = 1
    Severe = 2


LEVELS = tuple(DrowsinessLevel)


@dataclass(frozen=True)
class ThresholdPair:
    th_minor: float
    th_moder: float
    perclos_min: float
    perclos_max: float

    @property
    def degenerate(self) -> bool:
        return self.perclos_max == self.perclos_min


def compute_thresholds(perclos, minor_fraction: float = MINOR_FRACTION,
                       moderate_fraction: float = MODERATE_FRACTION) -> ThresholdPair:
    p = np.asarray(perclos, dtype=np.float64)
    if p.size == 0:
        raise ParameterError("compute_thresholds needs a non-empty PERCLOS series")
    if not np.all(np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise ValidationError("PERCLOS values must lie in [0, 1]")
    if not 0 <= minor_fraction <= moderate_fraction <= 1:
        raise ParameterError("need 0 <= minor_fraction <= moderate_fraction <= 1")
    lo = float(p.min())
    hi = float(p.max())
    span = hi - lo
    return ThresholdPair(
        th_minor=lo + span * minor_fraction,
        th_moder=lo + span * moderate_fraction,
        perclos_min=lo,
        perclos_max=hi,
    )


def discretize(perclos, t: ThresholdPair) -> np.ndarray:
    """Integer level codes (``DrowsinessLevel`` values) for each PERCLOS value."""
    p = np.asarray(perclos, dtype=np.float64)
    if t.degenerate:
        warnings.warn("PERCLOS series is constant; every epoch is labelled Severe", stacklevel=2)
    levels = np.full(p.shape, int(DrowsinessLevel.Minor), dtype=np.int64)
    levels[p >= t.th_minor] = int(DrowsinessLevel.Moderate)
    levels[p >= t.th_moder] = int(DrowsinessLevel.Severe)
    return levels


def write_thresholds_csv(rows, path) -> None:
    """``thresholds.csv``: one line per (subject_id, experiment_id, ThresholdPair)."""
    lines = ["subject_id,experiment_id,th_minor,th_moder,min,max"]
    for subject_id, experiment_id, t in rows:
        lines.append(
            f"{subject_id},{experiment_id},{t.th_minor!r},{t.th_moder!r},"
            f"{t.perclos_min!r},{t.perclos_max!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
