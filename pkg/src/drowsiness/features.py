"""Per-epoch feature vectors and min-max scaling.

Three feature modes are supported:

``EEG136``
    eight summary statistics for each of the 17 cleaned 60 Hz channels
    (channels in montage order, statistics in :data:`STAT_NAMES` order);
``PSD5``
    Welch band power per band, averaged over channels, on the notch-only
    200 Hz path (the 1-30 Hz path would erase the gamma band);
``PSD_EOG6``
    ``PSD5`` followed by the epoch's blink count.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from .dsp import TimeSeries, bandpass_filter
from .errors import ParameterError

STAT_NAMES = ("mean", "sd", "var", "p5", "q1", "median", "q3", "p95")
_PERCENTILES = (5.0, 25.0, 50.0, 75.0, 95.0)

MODES = ("EEG136", "PSD5", "PSD_EOG6")
MODE_WIDTH = {"EEG136": 136, "PSD5": 5, "PSD_EOG6": 6}

WELCH_SEGMENT = 400
WELCH_OVERLAP = 200
PSD_RATE_HZ = 200

BLINK_BAND = (0.5, 8.0)
BLINK_Z = 3.0
BLINK_REFRACTORY_S = 0.25
MAD_TO_SD = 1.4826


@dataclass(frozen=True)
class BandDefinition:
    name: str
    lo: float
    hi: float

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ParameterError(f"band {self.name}: need 0 < lo < hi, got ({self.lo}, {self.hi})")


DEFAULT_BANDS = (
    BandDefinition("delta", 1.0, 4.0),
    BandDefinition("theta", 4.0, 8.0),
    BandDefinition("alpha", 8.0, 14.0),
    BandDefinition("beta", 14.0, 31.0),
    BandDefinition("gamma", 31.0, 50.0),
)


def check_bands(bands) -> tuple:
    bands = tuple(bands)
    for prev, cur in zip(bands, bands[1:]):
        if cur.lo < prev.hi:
            raise ParameterError(f"bands {prev.name} and {cur.name} overlap or are out of order")
    return bands


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    rows: np.ndarray
    feature_names: tuple
    mode: str
    subject_ids: tuple
    epoch_index: np.ndarray = None
    perclos: np.ndarray = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ParameterError("feature rows must form a matrix")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "subject_ids", tuple(self.subject_ids))
        if self.mode not in MODES:
            raise ParameterError(f"unknown feature mode {self.mode!r}")
        if rows.shape[1] != MODE_WIDTH[self.mode] or len(self.feature_names) != rows.shape[1]:
            raise ParameterError(f"mode {self.mode} needs {MODE_WIDTH[self.mode]} columns, got {rows.shape[1]}")
        if len(self.subject_ids) != rows.shape[0]:
            raise ParameterError("subject_ids must have one entry per row")

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureMatrix(
            rows=self.rows[idx],
            feature_names=self.feature_names,
            mode=self.mode,
            subject_ids=tuple(self.subject_ids[i] for i in idx),
            epoch_index=None if self.epoch_index is None else self.epoch_index[idx],
            perclos=None if self.perclos is None else self.perclos[idx],
        )


@dataclass(frozen=True, eq=False)
class ScalerParams:
    min: np.ndarray
    max: np.ndarray


def channel_stats(x) -> np.ndarray:
    """mean, sd, var, p5, q1, median, q3, p95 of one channel.

    Population variance (divide by N); percentiles interpolate linearly at
    position ``(N - 1) p``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ParameterError("channel_stats needs a non-empty vector")
    # shifting by the first sample keeps constant inputs exact
    d = x - x[0]
    dm = d.mean()
    mean = x[0] + dm
    var = np.mean((d - dm) ** 2)
    pct = np.percentile(x, _PERCENTILES, method="linear")
    return np.array([mean, np.sqrt(var), var, *pct])


def welch_psd(x, rate_hz: float = PSD_RATE_HZ):
    """One-sided Welch density per column: 2 s periodic-Hann segments, 50 % overlap.

    Scaled so a unit-amplitude sinusoid integrates to 0.5 over frequency.
    """
    return signal.welch(
        x, fs=rate_hz, window="hann", nperseg=WELCH_SEGMENT, noverlap=WELCH_OVERLAP,
        detrend=False, scaling="density", axis=0,
    )


def band_powers(epoch200, bands=DEFAULT_BANDS, rate_hz: float = PSD_RATE_HZ) -> np.ndarray:
    """Mean PSD over bins with centre in ``[lo, hi)``, then averaged over channels."""
    x = np.asarray(epoch200, dtype=np.float64)
    n_expected = 8 * int(rate_hz)
    if x.ndim != 2 or x.shape[0] != n_expected:
        raise ParameterError(f"band_powers needs a [{n_expected} x channels] epoch, got {x.shape}")
    bands = check_bands(bands)
    freqs, pxx = welch_psd(x, rate_hz)
    out = np.empty(len(bands))
    for j, band in enumerate(bands):
        sel = (freqs >= band.lo) & (freqs < band.hi)
        if not np.any(sel):
            raise ParameterError(f"band {band.name} contains no PSD bins")
        out[j] = pxx[sel].mean(axis=0).mean()
    return out


def count_blinks(eog_epoch, rate_hz: float = PSD_RATE_HZ) -> int:
    """Blinks in one EOG epoch by robust-z peak picking.

    The trace is band-passed 0.5-8 Hz, scaled to ``(x - median) / (1.4826 MAD)``,
    and local maxima with z >= 3 at least 0.25 s apart are counted.
    """
    x = np.asarray(eog_epoch, dtype=np.float64)
    if x.size < 3 or not np.any(x):
        return 0
    y = bandpass_filter(TimeSeries(x, rate_hz), *BLINK_BAND).samples
    med = np.median(y)
    mad = np.median(np.abs(y - med))
    if mad == 0:
        return 0
    z = (y - med) / (MAD_TO_SD * mad)
    peaks, _ = signal.find_peaks(z, height=BLINK_Z, distance=max(1, int(round(BLINK_REFRACTORY_S * rate_hz))))
    return int(peaks.size)


def feature_names(mode: str, eeg_channels=None, bands=DEFAULT_BANDS) -> tuple:
    if mode == "EEG136":
        from .dataset import DEFAULT_EEG_CHANNELS

        channels = eeg_channels or DEFAULT_EEG_CHANNELS
        return tuple(f"{ch}_{stat}" for ch in channels for stat in STAT_NAMES)
    psd = tuple(f"psd_{b.name}" for b in bands)
    if mode == "PSD5":
        return psd
    if mode == "PSD_EOG6":
        return psd + ("eog_blinks",)
    raise ParameterError(f"unknown feature mode {mode!r}")


def assemble_features(epochs, mode: str, subject_id: str = "", eeg_channels=None, bands=DEFAULT_BANDS) -> FeatureMatrix:
    """Feature matrix with one row per epoch, in epoch order."""
    epochs = list(epochs)
    if not epochs:
        raise ParameterError("assemble_features needs at least one epoch")
    if mode not in MODES:
        raise ParameterError(f"unknown feature mode {mode!r}")
    rows = []
    for ep in epochs:
        if mode == "EEG136":
            if ep.eeg60 is None:
                raise ParameterError("EEG136 needs the cleaned 60 Hz path, which these epochs lack")
            x = np.asarray(ep.eeg60)
            rows.append(np.concatenate([channel_stats(x[:, c]) for c in range(x.shape[1])]))
        else:
            if ep.eeg200_notched is None:
                raise ParameterError(f"{mode} needs the notch-only 200 Hz path, which these epochs lack")
            row = band_powers(ep.eeg200_notched, bands)
            if mode == "PSD_EOG6":
                row = np.append(row, float(count_blinks(ep.eog200)))
            rows.append(row)
    names = feature_names(mode, eeg_channels, bands)
    return FeatureMatrix(
        rows=np.vstack(rows),
        feature_names=names,
        mode=mode,
        subject_ids=(subject_id,) * len(epochs),
        epoch_index=np.array([ep.epoch_index for ep in epochs], dtype=np.int64),
        perclos=np.array([ep.perclos for ep in epochs]),
    )


def minmax_fit(train) -> ScalerParams:
    rows = train.rows if isinstance(train, FeatureMatrix) else np.asarray(train, dtype=np.float64)
    if rows.shape[0] == 0:
        raise ParameterError("minmax_fit needs at least one row")
    return ScalerParams(min=rows.min(axis=0), max=rows.max(axis=0))


def minmax_apply(m, s: ScalerParams):
    """``(x - min) / (max - min)``; constant columns map to 0."""
    rows = m.rows if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != s.min.shape[0]:
        raise ParameterError(f"scaler has {s.min.shape[0]} features, matrix has {rows.shape[-1]}")
    span = s.max - s.min
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (rows - s.min) / safe, 0.0)
    if isinstance(m, FeatureMatrix):
        return FeatureMatrix(out, m.feature_names, m.mode, m.subject_ids, m.epoch_index, m.perclos)
    return out


def write_feature_csv(fm: FeatureMatrix, path) -> None:
    """``features_<mode>.csv``: feature columns then subject_id, epoch_index, perclos."""
    header = list(fm.feature_names) + ["subject_id", "epoch_index", "perclos"]
    lines = [",".join(header)]
    epoch_index = fm.epoch_index if fm.epoch_index is not None else np.arange(fm.n_rows)
    perclos = fm.perclos if fm.perclos is not None else np.full(fm.n_rows, np.nan)
    for row, sid, ei, pc in zip(fm.rows.tolist(), fm.subject_ids, epoch_index.tolist(), perclos.tolist()):
        lines.append(",".join(map(repr, row)) + f",{sid},{ei},{pc!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def concat_features(mats) -> FeatureMatrix:
    mats = list(mats)
    if not mats:
        raise ParameterError("nothing to concatenate")
    mode = mats[0].mode
    if any(m.mode != mode for m in mats):
        raise ParameterError("cannot concatenate feature matrices of different modes")
    return FeatureMatrix(
        rows=np.vstack([m.rows for m in mats]),
        feature_names=mats[0].feature_names,
        mode=mode,
        subject_ids=tuple(s for m in mats for s in m.subject_ids),
        epoch_index=np.concatenate([m.epoch_index for m in mats]),
        perclos=np.concatenate([m.perclos for m in mats]),
    )
