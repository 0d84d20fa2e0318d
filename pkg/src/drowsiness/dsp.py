"""Cleaning chain: 60 Hz notch, 1-30 Hz band-pass, 200 -> 60 Hz resampling, epochs.

Both IIR filters run forward then backward (zero phase). Signals may be 1-D or
2-D with time along axis 0, so a whole ``[n_samples x 17]`` block is filtered
in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .dataset import EPOCH_SECONDS
from .errors import AlignmentError, ParameterError

RESAMPLE_UP = 3
RESAMPLE_DOWN = 10
RESAMPLE_TAPS = 201
RESAMPLE_KAISER_BETA = 5.0


@dataclass(frozen=True, eq=False)
class TimeSeries:
    samples: np.ndarray
    rate_hz: float

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", x)
        if not self.rate_hz > 0:
            raise ParameterError(f"rate_hz must be positive, got {self.rate_hz}")
        if not np.all(np.isfinite(x)):
            raise ParameterError("samples must be finite")

    def __len__(self):
        return self.samples.shape[0]


@dataclass(frozen=True, eq=False)
class Epoch:
    """One 8 s window on both signal paths, with its PERCLOS label."""

    eeg60: np.ndarray  # [480 x 17] cleaned, 60 Hz
    eeg200_notched: np.ndarray  # [1600 x 17] notch only, 200 Hz
    eog200: np.ndarray  # [1600]
    epoch_index: int
    perclos: float


# ---------------------------------------------------------------------------
# filter design


def design_notch(f0: float, bandwidth: float, rate_hz: float) -> np.ndarray:
    """Second-order IIR notch as a single SOS row.

    Zeros sit on the unit circle at ``f0``; the pole radius follows from the
    -3 dB ``bandwidth`` (``Q = f0 / bandwidth``).
    """
    nyq = rate_hz / 2.0
    if not 0 < f0 < nyq:
        raise ParameterError(f"notch frequency {f0} Hz must lie in (0, {nyq}) Hz")
    if not bandwidth > 0:
        raise ParameterError(f"notch bandwidth must be positive, got {bandwidth}")
    b, a = signal.iirnotch(f0, f0 / bandwidth, fs=rate_hz)
    return np.concatenate([b, a])[None, :]


def design_bandpass(lo: float, hi: float, rate_hz: float, order: int = 4) -> np.ndarray:
    """Butterworth band-pass in SOS form (``order`` poles per band edge)."""
    nyq = rate_hz / 2.0
    if not 0 < lo < hi < nyq:
        raise ParameterError(f"band-pass edges must satisfy 0 < lo < hi < {nyq} Hz, got ({lo}, {hi})")
    return signal.butter(order, [lo, hi], btype="bandpass", fs=rate_hz, output="sos")


def design_resampler() -> np.ndarray:
    """Kaiser-windowed sinc low-pass at 30 Hz for the 600 Hz intermediate rate.

    Taps sum to 1 (resample_poly multiplies by the up factor).
    """
    rate_up = 200 * RESAMPLE_UP
    h = signal.firwin(RESAMPLE_TAPS, 30.0, fs=rate_up, window=("kaiser", RESAMPLE_KAISER_BETA))
    # each polyphase branch gets unit DC gain, so a constant input stays constant
    for r in range(RESAMPLE_UP):
        h[r::RESAMPLE_UP] /= RESAMPLE_UP * h[r::RESAMPLE_UP].sum()
    return h


def effective_length(sos: np.ndarray) -> int:
    """Samples for the slowest pole's impulse response to decay by 60 dB."""
    radii = [np.max(np.abs(np.roots(row[3:]))) if np.any(row[4:]) else 0.0 for row in sos]
    r = max(radii)
    if r <= 0:
        return 1
    return int(math.ceil(math.log(1e-3) / math.log(r)))


def magnitude_response(sos: np.ndarray, freqs, rate_hz: float, zero_phase: bool = True) -> np.ndarray:
    """|H| at ``freqs``; squared when the filter is applied forward-backward."""
    _, h = signal.sosfreqz(sos, worN=np.atleast_1d(np.asarray(freqs, dtype=float)), fs=rate_hz)
    mag = np.abs(h)
    return mag**2 if zero_phase else mag


def _filtfilt(sos: np.ndarray, x: TimeSeries) -> TimeSeries:
    n = len(x)
    if n == 0:
        return TimeSeries(x.samples.copy(), x.rate_hz)
    padlen = min(3 * effective_length(sos), n - 1)
    y = signal.sosfiltfilt(sos, x.samples, axis=0, padtype="odd" if padlen > 0 else None, padlen=padlen)
    return TimeSeries(y, x.rate_hz)


# ---------------------------------------------------------------------------
# chain stages


def notch_filter(x: TimeSeries, f0: float = 60.0, bandwidth: float = 2.0) -> TimeSeries:
    return _filtfilt(design_notch(f0, bandwidth, x.rate_hz), x)


def bandpass_filter(x: TimeSeries, lo: float = 1.0, hi: float = 30.0) -> TimeSeries:
    return _filtfilt(design_bandpass(lo, hi, x.rate_hz), x)


def resample_200_to_60(x: TimeSeries) -> TimeSeries:
    """Rational polyphase resampling by 3/10; output length ``floor(3n/10)``.

    The caller is expected to have band-limited the input below 30 Hz.
    """
    if x.rate_hz != 200:
        raise ParameterError(f"resample_200_to_60 needs a 200 Hz input, got {x.rate_hz} Hz")
    n = len(x)
    n_out = (n * RESAMPLE_UP) // RESAMPLE_DOWN
    if n == 0:
        return TimeSeries(np.zeros((0,) + x.samples.shape[1:]), 60.0)
    y = signal.resample_poly(
        x.samples, RESAMPLE_UP, RESAMPLE_DOWN, axis=0, window=design_resampler(), padtype="line"
    )
    return TimeSeries(y[:n_out], 60.0)


def split_epochs(cleaned60, notched200, eog200, perclos) -> list[Epoch]:
    """Cut both signal paths into aligned 8 s epochs, one per PERCLOS label.

    Label ``i`` covers ``[8 i, 8 (i + 1))`` seconds; a trailing partial epoch on
    either path is dropped. ``cleaned60=None`` builds notch-path-only epochs
    (``eeg60`` left as None), which is all the PSD feature modes need.
    """
    cleaned60 = None if cleaned60 is None else np.asarray(cleaned60, dtype=np.float64)
    notched200 = np.asarray(notched200, dtype=np.float64)
    eog200 = np.asarray(eog200, dtype=np.float64)
    perclos = np.asarray(perclos, dtype=np.float64)
    n60 = EPOCH_SECONDS * 60
    n200 = EPOCH_SECONDS * 200
    if eog200.shape[0] != notched200.shape[0]:
        raise AlignmentError(f"eog200 has {eog200.shape[0]} samples, notched200 has {notched200.shape[0]}")
    n_clean = None if cleaned60 is None else cleaned60.shape[0]
    count = min(len(perclos), notched200.shape[0] // n200)
    if cleaned60 is not None:
        count = min(count, n_clean // n60)
    if count == 0:
        raise AlignmentError(
            f"cannot form one epoch from {n_clean} samples at 60 Hz, "
            f"{notched200.shape[0]} at 200 Hz and {len(perclos)} labels"
        )
    epochs = []
    for i in range(count):
        epochs.append(
            Epoch(
                eeg60=None if cleaned60 is None else cleaned60[i * n60:(i + 1) * n60],
                eeg200_notched=notched200[i * n200:(i + 1) * n200],
                eog200=eog200[i * n200:(i + 1) * n200],
                epoch_index=i,
                perclos=float(perclos[i]),
            )
        )
    return epochs
