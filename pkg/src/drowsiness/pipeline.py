"""Recording -> epochs -> features, with the full cleaning chain.

The EEG is notch filtered at 200 Hz; that notch-only signal feeds the PSD
features. The cleaned path continues with the 1-30 Hz band-pass, resampling
to 60 Hz and ICA blink removal (fitted once per recording), and feeds the
EEG statistics. The ICA step is only run when a mode needs it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dsp, features, ica, labeling
from .dataset import Recording
from .errors import DrowsinessError, ParameterError


@dataclass(frozen=True)
class PipelineParams:
    notch_f0: float = 60.0
    notch_bandwidth: float = 2.0
    band_lo: float = 1.0
    band_hi: float = 30.0
    ica_seed: int = 0
    ica_max_iter: int = 500
    ica_tol: float = 1e-5
    ica_r_threshold: float = 0.6
    bands: tuple = features.DEFAULT_BANDS
    minor_fraction: float = labeling.MINOR_FRACTION
    moderate_fraction: float = labeling.MODERATE_FRACTION


@dataclass
class Prepared:
    """Everything derived from one recording."""

    recording: Recording
    epochs: list
    thresholds: labeling.ThresholdPair
    ica: ica.IcaDecomposition | None = None
    flagged: set = field(default_factory=set)
    features: dict = field(default_factory=dict)

    @property
    def key(self):
        return self.recording.key

    def labels(self) -> np.ndarray:
        return labeling.discretize([ep.perclos for ep in self.epochs], self.thresholds)

    def perclos(self) -> np.ndarray:
        return np.array([ep.perclos for ep in self.epochs])


def clean_eeg(rec: Recording, params: PipelineParams = PipelineParams()):
    """Return ``(notched200, cleaned60, decomposition, flagged)`` for a recording."""
    if rec.sample_rate_hz != 200:
        raise ParameterError(f"the cleaning chain expects 200 Hz recordings, got {rec.sample_rate_hz} Hz")
    notched = dsp.notch_filter(dsp.TimeSeries(rec.eeg, rec.sample_rate_hz), params.notch_f0, params.notch_bandwidth)
    banded = dsp.bandpass_filter(notched, params.band_lo, params.band_hi)
    eeg60 = dsp.resample_200_to_60(banded).samples
    eog = dsp.TimeSeries(rec.eog_vertical, rec.sample_rate_hz)
    eog60 = dsp.resample_200_to_60(dsp.bandpass_filter(eog, params.band_lo, params.band_hi)).samples
    dec = ica.fit_fastica(eeg60, seed=params.ica_seed, max_iter=params.ica_max_iter, tol=params.ica_tol)
    flagged = ica.flag_artifact_components(dec, eog60, params.ica_r_threshold)
    cleaned = ica.reconstruct_without(dec, flagged)
    return notched.samples, cleaned, dec, flagged


def prepare(rec: Recording, modes, params: PipelineParams = PipelineParams()) -> Prepared:
    """Epochs, thresholds and the requested feature matrices for ``rec``."""
    modes = tuple(modes)
    for m in modes:
        if m not in features.MODES:
            raise ParameterError(f"unknown feature mode {m!r}")
    try:
        dec = None
        flagged = set()
        if "EEG136" in modes:
            notched, cleaned, dec, flagged = clean_eeg(rec, params)
        else:
            notched = dsp.notch_filter(
                dsp.TimeSeries(rec.eeg, rec.sample_rate_hz), params.notch_f0, params.notch_bandwidth
            ).samples
            cleaned = None
        epochs = dsp.split_epochs(cleaned, notched, rec.eog_vertical, rec.perclos)
        thresholds = labeling.compute_thresholds(rec.perclos, params.minor_fraction, params.moderate_fraction)
        prepared = Prepared(rec, epochs, thresholds, dec, flagged)
        for m in modes:
            prepared.features[m] = features.assemble_features(
                epochs, m, subject_id=rec.subject_id, eeg_channels=rec.eeg_channels, bands=params.bands
            )
    except DrowsinessError as exc:
        raise exc.with_context(rec.key) from exc
    return prepared
