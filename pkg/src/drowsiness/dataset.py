"""Recordings: in-memory type, CSV interchange format, and a seeded synthesizer.

A recording directory holds four files::

    manifest.json   subject_id, experiment_id, sample_rate_hz,
                    eeg_channels (17 names), eog_channel
    eeg.csv         header = EEG channel names, one row per sample
    eog.csv         header = EOG channel name, one row per sample
    labels.csv      header "epoch_index,perclos", one row per 8 s epoch

Text is UTF-8 with LF line endings and '.' as decimal point. Floats are
written with Python's shortest round-trip repr, so ``load(write(r)) == r``
holds bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AlignmentError, FormatError, RecordingIOError, ValidationError

EPOCH_SECONDS = 8
N_EEG_CHANNELS = 17

# 10-20 montage of the 17-channel driving-simulator recordings.
DEFAULT_EEG_CHANNELS = (
    "FT7", "FT8", "T7", "T8", "TP7", "TP8", "CP1", "CP2", "P1",
    "PZ", "P2", "PO3", "POZ", "PO4", "O1", "OZ", "O2",
)
DEFAULT_EOG_CHANNEL = "VEO"

BLINK_PEAK_UV = 150.0


@dataclass(frozen=True, eq=False)
class Recording:
    """17-channel EEG plus vertical EOG with one PERCLOS value per epoch.

    ``channel_names`` lists the 17 EEG names followed by the EOG name.
    """

    subject_id: str
    experiment_id: str
    sample_rate_hz: int
    channel_names: tuple
    eeg: np.ndarray
    eog_vertical: np.ndarray
    perclos: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        object.__setattr__(self, "eeg", np.asarray(self.eeg, dtype=np.float64))
        object.__setattr__(self, "eog_vertical", np.asarray(self.eog_vertical, dtype=np.float64))
        object.__setattr__(self, "perclos", np.asarray(self.perclos, dtype=np.float64))
        for name in ("eeg", "eog_vertical", "perclos"):
            getattr(self, name).setflags(write=False)
        self._validate()

    def _validate(self):
        if not isinstance(self.sample_rate_hz, (int, np.integer)) or self.sample_rate_hz <= 0:
            raise ValidationError(f"sample_rate_hz must be a positive integer, got {self.sample_rate_hz!r}")
        if self.eeg.ndim != 2 or self.eeg.shape[1] != N_EEG_CHANNELS:
            got = self.eeg.shape[1] if self.eeg.ndim == 2 else self.eeg.ndim
            raise ValidationError(f"expected {N_EEG_CHANNELS} EEG channels, got {got}")
        if len(self.channel_names) != N_EEG_CHANNELS + 1:
            raise ValidationError(
                f"channel_names: expected {N_EEG_CHANNELS} EEG names + 1 EOG name, "
                f"got {len(self.channel_names)}"
            )
        if len(set(self.channel_names)) != len(self.channel_names):
            raise ValidationError("channel_names must be unique")
        if self.eog_vertical.ndim != 1 or self.eog_vertical.shape[0] != self.eeg.shape[0]:
            raise AlignmentError(
                f"eog_vertical has {self.eog_vertical.shape} samples, eeg has {self.eeg.shape[0]}"
            )
        if not np.all(np.isfinite(self.eeg)):
            raise ValidationError("eeg contains non-finite samples")
        if not np.all(np.isfinite(self.eog_vertical)):
            raise ValidationError("eog_vertical contains non-finite samples")
        if self.perclos.ndim != 1:
            raise ValidationError("perclos must be a vector")
        if not np.all(np.isfinite(self.perclos)) or np.any((self.perclos < 0) | (self.perclos > 1)):
            raise ValidationError("perclos values must lie in [0, 1]")
        expected = self.n_samples // self.samples_per_epoch
        if self.perclos.shape[0] != expected:
            raise AlignmentError(
                f"{self.n_samples} samples at {self.sample_rate_hz} Hz hold {expected} "
                f"epochs of {EPOCH_SECONDS} s but {self.perclos.shape[0]} PERCLOS labels were given"
            )

    @property
    def n_samples(self) -> int:
        return self.eeg.shape[0]

    @property
    def n_epochs(self) -> int:
        return self.perclos.shape[0]

    @property
    def samples_per_epoch(self) -> int:
        return EPOCH_SECONDS * int(self.sample_rate_hz)

    @property
    def eeg_channels(self) -> tuple:
        return self.channel_names[:N_EEG_CHANNELS]

    @property
    def eog_channel(self) -> str:
        return self.channel_names[N_EEG_CHANNELS]

    @property
    def key(self) -> str:
        return f"{self.subject_id}/{self.experiment_id}"

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.experiment_id == other.experiment_id
            and self.sample_rate_hz == other.sample_rate_hz
            and self.channel_names == other.channel_names
            and np.array_equal(self.eeg, other.eeg)
            and np.array_equal(self.eog_vertical, other.eog_vertical)
            and np.array_equal(self.perclos, other.perclos)
        )

    __hash__ = None


# ---------------------------------------------------------------------------
# interchange format


def _format_rows(matrix: np.ndarray) -> str:
    # repr() of a Python float is the shortest string that reparses exactly
    return "".join(",".join(map(repr, row)) + "\n" for row in matrix.tolist())


def write_recording(rec: Recording, path) -> None:
    """Write ``rec`` as a recording directory at ``path`` (created if needed)."""
    path = Path(path)
    manifest = {
        "subject_id": rec.subject_id,
        "experiment_id": rec.experiment_id,
        "sample_rate_hz": int(rec.sample_rate_hz),
        "eeg_channels": list(rec.eeg_channels),
        "eog_channel": rec.eog_channel,
    }
    files = {
        "manifest.json": json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        "eeg.csv": ",".join(rec.eeg_channels) + "\n" + _format_rows(rec.eeg),
        "eog.csv": rec.eog_channel + "\n" + _format_rows(rec.eog_vertical[:, None]),
        "labels.csv": "epoch_index,perclos\n"
        + "".join(f"{i},{v!r}\n" for i, v in enumerate(rec.perclos.tolist())),
    }
    try:
        path.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            with open(path / name, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
    except OSError as exc:
        raise RecordingIOError(f"cannot write recording to {path}: {exc.strerror or exc}") from exc


def _read_text(path: Path) -> str:
    if not path.is_file():
        raise FormatError(f"missing file {path}")
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def _parse_csv(path: Path, ncols: int | None):
    text = _read_text(path)
    lines = text.split("\n")
    header = lines[0].strip().split(",")
    body = [ln for ln in lines[1:] if ln.strip()]
    if not body:
        return header, np.empty((0, len(header)))
    try:
        data = np.loadtxt(body, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path.name}: {exc}") from exc
    if ncols is not None and data.shape[1] != ncols:
        raise ValidationError(f"{path.name}: expected {ncols} columns, got {data.shape[1]}")
    return header, data


def load_recording(path) -> Recording:
    """Load and validate a recording directory."""
    path = Path(path)
    if not path.is_dir():
        raise FormatError(f"recording directory {path} does not exist")
    try:
        manifest = json.loads(_read_text(path / "manifest.json"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest.json line {exc.lineno}: {exc.msg}") from exc
    required = ("subject_id", "experiment_id", "sample_rate_hz", "eeg_channels", "eog_channel")
    missing = [k for k in required if k not in manifest]
    if missing:
        raise FormatError(f"manifest.json missing keys: {', '.join(missing)}")
    eeg_channels = list(manifest["eeg_channels"])
    if len(eeg_channels) != N_EEG_CHANNELS:
        raise ValidationError(f"expected {N_EEG_CHANNELS} EEG channels, got {len(eeg_channels)}")

    header, eeg = _parse_csv(path / "eeg.csv", None)
    if header != eeg_channels:
        if len(header) != N_EEG_CHANNELS:
            raise ValidationError(f"expected {N_EEG_CHANNELS} EEG channels, got {len(header)} in eeg.csv")
        raise ValidationError("eeg.csv header does not match manifest eeg_channels")
    if eeg.shape[1] != N_EEG_CHANNELS:
        raise ValidationError(f"expected {N_EEG_CHANNELS} EEG channels, got {eeg.shape[1]} columns")
    _, eog = _parse_csv(path / "eog.csv", 1)
    lab_header, labels = _parse_csv(path / "labels.csv", 2)
    if lab_header != ["epoch_index", "perclos"]:
        raise FormatError("labels.csv header must be 'epoch_index,perclos'")
    if eog.shape[0] != eeg.shape[0]:
        raise AlignmentError(f"eog.csv has {eog.shape[0]} samples, eeg.csv has {eeg.shape[0]}")
    if not np.array_equal(labels[:, 0], np.arange(labels.shape[0])):
        raise AlignmentError("labels.csv epoch_index must run 0, 1, 2, ... without gaps")

    rate = manifest["sample_rate_hz"]
    if not isinstance(rate, int) or isinstance(rate, bool):
        raise ValidationError(f"sample_rate_hz must be an integer, got {rate!r}")
    return Recording(
        subject_id=str(manifest["subject_id"]),
        experiment_id=str(manifest["experiment_id"]),
        sample_rate_hz=rate,
        channel_names=tuple(eeg_channels) + (str(manifest["eog_channel"]),),
        eeg=eeg,
        eog_vertical=eog[:, 0],
        perclos=labels[:, 1],
    )


def load_cohort(data_dir) -> list[Recording]:
    """Load every recording directory under ``data_dir`` (or ``data_dir`` itself).

    Recordings are returned sorted by (subject_id, experiment_id); a repeated
    pair is an error.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise RecordingIOError(f"data directory {data_dir} does not exist")
    if (data_dir / "manifest.json").is_file():
        dirs = [data_dir]
    else:
        dirs = sorted(p for p in data_dir.iterdir() if (p / "manifest.json").is_file())
    if not dirs:
        raise FormatError(f"no recording directories (with manifest.json) under {data_dir}")
    recs = []
    for d in dirs:
        try:
            recs.append(load_recording(d))
        except (FormatError, ValidationError, AlignmentError) as exc:
            raise exc.with_context(d.name) from exc
    recs.sort(key=lambda r: (r.subject_id, r.experiment_id))
    keys = [r.key for r in recs]
    dupes = sorted({k for k in keys if keys.count(k) > 1})
    if dupes:
        raise ValidationError(f"duplicate recordings for {', '.join(dupes)}")
    return recs


def recording_dirname(rec: Recording) -> str:
    return f"{rec.subject_id}_{rec.experiment_id}"


# ---------------------------------------------------------------------------
# synthesis

SYNTH_BANDS = {
    # name: (lo Hz, hi Hz, base rms uV, drowsiness coupling)
    "delta": (1.0, 4.0, 12.0, 0.0),
    "theta": (4.0, 8.0, 8.0, +1.0),
    "alpha": (8.0, 14.0, 8.0, +1.0),
    "beta": (14.0, 31.0, 5.0, -1.0),
    "gamma": (31.0, 50.0, 2.0, 0.0),
}
# envelope slope per unit drowsiness at full modulation; keeps gains in [0.25, 1.75]
_ENVELOPE_SLOPE = 1.5


@dataclass(frozen=True)
class SynthSpec:
    n_epochs: int
    seed: int = 0
    drowsiness_walk_step: float = 0.02
    mains_amplitude_uv: float = 5.0
    blink_rate_per_min_at_full_drowsiness: float = 20.0
    snr_band_modulation: float = 0.8
    perclos_noise: float = 0.03
    initial_drowsiness: float | None = None
    sample_rate_hz: int = 200
    subject_id: str = "synth"
    experiment_id: str = "1"

    def validate(self):
        if not isinstance(self.n_epochs, (int, np.integer)) or self.n_epochs < 4:
            raise ValidationError(f"n_epochs must be an integer >= 4, got {self.n_epochs!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        for name in ("drowsiness_walk_step", "mains_amplitude_uv",
                     "blink_rate_per_min_at_full_drowsiness", "perclos_noise"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {value!r}")
        if not 0 <= self.snr_band_modulation <= 1:
            raise ValidationError("snr_band_modulation must lie in [0, 1]")
        if self.initial_drowsiness is not None and not 0 <= self.initial_drowsiness <= 1:
            raise ValidationError("initial_drowsiness must lie in [0, 1]")
        if self.sample_rate_hz < 120:
            raise ValidationError("sample_rate_hz must be >= 120 to carry 60 Hz mains")


@dataclass(frozen=True, eq=False)
class SynthTruth:
    """Ground truth behind a synthesized recording."""

    drowsiness: np.ndarray  # latent d(t), one value per sample
    blink_peaks: np.ndarray  # sample index of each injected blink's positive peak
    blinks_per_epoch: np.ndarray = field(default=None)


def blink_waveform(duration_s: float, rate_hz: float, peak_uv: float = BLINK_PEAK_UV) -> np.ndarray:
    """Biphasic raised-cosine pulse: a positive lobe then an equal negative lobe."""
    n = max(int(round(duration_s * rate_hz)), 4)
    half = n // 2
    t = np.arange(half) / half
    lobe = 0.5 * (1.0 - np.cos(2.0 * np.pi * t)) * peak_uv
    return np.concatenate([lobe, -lobe])


def _band_noise(rng, n, rate, lo, hi):
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / rate)
    spectrum[(freqs < lo) | (freqs >= hi)] = 0.0
    x = np.fft.irfft(spectrum, n)
    sd = x.std()
    return x / sd if sd > 0 else x


def synth_recording_with_truth(spec: SynthSpec) -> tuple[Recording, SynthTruth]:
    """Synthesize a recording and return it with its ground truth."""
    spec.validate()
    rng = np.random.default_rng(int(spec.seed))
    rate = int(spec.sample_rate_hz)
    n_sec = spec.n_epochs * EPOCH_SECONDS
    n = n_sec * rate

    # latent drowsiness: clipped walk at 1 s steps, linearly interpolated per sample
    d0 = rng.uniform(0.0, 1.0) if spec.initial_drowsiness is None else spec.initial_drowsiness
    steps = rng.standard_normal(n_sec) * spec.drowsiness_walk_step
    knots = np.empty(n_sec + 1)
    knots[0] = d0
    for i in range(n_sec):
        knots[i + 1] = min(1.0, max(0.0, knots[i] + steps[i]))
    t_sec = np.arange(n) / rate
    d = np.interp(t_sec, np.arange(n_sec + 1), knots)

    per_epoch = EPOCH_SECONDS * rate
    perclos = d.reshape(spec.n_epochs, per_epoch).mean(axis=1)
    perclos = perclos + rng.uniform(-spec.perclos_noise, spec.perclos_noise, spec.n_epochs)
    perclos = np.clip(perclos, 0.0, 1.0)

    # EEG: five band-limited components with drowsiness-dependent envelopes
    m = spec.snr_band_modulation
    gains = rng.uniform(0.8, 1.2, N_EEG_CHANNELS)
    mains_phase = rng.uniform(0, 2 * np.pi)
    mains = spec.mains_amplitude_uv * np.sin(2 * np.pi * 60.0 * t_sec + mains_phase)
    envelopes = {
        name: 1.0 + m * _ENVELOPE_SLOPE * coupling * (d - 0.5)
        for name, (_, _, _, coupling) in SYNTH_BANDS.items()
    }
    eeg = np.empty((n, N_EEG_CHANNELS))
    for ch in range(N_EEG_CHANNELS):
        acc = mains.copy()
        for name, (lo, hi, base, _) in SYNTH_BANDS.items():
            acc += base * envelopes[name] * _band_noise(rng, n, rate, lo, hi)
        eeg[:, ch] = gains[ch] * acc

    # EOG: bounded slow eye movements plus sensor noise plus blinks
    f1, f2 = rng.uniform(0.6, 1.5), rng.uniform(2.0, 3.0)
    p1, p2 = rng.uniform(0, 2 * np.pi, 2)
    eog = (
        20.0 * np.sin(2 * np.pi * f1 * t_sec + p1)
        + 5.0 * np.sin(2 * np.pi * f2 * t_sec + p2)
        + 1.5 * rng.standard_normal(n)
    )
    peaks = []
    rate_per_s = spec.blink_rate_per_min_at_full_drowsiness / 60.0
    next_free = 0
    for sec in range(n_sec):
        lam = rate_per_s * knots[sec]
        if lam <= 0:
            continue
        for onset_frac in np.sort(rng.uniform(0, 1, rng.poisson(lam))):
            duration = rng.uniform(0.2, 0.4)
            wave = blink_waveform(duration, rate)
            start = int((sec + onset_frac) * rate)
            # keep blinks disjoint with a 0.3 s gap so ground truth is countable
            if start < next_free or start + wave.size > n:
                continue
            eog[start:start + wave.size] += wave
            peaks.append(start + wave.size // 4)
            next_free = start + wave.size + int(0.3 * rate)
    peaks = np.asarray(peaks, dtype=np.int64)
    per_epoch_counts = np.bincount(peaks // per_epoch, minlength=spec.n_epochs)[: spec.n_epochs]

    rec = Recording(
        subject_id=spec.subject_id,
        experiment_id=spec.experiment_id,
        sample_rate_hz=rate,
        channel_names=DEFAULT_EEG_CHANNELS + (DEFAULT_EOG_CHANNEL,),
        eeg=eeg,
        eog_vertical=eog,
        perclos=perclos,
    )
    return rec, SynthTruth(drowsiness=d, blink_peaks=peaks, blinks_per_epoch=per_epoch_counts)


def synth_recording(spec: SynthSpec) -> Recording:
    return synth_recording_with_truth(spec)[0]


def synth_cohort(n_subjects: int, n_epochs: int, seed: int, repeat_subjects: int = 0, **kwargs):
    """Synthesize a study: one recording per subject plus optional repeat sessions.

    The first ``repeat_subjects`` subjects get a second experiment, mirroring
    studies where a few participants drove twice.
    """
    from .rng import derive_seed

    recs = []
    for s in range(n_subjects):
        sessions = 2 if s < repeat_subjects else 1
        for e in range(sessions):
            spec = SynthSpec(
                n_epochs=n_epochs,
                seed=derive_seed(seed, s, e),
                subject_id=f"s{s + 1:02d}",
                experiment_id=str(e + 1),
                **kwargs,
            )
            recs.append(synth_recording(spec))
    return recs
