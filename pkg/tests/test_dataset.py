import json
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drowsiness import dataset
from drowsiness.dataset import Recording, SynthSpec, load_recording, synth_recording, write_recording
from drowsiness.errors import AlignmentError, FormatError, RecordingIOError, ValidationError
from drowsiness.features import band_powers, count_blinks

CHANNELS = dataset.DEFAULT_EEG_CHANNELS + (dataset.DEFAULT_EOG_CHANNEL,)


def make_recording(n_samples=16000, n_labels=10, rng=None, **kw):
    rng = rng or np.random.default_rng(0)
    fields = dict(
        subject_id="s1", experiment_id="1", sample_rate_hz=200, channel_names=CHANNELS,
        eeg=rng.standard_normal((n_samples, 17)), eog_vertical=rng.standard_normal(n_samples),
        perclos=rng.uniform(0, 1, n_labels),
    )
    fields.update(kw)
    return Recording(**fields)


def test_alignment_16000_samples_10_labels():
    assert make_recording().n_epochs == 10


def test_trailing_partial_epoch_allowed():
    rec = make_recording(n_samples=16000 + 1599)
    assert rec.n_epochs == 10


def test_label_count_mismatch_is_alignment_error():
    with pytest.raises(AlignmentError):
        make_recording(n_labels=9)


def test_perclos_out_of_range_names_field():
    with pytest.raises(ValidationError, match="perclos"):
        make_recording(perclos=np.full(10, 1.5))


def test_nonfinite_eeg_rejected():
    eeg = np.zeros((16000, 17))
    eeg[5, 3] = np.nan
    with pytest.raises(ValidationError, match="eeg"):
        make_recording(eeg=eeg)


def test_duplicate_channel_names_rejected():
    with pytest.raises(ValidationError, match="unique"):
        make_recording(channel_names=CHANNELS[:-1] + ("FT7",))


def test_round_trip_exact(tmp_path):
    rec = make_recording()
    write_recording(rec, tmp_path / "r")
    assert load_recording(tmp_path / "r") == rec


def test_two_writes_byte_identical(tmp_path):
    rec = make_recording(n_samples=3200, n_labels=2)
    write_recording(rec, tmp_path / "a")
    write_recording(rec, tmp_path / "b")
    for name in ("manifest.json", "eeg.csv", "eog.csv", "labels.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_files_use_lf_and_dot_decimal(tmp_path):
    write_recording(make_recording(n_samples=1600, n_labels=1), tmp_path / "r")
    raw = (tmp_path / "r" / "eeg.csv").read_bytes()
    assert b"\r" not in raw
    assert raw.decode("utf-8").splitlines()[0] == ",".join(dataset.DEFAULT_EEG_CHANNELS)


def test_missing_file_is_format_error(tmp_path):
    write_recording(make_recording(n_samples=1600, n_labels=1), tmp_path / "r")
    os.remove(tmp_path / "r" / "eog.csv")
    with pytest.raises(FormatError):
        load_recording(tmp_path / "r")


def test_missing_directory_is_format_error(tmp_path):
    with pytest.raises(FormatError):
        load_recording(tmp_path / "nope")


def test_sixteen_channels_is_validation_error(tmp_path):
    write_recording(make_recording(n_samples=1600, n_labels=1), tmp_path / "r")
    m = json.loads((tmp_path / "r" / "manifest.json").read_text())
    m["eeg_channels"] = m["eeg_channels"][:16]
    (tmp_path / "r" / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(ValidationError, match="expected 17 EEG channels"):
        load_recording(tmp_path / "r")


def test_loaded_perclos_out_of_range(tmp_path):
    write_recording(make_recording(n_samples=1600, n_labels=1), tmp_path / "r")
    (tmp_path / "r" / "labels.csv").write_text("epoch_index,perclos\n0,1.2\n")
    with pytest.raises(ValidationError, match="perclos"):
        load_recording(tmp_path / "r")


def test_loaded_label_mismatch_is_alignment_error(tmp_path):
    write_recording(make_recording(n_samples=1600, n_labels=1), tmp_path / "r")
    (tmp_path / "r" / "labels.csv").write_text("epoch_index,perclos\n0,0.2\n1,0.3\n")
    with pytest.raises(AlignmentError):
        load_recording(tmp_path / "r")


@pytest.mark.skipif(hasattr(os, "geteuid") and os.geteuid() == 0, reason="root ignores file permissions")
def test_write_read_only_location_is_io_error(tmp_path):
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    try:
        with pytest.raises(RecordingIOError):
            write_recording(make_recording(n_samples=1600, n_labels=1), ro / "r")
    finally:
        ro.chmod(0o700)


def test_write_blocked_by_file_is_io_error(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("x")
    with pytest.raises(RecordingIOError, match="blocker"):
        write_recording(make_recording(n_samples=1600, n_labels=1), blocker / "r")


def test_load_cohort_sorted_and_missing_dir(tmp_path):
    for sid in ("s02", "s01"):
        write_recording(make_recording(n_samples=1600, n_labels=1, subject_id=sid), tmp_path / sid)
    recs = dataset.load_cohort(tmp_path)
    assert [r.subject_id for r in recs] == ["s01", "s02"]
    with pytest.raises(RecordingIOError):
        dataset.load_cohort(tmp_path / "missing")


@settings(max_examples=8)
@given(n_epochs=st.integers(4, 6), seed=st.integers(0, 2**64 - 1),
       mod=st.floats(0, 1), step=st.floats(0, 0.1))
def test_round_trip_property_over_synth_specs(tmp_path_factory, n_epochs, seed, mod, step):
    rec = synth_recording(SynthSpec(n_epochs=n_epochs, seed=seed, snr_band_modulation=mod,
                                    drowsiness_walk_step=step))
    path = tmp_path_factory.mktemp("rt") / "r"
    write_recording(rec, path)
    back = load_recording(path)
    assert back == rec
    per = 8 * back.sample_rate_hz
    assert per * back.n_epochs <= back.n_samples < per * (back.n_epochs + 1)


# --- synthesizer -------------------------------------------------------------

def test_synth_seeded_determinism():
    a = synth_recording(SynthSpec(n_epochs=5, seed=7))
    b = synth_recording(SynthSpec(n_epochs=5, seed=7))
    c = synth_recording(SynthSpec(n_epochs=5, seed=8))
    assert a == b
    assert a != c


@pytest.mark.parametrize("bad", [dict(n_epochs=3), dict(n_epochs=5, mains_amplitude_uv=-1),
                                 dict(n_epochs=5, snr_band_modulation=1.5),
                                 dict(n_epochs=5, blink_rate_per_min_at_full_drowsiness=-2)])
def test_synth_invalid_spec(bad):
    with pytest.raises(ValidationError):
        synth_recording(SynthSpec(**bad))


def test_no_blinks_when_rate_zero_and_d_zero():
    rec, truth = dataset.synth_recording_with_truth(
        SynthSpec(n_epochs=6, seed=3, blink_rate_per_min_at_full_drowsiness=0.0,
                  initial_drowsiness=0.0, drowsiness_walk_step=0.0)
    )
    assert truth.blink_peaks.size == 0
    per = rec.samples_per_epoch
    assert [count_blinks(rec.eog_vertical[i * per:(i + 1) * per]) for i in range(6)] == [0] * 6


def test_perclos_tracks_latent_drowsiness():
    rec, truth = dataset.synth_recording_with_truth(SynthSpec(n_epochs=20, seed=4))
    per = rec.samples_per_epoch
    epoch_mean = truth.drowsiness.reshape(20, per).mean(axis=1)
    assert np.all(np.abs(rec.perclos - epoch_mean) <= 0.03 + 1e-12)
    assert np.all((truth.drowsiness >= 0) & (truth.drowsiness <= 1))


def _ratio_and_psd(rec):
    per = rec.samples_per_epoch
    bp = np.array([band_powers(rec.eeg[i * per:(i + 1) * per]) for i in range(rec.n_epochs)])
    return (bp[:, 1] + bp[:, 2]) / bp[:, 3], bp


def test_band_ratio_correlates_with_perclos_at_full_modulation():
    rec = synth_recording(SynthSpec(n_epochs=220, seed=11, snr_band_modulation=1.0, drowsiness_walk_step=0.05))
    ratio, _ = _ratio_and_psd(rec)
    assert np.corrcoef(ratio, rec.perclos)[0, 1] >= 0.6


def test_band_powers_independent_of_perclos_without_modulation():
    rec = synth_recording(SynthSpec(n_epochs=220, seed=12, snr_band_modulation=0.0, drowsiness_walk_step=0.05))
    _, bp = _ratio_and_psd(rec)
    for j in range(5):
        assert abs(np.corrcoef(bp[:, j], rec.perclos)[0, 1]) < 0.2
