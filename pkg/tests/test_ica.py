import json

import numpy as np
import pytest

from drowsiness.errors import AlignmentError, DegenerateInputError, ParameterError
from drowsiness.ica import fit_fastica, flag_artifact_components, reconstruct_without, write_ica_dump
from oracles import blink_mixture, match_sources, three_source_mixture


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_recovers_three_sources(seed):
    X, S, A = three_source_mixture(seed)
    dec = fit_fastica(X, seed=seed)
    assert match_sources(S, dec.sources).min() >= 0.95
    assert np.allclose(dec.unmixing @ dec.mixing, np.eye(17), atol=1e-6)


def test_gaussian_only_keeps_inverse():
    X = np.random.default_rng(5).standard_normal((3000, 17))
    dec = fit_fastica(X, seed=1, max_iter=50)
    assert np.allclose(dec.unmixing @ dec.mixing, np.eye(17), atol=1e-6)
    assert dec.iterations <= 50


def test_seeded_determinism():
    X, _, _ = three_source_mixture(4)
    a = fit_fastica(X, seed=9)
    b = fit_fastica(X, seed=9)
    assert np.array_equal(a.unmixing, b.unmixing)


def test_rank_deficient_is_degenerate():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((2000, 16)) @ rng.standard_normal((16, 17))
    with pytest.raises(DegenerateInputError):
        fit_fastica(X)


def test_flags_injected_eog_source():
    X, eog = blink_mixture(0)
    dec = fit_fastica(X, seed=0)
    flagged = flag_artifact_components(dec, eog)
    assert len(flagged) >= 1
    j = max(range(17), key=lambda k: abs(np.corrcoef(dec.sources[:, k], eog)[0, 1]))
    assert j in flagged
    assert flag_artifact_components(dec, eog) == flagged


def test_removal_decorrelates_frontal_channel():
    X, eog = blink_mixture(1)
    assert abs(np.corrcoef(X[:, 0], eog)[0, 1]) > 0.6
    dec = fit_fastica(X, seed=0)
    cleaned = reconstruct_without(dec, flag_artifact_components(dec, eog))
    assert abs(np.corrcoef(cleaned[:, 0], eog)[0, 1]) < 0.2


def test_zero_eog_and_unreachable_threshold_flag_nothing():
    X, eog = blink_mixture(2)
    dec = fit_fastica(X, seed=0)
    assert flag_artifact_components(dec, np.zeros(X.shape[0])) == set()
    assert flag_artifact_components(dec, eog, r_threshold=1.01) == set()


def test_length_mismatch():
    X, eog = blink_mixture(2)
    dec = fit_fastica(X, seed=0)
    with pytest.raises(AlignmentError):
        flag_artifact_components(dec, eog[:-1])


def test_reconstruction_identity_and_total_removal():
    X = np.random.default_rng(8).laplace(size=(2000, 17)) @ np.random.default_rng(9).standard_normal((17, 17))
    dec = fit_fastica(X, seed=0, max_iter=100)
    assert np.max(np.abs(reconstruct_without(dec, set()) - X)) <= 1e-6
    all_removed = reconstruct_without(dec, set(range(17)))
    assert np.allclose(all_removed, np.broadcast_to(X.mean(axis=0), X.shape), atol=1e-9)
    with pytest.raises(ParameterError):
        reconstruct_without(dec, {17})


def test_dump_keys(tmp_path):
    X, _, _ = three_source_mixture(0, n=2000)
    dec = fit_fastica(X, seed=0)
    write_ica_dump(dec, {2, 0}, tmp_path / "ica.json")
    d = json.loads((tmp_path / "ica.json").read_text())
    assert set(d) == {"unmixing", "mixing", "flagged", "converged", "iterations"}
    assert d["flagged"] == [0, 2]
