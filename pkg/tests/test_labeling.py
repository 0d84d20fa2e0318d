import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from drowsiness import dataset
from drowsiness.errors import ParameterError, ValidationError
from drowsiness.labeling import DrowsinessLevel, compute_thresholds, discretize

unit = st.floats(0, 1, allow_nan=False)


def test_full_range_constants():
    t = compute_thresholds([0.0, 1.0])
    assert t.th_minor == 0.125 and t.th_moder == 0.30


def test_sub_range_example():
    t = compute_thresholds([0.2, 0.6, 0.4])
    assert t.th_minor == pytest.approx(0.25, abs=1e-15)
    assert t.th_moder == pytest.approx(0.32, abs=1e-15)


def test_constant_series_all_severe_with_warning():
    t = compute_thresholds([0.4] * 5)
    assert t.th_minor == t.th_moder == 0.4 and t.degenerate
    with pytest.warns(UserWarning):
        levels = discretize([0.4] * 5, t)
    assert np.all(levels == DrowsinessLevel.Severe)


def test_errors():
    with pytest.raises(ParameterError):
        compute_thresholds([])
    with pytest.raises(ValidationError):
        compute_thresholds([0.1, 1.2])


def test_boundaries():
    t = compute_thresholds([0.0, 1.0])
    assert discretize([0.1, 0.125, 0.2999, 0.30, 1.0], t).tolist() == [0, 1, 1, 2, 2]


@given(arrays(np.float64, st.integers(1, 50), elements=unit))
def test_affine_formulas(p):
    t = compute_thresholds(p)
    lo, hi = p.min(), p.max()
    assert abs(t.th_minor - (lo + (hi - lo) * 0.125)) <= 1e-15
    assert abs(t.th_moder - (lo + (hi - lo) * 0.30)) <= 1e-15


@given(arrays(np.float64, st.integers(2, 50), elements=unit))
def test_monotone(p):
    t = compute_thresholds(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lv = discretize(p, t)
    order = np.argsort(p, kind="stable")
    assert np.all(np.diff(lv[order]) >= 0)


@given(p=st.lists(st.floats(0.3, 0.7), min_size=3, max_size=30, unique=True),
       a=st.sampled_from([0.5, 1.0, 1.25]), b=st.sampled_from([-0.1, 0.0, 0.05]))
def test_affine_equivariance(p, a, b):
    # dyadic a and b keep the affine map exact on the threshold arithmetic's grid
    p = np.round(np.asarray(p) * 1024) / 1024
    q = a * p + b
    if len(set(p.tolist())) < 2:
        return
    assert np.array_equal(discretize(p, compute_thresholds(p)), discretize(q, compute_thresholds(q)))


def test_class_coverage_on_synthetic():
    rec = dataset.synth_recording(dataset.SynthSpec(n_epochs=200, seed=3, drowsiness_walk_step=0.08,
                                                    initial_drowsiness=0.5))
    assert rec.perclos.min() <= 0.05 and rec.perclos.max() >= 0.95
    assert set(discretize(rec.perclos, compute_thresholds(rec.perclos)).tolist()) == {0, 1, 2}
