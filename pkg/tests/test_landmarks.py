"""Landmark features, phase windows, and the FeatureMatrix container."""

import numpy as np
import pandas as pd
import pytest

from batchwise.errors import SchemaError
from batchwise.landmarks import (
    FeatureMatrix,
    FeatureSpec,
    compute_durations,
    compute_landmarks,
    feature_name,
)
from conftest import make_batch, make_dataset


def _lm_batch(batch_id="LM1"):
    times = np.array([0, 2, 4, 6, 8, 10, 15, 20, 25, 30], dtype=float)
    values = np.array([0, 1, 2, 3, 4, 5, 6, 8, 9, 10], dtype=float)
    return make_batch(batch_id, [("a", 0.0, 10.0), ("b", 10.0, 30.0)],
                      {"x": np.column_stack([times, values])})


@pytest.fixture()
def lm_dataset():
    return make_dataset([_lm_batch()])


def test_feature_name_format():
    assert feature_name("x", "a", "raw", "mean") == "x|a|raw|mean"


def test_hand_computed_statistics_first_phase(lm_dataset):
    spec = FeatureSpec(statistics=("mean", "max", "min", "range", "std",
                                   "first", "last", "median", "mad",
                                   "slope", "cv"))
    fm = compute_landmarks(lm_dataset, spec)
    row = fm.frame.loc["LM1"]
    # Phase a is [0, 10): samples at t = 0, 2, 4, 6, 8 with values t / 2.
    expected = {
        "x|a|raw|mean": 2.0,
        "x|a|raw|max": 4.0,
        "x|a|raw|min": 0.0,
        "x|a|raw|range": 4.0,
        "x|a|raw|std": np.sqrt(2.0),
        "x|a|raw|first": 0.0,
        "x|a|raw|last": 4.0,
        "x|a|raw|median": 2.0,
        "x|a|raw|mad": 1.0,
        "x|a|raw|slope": 0.5,
        "x|a|raw|cv": np.sqrt(2.0) / 2.0,
    }
    for name, value in expected.items():
        np.testing.assert_allclose(row[name], value, atol=1e-12, err_msg=name)


def test_hand_computed_statistics_final_phase(lm_dataset):
    spec = FeatureSpec(statistics=("mean", "std", "median", "mad", "slope"))
    row = compute_landmarks(lm_dataset, spec).frame.loc["LM1"]
    # Phase b is closed [10, 30]: values 5, 6, 8, 9, 10.
    np.testing.assert_allclose(row["x|b|raw|mean"], 7.6)
    np.testing.assert_allclose(row["x|b|raw|std"], np.sqrt(3.44))
    np.testing.assert_allclose(row["x|b|raw|median"], 8.0)
    np.testing.assert_allclose(row["x|b|raw|mad"], 2.0)
    np.testing.assert_allclose(row["x|b|raw|slope"], 0.26)


def test_half_open_windows_do_not_double_count(lm_dataset):
    fm = compute_landmarks(lm_dataset, FeatureSpec(statistics=("first", "last")))
    row = fm.frame.loc["LM1"]
    assert row["x|a|raw|last"] == 4.0   # t = 10 belongs to phase b
    assert row["x|b|raw|first"] == 5.0
    assert row["x|b|raw|last"] == 10.0  # final phase keeps its endpoint


def test_derivative_transform(lm_dataset):
    spec = FeatureSpec(statistics=("mean", "std"), transforms=("derivative",))
    row = compute_landmarks(lm_dataset, spec).frame.loc["LM1"]
    np.testing.assert_allclose(row["x|a|derivative|mean"], 0.5, atol=1e-12)
    np.testing.assert_allclose(row["x|a|derivative|std"], 0.0, atol=1e-12)
    np.testing.assert_allclose(row["x|b|derivative|mean"], 0.25, atol=1e-12)


def test_phase_integrals_tile_the_batch(lm_dataset):
    spec = FeatureSpec(statistics=("last",), transforms=("integral",),
                       scope=("phase", "batch"))
    row = compute_landmarks(lm_dataset, spec).frame.loc["LM1"]
    np.testing.assert_allclose(row["x|a|integral|last"], 25.0)
    np.testing.assert_allclose(row["x|b|integral|last"], 152.5)
    np.testing.assert_allclose(
        row["x|a|integral|last"] + row["x|b|integral|last"],
        row["x|batch|integral|last"], atol=1e-9)


def test_whole_batch_scope(lm_dataset):
    spec = FeatureSpec(statistics=("mean", "min", "max"), scope=("batch",))
    fm = compute_landmarks(lm_dataset, spec)
    assert fm.feature_names == ("x|batch|raw|mean", "x|batch|raw|min",
                                "x|batch|raw|max")
    row = fm.frame.loc["LM1"]
    np.testing.assert_allclose(row["x|batch|raw|mean"], 4.8)


def test_missing_tag_and_phase_are_nan_masked():
    full = _lm_batch("F")
    no_b = make_batch("NB", [("a", 0.0, 10.0)],
                      {"x": [[0.0, 1.0], [5.0, 2.0], [9.0, 3.0]]})
    ds = make_dataset([full, no_b], tags=("x", "y"))
    fm = compute_landmarks(ds, FeatureSpec(statistics=("mean",)))
    assert np.isnan(fm.frame.loc["NB", "x|b|raw|mean"])
    assert np.isnan(fm.frame.loc["F", "y|a|raw|mean"])
    assert ("NB", "x|b|raw|mean") in fm.masked_cells


def test_cv_guard_near_zero_mean():
    batch = make_batch("Z", [("a", 0.0, 4.0)],
                       {"x": [[0.0, -1.0], [1.0, 1.0], [2.0, -1.0],
                              [3.0, 1.0], [4.0, 0.0]]})
    spec = FeatureSpec(statistics=("cv",))
    fm = compute_landmarks(make_dataset([batch]), spec)
    assert np.isnan(fm.frame.loc["Z", "x|a|raw|cv"])


def test_slope_guard_single_sample():
    batch = make_batch("S", [("a", 0.0, 10.0), ("b", 10.0, 20.0)],
                       {"x": [[0.0, 1.0], [12.0, 2.0], [20.0, 3.0]]})
    spec = FeatureSpec(statistics=("slope",))
    fm = compute_landmarks(make_dataset([batch]), spec)
    assert np.isnan(fm.frame.loc["S", "x|a|raw|slope"])


def test_spec_validation():
    with pytest.raises(SchemaError):
        FeatureSpec(statistics=("nope",))
    with pytest.raises(SchemaError):
        FeatureSpec(statistics=())
    with pytest.raises(SchemaError):
        FeatureSpec(transforms=("fourier",))
    with pytest.raises(SchemaError):
        FeatureSpec(scope=("reactor",))


def test_durations(lm_dataset):
    fm = compute_durations(lm_dataset)
    assert fm.feature_names == ("duration|a", "duration|b", "duration|total")
    row = fm.frame.loc["LM1"]
    assert row["duration|a"] == 10.0
    assert row["duration|b"] == 20.0
    assert row["duration|total"] == 30.0


def test_feature_matrix_join_and_select(lm_dataset):
    landmarks = compute_landmarks(lm_dataset, FeatureSpec(statistics=("mean",)))
    durations = compute_durations(lm_dataset)
    joined = landmarks.join(durations)
    assert set(durations.feature_names) <= set(joined.feature_names)
    picked = joined.select(["duration|total", "x|a|raw|mean"])
    assert picked.feature_names == ("duration|total", "x|a|raw|mean")
    with pytest.raises(SchemaError):
        joined.select(["ghost"])
    other = FeatureMatrix(pd.DataFrame({"z": [1.0]},
                                       index=pd.Index(["OTHER"])))
    with pytest.raises(SchemaError):
        landmarks.join(other)


def test_feature_matrix_rejects_duplicates():
    frame = pd.DataFrame([[1.0, 2.0]], columns=["a", "a"], index=["B1"])
    with pytest.raises(SchemaError):
        FeatureMatrix(frame)
    frame2 = pd.DataFrame({"a": [1.0, 2.0]}, index=["B1", "B1"])
    with pytest.raises(SchemaError):
        FeatureMatrix(frame2)


def test_feature_matrix_csv_round_trip(tmp_path):
    frame = pd.DataFrame({"f1": [1.5, np.nan], "f2": [0.0, -3.25]},
                         index=pd.Index(["B1", "B2"], name="batch_id"))
    fm = FeatureMatrix(frame)
    path = tmp_path / "features.csv"
    fm.to_csv(path)
    back = FeatureMatrix.from_csv(path)
    assert back.batch_ids == ("B1", "B2")
    assert back.feature_names == ("f1", "f2")
    np.testing.assert_array_equal(back.values, fm.values)
    assert np.isnan(back.frame.loc["B2", "f1"])
