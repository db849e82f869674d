"""Control charts: individuals, PCA Hotelling T², and functional MSPC."""

import numpy as np
import pandas as pd
import pytest

from batchwise.align import AlignedBatchSet
from batchwise.errors import (
    AllFeaturesConstant,
    MissingFeature,
    NonFiniteValue,
    SchemaError,
    TooFewPoints,
    TooFewRows,
)
from batchwise.ingest import Grid
from batchwise.landmarks import FeatureMatrix
from batchwise.spc import (
    D2,
    contribution_heatmap,
    fit_t2,
    fit_univariate,
    functional_mspc,
    t2_contributions,
    t2_score,
    tag_contributions,
)


def _fm(values, names=None, ids=None):
    values = np.asarray(values, dtype=float)
    names = names or [f"f{k}" for k in range(values.shape[1])]
    ids = ids or [f"B{k:03d}" for k in range(values.shape[0])]
    frame = pd.DataFrame(values, columns=names,
                         index=pd.Index(ids, name="batch_id"))
    return FeatureMatrix(frame)


# --- individuals chart -----------------------------------------------------------


def test_univariate_hand_example():
    chart = fit_univariate([0.0, 0.0, 0.0, 0.0, 10.0],
                           labels=["a", "b", "c", "d", "e"])
    assert chart.center == 2.0
    np.testing.assert_allclose(chart.sigma, 2.5 / D2)
    np.testing.assert_allclose(chart.sigma, 2.216312, atol=1e-6)
    np.testing.assert_allclose(chart.upper, 8.648936, atol=1e-6)
    np.testing.assert_allclose(chart.lower, -4.648936, atol=1e-6)
    np.testing.assert_array_equal(chart.flags, [False, False, False, False, True])
    assert chart.labels == ("a", "b", "c", "d", "e")


def test_univariate_guards():
    with pytest.raises(TooFewPoints):
        fit_univariate([1.0, 2.0, 3.0, 4.0])
    with pytest.raises(TooFewPoints):
        fit_univariate([1.0, 2.0, np.nan, 4.0, 5.0])


def test_univariate_steady_series_flags_nothing():
    rng = np.random.default_rng(2)
    chart = fit_univariate(rng.normal(10.0, 1.0, 50))
    assert not chart.flags.any()
    payload = chart.to_dict()
    assert payload["labels"] is None
    assert len(payload["points"]) == 50


# --- Hotelling T² -----------------------------------------------------------------


@pytest.fixture()
def training():
    rng = np.random.default_rng(1)
    latent = rng.standard_normal((25, 2))
    mix = np.array([[1.0, 0.5, -0.3, 0.0], [0.0, 1.0, 0.8, -0.5]])
    values = latent @ mix + 0.1 * rng.standard_normal((25, 4))
    return _fm(values, ["w", "x", "y", "z"])


def test_t2_of_training_mean_is_zero(training):
    model = fit_t2(training)
    mean_obs = dict(zip(model.feature_names, model.mean))
    assert t2_score(model, mean_obs) < 1e-18


def test_full_rank_t2_is_mahalanobis(training):
    model = fit_t2(training)
    assert model.n_components == 4
    X = training.values
    cov = np.cov(X.T, ddof=1)
    inv = np.linalg.inv(cov)
    centered = X - X.mean(axis=0)
    mahal = np.einsum("ij,jk,ik->i", centered, inv, centered)
    np.testing.assert_allclose(model.training_t2, mahal, rtol=1e-8)


def test_t2_scale_invariance(training):
    scaled = FeatureMatrix(training.frame * [1000.0, 1.0, 0.001, 1.0])
    np.testing.assert_allclose(fit_t2(scaled).training_t2,
                               fit_t2(training).training_t2, rtol=1e-8)


def test_contributions_sum_to_score(training):
    model = fit_t2(training, n_components=2)
    rng = np.random.default_rng(2)
    for _ in range(5):
        obs = rng.standard_normal(4) * 3.0
        contribs = t2_contributions(model, obs)
        np.testing.assert_allclose(sum(contribs.values()),
                                   t2_score(model, obs), atol=1e-9)


def test_contribution_heatmap_rows_sum_to_training_t2(training):
    model = fit_t2(training, n_components=3)
    table = contribution_heatmap(model, training)
    np.testing.assert_allclose(table.sum(axis=1).to_numpy(),
                               model.training_t2, atol=1e-9)
    assert list(table.columns) == list(model.feature_names)


def test_f_limit_and_empirical_fallback(training):
    big = fit_t2(training, n_components=2, alpha=0.05)
    assert big.limit_rule == "f_distribution"
    small = FeatureMatrix(training.frame.iloc[:10])
    fallback = fit_t2(small, n_components=2, alpha=0.05)
    assert fallback.limit_rule == "empirical_quantile"
    np.testing.assert_allclose(
        fallback.t2_limit, np.quantile(fallback.training_t2, 0.95))


def test_variance_cutoff_component_choice(training):
    lean = fit_t2(training, variance_cutoff=0.5)
    assert 1 <= lean.n_components < 4
    with pytest.raises(SchemaError):
        fit_t2(training, n_components=2, variance_cutoff=0.9)


def test_zero_variance_features_dropped(training):
    frame = training.frame.copy()
    frame["flat"] = 7.0
    model = fit_t2(FeatureMatrix(frame))
    assert model.dropped_features == ("flat",)
    assert "flat" not in model.feature_names
    with pytest.raises(AllFeaturesConstant):
        fit_t2(_fm(np.ones((6, 2))))


def test_imputation_is_counted(training):
    frame = training.frame.copy()
    frame.iloc[3, 1] = np.nan
    frame.iloc[8, 2] = np.nan
    model = fit_t2(FeatureMatrix(frame))
    assert model.n_imputed_cells == 2


def test_too_few_rows_for_components():
    rng = np.random.default_rng(3)
    fm = _fm(rng.standard_normal((6, 8)))
    with pytest.raises(TooFewRows):
        fit_t2(fm, n_components=5)
    with pytest.raises(TooFewRows):
        fit_t2(_fm(rng.standard_normal((4, 2))))


def test_observation_validation(training):
    model = fit_t2(training, n_components=2)
    with pytest.raises(MissingFeature):
        t2_score(model, {"w": 1.0, "x": 2.0})
    with pytest.raises(MissingFeature):
        t2_score(model, np.zeros(3))
    with pytest.raises(NonFiniteValue):
        t2_score(model, np.array([1.0, np.nan, 0.0, 0.0]))


def test_flags_property_and_to_dict(training):
    model = fit_t2(training, n_components=2, alpha=0.2)
    np.testing.assert_array_equal(model.flags,
                                  model.training_t2 > model.t2_limit)
    payload = model.to_dict()
    assert payload["limit_rule"] == model.limit_rule
    assert payload["flags"] == model.flags.tolist()


def test_tag_contributions_collapse_fpc_columns():
    values = np.random.default_rng(4).standard_normal((20, 4))
    fm = _fm(values, ["temp|FPC1", "temp|FPC2", "press|FPC1", "duration|total"])
    model = fit_t2(fm)
    obs = values[0] + 1.0
    per_tag = tag_contributions(model, obs)
    per_feature = t2_contributions(model, obs)
    assert set(per_tag) == {"temp", "press", "duration|total"}
    np.testing.assert_allclose(
        per_tag["temp"],
        per_feature["temp|FPC1"] + per_feature["temp|FPC2"], atol=1e-12)
    np.testing.assert_allclose(sum(per_tag.values()),
                               t2_score(model, obs), atol=1e-9)


# --- functional MSPC --------------------------------------------------------------


def _functional_cohort(inject=True):
    rng = np.random.default_rng(42)
    n_batches, n_points = 20, 80
    t = np.linspace(0.0, 1.0, n_points)
    temp = (50.0 + 10.0 * np.sin(np.pi * t)[None, :]
            + rng.normal(0, 1.0, (n_batches, 1)) * np.sin(np.pi * t)[None, :]
            + rng.normal(0, 1.0, (n_batches, 1)) * np.cos(np.pi * t)[None, :] * 0.4
            + rng.normal(0, 0.05, (n_batches, n_points)))
    level = (5.0 + 3.0 * t[None, :]
             + rng.normal(0, 1.0, (n_batches, 1)) * (t * (1 - t))[None, :] * 1.2
             + rng.normal(0, 0.05, (n_batches, n_points)))
    if inject:
        # A localized shape excursion of five within-cohort sigmas on one
        # batch's temperature curve.
        idx = 40
        sigma = temp[:, idx].std(ddof=1)
        bump = 5.0 * sigma * np.exp(-0.5 * ((np.arange(n_points) - idx) / 6.0) ** 2)
        temp[7] += bump
    values = np.stack([temp, level], axis=1)
    return AlignedBatchSet(
        batch_ids=tuple(f"b{i:02d}" for i in range(n_batches)),
        tags=("temperature", "level"),
        grid=Grid(t),
        values=values,
        time_maps=np.tile(t, (n_batches, 1)),
        method="triggers",
    )


def test_functional_mspc_flags_shape_excursion():
    result = functional_mspc(_functional_cohort(), alpha=0.05)
    t2 = result.chart.training_t2
    worst = result.chart.batch_ids[int(np.argmax(t2))]
    assert worst == "b07"
    assert t2.max() > result.chart.t2_limit
    contrib = result.per_tag_contributions.loc["b07"]
    assert contrib["temperature"] > abs(contrib["level"])
    assert set(result.fpca_models) == {"temperature", "level"}


def test_functional_mspc_healthy_cohort_is_quiet():
    result = functional_mspc(_functional_cohort(inject=False), alpha=0.01)
    assert not result.chart.flags.any()
    # Scores concatenate per-tag FPC columns with tagged names.
    assert all("|FPC" in name for name in result.scores.feature_names)


def test_functional_mspc_skips_flat_tags():
    aligned = _functional_cohort(inject=False)
    values = aligned.values.copy()
    values[:, 1, :] = 4.0  # level becomes identical across batches
    flat = AlignedBatchSet(
        batch_ids=aligned.batch_ids, tags=aligned.tags, grid=aligned.grid,
        values=values, time_maps=aligned.time_maps, method="triggers")
    result = functional_mspc(flat, alpha=0.05)
    assert result.fpca_models["level"].n_components == 0
    assert all(name.startswith("temperature|") for name in result.scores.feature_names)
    both_flat = AlignedBatchSet(
        batch_ids=aligned.batch_ids, tags=aligned.tags, grid=aligned.grid,
        values=np.ones_like(values), time_maps=aligned.time_maps,
        method="triggers")
    with pytest.raises(AllFeaturesConstant):
        functional_mspc(both_flat)


def test_functional_mspc_needs_batches():
    aligned = _functional_cohort(inject=False)
    tiny = AlignedBatchSet(
        batch_ids=aligned.batch_ids[:4], tags=aligned.tags, grid=aligned.grid,
        values=aligned.values[:4], time_maps=aligned.time_maps[:4],
        method="triggers")
    with pytest.raises(TooFewRows):
        functional_mspc(tiny)
