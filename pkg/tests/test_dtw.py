"""Dynamic time warping: oracles, constraints, bands, and application."""

import numpy as np
import pytest

from batchwise.align import (
    Band,
    DtwConfig,
    WarpingPath,
    choose_local_P,
    dtw_align,
    dtw_cost_matrix,
    dtw_optimal_path,
    envelope_band,
    pretreat_derivative,
    select_reference,
    stagewise_dtw,
)
from batchwise.errors import (
    AllCandidatesInfeasible,
    EmptyTagSet,
    NoFeasiblePath,
    SchemaError,
    SeriesTooShort,
    ZeroVarianceTag,
)
from conftest import make_batch, make_dataset


# --- independent oracles ---------------------------------------------------------


def brute_force_cost(d):
    """Minimum path cost by exhaustive enumeration (steps right/down/diag)."""
    n, m = d.shape
    best = [np.inf]

    def walk(i, j, acc):
        acc += d[i, j]
        if acc >= best[0]:
            return
        if i == n - 1 and j == m - 1:
            best[0] = acc
            return
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)

    walk(0, 0, 0.0)
    return best[0]


def brute_force_cost_composite(d, P):
    """Exhaustive minimum with the slope constraint for P >= 1.

    Allowed moves into (i, j): a diagonal step from (i-1, j-1) costing
    d[i, j], or a composite from (i-P-1, j-P) or (i-P, j-P-1) costing the
    whole traversed stretch sum(d[i-k, j-k] for k in 0..P).
    """
    n, m = d.shape
    cache = {}

    def best(i, j):
        if i == 0 and j == 0:
            return d[0, 0]
        if (i, j) in cache:
            return cache[(i, j)]
        out = np.inf
        if i >= 1 and j >= 1:
            out = best(i - 1, j - 1) + d[i, j]
        stretch = sum(d[i - k, j - k] for k in range(P + 1)
                      if i - k >= 0 and j - k >= 0)
        if i - P - 1 >= 0 and j - P >= 0 and i - P >= 0:
            out = min(out, best(i - P - 1, j - P) + stretch)
        if i - P >= 0 and j - P - 1 >= 0 and j - P >= 0:
            out = min(out, best(i - P, j - P - 1) + stretch)
        cache[(i, j)] = out
        return out

    return best(n - 1, m - 1)


def _cost(ref, qry, **kwargs):
    config = DtwConfig(**kwargs)
    cm = dtw_cost_matrix({"x": ref}, {"x": qry}, config)
    return dtw_optimal_path(cm, local_P=config.local_P,
                            boundary=config.boundary)


# --- cost matrix -----------------------------------------------------------------


def test_cost_matrix_hand_example():
    cm = dtw_cost_matrix({"x": np.array([0.0, 2.0])},
                         {"x": np.array([1.0, 1.0])},
                         DtwConfig(normalize="none"))
    np.testing.assert_allclose(cm, [[1.0, 1.0], [1.0, 1.0]])


def test_cost_matrix_standardizes_by_reference():
    ref = np.array([0.0, 2.0, 4.0])
    qry = np.array([0.0, 2.0, 4.0])
    cm = dtw_cost_matrix({"x": ref}, {"x": qry}, DtwConfig())
    np.testing.assert_allclose(np.diag(cm), 0.0, atol=1e-12)
    # Off-diagonal distances are in reference-sigma units.
    sigma = ref.std()
    np.testing.assert_allclose(cm[0, 1], 2.0 / sigma)


def test_zero_variance_reference_tag():
    with pytest.raises(ZeroVarianceTag):
        dtw_cost_matrix({"x": np.ones(5)}, {"x": np.arange(5.0)}, DtwConfig())


def test_weights_drop_tag_and_reject_empty():
    ref = {"x": np.arange(5.0), "y": np.array([3.0, 1.0, 4.0, 1.0, 5.0])}
    qry = {"x": np.arange(5.0) + 1, "y": np.array([2.0, 7.0, 1.0, 8.0, 2.0])}
    only_x = dtw_cost_matrix(ref, qry, DtwConfig(weights={"x": 1.0, "y": 0.0}))
    ref_x = {"x": ref["x"]}
    qry_x = {"x": qry["x"]}
    np.testing.assert_allclose(only_x, dtw_cost_matrix(ref_x, qry_x, DtwConfig()))
    with pytest.raises(EmptyTagSet):
        DtwConfig(weights={"x": 0.0, "y": 0.0})


def test_multivariate_weight_scaling():
    ref = {"x": np.arange(4.0), "y": np.arange(4.0)[::-1].copy()}
    qry = {"x": np.arange(4.0) + 0.5, "y": np.arange(4.0)[::-1] - 0.5}
    even = dtw_cost_matrix(ref, qry, DtwConfig(weights={"x": 1.0, "y": 1.0}))
    double = dtw_cost_matrix(ref, qry, DtwConfig(weights={"x": 2.0, "y": 2.0}))
    np.testing.assert_allclose(double, np.sqrt(2.0) * even)


# --- optimal path ----------------------------------------------------------------


def test_dp_equals_brute_force_p0():
    rng = np.random.default_rng(0)
    for _ in range(60):
        n, m = rng.integers(2, 8, size=2)
        d = rng.random((n, m))
        path = dtw_optimal_path(d, local_P=0)
        assert path.cost == brute_force_cost(d)
        np.testing.assert_allclose(
            d[path.pairs[:, 0], path.pairs[:, 1]].sum(), path.cost, atol=1e-12)


@pytest.mark.parametrize("P", [1, 2])
def test_dp_equals_brute_force_composite(P):
    rng = np.random.default_rng(P)
    hits = 0
    for _ in range(60):
        n, m = rng.integers(P + 2, 9, size=2)
        d = rng.random((n, m))
        oracle = brute_force_cost_composite(d, P)
        if not np.isfinite(oracle):
            continue
        hits += 1
        path = dtw_optimal_path(d, local_P=P)
        np.testing.assert_allclose(path.cost, oracle, atol=1e-12)
        np.testing.assert_allclose(
            d[path.pairs[:, 0], path.pairs[:, 1]].sum(), path.cost, atol=1e-12)
    assert hits >= 40


def test_infeasible_composite_raises():
    # A 2x5 matrix cannot host any P=2 path: too few rows for the slope.
    d = np.ones((2, 5))
    with pytest.raises(NoFeasiblePath):
        dtw_optimal_path(d, local_P=2)


def test_tie_break_prefers_diagonal():
    d = np.zeros((4, 4))
    path = dtw_optimal_path(d, local_P=0)
    np.testing.assert_array_equal(path.pairs,
                                  [[0, 0], [1, 1], [2, 2], [3, 3]])


def test_identity_is_zero_cost():
    x = np.sin(np.linspace(0, 3, 40))
    for P in (0, 1, 2):
        path = _cost(x, x, local_P=P)
        assert path.cost < 1e-12
        np.testing.assert_array_equal(path.pairs[:, 0], path.pairs[:, 1])


def test_cost_non_decreasing_in_p():
    rng = np.random.default_rng(7)
    for _ in range(10):
        ref = rng.standard_normal(25).cumsum()
        qry = rng.standard_normal(22).cumsum()
        costs = [_cost(ref, qry, local_P=P).cost for P in (0, 1, 2)]
        assert costs[0] <= costs[1] + 1e-12
        assert costs[1] <= costs[2] + 1e-12


# --- global bands ----------------------------------------------------------------


def test_sakoe_chiba_band_respected_and_nested():
    rng = np.random.default_rng(1)
    ref = rng.standard_normal(30).cumsum()
    qry = rng.standard_normal(30).cumsum()
    unconstrained = _cost(ref, qry).cost
    last = unconstrained
    for width in (8, 4, 2):
        path = _cost(ref, qry, global_band="sakoe_chiba", band_width=width)
        assert np.abs(path.pairs[:, 0] - path.pairs[:, 1]).max() <= width
        assert path.cost >= last - 1e-12
        last = path.cost


def test_sakoe_chiba_infeasible_when_lengths_differ_beyond_width():
    ref = np.arange(10.0)
    qry = np.arange(20.0)
    with pytest.raises(NoFeasiblePath):
        _cost(ref, qry, global_band="sakoe_chiba", band_width=3)


def test_itakura_band_matches_inequalities():
    ref = np.sin(np.linspace(0, 2, 24))
    qry = np.sin(np.linspace(0, 2, 20)) * 1.1
    path = _cost(ref, qry, global_band="itakura")
    n, m = 24, 20
    eps = 1e-9
    for i, j in path.pairs:
        lo = max(0.5 * i, (m - 1) - 2.0 * (n - 1 - i))
        hi = min(2.0 * i, (m - 1) - 0.5 * (n - 1 - i))
        assert lo - eps <= j <= hi + eps


def test_envelope_band_contains_training_paths():
    rng = np.random.default_rng(5)
    ref = np.sin(np.linspace(0, 3, 30))
    paths = []
    for _ in range(4):
        qry = np.sin(np.linspace(0, 3, 30) + rng.normal(0, 0.2)) \
            + rng.normal(0, 0.05, 30)
        paths.append(_cost(ref, qry))
    band = envelope_band(paths)
    assert all(band.contains(p) for p in paths)
    # The closure keeps the band a feasible monotone staircase.
    assert np.all(np.diff(band.lo) >= 0)
    assert np.all(np.diff(band.hi) >= 0)
    qry = np.sin(np.linspace(0, 3, 30) + 0.1)
    constrained = _cost(ref, qry, global_band="envelope",
                        band=band)
    assert band.contains(constrained)
    assert constrained.cost >= _cost(ref, qry).cost - 1e-12


def test_envelope_band_needs_matching_reference_length():
    p1 = dtw_optimal_path(np.random.default_rng(0).random((5, 5)))
    p2 = dtw_optimal_path(np.random.default_rng(1).random((6, 5)))
    with pytest.raises(SchemaError):
        envelope_band([p1, p2])


# --- boundaries ------------------------------------------------------------------


def test_open_end_ignores_reference_tail():
    t = np.linspace(0, 2 * np.pi, 50)
    ref = np.concatenate([np.sin(t), np.full(20, np.sin(t[-1]))
                          + np.linspace(0, 3, 20)])
    qry = np.sin(t)
    closed = _cost(ref, qry)
    open_end = _cost(ref, qry, boundary="open_end")
    assert open_end.cost < closed.cost
    assert open_end.pairs[-1, 0] < len(ref) - 1
    assert open_end.pairs[-1, 1] == len(qry) - 1


def test_open_end_tie_picks_first_reference_index():
    d = np.zeros((5, 3))
    path = dtw_optimal_path(d, boundary="open_end")
    assert tuple(path.pairs[-1]) == (0, 2)


# --- derivative pretreatment -------------------------------------------------------


@pytest.mark.parametrize("variant", ["derivative_savitzky_golay",
                                     "derivative_piecewise_linear"])
def test_derivative_of_affine_is_constant(variant):
    x = 2.5 * np.arange(40.0) + 3.0
    d = pretreat_derivative(x, variant)
    assert d.shape == (39,)
    np.testing.assert_allclose(d, 2.5, atol=1e-6)


def test_exponential_derivative_converges_to_slope():
    x = 2.5 * np.arange(40.0) + 3.0
    d = pretreat_derivative(x, "derivative_exponential")
    assert d.shape == (39,)
    # One-sided smoothing has a warm-up transient; the tail settles on
    # the true slope and the whole sequence approaches it monotonically.
    np.testing.assert_allclose(d[25:], 2.5, atol=1e-3)
    assert np.all(np.diff(d) >= -1e-12)


def test_derivative_too_short():
    with pytest.raises(SeriesTooShort):
        pretreat_derivative(np.arange(5.0), "derivative_savitzky_golay")
    with pytest.raises(SeriesTooShort):
        pretreat_derivative(np.arange(6.0), "derivative_piecewise_linear")


def test_derivative_variant_aligns_on_slope_not_level():
    # Same shape at two different levels: classical sees a mismatch after
    # reference standardization, the derivative variant does not.
    t = np.linspace(0, 2 * np.pi, 60)
    ref = np.sin(t)
    qry = np.sin(t) + 5.0
    classical = _cost(ref, qry, normalize="none")
    derivative = _cost(ref, qry, variant="derivative_exponential",
                       normalize="none")
    assert derivative.cost < classical.cost


# --- dataset-level alignment -------------------------------------------------------


def _sine_batch(batch_id, n, freq=1.0, start_time=0.0):
    times = np.linspace(0.0, 100.0, n)
    values = np.sin(2 * np.pi * freq * times / 100.0)
    return make_batch(batch_id, [("p", 0.0, 100.0)],
                      {"x": np.column_stack([times, values])},
                      start_time=start_time)


def test_select_reference_lower_median():
    batches = [_sine_batch("A", 50), _sine_batch("B", 60), _sine_batch("C", 70),
               _sine_batch("D", 80)]
    for k, b in enumerate(batches):
        object.__setattr__(b.phases[0], "end", 100.0 + k)
    ds = make_dataset(batches)
    assert select_reference(ds) == "B"
    assert select_reference(ds, exclude_batches=("B",)) == "C"


def test_dtw_align_recovers_stretched_batch():
    # The query repeats every reference sample twice; collapsing the
    # many-to-one pairs by averaging recovers the reference exactly.
    times = np.linspace(0.0, 100.0, 30)
    values = np.sin(times / 8.0)
    ref = make_batch("REF", [("p", 0.0, 100.0)],
                     {"x": np.column_stack([times, values])})
    q_times = np.linspace(0.0, 100.0, 60)
    q_values = np.repeat(values, 2)
    qry = make_batch("Q", [("p", 0.0, 100.0)],
                     {"x": np.column_stack([q_times, q_values])})
    ds = make_dataset([ref, qry])
    aligned, paths = dtw_align(ds, "REF")
    assert paths["REF"].cost == 0.0
    assert paths["Q"].cost < 1e-9
    np.testing.assert_allclose(aligned.values[0, 0], aligned.values[1, 0],
                               atol=1e-9)
    assert aligned.reference_id == "REF"
    assert len(aligned.grid) == 30


def test_dtw_align_records_per_batch_failures():
    good = _sine_batch("A", 40)
    short = make_batch("S", [("p", 0.0, 100.0)],
                       {"x": [[0.0, 0.0], [100.0, 1.0]]})
    ds = make_dataset([good, short])
    aligned, paths = dtw_align(ds, "A", DtwConfig(local_P=2))
    assert "S" in aligned.diagnostics["failures"]
    assert "S" not in paths
    assert list(aligned.batch_ids) == ["A"]


def test_stagewise_boundaries_and_cost_additivity():
    def staged(batch_id, stretch):
        n1, n2 = 20, 30
        t1 = np.linspace(0.0, 50.0 * stretch, n1, endpoint=False)
        t2 = np.linspace(50.0 * stretch, 50.0 * stretch + 50.0, n2)
        times = np.concatenate([t1, t2])
        values = np.concatenate([np.linspace(0, 1, n1, endpoint=False),
                                 1.0 + np.sin(np.linspace(0, 3, n2))])
        return make_batch(batch_id,
                          [("fill", 0.0, 50.0 * stretch),
                           ("react", 50.0 * stretch, 50.0 * stretch + 50.0)],
                          {"x": np.column_stack([times, values])})

    ds = make_dataset([staged("R", 1.0), staged("Q", 1.4)])
    aligned, paths = stagewise_dtw(ds, "R", DtwConfig())
    bounds = aligned.phase_boundaries
    assert set(bounds) == {"fill", "react"}
    assert bounds["fill"][1] == bounds["react"][0]
    assert paths["Q"].cost >= 0.0
    with pytest.raises(SchemaError):
        stagewise_dtw(ds, "R", DtwConfig(boundary="open_end"))
    band = Band(lo=np.zeros(5, dtype=np.intp), hi=np.full(5, 4, dtype=np.intp))
    with pytest.raises(SchemaError):
        stagewise_dtw(ds, "R", DtwConfig(global_band="envelope", band=band))


def test_choose_local_p_identity_prefers_smallest():
    ds = make_dataset([_sine_batch("A", 40), _sine_batch("B", 40),
                       _sine_batch("C", 40)])
    assert choose_local_P(ds, "A", DtwConfig(), (0, 1, 2)) == 0


def test_choose_local_p_all_infeasible():
    ds = make_dataset([_sine_batch("A", 20), _sine_batch("B", 40)])
    config = DtwConfig(global_band="sakoe_chiba", band_width=2)
    with pytest.raises(AllCandidatesInfeasible):
        choose_local_P(ds, "A", config, (0, 1))


def test_choose_local_p_penalizes_distortion():
    # The query shares the reference shape but with a flat shelf inserted,
    # which P=0 absorbs with a long pause (high distortion); some cost
    # increase under P>=1 trades against it.
    times = np.linspace(0.0, 100.0, 50)
    values = np.sin(times / 7.0)
    ref = make_batch("R", [("p", 0.0, 100.0)],
                     {"x": np.column_stack([times, values])})
    q = np.concatenate([values[:25], np.full(12, values[25]), values[25:]])
    qt = np.linspace(0.0, 100.0, q.size)
    qry = make_batch("Q", [("p", 0.0, 100.0)],
                     {"x": np.column_stack([qt, q])})
    ds = make_dataset([ref, qry])
    chosen = choose_local_P(ds, "R", DtwConfig(), (0, 1, 2),
                            distortion_weight=1.0)
    assert chosen in (0, 1, 2)


# --- WarpingPath -----------------------------------------------------------------


def test_path_validation():
    with pytest.raises(SchemaError):
        WarpingPath(pairs=np.array([[1, 0], [2, 1]]), cost=0.0)
    with pytest.raises(SchemaError):
        WarpingPath(pairs=np.array([[0, 0], [2, 1]]), cost=0.0)
    with pytest.raises(SchemaError):
        WarpingPath(pairs=np.array([[0, 0], [0, 0]]), cost=0.0)


def test_singularity_count_axes():
    pairs = np.array([[0, 0], [1, 0], [2, 0], [3, 0], [4, 0], [5, 1]])
    path = WarpingPath(pairs=pairs, cost=0.0)
    assert path.singularity_count(multiplicity=5, axis="query") == 1
    assert path.singularity_count(multiplicity=5, axis="reference") == 0
    assert path.singularity_count(multiplicity=5, axis="both") == 1
    assert path.singularity_count(multiplicity=6, axis="query") == 0
    with pytest.raises(ValueError):
        path.singularity_count(axis="nope")
