"""Command-line interface.

Subcommands cover the whole pipeline: ``validate`` and ``align`` consume
raw long-format CSVs, ``features`` turns a dataset into a landmark feature
matrix, ``screen`` ranks features against a quality result, ``fpca`` and
``monitor`` work on aligned trajectories. Every run writes a ``run.json``
into the output directory echoing the full effective configuration, the
seed, and a SHA-256 digest of each input file, so identical invocations
are byte-identical and auditable.

Exit codes: 0 success, 2 input or validation failure, 3 infeasible
computation, 4 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys

import numpy as np
import pandas as pd

from . import __version__
from .align import (
    DtwConfig,
    TriggerAlignmentConfig,
    align_by_indicator,
    align_by_triggers,
    aligned_to_frame,
    dtw_align,
    frame_to_aligned,
    select_reference,
    stagewise_dtw,
)
from .errors import BatchwiseError, InfeasibleError, SchemaError
from .fpca import SmoothingConfig, fit_fpca, scores_matrix, smooth
from .ingest import load_dataset, validate
from .landmarks import FeatureMatrix, FeatureSpec, compute_durations, compute_landmarks
from .screen import ForestConfig, screen_predictors
from .spc import fit_t2, fit_univariate, functional_mspc, contribution_heatmap

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_INFEASIBLE = 3
EXIT_INTERNAL = 4

ALIGN_METHODS = ("triggers", "indicator", "dtw", "stagewise-dtw")


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return dataclasses.asdict(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _write_run_json(args, command: str, parameters: dict,
                    inputs: dict[str, str], outputs: list[str]) -> str:
    """Echo the run for reproducibility: config, seed, input digests.

    Inputs and outputs are recorded by basename, inputs with a SHA-256 of
    their content; directories are environment, not configuration, so two
    runs on identical data into different places still produce
    byte-identical files.
    """
    payload = {
        "command": command,
        "package": "batchwise",
        "version": __version__,
        "seed": args.seed,
        "strict": args.strict,
        "parameters": parameters,
        "inputs": {name: {"file": os.path.basename(str(path)),
                          "sha256": _digest(path)}
                   for name, path in inputs.items() if path is not None},
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    path = _out(args, "run.json")
    _write_json(path, payload)
    return path


def _dataset_inputs(args) -> dict[str, str]:
    return {"trajectories": args.trajectories, "events": args.events,
            "z": args.z, "y": args.y}


def _load(args):
    dataset = load_dataset(args.trajectories, args.events, z_path=args.z,
                           y_path=args.y, lax_columns=args.lax_columns)
    for message in dataset.warnings:
        _warn(message)
    return dataset


def _parse_tags(text: str | None) -> tuple[str, ...] | None:
    if text is None:
        return None
    tags = tuple(t.strip() for t in text.split(",") if t.strip())
    if not tags:
        raise SchemaError("empty tag list")
    return tags


# --- align --------------------------------------------------------------------


def _dtw_config(args) -> DtwConfig:
    return DtwConfig(
        variant=args.variant,
        local_P=args.local_p,
        global_band=args.global_band,
        band_width=args.band_width,
        boundary=args.boundary,
    )


def _run_alignment(dataset, method: str, args):
    """Run one alignment method; returns (aligned, sidecar_extras)."""
    if method == "triggers":
        config = TriggerAlignmentConfig(
            points_per_phase=args.points_per_phase,
            phase_length_mode=args.phase_length_mode)
        aligned = align_by_triggers(dataset, config, tags=_parse_tags(args.tags))
        return aligned, {}
    if method == "indicator":
        if not args.indicator_tag:
            raise SchemaError("--indicator-tag is required for indicator alignment")
        aligned = align_by_indicator(dataset, args.indicator_tag,
                                     n_points=args.n_points,
                                     tolerance=args.tolerance)
        return aligned, {}
    reference = args.reference or select_reference(dataset)
    config = _dtw_config(args)
    if method == "dtw":
        aligned, paths = dtw_align(dataset, reference, config)
    else:
        aligned, paths = stagewise_dtw(dataset, reference, config)
    extras = {"paths": {bid: p.pairs.tolist() for bid, p in paths.items()}}
    return aligned, extras


def _compare_panels(dataset, aligned, args, tag: str):
    """Build the four-panel overlay: unaligned plus one panel per method."""
    longest = max(len(b.series[tag]) for b in dataset.batches)
    x = np.arange(longest, dtype=float)
    raw = {}
    for b in dataset.batches:
        y = np.full(longest, np.nan)
        y[:len(b.series[tag])] = b.series[tag][:, 1]
        raw[b.batch_id] = y
    panels = {"unaligned": (x, raw)}

    def curves(aset):
        j = aset.tag_index(tag)
        return aset.grid.points, {bid: aset.values[i, j]
                                  for i, bid in enumerate(aset.batch_ids)}

    indicator_set = align_by_indicator(dataset, args.indicator_tag,
                                       n_points=args.n_points,
                                       tolerance=args.tolerance)
    panels["indicator"] = curves(indicator_set)
    trigger_set = align_by_triggers(dataset, TriggerAlignmentConfig(
        points_per_phase=args.points_per_phase,
        phase_length_mode=args.phase_length_mode))
    panels["triggers"] = curves(trigger_set)
    if aligned.method == "dtw":
        dtw_set = aligned
    else:
        dtw_set, _ = dtw_align(dataset, args.reference or select_reference(dataset),
                               _dtw_config(args))
    panels["dtw"] = curves(dtw_set)
    return panels


def cmd_align(args) -> int:
    """Align a dataset and write the aligned cube plus a sidecar JSON."""
    dataset = _load(args)
    aligned, extras = _run_alignment(dataset, args.method, args)

    failures = aligned.diagnostics.get("failures", {})
    for batch_id, reason in failures.items():
        _warn(f"batch {batch_id}: {reason}")
    if failures and args.strict:
        raise InfeasibleError(
            f"{len(failures)} batch(es) failed to align: "
            f"{sorted(failures)} (strict mode)")

    outputs = []
    aligned_path = _out(args, "aligned.csv")
    aligned_to_frame(aligned).to_csv(aligned_path, index=False)
    outputs.append(aligned_path)

    sidecar = {
        "method": aligned.method,
        "batch_ids": list(aligned.batch_ids),
        "tags": list(aligned.tags),
        "grid_length": len(aligned.grid),
        "phase_boundaries": {k: list(v) for k, v in aligned.phase_boundaries.items()},
        "reference_id": aligned.reference_id,
        "diagnostics": aligned.diagnostics,
    }
    sidecar.update(extras)
    sidecar_path = _out(args, "alignment.json")
    _write_json(sidecar_path, sidecar)
    outputs.append(sidecar_path)

    if args.compare:
        if not args.indicator_tag:
            raise SchemaError("--compare needs --indicator-tag for its indicator panel")
        from .plots import alignment_compare_plot
        plot_tag = args.plot_tag or aligned.tags[0]
        panels = _compare_panels(dataset, aligned, args, plot_tag)
        outputs.extend(alignment_compare_plot(
            panels, plot_tag, _out(args, "compare.svg")))

    parameters = {
        "method": args.method,
        "points_per_phase": args.points_per_phase,
        "phase_length_mode": args.phase_length_mode,
        "indicator_tag": args.indicator_tag,
        "n_points": args.n_points,
        "tolerance": args.tolerance,
        "variant": args.variant,
        "local_P": args.local_p,
        "global_band": args.global_band,
        "band_width": args.band_width,
        "boundary": args.boundary,
        "reference": args.reference,
        "tags": args.tags,
        "compare": args.compare,
        "plot_tag": args.plot_tag,
        "lax_columns": args.lax_columns,
    }
    outputs.append(_write_run_json(args, "align", parameters,
                                   _dataset_inputs(args), outputs))
    return EXIT_OK


# --- features -----------------------------------------------------------------


def cmd_features(args) -> int:
    """Compute landmark features (and durations) into features.csv."""
    dataset = _load(args)
    kwargs = {"transforms": tuple(args.transforms.split(",")),
              "scope": tuple(args.scope.split(","))}
    if args.statistics:
        kwargs["statistics"] = tuple(args.statistics.split(","))
    spec = FeatureSpec(**kwargs)
    features = compute_landmarks(dataset, spec)
    if not args.no_durations:
        features = features.join(compute_durations(dataset))

    outputs = []
    features_path = _out(args, "features.csv")
    features.to_csv(features_path)
    outputs.append(features_path)

    parameters = {
        "statistics": list(spec.statistics),
        "transforms": list(spec.transforms),
        "scope": list(spec.scope),
        "durations": not args.no_durations,
        "lax_columns": args.lax_columns,
    }
    outputs.append(_write_run_json(args, "features", parameters,
                                   _dataset_inputs(args), outputs))
    return EXIT_OK


# --- screen -------------------------------------------------------------------


def cmd_screen(args) -> int:
    """Rank features against a quality result with the noise threshold."""
    inputs: dict[str, str] = {}
    if args.features:
        if not args.y:
            raise SchemaError("--y is required to look up the target values")
        features = FeatureMatrix.from_csv(args.features)
        inputs["features"] = args.features
        inputs["y"] = args.y
        table = pd.read_csv(args.y)
        missing = {"batch_id", "name", "value"} - set(table.columns)
        if missing:
            raise SchemaError(f"result table missing column(s) {sorted(missing)}")
        rows = table[table["name"] == args.target]
        y = pd.Series(rows["value"].to_numpy(dtype=float),
                      index=rows["batch_id"].astype(str))
    else:
        if not args.trajectories or not args.events:
            raise SchemaError(
                "screen needs either --features or --trajectories/--events")
        dataset = _load(args)
        inputs.update(_dataset_inputs(args))
        features = compute_landmarks(dataset, FeatureSpec())
        features = features.join(compute_durations(dataset))
        y = pd.Series({bid: vals[args.target]
                       for bid, vals in dataset.y_table.items()
                       if args.target in vals})
    if y.empty:
        raise SchemaError(f"no batch has a result named {args.target!r}")

    config = ForestConfig(
        n_trees=args.n_trees,
        max_depth=args.max_depth,
        min_samples_leaf=args.min_samples_leaf,
        feature_subsample=args.feature_subsample,
        row_bootstrap=not args.no_bootstrap,
        seed=args.seed,
    )
    report = screen_predictors(features, y, config, target_name=args.target)

    outputs = []
    report_path = _out(args, "screening.json")
    _write_json(report_path, report.to_dict())
    outputs.append(report_path)

    ranking = sorted(report.contributions.items(), key=lambda kv: (-kv[1], kv[0]))
    table = pd.DataFrame(ranking, columns=["feature", "contribution"])
    table["selected"] = table["feature"].isin(report.selected)
    ranking_path = _out(args, "contributions.csv")
    table.to_csv(ranking_path, index=False)
    outputs.append(ranking_path)

    parameters = {"target": args.target, "features": args.features,
                  "config": config.to_dict(), "lax_columns": args.lax_columns}
    outputs.append(_write_run_json(args, "screen", parameters, inputs, outputs))
    return EXIT_OK


# --- fpca ---------------------------------------------------------------------


def _load_aligned(path: str):
    frame = pd.read_csv(path)
    return frame_to_aligned(frame)


def _smoothing_config(args) -> SmoothingConfig | None:
    if args.basis == "none" and args.penalty == 0.0:
        return None
    return SmoothingConfig(basis=args.basis, order=args.order,
                           n_knots=args.n_knots, penalty=args.penalty)


def cmd_fpca(args) -> int:
    """Fit per-tag FPCA models on aligned curves; write models and scores."""
    aligned = _load_aligned(args.aligned)
    tags = _parse_tags(args.tags) or aligned.tags
    unknown = [t for t in tags if t not in aligned.tags]
    if unknown:
        raise SchemaError(f"tag(s) {unknown} not present in the aligned data")

    smoothing = _smoothing_config(args)
    outputs = []
    score_blocks = []
    from .plots import fpca_plot
    for tag in tags:
        curves = smooth(aligned, tag, smoothing) if smoothing \
            else aligned.values[:, aligned.tag_index(tag), :]
        model = fit_fpca(
            curves, grid=aligned.grid,
            variance_cutoff=args.cutoff if args.cutoff is not None else 0.95,
            n_components=args.n_components,
            quadrature=args.quadrature, tag=tag,
            batch_ids=aligned.batch_ids, smoothing=smoothing)
        model_path = _out(args, f"fpca_{tag}.json")
        _write_json(model_path, model.to_dict())
        outputs.append(model_path)
        outputs.extend(fpca_plot(model, _out(args, f"fpca_{tag}.svg")))
        if model.n_components:
            score_blocks.append(scores_matrix(model))
        else:
            _warn(f"tag {tag}: no variation across batches, no scores emitted")

    if score_blocks:
        scores = score_blocks[0]
        for block in score_blocks[1:]:
            scores = scores.join(block)
        scores_path = _out(args, "scores.csv")
        scores.to_csv(scores_path)
        outputs.append(scores_path)

    parameters = {
        "tags": list(tags),
        "cutoff": args.cutoff,
        "n_components": args.n_components,
        "quadrature": args.quadrature,
        "basis": args.basis,
        "order": args.order,
        "n_knots": args.n_knots,
        "penalty": args.penalty,
    }
    outputs.append(_write_run_json(args, "fpca", parameters,
                                   {"aligned": args.aligned}, outputs))
    return EXIT_OK


# --- monitor ------------------------------------------------------------------


def _monitor_univariate(args, outputs: list[str]) -> dict[str, str]:
    features = FeatureMatrix.from_csv(args.features)
    if args.feature not in features.feature_names:
        raise SchemaError(f"feature {args.feature!r} not in the feature matrix")
    column = features.frame[args.feature].to_numpy(dtype=float)
    chart = fit_univariate(column, labels=features.batch_ids)
    chart_path = _out(args, "univariate.json")
    _write_json(chart_path, chart.to_dict())
    outputs.append(chart_path)
    from .plots import control_chart_plot
    outputs.extend(control_chart_plot(
        chart.points, chart.upper, features.batch_ids,
        _out(args, "univariate_chart.svg"),
        title=f"Individuals chart: {args.feature}",
        center=chart.center, lower=chart.lower))
    return {"features": args.features}


def _monitor_t2(args, outputs: list[str]) -> dict[str, str]:
    features = FeatureMatrix.from_csv(args.features)
    chart = fit_t2(features, n_components=args.n_components,
                   variance_cutoff=args.cutoff, alpha=args.alpha)
    chart_path = _out(args, "t2.json")
    payload = chart.to_dict()
    payload["flagged"] = [bid for bid, f in zip(chart.batch_ids, chart.flags) if f]
    _write_json(chart_path, payload)
    outputs.append(chart_path)
    from .plots import control_chart_plot, heatmap_plot
    outputs.extend(control_chart_plot(
        chart.training_t2, chart.t2_limit, chart.batch_ids,
        _out(args, "t2_chart.svg"), title="Hotelling T²"))
    heat = contribution_heatmap(chart, features)
    outputs.extend(heatmap_plot(heat, _out(args, "t2_contributions.svg"),
                                title="T² contributions"))
    return {"features": args.features}


def _monitor_functional(args, outputs: list[str]) -> dict[str, str]:
    aligned = _load_aligned(args.aligned)
    result = functional_mspc(
        aligned, tags=_parse_tags(args.tags),
        fpca_cutoff=args.fpca_cutoff, alpha=args.alpha,
        smoothing=_smoothing_config(args), chart_cutoff=args.chart_cutoff)
    chart = result.chart
    payload = chart.to_dict()
    payload["flagged"] = [bid for bid, f in zip(chart.batch_ids, chart.flags) if f]
    payload["fpca_components"] = {tag: m.n_components
                                  for tag, m in result.fpca_models.items()}
    chart_path = _out(args, "monitor.json")
    _write_json(chart_path, payload)
    outputs.append(chart_path)

    contributions_path = _out(args, "tag_contributions.csv")
    result.per_tag_contributions.to_csv(contributions_path)
    outputs.append(contributions_path)

    from .plots import control_chart_plot, heatmap_plot
    outputs.extend(control_chart_plot(
        chart.training_t2, chart.t2_limit, chart.batch_ids,
        _out(args, "monitor_chart.svg"), title="Functional T²"))
    outputs.extend(heatmap_plot(result.per_tag_contributions,
                                _out(args, "monitor_contributions.svg"),
                                title="Per-tag T² contributions"))
    return {"aligned": args.aligned}


def cmd_monitor(args) -> int:
    """Fit a control chart (univariate, T², or functional) and write it."""
    outputs: list[str] = []
    if args.mode == "univariate":
        if not args.features or not args.feature:
            raise SchemaError("univariate mode needs --features and --feature")
        inputs = _monitor_univariate(args, outputs)
    elif args.mode == "t2":
        if not args.features:
            raise SchemaError("t2 mode needs --features")
        inputs = _monitor_t2(args, outputs)
    else:
        if not args.aligned:
            raise SchemaError("functional mode needs --aligned")
        inputs = _monitor_functional(args, outputs)

    parameters = {
        "mode": args.mode,
        "feature": args.feature,
        "tags": args.tags,
        "n_components": args.n_components,
        "cutoff": args.cutoff,
        "fpca_cutoff": args.fpca_cutoff,
        "chart_cutoff": args.chart_cutoff,
        "alpha": args.alpha,
        "basis": args.basis,
        "order": args.order,
        "n_knots": args.n_knots,
        "penalty": args.penalty,
    }
    outputs.append(_write_run_json(args, "monitor", parameters, inputs, outputs))
    return EXIT_OK


# --- validate -----------------------------------------------------------------


def cmd_validate(args) -> int:
    """Load and validate a dataset; write the findings."""
    dataset = _load(args)
    report = validate(dataset)
    payload = {
        "batch_ids": list(dataset.batch_ids),
        "tags": list(dataset.tags),
        "issues": [dataclasses.asdict(issue) for issue in report.issues],
        "sample_counts": {f"{batch_id}/{tag}": count
                          for (batch_id, tag), count in report.sample_counts.items()},
        "warnings": list(dataset.warnings),
    }
    outputs = [_out(args, "validation.json")]
    _write_json(outputs[0], payload)
    outputs.append(_write_run_json(args, "validate",
                                   {"lax_columns": args.lax_columns},
                                   _dataset_inputs(args), outputs))
    print(report.summary())
    if report.issues and args.strict:
        raise SchemaError(f"{len(report.issues)} validation issue(s) (strict mode)")
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def _add_global_flags(parser) -> None:
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for every random draw (default 0)")
    parser.add_argument("--out-dir", default=".",
                        help="directory for all outputs (default .)")
    parser.add_argument("--strict", action="store_true",
                        help="treat warnings and partial failures as fatal")
    parser.add_argument("--lax-columns", action="store_true",
                        help="accept extra CSV columns instead of rejecting them")


def _add_dataset_args(parser, required: bool = True) -> None:
    parser.add_argument("--trajectories", required=required,
                        help="long-format trajectory CSV")
    parser.add_argument("--events", required=required,
                        help="phase event CSV")
    parser.add_argument("--z", default=None, help="initial-conditions CSV")
    parser.add_argument("--y", default=None, help="quality-results CSV")


def _add_smoothing_args(parser) -> None:
    parser.add_argument("--basis", choices=("none", "bspline"), default="none")
    parser.add_argument("--order", type=int, default=4,
                        help="B-spline order (default 4, i.e. cubic)")
    parser.add_argument("--n-knots", type=int, default=20,
                        help="number of basis functions (default 20)")
    parser.add_argument("--penalty", type=float, default=0.0,
                        help="second-difference roughness penalty (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="batchwise",
        description="Batch-process trajectory alignment, features, and monitoring.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", help="align batches onto a common grid")
    _add_dataset_args(p)
    p.add_argument("--method", choices=ALIGN_METHODS, default="triggers")
    p.add_argument("--points-per-phase", type=int, default=100)
    p.add_argument("--phase-length-mode", choices=("median_duration", "equal"),
                   default="median_duration")
    p.add_argument("--indicator-tag", default=None)
    p.add_argument("--n-points", type=int, default=101,
                   help="grid size for indicator alignment (default 101)")
    p.add_argument("--tolerance", type=float, default=0.01,
                   help="indicator monotonicity slack (default 0.01)")
    p.add_argument("--variant", default="classical",
                   choices=("classical", "derivative_exponential",
                            "derivative_savitzky_golay",
                            "derivative_piecewise_linear"))
    p.add_argument("--local-p", type=int, default=0,
                   help="slope constraint on warping steps (default 0)")
    p.add_argument("--global-band", choices=("none", "sakoe_chiba", "itakura"),
                   default="none")
    p.add_argument("--band-width", type=int, default=None)
    p.add_argument("--boundary", choices=("closed", "open_end"), default="closed")
    p.add_argument("--reference", default=None,
                   help="reference batch id (default: lower-median duration)")
    p.add_argument("--tags", default=None, help="comma-separated tag subset")
    p.add_argument("--compare", action="store_true",
                   help="also emit a four-panel method-comparison SVG")
    p.add_argument("--plot-tag", default=None,
                   help="tag shown in the comparison panel (default: first tag)")
    _add_global_flags(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("features", help="compute landmark features and durations")
    _add_dataset_args(p)
    p.add_argument("--statistics", default=None,
                   help="comma-separated statistic names (default: the basic seven)")
    p.add_argument("--transforms", default="raw",
                   help="comma-separated transforms: raw,derivative,integral")
    p.add_argument("--scope", default="phase",
                   help="comma-separated scopes: phase,batch")
    p.add_argument("--no-durations", action="store_true",
                   help="skip the phase-duration features")
    _add_global_flags(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("screen", help="rank features against a quality result")
    _add_dataset_args(p, required=False)
    p.add_argument("--target", required=True, help="result name to predict")
    p.add_argument("--features", default=None,
                   help="precomputed features.csv (default: compute landmarks)")
    p.add_argument("--n-trees", type=int, default=200)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-samples-leaf", type=int, default=3)
    p.add_argument("--feature-subsample", type=float, default=1.0 / 3.0)
    p.add_argument("--no-bootstrap", action="store_true")
    _add_global_flags(p)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("fpca", help="fit functional PCA models on aligned curves")
    p.add_argument("--aligned", required=True, help="aligned.csv from `align`")
    p.add_argument("--tags", default=None, help="comma-separated tags (default: all)")
    p.add_argument("--cutoff", type=float, default=None,
                   help="explained-variance cutoff (default 0.95)")
    p.add_argument("--n-components", type=int, default=None,
                   help="fixed component count (overrides --cutoff)")
    p.add_argument("--quadrature", choices=("trapezoid", "uniform"),
                   default="trapezoid")
    _add_smoothing_args(p)
    _add_global_flags(p)
    p.set_defaults(func=cmd_fpca)

    p = sub.add_parser("monitor", help="fit control charts")
    p.add_argument("--mode", choices=("univariate", "t2", "functional"),
                   default="functional")
    p.add_argument("--features", default=None,
                   help="features.csv (univariate and t2 modes)")
    p.add_argument("--feature", default=None,
                   help="feature column for univariate mode")
    p.add_argument("--aligned", default=None,
                   help="aligned.csv (functional mode)")
    p.add_argument("--tags", default=None, help="comma-separated tags (default: all)")
    p.add_argument("--n-components", type=int, default=None)
    p.add_argument("--cutoff", type=float, default=None,
                   help="variance cutoff for t2 mode")
    p.add_argument("--fpca-cutoff", type=float, default=0.95)
    p.add_argument("--chart-cutoff", type=float, default=0.95)
    p.add_argument("--alpha", type=float, default=0.01)
    _add_smoothing_args(p)
    _add_global_flags(p)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("validate", help="check a dataset and report findings")
    _add_dataset_args(p)
    _add_global_flags(p)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BatchwiseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
