"""Command-line interface.

Subcommands mirror the pipeline stages so every step is independently
scriptable through the documented file formats (schema config, response
CSV, forest JSON, importance CSV, SVG).  Exit codes: 0 success, 2 config
error, 3 data error, 4 model error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__, chord, evaluate, explain, importance, pipeline, stats, synth
from .errors import ConfigError, DataError, ModelError, SchemaError, StageError
from .forest import BACKEND, Forest, ForestConfig, fit_forest
from .rng import STAGE_BASELINE, derive_seed
from .schema import (
    complete_cases,
    label_adoption,
    load_schema,
    parse_responses,
    screen,
    write_responses,
)

EPILOG = """environment overrides:
  CHORDFOREST_WORKERS   default worker count for --workers
  CHORDFOREST_BACKEND   split kernel: auto (default) | python | compiled

exit codes: 0 success, 2 config error, 3 data error, 4 model error
"""


def _default_workers() -> int:
    raw = os.environ.get("CHORDFOREST_WORKERS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"CHORDFOREST_WORKERS must be an integer, got {raw!r}") from None
    return 1


def _forest_config(args, seed) -> ForestConfig:
    return ForestConfig(
        n_trees=args.n_trees,
        mtry=args.mtry,
        min_node_size=args.min_node_size,
        max_depth=args.max_depth,
        seed=seed,
    )


def _add_forest_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-trees", type=int, default=500, help="trees per forest (default 500)")
    p.add_argument("--mtry", type=int, default=None,
                   help="features per split (default: predictors/3)")
    p.add_argument("--min-node-size", type=int, default=5,
                   help="minimum in-bag rows per child (default 5)")
    p.add_argument("--max-depth", type=int, default=None, help="depth cap (default none)")


def _predictors(schema, factor_code: str, model_class: str):
    if model_class == "external":
        return schema.external_predictors(factor_code)
    return schema.internal_predictors(factor_code)


# ---------------------------------------------------------------------------
# subcommand implementations


def cmd_ingest(args) -> int:
    schema = load_schema(args.schema)
    ds = parse_responses(args.data, schema)
    screened, report = screen(ds, args.max_na, schema.all_items())
    if args.complete_cases:
        screened = complete_cases(screened, schema.all_items())
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_responses(screened, out)
    report_path = out.with_suffix(".screening.json")
    report_path.write_text(report.to_json(), encoding="utf-8")
    print(f"retained {report.n_retained}/{report.n_input} rows -> {out}")
    print(f"screening report -> {report_path}")
    return 0


def cmd_synth(args) -> int:
    schema = load_schema(args.schema)
    spec = synth.SyntheticSpec.from_json(args.spec)
    ds = synth.generate_synthetic(spec, schema, seed=args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_responses(ds, args.out)
    print(f"wrote {ds.n_rows} synthetic rows -> {args.out}")
    return 0


def cmd_fit(args) -> int:
    schema = load_schema(args.schema)
    ds = parse_responses(args.data, schema)
    factor = schema.factor(args.target)
    target = factor.overall_item
    predictors = _predictors(schema, args.target, args.model_class)
    ds = complete_cases(ds, [target, *predictors])
    forest = fit_forest(ds, target, predictors, _forest_config(args, args.seed),
                        workers=args.workers)
    forest.save(args.out)
    print(f"fit {args.model_class} forest for {target} "
          f"({forest.n_trees} trees, {len(predictors)} predictors) -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    schema = load_schema(args.schema)
    forest = Forest.load(args.forest)
    ds = parse_responses(args.data, schema)
    ds = complete_cases(ds, [forest.target, *forest.predictors])
    y = ds.matrix([forest.target], require_complete=True)[:, 0]
    report = evaluate.evaluate_model(forest, ds, ds, args.model_class)
    baseline = evaluate.random_baseline(
        y, args.baseline_samples, report.thresholds,
        seed=derive_seed(args.seed, STAGE_BASELINE, 0),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json(), encoding="utf-8")
    csv_path = out.with_suffix(".accuracy.csv")
    csv_path.write_text(evaluate.accuracy_table_csv(report, baseline), encoding="utf-8")
    print(f"rmse={report.rmse_test:.4f} nrmse={report.nrmse_test:.4f} -> {out}")
    print(f"accuracy curve -> {csv_path}")
    return 0


def cmd_importance(args) -> int:
    schema = load_schema(args.schema)
    ds = parse_responses(args.data, schema)
    ds = complete_cases(ds, schema.all_items())
    cfg = _forest_config(args, 0)
    if args.segmented:
        outcome = schema.factor(schema.outcome).overall_item if schema.outcome else None
        if outcome is None:
            raise ConfigError("--segmented requires an 'outcome' factor in the schema")
        ds = label_adoption(ds, outcome)
        tables = importance.segment_importance(
            ds, schema, cfg, seed=args.seed, min_segment=args.segment_min,
            workers=args.workers,
        )
        base = Path(args.out)
        for segment, table in tables.items():
            path = base.with_name(f"{base.stem}_{segment.value}{base.suffix}")
            table.to_csv(path)
            print(f"{segment.value}: {len(table.rows)} rows -> {path}")
        return 0
    models = importance.fit_target_models(
        ds, schema, cfg, seed=args.seed, model_class=args.model_class,
        workers=args.workers,
    )
    table = importance.build_importance_table(models)
    if args.level == "factor":
        table = importance.aggregate_factors(table, schema)
    table.to_csv(args.out)
    print(f"{len(table.rows)} importance rows ({args.level} level) -> {args.out}")
    return 0


def cmd_chord(args) -> int:
    schema = load_schema(args.schema)
    table = importance.ImportanceTable.from_csv(args.table, sum_tolerance=args.sum_tolerance)
    opts = chord.LayoutOptions(
        gap_deg=args.gap,
        group_gap_deg=args.group_gap,
        min_render_weight=args.min_weight,
        sum_tolerance=args.sum_tolerance,
    )
    lo = chord.layout(table, schema, opts)
    style = chord.Style(size_px=args.size, label_mode=args.labels)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    chord.write_svg(lo, args.out, style,
                    layout_json_path=args.layout_json)
    print(f"{len(lo.nodes)} arcs, {sum(r.rendered for r in lo.ribbons)} ribbons -> {args.out}")
    return 0


def cmd_stats(args) -> int:
    schema = load_schema(args.schema)
    ds = parse_responses(args.data, schema)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wrote = []
    test_items = [c for c in schema.all_items() if c != schema.cohort_item]
    if any(c is not None for c in ds.cohort):
        rows = stats.utest_by_cohort(ds, test_items, alpha=args.alpha)
        stats.utest_csv(rows, out / "utest.csv")
        wrote.append("utest.csv")
    aux = [a for a in schema.auxiliary if a in ds.columns]
    if len(aux) >= 2:
        matrix = stats.pearson_matrix(ds, aux)
        stats.correlation_csv(matrix, aux, out / "correlation.csv")
        wrote.append("correlation.csv")
    overalls = [schema.factor(f).overall_item for f in schema.model_targets()]
    summaries = [stats.describe(ds, c) for c in overalls]
    (out / "descriptives.json").write_text(
        json.dumps(summaries, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    wrote.append("descriptives.json")
    print(f"wrote {', '.join(wrote)} -> {out}")
    return 0


def cmd_pd(args) -> int:
    schema = load_schema(args.schema)
    forest = Forest.load(args.forest)
    ds = parse_responses(args.data, schema)
    ds = complete_cases(ds, forest.predictors)
    curve = explain.partial_dependence(forest, ds, args.feature)
    curve.to_csv(args.out)
    print(f"partial dependence of {args.feature} over {len(curve.grid)} points -> {args.out}")
    return 0


def cmd_tree(args) -> int:
    forest = Forest.load(args.forest)
    if not 0 <= args.index < forest.n_trees:
        raise ConfigError(f"tree index {args.index} outside [0, {forest.n_trees - 1}]")
    tree = forest.trees[args.index]
    if args.format == "dot":
        text = explain.export_tree_dot(tree, forest.predictors)
    else:
        text = explain.export_tree(tree, forest.predictors)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"tree {args.index} -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_run(args) -> int:
    cfg = pipeline.load_run_config(args.config)
    manifest = pipeline.run_pipeline(cfg, args.out, workers=args.workers)
    print(f"{len(manifest['artifacts'])} artifacts -> {args.out}")
    print(f"config sha256: {manifest['config_sha256']}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chordforest",
        description="Random-forest importance analysis and chord diagrams "
                    "for Likert survey constructs",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version",
                        version=f"chordforest {__version__} ({BACKEND} kernel)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, screen and canonicalize a response CSV")
    p.add_argument("--schema", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-na", type=float, default=0.2,
                   help="max missing fraction per row (default 0.2; ties retained)")
    p.add_argument("--complete-cases", action="store_true",
                   help="also drop every row with any missing item")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic survey CSV")
    p.add_argument("--schema", required=True)
    p.add_argument("--spec", required=True, help="SyntheticSpec JSON")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("fit", help="fit one forest and save it as JSON")
    p.add_argument("--schema", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True, help="target factor code (e.g. BI)")
    p.add_argument("--class", dest="model_class", choices=("external", "internal"),
                   default="external")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_forest_args(p)
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("evaluate", help="evaluate a saved forest on a dataset")
    p.add_argument("--schema", required=True)
    p.add_argument("--forest", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--class", dest="model_class", choices=("external", "internal"),
                   default="external")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--baseline-samples", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("importance", help="fit per-target models and export importance CSV")
    p.add_argument("--schema", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--class", dest="model_class", choices=("external", "internal"),
                   default="external")
    p.add_argument("--level", choices=("item", "factor"), default="item")
    p.add_argument("--segmented", action="store_true",
                   help="fit adopter/non-adopter tables instead")
    p.add_argument("--segment-min", type=int, default=20)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_forest_args(p)
    p.set_defaults(fn=cmd_importance)

    p = sub.add_parser("chord", help="render an importance CSV as a chord diagram SVG")
    p.add_argument("--schema", required=True)
    p.add_argument("--table", required=True, help="importance CSV (predictor,target,weight)")
    p.add_argument("--out", required=True)
    p.add_argument("--layout-json", default=None, help="also write the resolved layout")
    p.add_argument("--gap", type=float, default=2.0, help="gap between nodes (degrees)")
    p.add_argument("--group-gap", type=float, default=6.0,
                   help="gap between factor families (degrees)")
    p.add_argument("--min-weight", type=float, default=0.5,
                   help="hide ribbons lighter than this weight (arc mass kept)")
    p.add_argument("--sum-tolerance", type=float, default=0.5,
                   help="allowed deviation of per-target sums from 100")
    p.add_argument("--size", type=int, default=800)
    p.add_argument("--labels", choices=("code", "name", "none"), default="code")
    p.set_defaults(fn=cmd_chord)

    p = sub.add_parser("stats", help="U-test batch, correlation matrix, descriptives")
    p.add_argument("--schema", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("pd", help="partial dependence curve of one feature")
    p.add_argument("--schema", required=True)
    p.add_argument("--forest", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--feature", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_pd)

    p = sub.add_parser("tree", help="export one tree as text or DOT")
    p.add_argument("--forest", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--format", choices=("text", "dot"), default="text")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_tree)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_run)

    for sp in sub.choices.values():
        sp.add_argument("--workers", "-j", type=int, default=None,
                        help="worker threads (results identical for any count)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "workers", None) is None:
            args.workers = _default_workers()
        return args.fn(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        cause = exc.cause
        if isinstance(cause, (ConfigError, SchemaError)):
            return 2
        if isinstance(cause, DataError):
            return 3
        return 4
    except (ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
