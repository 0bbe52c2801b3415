"""End-to-end pipeline: screen, filter, split, CV-select, fit, evaluate,
build importance tables, render chord diagrams, run the statistics batch,
and write a manifest of artifact checksums.

Output bundle layout (fixed, for golden-directory testing):

    out/
      reports/   screening.json, cv_*.json, eval_*.json, baseline_*.json,
                 descriptives.json
      tables/    importance_*.csv, accuracy_*.csv, utest.csv, correlation.csv
      figures/   chord_*.svg
      manifest.json

All randomness derives from the single config seed (see
:mod:`chordforest.rng` for the derivation scheme), so the manifest
checksums are a pure function of (config, data, seed) regardless of the
worker count.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import chord, evaluate, importance, stats, synth
from .errors import ChordforestError, ConfigError, DataError, StageError
from .forest import Forest, ForestConfig, fit_forest
from .rng import STAGE_BASELINE, STAGE_CV, STAGE_FIT, STAGE_SPLIT, derive_seed
from .schema import (
    Adoption,
    ConstructSchema,
    Dataset,
    complete_cases,
    label_adoption,
    load_schema,
    parse_responses,
    screen,
    split,
)


@dataclass(frozen=True)
class RunConfig:
    schema_path: Path
    seed: int
    data_path: Optional[Path] = None
    synth_spec: Optional[synth.SyntheticSpec] = None
    screening_max_na: float = 0.2
    train_fraction: float = 0.8
    cv_folds: int = 10
    mtry_grid: Optional[tuple[int, ...]] = None
    n_trees: int = 500
    cv_n_trees: Optional[int] = None
    min_node_size: int = 5
    max_depth: Optional[int] = None
    thresholds: tuple[float, ...] = evaluate.DEFAULT_THRESHOLDS
    baseline_samples: int = 100
    segment: bool = True
    segment_min: int = 20
    raw: dict = field(default_factory=dict, compare=False)

    def validate(self) -> None:
        if self.data_path is None and self.synth_spec is None:
            raise ConfigError("config needs either 'data' (CSV path) or 'synth' (generator spec)")
        if self.data_path is not None and self.synth_spec is not None:
            raise ConfigError("config must not set both 'data' and 'synth'")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if not 0.0 <= self.screening_max_na <= 1.0:
            raise ConfigError(f"screening_max_na must be in [0, 1], got {self.screening_max_na}")
        if self.cv_folds < 2:
            raise ConfigError(f"cv_folds must be >= 2, got {self.cv_folds}")
        if self.n_trees < 1 or (self.cv_n_trees is not None and self.cv_n_trees < 1):
            raise ConfigError("tree counts must be >= 1")
        if self.baseline_samples < 1:
            raise ConfigError(f"baseline_samples must be >= 1, got {self.baseline_samples}")
        if self.segment_min < 1:
            raise ConfigError(f"segment_min must be >= 1, got {self.segment_min}")


def load_run_config(path) -> RunConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read run config {p}: {exc}") from exc
    if "schema" not in raw or "seed" not in raw:
        raise ConfigError(f"{p}: run config requires 'schema' and 'seed'")
    base = p.parent

    def respath(value: str) -> Path:
        q = Path(value)
        return q if q.is_absolute() else base / q

    cfg = RunConfig(
        schema_path=respath(raw["schema"]),
        seed=int(raw["seed"]),
        data_path=respath(raw["data"]) if raw.get("data") else None,
        synth_spec=synth.SyntheticSpec.from_dict(raw["synth"]) if raw.get("synth") else None,
        screening_max_na=float(raw.get("screening_max_na", 0.2)),
        train_fraction=float(raw.get("train_fraction", 0.8)),
        cv_folds=int(raw.get("cv_folds", 10)),
        mtry_grid=tuple(int(m) for m in raw["mtry_grid"]) if raw.get("mtry_grid") else None,
        n_trees=int(raw.get("n_trees", 500)),
        cv_n_trees=int(raw["cv_n_trees"]) if raw.get("cv_n_trees") else None,
        min_node_size=int(raw.get("min_node_size", 5)),
        max_depth=int(raw["max_depth"]) if raw.get("max_depth") else None,
        thresholds=tuple(float(t) for t in raw["thresholds"])
        if raw.get("thresholds")
        else evaluate.DEFAULT_THRESHOLDS,
        baseline_samples=int(raw.get("baseline_samples", 100)),
        segment=bool(raw.get("segment", True)),
        segment_min=int(raw.get("segment_min", 20)),
        raw=raw,
    )
    cfg.validate()
    return cfg


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class _Bundle:
    """Collects written artifacts and their checksums under one root."""

    def __init__(self, root: Path):
        self.root = root
        self.checksums: dict[str, str] = {}
        for sub in ("reports", "tables", "figures"):
            (root / sub).mkdir(parents=True, exist_ok=True)

    def write(self, relpath: str, text: str) -> None:
        data = text.encode("utf-8")
        (self.root / relpath).write_bytes(data)
        self.checksums[relpath] = _sha256(data)


def _stage(name: str):
    def wrap(fn):
        def run(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except ChordforestError as exc:
                raise StageError(name, exc) from exc
        return run
    return wrap


def run_pipeline(cfg: RunConfig, out_dir, workers: int = 1) -> dict:
    """Execute the full pipeline; returns the manifest dict."""
    cfg.validate()

    # fail fast on unreadable inputs before creating any outputs
    try:
        schema = load_schema(cfg.schema_path)
    except ChordforestError as exc:
        raise StageError("load", exc) from exc
    if schema.outcome is None:
        raise StageError("load", ConfigError("pipeline requires an 'outcome' factor in the schema"))
    if cfg.data_path is not None:
        try:
            raw_ds = parse_responses(cfg.data_path, schema)
            data_bytes = Path(cfg.data_path).read_bytes()
        except OSError as exc:
            raise StageError("load", DataError(str(exc))) from exc
        except ChordforestError as exc:
            raise StageError("load", exc) from exc
    else:
        raw_ds = synth.generate_synthetic(cfg.synth_spec, schema, seed=cfg.seed)
        data_bytes = json.dumps(cfg.synth_spec.to_dict(), sort_keys=True).encode("utf-8")

    root = Path(out_dir)
    bundle = _Bundle(root)
    items = schema.all_items()
    thresholds = cfg.thresholds

    @_stage("screen")
    def stage_screen():
        screened, report = screen(raw_ds, cfg.screening_max_na, items)
        bundle.write("reports/screening.json", report.to_json())
        return screened

    @_stage("prepare")
    def stage_prepare(screened: Dataset):
        modeling = complete_cases(screened, items)
        if modeling.n_rows < 2:
            raise DataError(f"only {modeling.n_rows} complete-case rows; cannot model")
        overall_bi = schema.factor(schema.outcome).overall_item
        return label_adoption(modeling, overall_bi)

    @_stage("split")
    def stage_split(modeling: Dataset):
        return split(modeling, cfg.train_fraction, seed=derive_seed(cfg.seed, STAGE_SPLIT))

    @_stage("models")
    def stage_models(train: Dataset, test: Dataset):
        forests: dict[str, dict[str, Forest]] = {"external": {}, "internal": {}}
        cv_trees = cfg.cv_n_trees if cfg.cv_n_trees is not None else cfg.n_trees
        for t_idx, fcode in enumerate(schema.model_targets()):
            target = schema.factor(fcode).overall_item
            y_test = test.matrix([target], require_complete=True)[:, 0]
            baseline = evaluate.random_baseline(
                y_test, cfg.baseline_samples, thresholds,
                seed=derive_seed(cfg.seed, STAGE_BASELINE, t_idx),
            )
            bundle.write(
                f"reports/baseline_{fcode}.json",
                json.dumps(baseline.to_dict(), sort_keys=True, indent=2) + "\n",
            )
            for c_idx, model_class in enumerate(("external", "internal")):
                predictors = (
                    schema.external_predictors(fcode)
                    if model_class == "external"
                    else schema.internal_predictors(fcode)
                )
                grid = cfg.mtry_grid or evaluate.default_mtry_grid(len(predictors))
                grid = tuple(m for m in grid if 1 <= m <= len(predictors))
                if not grid:
                    raise ConfigError(f"mtry grid has no valid entries for {fcode}/{model_class}")
                cv_cfg = ForestConfig(
                    n_trees=cv_trees,
                    min_node_size=cfg.min_node_size,
                    max_depth=cfg.max_depth,
                )
                cv_report = evaluate.cross_validate(
                    train, target, predictors, grid, cfg.cv_folds, cv_cfg,
                    seed=derive_seed(cfg.seed, STAGE_CV, t_idx, c_idx), workers=workers,
                )
                bundle.write(
                    f"reports/cv_{fcode}_{model_class}.json",
                    json.dumps(cv_report.to_dict(), sort_keys=True, indent=2) + "\n",
                )
                fit_cfg = ForestConfig(
                    n_trees=cfg.n_trees,
                    mtry=cv_report.best_mtry,
                    min_node_size=cfg.min_node_size,
                    max_depth=cfg.max_depth,
                    seed=derive_seed(cfg.seed, STAGE_FIT, t_idx, c_idx),
                )
                forest = fit_forest(train, target, predictors, fit_cfg, workers=workers)
                forests[model_class][target] = forest
                report = evaluate.evaluate_model(forest, train, test, model_class, thresholds)
                bundle.write(f"reports/eval_{fcode}_{model_class}.json", report.to_json())
                bundle.write(
                    f"tables/accuracy_{fcode}_{model_class}.csv",
                    evaluate.accuracy_table_csv(report, baseline),
                )
        return forests

    @_stage("importance")
    def stage_importance(forests):
        ext = importance.build_importance_table(forests["external"], level="item")
        internal = importance.build_importance_table(forests["internal"], level="item")
        factors = importance.aggregate_factors(ext, schema)
        bundle.write("tables/importance_items_external.csv", ext.to_csv())
        bundle.write("tables/importance_items_internal.csv", internal.to_csv())
        bundle.write("tables/importance_factors_external.csv", factors.to_csv())
        return ext, internal, factors

    @_stage("segment")
    def stage_segment(modeling: Dataset):
        seg_cfg = ForestConfig(
            n_trees=cfg.n_trees, min_node_size=cfg.min_node_size, max_depth=cfg.max_depth,
        )
        tables = importance.segment_importance(
            modeling, schema, seg_cfg, seed=cfg.seed,
            min_segment=cfg.segment_min, workers=workers,
        )
        names = {Adoption.ADOPTER: "adopter", Adoption.NON_ADOPTER: "nonadopter"}
        for segment, table in tables.items():
            bundle.write(f"tables/importance_items_{names[segment]}.csv", table.to_csv())
        return tables

    @_stage("figures")
    def stage_figures(ext, internal, factors, segment_tables):
        jobs = [
            ("chord_items_external.svg", ext),
            ("chord_items_internal.svg", internal),
            ("chord_factors_external.svg", factors),
        ]
        if segment_tables is not None:
            names = {Adoption.ADOPTER: "adopter", Adoption.NON_ADOPTER: "nonadopter"}
            for segment, table in segment_tables.items():
                jobs.append((f"chord_items_{names[segment]}.svg", table))
        for filename, table in jobs:
            lo = chord.layout(table, schema)
            bundle.write(f"figures/{filename}", chord.render_svg(lo))

    @_stage("stats")
    def stage_stats(modeling: Dataset):
        test_items = [c for c in items if c != schema.cohort_item]
        have_cohorts = any(c is not None for c in modeling.cohort)
        if have_cohorts:
            rows = stats.utest_by_cohort(modeling, test_items)
            bundle.write("tables/utest.csv", stats.utest_csv(rows))
        aux = [a for a in schema.auxiliary if a in modeling.columns]
        if len(aux) >= 2:
            matrix = stats.pearson_matrix(modeling, aux)
            bundle.write("tables/correlation.csv", stats.correlation_csv(matrix, aux))
        overalls = [schema.factor(f).overall_item for f in schema.model_targets()]
        summaries = [stats.describe(modeling, c) for c in overalls]
        bundle.write(
            "reports/descriptives.json",
            json.dumps(summaries, sort_keys=True, indent=2) + "\n",
        )

    screened = stage_screen()
    modeling = stage_prepare(screened)
    train, test = stage_split(modeling)
    forests = stage_models(train, test)
    ext, internal, factors = stage_importance(forests)
    segment_tables = stage_segment(modeling) if cfg.segment else None
    stage_figures(ext, internal, factors, segment_tables)
    stage_stats(modeling)

    manifest = {
        "format": "chordforest-run/1",
        "seed": cfg.seed,
        "config_sha256": _sha256(
            json.dumps(cfg.raw or {}, sort_keys=True, separators=(",", ":")).encode("utf-8")
        ),
        "data_sha256": _sha256(data_bytes),
        "artifacts": dict(sorted(bundle.checksums.items())),
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return manifest
