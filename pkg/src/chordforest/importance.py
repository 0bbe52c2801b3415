"""Relative-importance tables: normalization, factor aggregation, and
cohort-segmented builds.

A table is a list of (predictor, target, weight) rows where weights per
target sum to 100.  Tables built from models are exact to 1e-6; tables
ingested from CSV may carry published rounding (weights printed at two
decimals), so ingestion validates against a looser tolerance.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import DataError, ModelError
from .evaluate import cross_validate
from .forest import Forest, ForestConfig, fit_forest, impurity_importance
from .rng import STAGE_SEGMENT, derive_seed
from .schema import Adoption, ConstructSchema, Dataset

SUM_TOL_EXACT = 1e-6
SUM_TOL_INGEST = 0.5  # accommodates tables published at 2 decimals


@dataclass(frozen=True)
class ImportanceRow:
    predictor: str
    target: str
    weight: float


@dataclass(frozen=True)
class ImportanceTable:
    """Rows of (predictor, target, weight), canonically sorted.

    ``level`` records whether codes are survey items or factor codes; the
    row shape is identical either way.
    """

    rows: tuple[ImportanceRow, ...]
    level: str = "item"

    def __post_init__(self):
        seen = set()
        for r in self.rows:
            key = (r.predictor, r.target)
            if key in seen:
                raise DataError(f"duplicate (predictor, target) row: {key}")
            seen.add(key)
            if r.weight < 0:
                raise DataError(f"negative weight for {key}: {r.weight}")

    def targets(self) -> tuple[str, ...]:
        out: list[str] = []
        for r in self.rows:
            if r.target not in out:
                out.append(r.target)
        return tuple(out)

    def for_target(self, target: str) -> dict[str, float]:
        return {r.predictor: r.weight for r in self.rows if r.target == target}

    def validate(self, tol: float = SUM_TOL_EXACT) -> None:
        for t in self.targets():
            total = sum(w for w in self.for_target(t).values())
            if abs(total - 100.0) > tol:
                raise DataError(f"weights for target {t!r} sum to {total!r}, not 100 (tol {tol})")

    def to_csv(self, path=None, decimals: Optional[int] = 2) -> str:
        """Serialize as predictor,target,weight CSV.

        Weights render at ``decimals`` places (matching published tables);
        pass ``decimals=None`` for full-precision repr.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["predictor", "target", "weight"])
        for r in self.rows:
            w = repr(r.weight) if decimals is None else f"{r.weight:.{decimals}f}"
            writer.writerow([r.predictor, r.target, w])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @staticmethod
    def from_csv(path, level: str = "item", sum_tolerance: float = SUM_TOL_INGEST) -> "ImportanceTable":
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read importance table {p}: {exc}") from exc
        return ImportanceTable.from_csv_text(text, level=level, sum_tolerance=sum_tolerance, origin=str(p))

    @staticmethod
    def from_csv_text(text: str, level: str = "item", sum_tolerance: float = SUM_TOL_INGEST,
                      origin: str = "<string>") -> "ImportanceTable":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{origin}: empty importance table") from None
        if [h.strip().lower() for h in header] != ["predictor", "target", "weight"]:
            raise DataError(f"{origin}: expected header predictor,target,weight")
        rows = []
        for line in reader:
            if not line or not any(c.strip() for c in line):
                continue
            if len(line) != 3:
                raise DataError(f"{origin}: malformed row {line!r}")
            try:
                w = float(line[2])
            except ValueError:
                raise DataError(f"{origin}: non-numeric weight {line[2]!r}") from None
            rows.append(ImportanceRow(line[0].strip(), line[1].strip(), w))
        table = ImportanceTable(rows=_canonical(rows), level=level)
        table.validate(tol=sum_tolerance)
        return table


FactorImportanceTable = ImportanceTable  # factor-level tables share the row shape


def _canonical(rows: Sequence[ImportanceRow]) -> tuple[ImportanceRow, ...]:
    return tuple(sorted(rows, key=lambda r: (r.target, r.predictor)))


def relative_importance(raw: Mapping[str, float]) -> dict[str, float]:
    """Normalize raw importances to weights summing to 100.

    Negative raw values (possible under permutation importance) are clamped
    to 0 with a warning; an all-zero map is an error.
    """
    clamped: dict[str, float] = {}
    for code, v in raw.items():
        if v < 0:
            warnings.warn(f"negative raw importance for {code!r} clamped to 0", stacklevel=2)
            v = 0.0
        clamped[code] = float(v)
    total = sum(clamped.values())
    if total <= 0:
        raise ModelError("all raw importances are zero; relative importance undefined")
    return {code: 100.0 * v / total for code, v in clamped.items()}


def build_importance_table(models: Mapping[str, Forest], level: str = "item") -> ImportanceTable:
    """One normalized row per (predictor, target) over a family of models."""
    rows: list[ImportanceRow] = []
    for target, forest in models.items():
        if forest.target != target:
            raise ModelError(f"model keyed {target!r} predicts {forest.target!r}")
        weights = relative_importance(impurity_importance(forest))
        for code in forest.predictors:
            rows.append(ImportanceRow(predictor=code, target=target, weight=weights[code]))
    table = ImportanceTable(rows=_canonical(rows), level=level)
    table.validate(tol=SUM_TOL_EXACT)
    return table


def aggregate_factors(table: ImportanceTable, schema: ConstructSchema) -> ImportanceTable:
    """Sum item weights into their owning factors; per-target totals are
    preserved.  Item-coded targets map to their factor code."""
    sums: dict[tuple[str, str], float] = {}
    order: list[tuple[str, str]] = []
    for r in table.rows:
        pf = schema.owner_of(r.predictor).code
        tf = schema.owner_of(r.target).code
        key = (pf, tf)
        if key not in sums:
            sums[key] = 0.0
            order.append(key)
        sums[key] += r.weight
    rows = [ImportanceRow(predictor=pf, target=tf, weight=sums[(pf, tf)]) for pf, tf in order]
    return ImportanceTable(rows=_canonical(rows), level="factor")


def fit_target_models(ds: Dataset, schema: ConstructSchema, cfg: ForestConfig,
                      seed: int, model_class: str = "external",
                      grid: Optional[Sequence[int]] = None, folds: Optional[int] = None,
                      workers: int = 1, seed_stage: tuple[int, ...] = ()) -> dict[str, Forest]:
    """Fit one forest per multi-item factor's overall item.

    When ``grid`` and ``folds`` are given, mtry is selected per model by
    cross-validation on ``ds`` first (grid values above the predictor count
    are dropped).
    """
    models: dict[str, Forest] = {}
    for t_idx, fcode in enumerate(schema.model_targets()):
        factor = schema.factor(fcode)
        target = factor.overall_item
        if model_class == "external":
            predictors = schema.external_predictors(fcode)
        elif model_class == "internal":
            predictors = schema.internal_predictors(fcode)
        else:
            raise ModelError(f"unknown model class {model_class!r}")
        model_seed = derive_seed(seed, *seed_stage, t_idx)
        mtry = cfg.mtry
        if grid is not None and folds is not None:
            usable = [m for m in grid if 1 <= m <= len(predictors)]
            if not usable:
                raise ModelError(f"no usable mtry grid values for target {target!r}")
            report = cross_validate(ds, target, predictors, usable, folds, cfg,
                                    seed=model_seed, workers=workers)
            mtry = report.best_mtry
        fcfg = ForestConfig(
            n_trees=cfg.n_trees,
            mtry=mtry,
            min_node_size=cfg.min_node_size,
            max_depth=cfg.max_depth,
            seed=derive_seed(model_seed, 0),
        )
        models[target] = fit_forest(ds, target, predictors, fcfg, workers=workers)
    return models


def segment_importance(ds: Dataset, schema: ConstructSchema, cfg: ForestConfig, seed: int,
                       min_segment: int = 20, grid: Optional[Sequence[int]] = None,
                       folds: Optional[int] = None, workers: int = 1) -> dict[Adoption, ImportanceTable]:
    """Independent external-model importance tables per adoption segment."""
    out: dict[Adoption, ImportanceTable] = {}
    for s_idx, segment in enumerate((Adoption.ADOPTER, Adoption.NON_ADOPTER)):
        rows = [i for i, a in enumerate(ds.adoption) if a is segment]
        if len(rows) < max(min_segment, 1):
            raise DataError(
                f"segment {segment.value!r} has {len(rows)} rows, below the minimum {min_segment}"
            )
        sub = ds.subset(rows)
        models = fit_target_models(
            sub, schema, cfg, seed=derive_seed(seed, STAGE_SEGMENT, s_idx),
            model_class="external", grid=grid, folds=folds, workers=workers,
        )
        out[segment] = build_importance_table(models, level="item")
    return out
