"""Construct/item data model, survey CSV ingestion, screening and labeling.

A survey instrument is described by a small INI-style config file (the
"schema"), parsed with :mod:`configparser`:

.. code-block:: ini

    [survey]
    title = ...
    id_column = id
    outcome = BI            ; factor whose specific items never act as predictors
    cohort_item = PO        ; 0/1 item that doubles as the cohort label
    auxiliary = travel_car travel_shared travel_pt travel_active

    [factor PR]
    display_name = Perceived Risk
    color = #E64B35
    items = PR1 PR2 PR3 PR4 PR5 PR6 PR7
    overall = PR8

Factors are kept in file order.  A factor may omit ``items`` entirely and
consist of its overall item alone (a single-node factor such as a
between-subjects group flag).

Response CSVs carry one header row.  Cells are integers in [-100, 100],
empty, or the literal token ``NA``.  An ``id`` column is used when present;
otherwise row numbers become the ids.
"""

from __future__ import annotations

import configparser
import csv
import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError, SchemaError
from .rng import stream

VALUE_MIN = -100
VALUE_MAX = 100
MISSING_TOKEN = "NA"


class Cohort(Enum):
    CONTROL = "control"
    PSYCH_OWNERSHIP = "ownership"


class Adoption(Enum):
    ADOPTER = "adopter"
    NON_ADOPTER = "nonadopter"


@dataclass(frozen=True)
class FactorDef:
    code: str
    display_name: str
    item_codes: tuple[str, ...]
    overall_item: str
    color: str

    @property
    def all_codes(self) -> tuple[str, ...]:
        return self.item_codes + (self.overall_item,)

    @property
    def is_single_node(self) -> bool:
        return not self.item_codes


@dataclass(frozen=True)
class ConstructSchema:
    factors: tuple[FactorDef, ...]
    outcome: Optional[str] = None
    cohort_item: Optional[str] = None
    auxiliary: tuple[str, ...] = ()
    id_column: str = "id"
    title: str = ""

    def factor(self, code: str) -> FactorDef:
        for f in self.factors:
            if f.code == code:
                return f
        raise SchemaError(f"unknown factor: {code!r}")

    def all_items(self) -> tuple[str, ...]:
        """Every item column, in schema order (specific items, then overall)."""
        out: list[str] = []
        for f in self.factors:
            out.extend(f.all_codes)
        return tuple(out)

    def owner_of(self, code: str) -> FactorDef:
        """Factor owning an item code; factor codes resolve to themselves."""
        for f in self.factors:
            if code == f.code or code in f.all_codes:
                return f
        raise SchemaError(f"code {code!r} belongs to no factor in the schema")

    def color_of(self, code: str) -> str:
        return self.owner_of(code).color

    def model_targets(self) -> tuple[str, ...]:
        """Factor codes that get predictive models (multi-item factors)."""
        return tuple(f.code for f in self.factors if f.item_codes)

    def external_predictors(self, target_factor: str) -> tuple[str, ...]:
        """Predictor items for the model of ``target_factor``'s overall item.

        Uses the specific items of every other factor, skipping the outcome
        factor's items (intention items never predict anything else), plus
        the overall items of single-node factors.  Order is schema order.
        """
        tf = self.factor(target_factor)
        out: list[str] = []
        for f in self.factors:
            if f.code == tf.code:
                continue
            if f.is_single_node:
                out.append(f.overall_item)
            elif self.outcome is None or f.code != self.outcome:
                out.extend(f.item_codes)
        return tuple(out)

    def internal_predictors(self, target_factor: str) -> tuple[str, ...]:
        """A factor's own specific items, predicting its overall item."""
        f = self.factor(target_factor)
        if not f.item_codes:
            raise SchemaError(f"factor {target_factor!r} has no specific items")
        return f.item_codes


@dataclass(frozen=True)
class Dataset:
    """Rectangular respondent table on the -100..100 scale.

    ``values`` is float64 with NaN marking missing cells; every present
    value is an integer in [-100, 100].  Datasets are never mutated after
    construction -- all operations return new instances.
    """

    columns: tuple[str, ...]
    ids: tuple[str, ...]
    values: np.ndarray
    cohort: tuple[Optional[Cohort], ...]
    adoption: tuple[Optional[Adoption], ...]

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape != (len(self.ids), len(self.columns)):
            raise DataError("values shape does not match ids x columns")
        v.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return len(self.ids)

    def column_index(self, code: str) -> int:
        try:
            return self.columns.index(code)
        except ValueError:
            raise DataError(f"unknown column: {code!r}") from None

    def matrix(self, columns: Sequence[str], require_complete: bool = False) -> np.ndarray:
        idx = [self.column_index(c) for c in columns]
        out = self.values[:, idx].copy()
        if require_complete and np.isnan(out).any():
            raise DataError("missing values present in requested columns")
        return out

    def column(self, code: str) -> np.ndarray:
        return self.values[:, self.column_index(code)].copy()

    def missing_fraction(self, columns: Sequence[str]) -> np.ndarray:
        idx = [self.column_index(c) for c in columns]
        return np.isnan(self.values[:, idx]).mean(axis=1)

    def subset(self, rows: Sequence[int]) -> "Dataset":
        rows = list(rows)
        return Dataset(
            columns=self.columns,
            ids=tuple(self.ids[i] for i in rows),
            values=self.values[rows].copy(),
            cohort=tuple(self.cohort[i] for i in rows),
            adoption=tuple(self.adoption[i] for i in rows),
        )

    @staticmethod
    def from_rows(columns, ids, values, cohort=None, adoption=None) -> "Dataset":
        n = len(ids)
        return Dataset(
            columns=tuple(columns),
            ids=tuple(str(i) for i in ids),
            values=np.asarray(values, dtype=np.float64).reshape(n, len(columns)),
            cohort=tuple(cohort) if cohort is not None else (None,) * n,
            adoption=tuple(adoption) if adoption is not None else (None,) * n,
        )


@dataclass(frozen=True)
class ScreeningReport:
    n_input: int
    n_excluded_na: int
    n_retained: int
    excluded_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "n_input": self.n_input,
            "n_excluded_na": self.n_excluded_na,
            "n_retained": self.n_retained,
            "excluded_ids": list(self.excluded_ids),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# schema loading


def _split_list(raw: str) -> tuple[str, ...]:
    return tuple(tok for tok in raw.replace(",", " ").split() if tok)


def parse_schema(text: str, origin: str = "<string>") -> ConstructSchema:
    # ';' only for inline comments: '#' must stay usable in color values
    cp = configparser.ConfigParser(inline_comment_prefixes=(";",))
    try:
        cp.read_string(text, source=origin)
    except configparser.Error as exc:
        raise SchemaError(f"cannot parse schema {origin}: {exc}") from exc

    factors: list[FactorDef] = []
    for section in cp.sections():
        if not section.startswith("factor"):
            continue
        parts = section.split(None, 1)
        if len(parts) != 2 or not parts[1].strip():
            raise SchemaError(f"bad factor section name: [{section}]")
        code = parts[1].strip()
        sec = cp[section]
        overall = sec.get("overall", "").strip()
        if not overall:
            raise SchemaError(f"factor {code!r}: missing 'overall' item")
        items = _split_list(sec.get("items", ""))
        if overall in items:
            raise SchemaError(f"factor {code!r}: overall item {overall!r} listed among items")
        factors.append(
            FactorDef(
                code=code,
                display_name=sec.get("display_name", code).strip(),
                item_codes=items,
                overall_item=overall,
                color=sec.get("color", "#808080").strip(),
            )
        )
    if not factors:
        raise SchemaError(f"{origin}: no [factor ...] sections found")

    seen: set[str] = set()
    for f in factors:
        for code in f.all_codes:
            if code in seen:
                raise SchemaError(f"duplicate item code across factors: {code!r}")
            seen.add(code)

    survey = cp["survey"] if cp.has_section("survey") else {}
    outcome = survey.get("outcome", "").strip() or None
    cohort_item = survey.get("cohort_item", "").strip() or None
    auxiliary = _split_list(survey.get("auxiliary", ""))
    for aux in auxiliary:
        if aux in seen:
            raise SchemaError(f"auxiliary column {aux!r} clashes with an item code")

    schema = ConstructSchema(
        factors=tuple(factors),
        outcome=outcome,
        cohort_item=cohort_item,
        auxiliary=auxiliary,
        id_column=(survey.get("id_column", "id").strip() or "id"),
        title=survey.get("title", "").strip(),
    )
    if outcome is not None:
        schema.factor(outcome)  # must exist
    if cohort_item is not None and cohort_item not in seen:
        raise SchemaError(f"cohort_item {cohort_item!r} is not an item of any factor")
    return schema


def load_schema(path) -> ConstructSchema:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read schema file {p}: {exc}") from exc
    return parse_schema(text, origin=str(p))


# ---------------------------------------------------------------------------
# CSV ingestion


def _parse_cell(raw: str, column: str, row_id: str) -> float:
    cell = raw.strip()
    if cell == "" or cell.upper() == MISSING_TOKEN:
        return math.nan
    try:
        value = int(cell)
    except ValueError:
        raise DataError(f"row {row_id!r}, column {column!r}: non-integer cell {raw!r}") from None
    if not VALUE_MIN <= value <= VALUE_MAX:
        raise DataError(f"row {row_id!r}, column {column!r}: value {value} outside [{VALUE_MIN}, {VALUE_MAX}]")
    return float(value)


def parse_responses(path, schema: ConstructSchema) -> Dataset:
    """Ingest a response CSV against the schema.

    Column order is canonicalized to schema order (items, then declared
    auxiliary columns).  Auxiliary columns may be absent; item columns may
    not.  Unknown columns are rejected.
    """
    p = Path(path)
    try:
        with p.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{p}: empty file") from None
            raw_rows = [row for row in reader if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise DataError(f"cannot read responses file {p}: {exc}") from exc

    header = [h.strip() for h in header]
    items = schema.all_items()
    known = set(items) | set(schema.auxiliary)
    id_col = schema.id_column

    has_id = id_col in header
    for col in header:
        if col != id_col and col not in known:
            raise DataError(f"{p}: unknown column {col!r} (declare it as auxiliary or fix the schema)")
    missing_items = [c for c in items if c not in header]
    if missing_items:
        raise DataError(f"{p}: missing declared item columns: {', '.join(missing_items)}")

    present_aux = tuple(a for a in schema.auxiliary if a in header)
    columns = items + present_aux
    pos = {c: header.index(c) for c in columns}
    id_pos = header.index(id_col) if has_id else None

    n = len(raw_rows)
    values = np.full((n, len(columns)), np.nan, dtype=np.float64)
    ids: list[str] = []
    for i, row in enumerate(raw_rows):
        if len(row) != len(header):
            raise DataError(f"{p}: row {i + 2} has {len(row)} cells, expected {len(header)}")
        rid = row[id_pos].strip() if id_pos is not None else f"row{i + 1}"
        ids.append(rid)
        for j, c in enumerate(columns):
            values[i, j] = _parse_cell(row[pos[c]], c, rid)

    cohort: list[Optional[Cohort]] = [None] * n
    if schema.cohort_item is not None:
        cidx = columns.index(schema.cohort_item)
        for i in range(n):
            v = values[i, cidx]
            if math.isnan(v):
                continue
            if v == 0:
                cohort[i] = Cohort.CONTROL
            elif v == 1:
                cohort[i] = Cohort.PSYCH_OWNERSHIP
            else:
                raise DataError(
                    f"row {ids[i]!r}: cohort item {schema.cohort_item!r} must be 0 or 1, got {int(v)}"
                )

    return Dataset(
        columns=columns,
        ids=tuple(ids),
        values=values,
        cohort=tuple(cohort),
        adoption=(None,) * n,
    )


def write_responses(ds: Dataset, path) -> None:
    """Write a dataset back to the documented CSV format."""
    p = Path(path)
    with p.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", *ds.columns])
        for i, rid in enumerate(ds.ids):
            row: list[str] = [rid]
            for v in ds.values[i]:
                row.append(MISSING_TOKEN if math.isnan(v) else str(int(v)))
            writer.writerow(row)


# ---------------------------------------------------------------------------
# screening / filtering / splitting / labeling


def screen(ds: Dataset, max_na_fraction: float, columns: Sequence[str]) -> tuple[Dataset, ScreeningReport]:
    """Drop rows whose missing fraction over ``columns`` exceeds the threshold.

    Rows sitting exactly at the threshold are retained (the rule is
    strictly-greater).
    """
    if not 0.0 <= max_na_fraction <= 1.0:
        raise DataError(f"max_na_fraction must be in [0, 1], got {max_na_fraction}")
    frac = ds.missing_fraction(columns)
    keep = frac <= max_na_fraction
    retained = ds.subset(np.flatnonzero(keep))
    excluded = tuple(ds.ids[i] for i in np.flatnonzero(~keep))
    report = ScreeningReport(
        n_input=ds.n_rows,
        n_excluded_na=len(excluded),
        n_retained=retained.n_rows,
        excluded_ids=excluded,
    )
    return retained, report


def complete_cases(ds: Dataset, columns: Sequence[str]) -> Dataset:
    """Keep only rows without any missing value among ``columns``."""
    if not columns:
        return ds
    idx = [ds.column_index(c) for c in columns]
    keep = ~np.isnan(ds.values[:, idx]).any(axis=1)
    return ds.subset(np.flatnonzero(keep))


def split(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded unstratified row split; train gets floor(n * fraction) rows."""
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = ds.n_rows
    if n < 2:
        raise DataError(f"cannot split a dataset with {n} row(s)")
    perm = stream(seed).permutation(n)
    n_train = int(math.floor(n * train_fraction))
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return ds.subset(train_idx), ds.subset(test_idx)


def label_adoption(ds: Dataset, overall_bi_item: str) -> Dataset:
    """Label rows by the overall intention item: >= 1 adopter, <= 0 non-adopter.

    Rows with the item missing stay unlabeled.
    """
    col = ds.column(overall_bi_item)
    labels: list[Optional[Adoption]] = []
    for v in col:
        if math.isnan(v):
            labels.append(None)
        elif v >= 1:
            labels.append(Adoption.ADOPTER)
        else:
            labels.append(Adoption.NON_ADOPTER)
    return replace(ds, adoption=tuple(labels))
