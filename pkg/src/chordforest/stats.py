"""Nonparametric group comparison, descriptive summaries, and correlation.

The Mann-Whitney U test reports U = min(U_a, U_b) with midrank tie
handling.  For small tie-free samples the two-sided p-value comes from
exact enumeration of the U distribution; otherwise a tie-corrected normal
approximation with (toggleable) continuity correction is used.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .schema import Cohort, Dataset

EXACT_CUTOFF = 25  # max pooled size for exact enumeration


class UTestMethod(Enum):
    EXACT = "exact"
    NORMAL_APPROX = "normal"


@dataclass(frozen=True)
class UTestResult:
    u_statistic: float
    p_value: float
    method: UTestMethod
    n1: int
    n2: int


def _midranks(pooled: np.ndarray) -> np.ndarray:
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(len(pooled))
    sorted_vals = pooled[order]
    i = 0
    while i < len(pooled):
        j = i
        while j + 1 < len(pooled) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@lru_cache(maxsize=None)
def _u_counts(n1: int, n2: int) -> tuple[int, ...]:
    """Null distribution counts of U_a for tie-free samples.

    count[u] = number of the C(n1+n2, n1) group assignments with U_a = u.
    Recurrence: f(n1, n2, u) = f(n1-1, n2, u-n2) + f(n1, n2-1, u).
    """
    if n1 == 0 or n2 == 0:
        return (1,)
    a = _u_counts(n1 - 1, n2)
    b = _u_counts(n1, n2 - 1)
    size = n1 * n2 + 1
    out = [0] * size
    for u, c in enumerate(a):
        out[u + n2] += c
    for u, c in enumerate(b):
        out[u] += c
    return tuple(out)


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def mann_whitney_u(a: Sequence[float], b: Sequence[float],
                   exact_cutoff: int = EXACT_CUTOFF,
                   continuity_correction: bool = True) -> UTestResult:
    """Two-sided Mann-Whitney U test of two independent samples."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = len(a), len(b)
    if n1 < 1 or n2 < 1:
        raise DataError("both groups must be non-empty")
    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    r1 = float(ranks[:n1].sum())
    u1 = n1 * n2 + n1 * (n1 + 1) / 2.0 - r1
    u2 = n1 * n2 - u1
    u = min(u1, u2)

    has_ties = len(np.unique(pooled)) < len(pooled)
    if not has_ties and n1 + n2 <= exact_cutoff:
        counts = _u_counts(n1, n2)
        total = math.comb(n1 + n2, n1)
        cdf = sum(counts[: int(u) + 1]) / total
        p = min(1.0, 2.0 * cdf)
        return UTestResult(u, p, UTestMethod.EXACT, n1, n2)

    n = n1 + n2
    mu = n1 * n2 / 2.0
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts))
    sigma_sq = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if sigma_sq <= 0:
        # complete tie: no evidence against H0
        return UTestResult(u, 1.0, UTestMethod.NORMAL_APPROX, n1, n2)
    cc = 0.5 if continuity_correction else 0.0
    z = max(0.0, abs(u - mu) - cc) / math.sqrt(sigma_sq)
    p = min(1.0, 2.0 * _norm_sf(z))
    return UTestResult(u, p, UTestMethod.NORMAL_APPROX, n1, n2)


def utest_by_cohort(ds: Dataset, items: Sequence[str], alpha: float = 0.05,
                    continuity_correction: bool = True) -> list[dict]:
    """Per-item U test between the two cohorts; mirrors the published
    item / p-value / passed table layout."""
    g1 = [i for i, c in enumerate(ds.cohort) if c is Cohort.CONTROL]
    g2 = [i for i, c in enumerate(ds.cohort) if c is Cohort.PSYCH_OWNERSHIP]
    if not g1 or not g2:
        raise DataError("both cohorts must be present for the U test")
    out = []
    for item in items:
        col = ds.column(item)
        a = col[g1]
        b = col[g2]
        a = a[~np.isnan(a)]
        b = b[~np.isnan(b)]
        if len(a) == 0 or len(b) == 0:
            out.append({"item": item, "p_value": None, "passed": None})
            continue
        res = mann_whitney_u(a, b, continuity_correction=continuity_correction)
        out.append({"item": item, "p_value": res.p_value, "passed": bool(res.p_value < alpha)})
    return out


def utest_csv(rows: list[dict], path=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["item", "p_value", "passed"])
    for r in rows:
        p = "" if r["p_value"] is None else repr(r["p_value"])
        passed = "" if r["passed"] is None else str(r["passed"]).lower()
        writer.writerow([r["item"], p, passed])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def pearson_matrix(ds: Dataset, columns: Sequence[str]) -> np.ndarray:
    """Pairwise-deletion Pearson correlation matrix.

    Entries with fewer than 2 complete pairs or a zero-variance column are
    flagged NaN rather than fabricated; diagonal is 1 for columns with
    variance.
    """
    cols = [ds.column(c) for c in columns]
    k = len(cols)
    out = np.full((k, k), np.nan)
    for i in range(k):
        for j in range(i, k):
            x, y = cols[i], cols[j]
            ok = ~(np.isnan(x) | np.isnan(y))
            if ok.sum() < 2:
                continue
            xv = x[ok] - x[ok].mean()
            yv = y[ok] - y[ok].mean()
            den = math.sqrt(float((xv * xv).sum()) * float((yv * yv).sum()))
            if den == 0:
                continue
            r = float((xv * yv).sum()) / den
            out[i, j] = out[j, i] = r
    return out


def correlation_csv(matrix: np.ndarray, columns: Sequence[str], path=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["", *columns])
    for name, row in zip(columns, matrix):
        writer.writerow([name, *("" if math.isnan(v) else repr(float(v)) for v in row)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


GRID_BIN_CENTERS = tuple(range(-100, 101, 25))


def describe(ds: Dataset, column: str, bin_centers: Sequence[float] = GRID_BIN_CENTERS) -> dict:
    """Descriptive summary of one column; histogram bins default to the
    9-point response grid.  sd is the population standard deviation."""
    col = ds.column(column)
    present = col[~np.isnan(col)]
    n = int(len(present))
    centers = [float(c) for c in bin_centers]
    halfstep = (centers[1] - centers[0]) / 2.0 if len(centers) > 1 else 0.5
    edges = [centers[0] - halfstep] + [c + halfstep for c in centers]
    counts, _ = np.histogram(present, bins=edges)
    return {
        "column": column,
        "n": n,
        "n_missing": int(len(col) - n),
        "mean": float(present.mean()) if n else None,
        "sd": float(present.std()) if n else None,
        "min": float(present.min()) if n else None,
        "max": float(present.max()) if n else None,
        "bins": {"centers": centers, "counts": counts.tolist()},
    }
