"""Synthetic survey generator for desk-scale end-to-end runs.

Respondents come from a two-component mixture (adopter / non-adopter).
Each factor gets a per-respondent latent score around its component mean;
items add idiosyncratic noise, are clipped to [-100, 100] and snapped to
the 25-step response grid, which reproduces the characteristic bimodal
shape of acceptance data.  ``distribution="uniform"`` instead draws every
item independently and uniformly on the grid (a zero-signal control).

Auxiliary columns are filled as a travel-time budget: later columns draw
from clipped normals and the first column takes the remainder of 100%,
which induces the strong negative correlations seen in real travel-mode
shares.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .errors import ConfigError
from .rng import STAGE_SYNTH, stream
from .schema import Cohort, ConstructSchema, Dataset

GRID_STEP = 25.0

# (mean, sd, clip_hi) for auxiliary budget columns after the first
_AUX_DRAWS = ((8.0, 10.0, 40.0), (35.0, 25.0, 90.0), (20.0, 20.0, 60.0))
_AUX_DEFAULT = (10.0, 10.0, 50.0)

DEFAULT_FACTOR_MEANS: dict[str, tuple[float, float]] = {
    # factor code -> (adopter latent mean, non-adopter latent mean)
    "PR": (30.0, -45.0),
    "T": (40.0, -45.0),
    "PU": (50.0, -50.0),
    "PEOU": (45.0, -40.0),
    "A": (55.0, -55.0),
    "BI": (60.0, -60.0),
}


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    adopter_fraction: float = 0.87
    factor_means: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_FACTOR_MEANS)
    )
    latent_sd: float = 12.0
    noise_sd: float = 15.0
    missing_rate: float = 0.0
    cohort_ratio: float = 0.5
    distribution: str = "bimodal"  # bimodal | uniform

    def validate(self) -> None:
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        for name in ("adopter_fraction", "missing_rate", "cohort_ratio"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.distribution not in ("bimodal", "uniform"):
            raise ConfigError(f"distribution must be bimodal|uniform, got {self.distribution!r}")
        if self.latent_sd < 0 or self.noise_sd < 0:
            raise ConfigError("latent_sd and noise_sd must be >= 0")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "adopter_fraction": self.adopter_fraction,
            "factor_means": {k: list(v) for k, v in self.factor_means.items()},
            "latent_sd": self.latent_sd,
            "noise_sd": self.noise_sd,
            "missing_rate": self.missing_rate,
            "cohort_ratio": self.cohort_ratio,
            "distribution": self.distribution,
        }

    @staticmethod
    def from_dict(d: Mapping) -> "SyntheticSpec":
        means = d.get("factor_means")
        spec = SyntheticSpec(
            n=int(d["n"]),
            adopter_fraction=float(d.get("adopter_fraction", 0.87)),
            factor_means={k: (float(v[0]), float(v[1])) for k, v in means.items()}
            if means is not None
            else dict(DEFAULT_FACTOR_MEANS),
            latent_sd=float(d.get("latent_sd", 12.0)),
            noise_sd=float(d.get("noise_sd", 15.0)),
            missing_rate=float(d.get("missing_rate", 0.0)),
            cohort_ratio=float(d.get("cohort_ratio", 0.5)),
            distribution=str(d.get("distribution", "bimodal")),
        )
        spec.validate()
        return spec

    @staticmethod
    def from_json(path) -> "SyntheticSpec":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read synthetic spec {path}: {exc}") from exc
        return SyntheticSpec.from_dict(d)


def _snap(values: np.ndarray) -> np.ndarray:
    clipped = np.clip(values, -100.0, 100.0)
    return np.round(clipped / GRID_STEP) * GRID_STEP


def generate_synthetic(spec: SyntheticSpec, schema: ConstructSchema, seed: int) -> Dataset:
    """Deterministic synthetic dataset shaped like the survey schema."""
    spec.validate()
    rng = stream(seed, STAGE_SYNTH)
    n = spec.n

    adopter = rng.random(n) < spec.adopter_fraction

    likert_factors = [
        f for f in schema.factors
        if schema.cohort_item is None or schema.cohort_item not in f.all_codes
    ]
    columns: list[str] = []
    data: list[np.ndarray] = []
    for f in likert_factors:
        if spec.distribution == "uniform":
            latent = np.zeros(n)
        else:
            means = spec.factor_means.get(f.code, (0.0, 0.0))
            latent = np.where(adopter, means[0], means[1]) + rng.normal(0.0, spec.latent_sd, n)
        for code in f.all_codes:
            if spec.distribution == "uniform":
                vals = rng.integers(-4, 5, size=n) * GRID_STEP
            else:
                vals = _snap(latent + rng.normal(0.0, spec.noise_sd, n))
            columns.append(code)
            data.append(vals.astype(np.float64))

    cohort_col: Optional[np.ndarray] = None
    if schema.cohort_item is not None:
        cohort_col = (rng.random(n) < spec.cohort_ratio).astype(np.float64)
        columns.append(schema.cohort_item)
        data.append(cohort_col)

    for k, aux in enumerate(schema.auxiliary):
        if k == 0:
            data.append(np.zeros(n))  # remainder; filled after the others
            columns.append(aux)
            continue
        mean, sd, hi = _AUX_DRAWS[k - 1] if k - 1 < len(_AUX_DRAWS) else _AUX_DEFAULT
        vals = np.clip(np.round(rng.normal(mean, sd, n)), 0.0, hi)
        columns.append(aux)
        data.append(vals)
    if schema.auxiliary:
        first = columns.index(schema.auxiliary[0])
        others = [columns.index(a) for a in schema.auxiliary[1:]]
        budget = np.zeros(n)
        for j in others:
            budget += data[j]
        data[first] = np.maximum(0.0, 100.0 - budget)

    values = np.column_stack(data)

    if spec.missing_rate > 0:
        item_cols = [columns.index(c) for f in likert_factors for c in f.all_codes]
        mask = rng.random((n, len(item_cols))) < spec.missing_rate
        for j, col in enumerate(item_cols):
            column = values[:, col].copy()
            column[mask[:, j]] = np.nan
            values[:, col] = column

    width = len(str(n))
    ids = tuple(f"s{i + 1:0{width}d}" for i in range(n))
    cohort: tuple
    if cohort_col is not None:
        cohort = tuple(
            Cohort.PSYCH_OWNERSHIP if v == 1.0 else Cohort.CONTROL for v in cohort_col
        )
    else:
        cohort = (None,) * n

    # canonicalize to schema column order (items, then auxiliary)
    order = list(schema.all_items()) + list(schema.auxiliary)
    idx = [columns.index(c) for c in order]
    return Dataset(
        columns=tuple(order),
        ids=ids,
        values=values[:, idx],
        cohort=cohort,
        adoption=(None,) * n,
    )
