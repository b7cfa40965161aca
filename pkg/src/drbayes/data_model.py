"""Observation containers, validation, overlap trimming and CSV ingestion.

A :class:`Dataset` holds a binary outcome vector ``y``, a treatment vector
``d`` (binary for treatment-effect and missing-data functionals, real-valued
for average derivatives) and an ``n x p`` covariate matrix ``x``. All arrays
are immutable after construction.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateSampleError,
    ParseError,
    SchemaError,
    ValidationError,
)

FULL_REUSE = "full-reuse"
HALF_SPLIT = "half-split"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Validated sample of (outcome, treatment, covariates).

    ``d`` must be exactly 0/1 unless ``continuous_treatment`` is set (average
    derivative use).
    """

    y: np.ndarray
    d: np.ndarray
    x: np.ndarray
    continuous_treatment: bool = False

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        d = np.asarray(self.d, dtype=float)
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if x.shape[0] == 1 and y.size > 1:
            x = x.T
        if y.ndim != 1 or d.ndim != 1:
            raise ValidationError("y and d must be one-dimensional")
        n = y.size
        if n < 2:
            raise ValidationError(f"need at least 2 observations, got {n}")
        if d.size != n or x.shape[0] != n:
            raise ValidationError(
                f"length mismatch: y has {n}, d has {d.size}, x has {x.shape[0]} rows"
            )
        if not np.isin(y, (0.0, 1.0)).all():
            bad = int(np.flatnonzero(~np.isin(y, (0.0, 1.0)))[0])
            raise ValidationError(f"y must be 0/1; first offending row {bad}")
        if not self.continuous_treatment and not np.isin(d, (0.0, 1.0)).all():
            bad = int(np.flatnonzero(~np.isin(d, (0.0, 1.0)))[0])
            raise ValidationError(f"d must be 0/1; first offending row {bad}")
        if not np.isfinite(x).all():
            raise ValidationError("x contains NaN or infinite entries")
        if not np.isfinite(d).all():
            raise ValidationError("d contains NaN or infinite entries")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "d", _frozen(d))
        object.__setattr__(self, "x", _frozen(x))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def subset(self, idx: np.ndarray) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.y[idx], self.d[idx], self.x[idx],
            continuous_treatment=self.continuous_treatment,
        )


@dataclass(frozen=True)
class SplitPlan:
    """Index plan separating pilot estimation from posterior inference."""

    mode: str
    pilot_indices: np.ndarray
    inference_indices: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "pilot_indices", _frozen(np.asarray(self.pilot_indices, dtype=int)))
        object.__setattr__(self, "inference_indices", _frozen(np.asarray(self.inference_indices, dtype=int)))


def load_csv(path, schema) -> Dataset:
    """Read a validated Dataset from a headed CSV file.

    ``schema`` maps column roles to names: ``{"y": ..., "d": ...,
    "covariates": [...]}``. It may also be a path to a JSON file with that
    shape. Covariate column order is preserved.
    """
    if isinstance(schema, (str, bytes)) or hasattr(schema, "read_text"):
        with open(schema, encoding="utf-8") as fh:
            schema = json.load(fh)
    for key in ("y", "d", "covariates"):
        if key not in schema:
            raise SchemaError(f"schema is missing the '{key}' entry")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        wanted = [schema["y"], schema["d"], *schema["covariates"]]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        cols = [header.index(c) for c in wanted]
        rows = []
        for i, row in enumerate(reader):
            if not row:
                continue
            try:
                rows.append([float(row[j]) for j in cols])
            except (ValueError, IndexError):
                raise ParseError(f"{path}: non-numeric cell in data row {i}") from None
    if len(rows) < 2:
        raise ValidationError(f"{path}: need at least 2 data rows")
    body = np.asarray(rows, dtype=float)
    continuous = bool(schema.get("continuous_treatment", False))
    return Dataset(body[:, 0], body[:, 1], body[:, 2:], continuous_treatment=continuous)


def save_csv(data: Dataset, path, schema=None) -> None:
    """Write a Dataset back to CSV (repr round-trips finite doubles exactly)."""
    if schema is None:
        schema = {"y": "y", "d": "d", "covariates": [f"x{j + 1}" for j in range(data.p)]}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([schema["y"], schema["d"], *schema["covariates"]])
        for i in range(data.n):
            writer.writerow(
                [repr(float(data.y[i])), repr(float(data.d[i])),
                 *(repr(float(v)) for v in data.x[i])]
            )


def trim_by_overlap(data: Dataset, pscores, lo: float = 0.05, hi: float = 0.95):
    """Drop rows whose estimated propensity score falls outside [lo, hi].

    Returns the trimmed dataset together with the kept row indices.
    """
    pscores = np.asarray(pscores, dtype=float)
    if pscores.shape != (data.n,):
        raise ValidationError(f"pscores must have length {data.n}")
    if not (0.0 <= lo < hi <= 1.0):
        raise ConfigurationError(f"invalid trimming bounds [{lo}, {hi}]")
    keep = np.flatnonzero((pscores >= lo) & (pscores <= hi))
    if keep.size < 2:
        raise DegenerateSampleError(
            f"trimming to [{lo}, {hi}] left {keep.size} observations"
        )
    return data.subset(keep), keep


def make_split(n: int, mode: str = FULL_REUSE, seed: int = 0,
               swap: bool = False) -> SplitPlan:
    """Build a pilot/inference index plan.

    Full-reuse assigns every index to both roles. Half-split partitions
    ``{0..n-1}`` at random into halves whose sizes differ by at most one;
    the first random half is the pilot set unless ``swap`` is set.
    """
    if mode == FULL_REUSE:
        idx = np.arange(n)
        return SplitPlan(FULL_REUSE, idx, idx.copy(), seed)
    if mode != HALF_SPLIT:
        raise ConfigurationError(f"unknown split mode {mode!r}")
    if n < 4:
        raise ConfigurationError(f"half-split needs n >= 4, got {n}")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    perm = rng.permutation(n)
    half = n // 2
    pilot, infer = np.sort(perm[:half]), np.sort(perm[half:])
    if swap:
        pilot, infer = infer, pilot
    return SplitPlan(HALF_SPLIT, pilot, infer, seed)
