"""Binned two-feature classification data and posterior tables.

Each sample has two features quantized to ``0..3`` and a binary class.  The
16 feature cells are indexed ``4 * f1 + f2``; a posterior table is a
``(16, 2)`` array whose rows are ``P[C = 0 | cell]`` and ``P[C = 1 | cell]``.
Empty cells hold NaN.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

N_BINS = 4
N_CELLS = N_BINS * N_BINS
POSTERIOR_HEADER = ("f1_bin", "f2_bin", "count", "p_c0", "p_c1")


def cell_index(f1, f2):
    return np.asarray(f1) * N_BINS + np.asarray(f2)


@dataclass
class BinnedDataset:
    """Quantized features ``f1``, ``f2`` and labels ``c`` as integer arrays."""

    f1: np.ndarray
    f2: np.ndarray
    c: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.f1 = np.asarray(self.f1, dtype=np.int64)
        self.f2 = np.asarray(self.f2, dtype=np.int64)
        self.c = np.asarray(self.c, dtype=np.int64)
        if not (self.f1.shape == self.f2.shape == self.c.shape) or self.f1.ndim != 1:
            raise ValueError("f1, f2 and c must be 1-D arrays of equal length")
        for name, arr, hi in (("f1", self.f1, N_BINS), ("f2", self.f2, N_BINS), ("c", self.c, 2)):
            if arr.size and (arr.min() < 0 or arr.max() >= hi):
                raise ValueError(f"{name} values must lie in 0..{hi - 1}")

    def __len__(self):
        return self.c.size

    @property
    def cells(self) -> np.ndarray:
        return cell_index(self.f1, self.f2)

    @property
    def joint_counts(self) -> np.ndarray:
        """``(16, 2)`` array of sample counts per cell and class."""
        return np.bincount(self.cells * 2 + self.c, minlength=2 * N_CELLS).reshape(N_CELLS, 2)

    @property
    def counts(self) -> np.ndarray:
        return self.joint_counts.sum(axis=1)

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.c, minlength=2)

    def empirical_posterior(self) -> np.ndarray:
        jc = self.joint_counts.astype(float)
        n = jc.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(n > 0, jc / np.where(n > 0, n, 1.0), np.nan)


def posterior_to_csv(table: np.ndarray, counts: Optional[np.ndarray] = None) -> str:
    """Serialize a ``(16, 2)`` table with header ``f1_bin,f2_bin,count,p_c0,p_c1``."""
    table = np.asarray(table, dtype=float)
    if table.shape != (N_CELLS, 2):
        raise ValueError(f"expected a (16, 2) table, got {table.shape}")
    if counts is None:
        counts = np.zeros(N_CELLS, dtype=np.int64)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(POSTERIOR_HEADER)
    for k in range(N_CELLS):
        f1, f2 = divmod(k, N_BINS)
        w.writerow([f1, f2, int(counts[k]), f"{table[k, 0]:.17g}", f"{table[k, 1]:.17g}"])
    return buf.getvalue()


def posterior_from_csv(text: str):
    """Inverse of :func:`posterior_to_csv`; returns ``(table, counts)``."""
    rows = list(csv.DictReader(io.StringIO(text)))
    table = np.full((N_CELLS, 2), np.nan)
    counts = np.zeros(N_CELLS, dtype=np.int64)
    for r in rows:
        k = int(r["f1_bin"]) * N_BINS + int(r["f2_bin"])
        counts[k] = int(r["count"])
        table[k] = float(r["p_c0"]), float(r["p_c1"])
    return table, counts


@dataclass(frozen=True)
class PosteriorComparison:
    """Largest entrywise gap over cells with enough samples.

    ``per_bin`` holds the per-cell maximum gap, NaN where the cell was
    excluded or either table is undefined.
    """

    max_abs_gap: float
    per_bin: np.ndarray
    min_count: int


def compare_posteriors(learned, theory, counts, min_count: int = 100) -> PosteriorComparison:
    learned = np.asarray(learned, dtype=float)
    theory = np.asarray(theory, dtype=float)
    counts = np.asarray(counts)
    if learned.shape != theory.shape or learned.shape[0] != counts.shape[0]:
        raise ValueError(f"shape mismatch: {learned.shape}, {theory.shape}, {counts.shape}")
    gaps = np.abs(learned - theory).max(axis=1)
    keep = (counts >= min_count) & np.isfinite(gaps)
    per_bin = np.where(keep, gaps, np.nan)
    worst = float(np.max(gaps[keep])) if np.any(keep) else 0.0
    return PosteriorComparison(worst, per_bin, int(min_count))
