"""Synthetic imbalanced binary task with two conditionally independent features."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from focal_entropy.errors import DomainError
from focal_entropy.experiments.data import N_BINS, N_CELLS, BinnedDataset
from focal_entropy.minimizer import solve_minimizer
from focal_entropy.pmf import Pmf


def _default_f1():
    return ((0.65, 0.20, 0.10, 0.05), (0.10, 0.25, 0.45, 0.20))


def _default_f2():
    return ((0.50, 0.30, 0.15, 0.05), (0.20, 0.50, 0.20, 0.10))


@dataclass(frozen=True)
class SyntheticSpec:
    """Class prior and per-class feature tables (rows indexed by class)."""

    class_prior: tuple = (0.95, 0.05)
    f1_given_c: tuple = field(default_factory=_default_f1)
    f2_given_c: tuple = field(default_factory=_default_f2)
    sample_count: int = 10000
    seed: int = 0

    def __post_init__(self):
        prior = np.asarray(self.class_prior, dtype=float)
        if prior.shape != (2,) or np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-9:
            raise DomainError(f"class_prior must be a 2-point distribution, got {self.class_prior}")
        for name in ("f1_given_c", "f2_given_c"):
            t = np.asarray(getattr(self, name), dtype=float)
            if t.shape != (2, N_BINS) or np.any(t < 0) or np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-9):
                raise DomainError(f"{name} must be a 2x4 table with rows summing to 1")
        if self.sample_count < 0:
            raise DomainError("sample_count must be non-negative")

    def to_dict(self) -> dict:
        return {
            "class_prior": list(self.class_prior),
            "f1_given_c": [list(r) for r in self.f1_given_c],
            "f2_given_c": [list(r) for r in self.f2_given_c],
            "sample_count": self.sample_count,
            "seed": self.seed,
        }


def synthetic_posterior(spec: SyntheticSpec) -> np.ndarray:
    """Exact ``P[C | F1, F2]`` for all 16 cells by Bayes' rule."""
    prior = np.asarray(spec.class_prior, dtype=float)
    t1 = np.asarray(spec.f1_given_c, dtype=float)
    t2 = np.asarray(spec.f2_given_c, dtype=float)
    # joint[c, f1, f2]
    joint = prior[:, None, None] * t1[:, :, None] * t2[:, None, :]
    joint = joint.reshape(2, N_CELLS).T
    total = joint.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, joint / np.where(total > 0, total, 1.0), np.nan)


def sample_synthetic(spec: SyntheticSpec) -> BinnedDataset:
    """Draw ``C`` from the prior, then each feature from its class-conditional row."""
    rng = np.random.default_rng(spec.seed)
    n = spec.sample_count
    prior_cdf = np.cumsum(spec.class_prior)
    c = np.minimum((rng.random(n)[:, None] >= prior_cdf[None, :-1]).sum(axis=1), 1)
    feats = []
    for table in (spec.f1_given_c, spec.f2_given_c):
        cdf = np.cumsum(np.asarray(table, dtype=float), axis=1)[c]
        u = rng.random(n)
        feats.append(np.minimum((u[:, None] >= cdf[:, :-1]).sum(axis=1), N_BINS - 1))
    return BinnedDataset(feats[0], feats[1], c, meta={"source": "synthetic", "seed": spec.seed})


def theory_target(gamma: float, posterior_row) -> Pmf:
    """Focal-entropy minimizer of one posterior row."""
    return solve_minimizer(gamma, posterior_row).p_star


def theory_table(gamma: float, table) -> np.ndarray:
    """Apply :func:`theory_target` to every defined row of a ``(16, 2)`` table."""
    table = np.asarray(table, dtype=float)
    out = np.full_like(table, np.nan)
    for k, row in enumerate(table):
        if np.all(np.isfinite(row)):
            out[k] = theory_target(gamma, row).probs
    return out
