"""Finite probability mass functions and distribution-level functionals.

All sums run over the support ``S`` of the first argument (labels with
positive mass).  Zero-probability labels are kept in ``Pmf.labels`` so two
distributions can share one label set, but they never contribute to a sum.

When absolute continuity ``P << Q`` fails, entropies return the tagged
sentinel :data:`INFINITE` rather than an overflowed float.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Optional, Sequence

import numpy as np

from focal_entropy.errors import DomainError, LabelMismatchError
from focal_entropy.focal_scalar import check_gamma

SUM_TOL = 1e-9
MAJORIZATION_SLACK = 1e-12


class _Infinite(float):
    """Structural +inf: absolute continuity failed."""

    def __new__(cls):
        return super().__new__(cls, math.inf)

    def __repr__(self):
        return "INFINITE"

    def __reduce__(self):
        return (_infinite, ())


def _infinite():
    return INFINITE


INFINITE = _Infinite()


def is_infinite(value) -> bool:
    """True iff ``value`` is the absolute-continuity sentinel."""
    return value is INFINITE


class Pmf:
    """Immutable probability mass function over an ordered label sequence.

    Args:
        probs: Non-negative masses.  A total within 1e-9 of one is rescaled
            to sum to one; anything further off is rejected.
        labels: Hashable labels, defaults to ``0..N-1``.
        normalize: Skip the rescaling step when False (the sum must then
            already be within 1e-12 of one).  Used by deserializers so that
            stored values round-trip bit for bit.
    """

    __slots__ = ("labels", "probs", "_index")

    def __init__(
        self,
        probs: Iterable[float],
        labels: Optional[Sequence[Hashable]] = None,
        normalize: bool = True,
    ):
        arr = np.array([float(v) for v in probs], dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise DomainError("a Pmf needs at least one entry")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
            raise DomainError(f"probabilities must be finite and non-negative, got {arr.tolist()}")
        total = float(math.fsum(arr))
        if normalize:
            if abs(total - 1.0) > SUM_TOL:
                raise DomainError(f"probabilities sum to {total!r}, more than {SUM_TOL} away from 1")
            if total != 1.0:
                arr = arr / total
        elif abs(total - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {total!r}")
        if labels is None:
            labels = tuple(range(arr.size))
        else:
            labels = tuple(labels)
        if len(labels) != arr.size:
            raise DomainError(f"{len(labels)} labels for {arr.size} probabilities")
        index = {lab: i for i, lab in enumerate(labels)}
        if len(index) != len(labels):
            raise DomainError("labels must be unique")
        if not np.any(arr > 0.0):
            raise DomainError("support is empty")
        arr.flags.writeable = False
        self.labels = labels
        self.probs = arr
        self._index = index

    # -- construction helpers ------------------------------------------------

    @classmethod
    def uniform(cls, n: int, labels=None) -> "Pmf":
        return cls(np.full(n, 1.0 / n), labels)

    @classmethod
    def point_mass(cls, n: int, at: int = 0) -> "Pmf":
        probs = np.zeros(n)
        probs[at] = 1.0
        return cls(probs)

    def with_probs(self, probs) -> "Pmf":
        """New Pmf on the same labels."""
        return Pmf(probs, self.labels)

    # -- basic views ---------------------------------------------------------

    def __len__(self):
        return self.probs.size

    def __getitem__(self, label):
        return float(self.probs[self._index[label]])

    def __iter__(self):
        return iter(zip(self.labels, self.probs.tolist()))

    def __eq__(self, other):
        if not isinstance(other, Pmf):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash((self.labels, self.probs.tobytes()))

    def __repr__(self):
        body = ", ".join(f"{lab!r}: {p:.6g}" for lab, p in self)
        return f"Pmf({{{body}}})"

    @property
    def support_mask(self) -> np.ndarray:
        return self.probs > 0.0

    @property
    def support(self) -> tuple:
        return tuple(lab for lab, p in zip(self.labels, self.probs) if p > 0.0)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.probs > 0.0))

    @property
    def support_probs(self) -> np.ndarray:
        return self.probs[self.probs > 0.0]

    @property
    def p_min(self) -> float:
        return float(self.support_probs.min())

    @property
    def p_max(self) -> float:
        return float(self.probs.max())

    def descending_order(self) -> np.ndarray:
        """Indices sorting the masses in descending order; ties keep label order."""
        return np.argsort(-self.probs, kind="stable")

    def sorted_desc(self) -> np.ndarray:
        return self.probs[self.descending_order()]

    def is_uniform(self, tol: float = 0.0) -> bool:
        s = self.support_probs
        return bool(s.max() - s.min() <= tol)

    def aligned_probs(self, other: "Pmf") -> np.ndarray:
        """Masses of ``other`` listed in this Pmf's label order."""
        if other.labels == self.labels:
            return other.probs
        if set(other.labels) != set(self.labels):
            raise LabelMismatchError(f"label sets differ: {self.labels} vs {other.labels}")
        return np.array([other.probs[other._index[lab]] for lab in self.labels])

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "probs": self.probs.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Pmf":
        labels = data.get("labels")
        return cls(data["probs"], labels, normalize=False)

    @classmethod
    def from_json(cls, text: str) -> "Pmf":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("prob\n")
        for p in self.probs:
            buf.write(f"{p:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Pmf":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if rows and rows[0][0].strip() == "prob":
            rows = rows[1:]
        return cls([float(r[0]) for r in rows], normalize=False)


def as_pmf(p) -> Pmf:
    return p if isinstance(p, Pmf) else Pmf(p)


def _pair(p, q):
    p, q = as_pmf(p), as_pmf(q)
    mask = p.support_mask
    return p.probs[mask], p.aligned_probs(q)[mask]


def shannon_entropy(p) -> float:
    s = as_pmf(p).support_probs
    return float(-np.sum(s * np.log(s)))


def cross_entropy(p, q) -> float:
    """Expected log-loss of ``q`` under ``p``; :data:`INFINITE` unless ``p << q``."""
    ps, qs = _pair(p, q)
    if np.any(qs <= 0.0):
        return INFINITE
    return float(np.sum(ps * -np.log(qs)))


def focal_entropy(gamma: float, p, q) -> float:
    """Expected focal loss of ``q`` under ``p``; :data:`INFINITE` unless ``p << q``."""
    gamma = check_gamma(gamma)
    ps, qs = _pair(p, q)
    if np.any(qs <= 0.0):
        return INFINITE
    return float(np.sum(ps * (1.0 - qs) ** gamma * -np.log(qs)))


def focal_entropy_dgamma(gamma: float, p, q) -> tuple:
    """First and second derivatives of ``focal_entropy`` with respect to gamma.

    Returns ``(INFINITE, INFINITE)`` if absolute continuity fails.  Entries
    with ``q == 1`` contribute zero.
    """
    gamma = check_gamma(gamma)
    ps, qs = _pair(p, q)
    if np.any(qs <= 0.0):
        return INFINITE, INFINITE
    inner = qs < 1.0
    ps, qs = ps[inner], qs[inner]
    log1mq = np.log1p(-qs)
    loss = (1.0 - qs) ** gamma * -np.log(qs)
    first = float(np.sum(ps * log1mq * loss))
    second = float(np.sum(ps * log1mq ** 2 * loss))
    return first, second


def kl_divergence(p, q) -> float:
    ps, qs = _pair(p, q)
    if np.any(qs <= 0.0):
        return INFINITE
    return float(np.sum(ps * np.log(ps / qs)))


def _tilt_weights(gamma: float, probs: np.ndarray) -> np.ndarray:
    w = np.zeros_like(probs)
    m = probs > 0.0
    w[m] = probs[m] ** ((1.0 - probs[m]) ** gamma)
    return w


def h_gamma(gamma: float, p) -> float:
    """Log-normalizer ``log sum_x p(x)^((1-p(x))^gamma)`` of the tilted distribution."""
    gamma = check_gamma(gamma)
    p = as_pmf(p)
    if gamma == 0.0:
        return 0.0
    # weights dominate p, so the true value is nonnegative; clamp rounding
    return max(0.0, math.log(math.fsum(_tilt_weights(gamma, p.probs))))


def tilt(gamma: float, q) -> Pmf:
    """Tilted distribution ``x -> q(x)^((1-q(x))^gamma) / exp(h_gamma(q))``."""
    gamma = check_gamma(gamma)
    q = as_pmf(q)
    if gamma == 0.0:
        return q
    w = _tilt_weights(gamma, q.probs)
    return Pmf(w / np.sum(w), q.labels)


@dataclass(frozen=True)
class RhoR:
    """Mass ``rho`` of the focal weights and the reweighted distribution ``r``."""

    rho: float
    r: Pmf


def rho_and_r(gamma: float, p, q) -> RhoR:
    """Split ``H_gamma(p, q) = rho * (KL(r || q) + H(r))``.

    ``rho = E_p[(1-q)^gamma]`` and ``r(x) = p(x)(1-q(x))^gamma / rho``.
    When ``rho`` vanishes (``q`` is a point mass on the support of ``p``)
    ``r`` is returned as ``p`` itself.

    Raises:
        DomainError: absolute continuity ``p << q`` fails.
    """
    gamma = check_gamma(gamma)
    p, q = as_pmf(p), as_pmf(q)
    qa = p.aligned_probs(q)
    if np.any(qa[p.support_mask] <= 0.0):
        raise DomainError("rho_and_r requires p << q")
    weights = p.probs * (1.0 - qa) ** gamma
    weights[~p.support_mask] = 0.0
    rho = math.fsum(weights)
    if rho == 0.0:
        return RhoR(0.0, p)
    return RhoR(rho, Pmf(weights / rho, p.labels))


def harmonic_mean(p) -> float:
    s = as_pmf(p).support_probs
    return float(s.size / np.sum(1.0 / s))


def majorizes(p, q, slack: float = MAJORIZATION_SLACK) -> bool:
    """Whether ``p`` majorizes ``q`` (prefix sums of sorted masses dominate).

    Distributions of different lengths are padded with zeros.
    """
    a = np.sort(np.asarray(as_pmf(p).probs))[::-1]
    b = np.sort(np.asarray(as_pmf(q).probs))[::-1]
    n = max(a.size, b.size)
    a = np.pad(a, (0, n - a.size))
    b = np.pad(b, (0, n - b.size))
    return bool(np.all(np.cumsum(a) >= np.cumsum(b) - slack))
