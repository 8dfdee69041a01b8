"""How the focal-entropy minimizer reshapes a distribution.

Entries are compared after sorting in descending order: ``d_i = p_(i) -
p*_(i)``.  Since ``P*(x) >= p(x)`` exactly when ``alpha_star <= phi(p(x))``,
the sign of ``d_i`` is fixed by where ``p_(i)`` falls relative to the two
roots ``p_a <= p_b`` of ``phi(gamma, .) = alpha_star``.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from focal_entropy.errors import ConvergenceError, DomainError
from focal_entropy.focal_scalar import (
    _expit,
    _softplus,
    check_gamma,
    focal_loss_d1,
    kappa,
    lambert_wm1,
    phi_peak,
)
from focal_entropy.minimizer import solve_minimizer
from focal_entropy.pmf import (
    INFINITE,
    Pmf,
    as_pmf,
    kl_divergence,
    majorizes,
    shannon_entropy,
)

D_TOL = 1e-10
ALPHA_ONE_SLACK = 1e-12
ROOT_TOL = 1e-12
PHI_SLACK = 1e-9
SCAN_HEADER = ("p1", "p2", "p3", "alpha_star", "p_gamma_a", "pmin_minus_pa")


class Tag(str, enum.Enum):
    AMPLIFIED = "AMPLIFIED"
    SUPPRESSED_HIGH = "SUPPRESSED_HIGH"
    OVER_SUPPRESSED = "OVER_SUPPRESSED"


def _phi_logit(gamma: float, s: float) -> float:
    # phi(gamma, expit(s)) without rounding p or 1 - p to the endpoints
    p, q = _expit(s), _expit(-s)
    neg_log_p = _softplus(-s)
    log_q = -_softplus(s)
    return math.exp((gamma - 1.0) * log_q) * (gamma * p * neg_log_p + q)


def _bisect_logit(gamma, alpha, lo, hi, increasing):
    for _ in range(400):
        if hi - lo <= ROOT_TOL:
            break
        mid = 0.5 * (lo + hi)
        above = _phi_logit(gamma, mid) > alpha
        if above == increasing:
            hi = mid
        else:
            lo = mid
    return _expit(0.5 * (lo + hi))


@dataclass(frozen=True)
class PhiRoots:
    """Roots of ``phi(gamma, .) = alpha``; ``p_a`` is 0 when ``alpha < 1``."""

    p_a: float
    p_b: float
    p_plus: float


def phi_roots(gamma: float, alpha_star: float) -> PhiRoots:
    """Solve ``phi(gamma, p) = alpha_star`` on both sides of the peak of phi.

    The bisection runs on the logit of ``p`` down to a width of 1e-12, so
    both roots carry a relative error of about 1e-12 in ``p`` and ``1 - p``.

    Raises:
        DomainError: ``gamma == 0``, ``alpha_star <= 0`` or ``alpha_star``
            exceeds the maximum of phi by more than 1e-9 (relative).
    """
    gamma = check_gamma(gamma)
    alpha = float(alpha_star)
    if gamma == 0.0:
        raise DomainError("phi is constant for gamma = 0")
    if not alpha > 0.0:
        raise DomainError(f"alpha_star must be positive, got {alpha!r}")
    peak = phi_peak(gamma)
    p_plus = peak.p_plus
    if alpha >= peak.phi_max:
        if alpha > peak.phi_max * (1.0 + PHI_SLACK):
            raise DomainError(f"alpha_star={alpha!r} exceeds max phi={peak.phi_max!r}")
        return PhiRoots(p_plus, p_plus, p_plus)
    s_plus = math.log(p_plus) - math.log1p(-p_plus)

    s_hi = s_plus + 1.0
    while _phi_logit(gamma, s_hi) > alpha:
        s_hi = s_plus + 2.0 * (s_hi - s_plus)
        if s_hi > 1e6:
            raise ConvergenceError("no upper bracket for p_b", alpha=alpha)
    p_b = _bisect_logit(gamma, alpha, s_plus, s_hi, increasing=False)

    if alpha < 1.0 - ALPHA_ONE_SLACK:
        return PhiRoots(0.0, p_b, p_plus)
    s_lo = s_plus - 1.0
    while _phi_logit(gamma, s_lo) > alpha and s_lo > -745.0:
        s_lo = max(s_plus - 2.0 * (s_plus - s_lo), -745.0)
    p_a = _bisect_logit(gamma, alpha, s_lo, s_plus, increasing=True)
    return PhiRoots(p_a, p_b, p_plus)


def _sign(v: float) -> int:
    if abs(v) <= D_TOL:
        return 0
    return 1 if v > 0 else -1


def count_sign_changes(d: Sequence[float]) -> int:
    """Sign changes along ``d``, ignoring entries with ``|d_i| <= 1e-10``."""
    signs = [s for s in (_sign(v) for v in d) if s != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


@dataclass(frozen=True)
class RegimeReport:
    """Comparison of ``p`` and its minimizer over the descending-sorted support."""

    gamma: float
    p_sorted: Tuple[float, ...]
    p_star_sorted: Tuple[float, ...]
    d: Tuple[float, ...]
    p_gamma_a: float
    p_gamma_b: float
    p_plus: float
    alpha_star: float
    tags: Tuple[Tag, ...]
    over_suppression: bool
    sign_changes: int
    majorizes_flag: bool

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["p_sorted"] = list(self.p_sorted)
        out["p_star_sorted"] = list(self.p_star_sorted)
        out["d"] = list(self.d)
        out["tags"] = [t.value for t in self.tags]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _tag(p: float, roots: PhiRoots) -> Tag:
    if p <= roots.p_a:
        return Tag.OVER_SUPPRESSED
    if p < roots.p_b:
        return Tag.AMPLIFIED
    return Tag.SUPPRESSED_HIGH


def analyze(gamma: float, p) -> RegimeReport:
    """Solve the minimizer for ``p`` and classify every sorted entry.

    A uniform ``p`` is a fixed point, so all gaps vanish and
    ``over_suppression`` is False even when ``1/N`` sits on the lower root.

    Raises:
        DomainError: ``gamma == 0`` or the support has a single point.
    """
    gamma = check_gamma(gamma)
    p = as_pmf(p)
    if gamma == 0.0:
        raise DomainError("analyze needs gamma > 0")
    if p.support_size < 2:
        raise DomainError("analyze needs at least two support points")
    res = solve_minimizer(gamma, p)
    order = p.descending_order()[: p.support_size]
    ps = p.probs[order]
    qs = res.p_star.probs[order]
    d = ps - qs
    roots = phi_roots(gamma, res.alpha_star)
    uniform = p.is_uniform()
    if uniform:
        # 1/N is itself a root; pin it so the tag does not hinge on bisection noise
        u = 1.0 / p.support_size
        if u < roots.p_plus:
            roots = PhiRoots(u, roots.p_b, roots.p_plus)
        else:
            roots = PhiRoots(roots.p_a, u, roots.p_plus)
    tags = tuple(_tag(float(v), roots) for v in ps)
    return RegimeReport(
        gamma=gamma,
        p_sorted=tuple(ps.tolist()),
        p_star_sorted=tuple(qs.tolist()),
        d=tuple(d.tolist()),
        p_gamma_a=roots.p_a,
        p_gamma_b=roots.p_b,
        p_plus=roots.p_plus,
        alpha_star=res.alpha_star,
        tags=tags,
        over_suppression=not uniform and Tag.OVER_SUPPRESSED in tags,
        sign_changes=count_sign_changes(d),
        majorizes_flag=majorizes(p, res.p_star),
    )


@dataclass(frozen=True)
class SufficientConditions:
    """Checks that rule out over-suppression (prop14, prop15) or force ``d_1 >= 0`` (prop16)."""

    prop14: bool
    prop15: bool
    prop16: bool
    gamma0: float
    kappa_pmin: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def gamma_zero(n_support: int) -> float:
    """Focus level above which the largest entry is always suppressed.

    ``-1 - W_{-1}(-n e^{-n}) / n`` with ``n = log(N / (N - 1))``; infinite for
    ``N = 1``.
    """
    if n_support < 2:
        return math.inf
    n = math.log(n_support / (n_support - 1.0))
    return -1.0 - lambert_wm1(-n * math.exp(-n)) / n


def sufficient_conditions(gamma: float, p) -> SufficientConditions:
    gamma = check_gamma(gamma)
    p = as_pmf(p)
    n = p.support_size
    if n == 1:
        prop14 = True
    else:
        prop14 = -p.p_max * focal_loss_d1(gamma, 1.0 / n) < 1.0
    k = kappa(p.p_min) if p.p_min < 1.0 else -math.inf
    g0 = gamma_zero(n)
    return SufficientConditions(prop14, gamma > k, gamma > g0, g0, k)


@dataclass(frozen=True)
class BinaryBoundsResult:
    """Power-law envelope ``q_gamma <= P*_1 <= q_{gamma+1}`` for a two-point distribution."""

    gamma: float
    p: float
    q_gamma: float
    q_gamma_plus1: float
    p_star_1: float
    gap_bound: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def power_law_q(gamma: float, p: float) -> float:
    """``p^(1/g) / (p^(1/g) + (1-p)^(1/g))`` evaluated as ``expit(logit(p) / g)``."""
    return _expit((math.log(p) - math.log1p(-p)) / gamma)


def binary_bounds(gamma: float, p: float) -> BinaryBoundsResult:
    """Envelope and exact minimizer mass on the smaller label of ``[1-p, p]``."""
    gamma = check_gamma(gamma)
    p = float(p)
    if gamma == 0.0:
        raise DomainError("binary_bounds needs gamma > 0")
    if not (0.0 < p <= 0.5):
        raise DomainError(f"p must lie in (0, 1/2], got {p!r}")
    star = solve_minimizer(gamma, Pmf([1.0 - p, p])).p_star.probs[1]
    logit = math.log(p) - math.log1p(-p)
    return BinaryBoundsResult(
        gamma=gamma,
        p=p,
        q_gamma=power_law_q(gamma, p),
        q_gamma_plus1=power_law_q(gamma + 1.0, p),
        p_star_1=float(star),
        gap_bound=abs(logit) / (4.0 * gamma * gamma),
    )


def limit_target(p, q) -> float:
    """``max_{x in S} (1 - q(x))`` over the support of ``p``."""
    p, q = as_pmf(p), as_pmf(q)
    qa = p.aligned_probs(q)[p.support_mask]
    return float(np.max(1.0 - qa))


def focal_entropy_root(gamma: float, p, q) -> float:
    """``H_gamma(p, q)^(1/gamma)`` computed in log space."""
    gamma = check_gamma(gamma)
    if gamma == 0.0:
        raise DomainError("the 1/gamma root needs gamma > 0")
    p, q = as_pmf(p), as_pmf(q)
    mask = p.support_mask
    ps, qs = p.probs[mask], p.aligned_probs(q)[mask]
    if np.any(qs <= 0.0):
        return INFINITE
    keep = qs < 1.0
    if not np.any(keep):
        return 0.0
    ps, qs = ps[keep], qs[keep]
    logs = np.log(ps) + gamma * np.log1p(-qs) + np.log(-np.log(qs))
    top = logs.max()
    log_h = top + math.log(float(np.sum(np.exp(logs - top))))
    return math.exp(log_h / gamma)


def limit_diagnostic(p, q, gamma_grid: Sequence[float]) -> List[Tuple[float, float]]:
    """``(gamma, H_gamma(p, q)^(1/gamma))`` for every gamma in the grid."""
    return [(float(g), focal_entropy_root(g, p, q)) for g in gamma_grid]


@dataclass
class ScanResult:
    """Per-cell output of :func:`simplex_scan` in lattice order.

    Cells with a coordinate below ``1/(2 * resolution)`` are left out, which
    on this lattice removes exactly the boundary of the simplex.
    """

    gamma: float
    resolution: int
    rows: List[Tuple[float, float, float, float, float, float]] = field(default_factory=list)
    d1: List[float] = field(default_factory=list)
    failures: List[Tuple[Tuple[float, float, float], str]] = field(default_factory=list)

    @property
    def min_gap(self) -> float:
        return min(r[5] for r in self.rows)

    @property
    def argmin(self) -> Tuple[float, float, float]:
        best = min(self.rows, key=lambda r: r[5])
        return best[:3]

    @property
    def min_d1(self) -> float:
        return min(self.d1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SCAN_HEADER)
        for row in self.rows:
            w.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()


def _scan_cell(args):
    gamma, cell = args
    try:
        rep = analyze(gamma, Pmf(cell))
    except (ConvergenceError, DomainError) as exc:
        return cell, None, str(exc)
    return cell, (rep.alpha_star, rep.p_gamma_a, rep.d[0]), None


def simplex_scan(gamma: float, resolution: int, jobs: int = 1) -> ScanResult:
    """Evaluate ``p_min - p_a`` on the interior lattice of the 3-point simplex.

    With ``jobs > 1`` cells are spread over worker processes; the output is
    assembled in lattice order either way.

    Raises:
        DomainError: ``resolution < 10`` or ``gamma == 0``.
    """
    gamma = check_gamma(gamma)
    if gamma == 0.0:
        raise DomainError("simplex_scan needs gamma > 0")
    resolution = int(resolution)
    if resolution < 10:
        raise DomainError("resolution must be at least 10")
    floor = 1.0 / (2 * resolution)
    cells = []
    for i in range(1, resolution):
        for j in range(1, resolution - i):
            cell = (i / resolution, j / resolution, (resolution - i - j) / resolution)
            if min(cell) >= floor:
                cells.append((gamma, cell))
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_scan_cell, cells, chunksize=max(1, len(cells) // (4 * jobs))))
    else:
        results = [_scan_cell(c) for c in cells]
    out = ScanResult(gamma, resolution)
    for cell, vals, err in results:
        if vals is None:
            out.failures.append((cell, err))
            continue
        alpha, p_a, d1 = vals
        out.rows.append((*cell, alpha, p_a, min(cell) - p_a))
        out.d1.append(d1)
    return out


@dataclass(frozen=True)
class EntropyConsequences:
    precondition: bool
    entropy_increase: bool
    kl_decrease: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def entropy_consequences(gamma: float, p) -> EntropyConsequences:
    """Entropy and divergence-from-uniform comparison of ``p`` and its minimizer.

    ``precondition`` records whether ``p_min > p_a``; the two flags are
    reported regardless.
    """
    gamma = check_gamma(gamma)
    p = as_pmf(p)
    res = solve_minimizer(gamma, p)
    if gamma == 0.0 or p.support_size < 2:
        pre = True
    else:
        pre = p.p_min > phi_roots(gamma, res.alpha_star).p_a
    mask = p.support_mask
    u = np.where(mask, 1.0 / p.support_size, 0.0)
    uni = Pmf(u, p.labels)
    inc = shannon_entropy(res.p_star) >= shannon_entropy(p) - 1e-12
    dec = kl_divergence(p, uni) >= kl_divergence(res.p_star, uni) - 1e-12
    return EntropyConsequences(pre, inc, dec)
