"""Scalar focal-loss calculus.

Every function here takes plain Python floats and returns a float.  The
focal loss of a prediction score ``p`` under focus parameter ``gamma`` is
``(1 - p)**gamma * log(1/p)`` with the natural logarithm; ``gamma = 0``
recovers the log-loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from focal_entropy.errors import ConvergenceError, DomainError

INV_E = math.exp(-1.0)
MAX_ITER = 200
P_TOL = 1e-12
W_RTOL = 1e-13
_BRACKET_DELTA = 1e-15
_KAPPA_FLOOR = 1e-300


def check_gamma(gamma: float) -> float:
    """Validate a focus parameter and return it as a float."""
    g = float(gamma)
    if not math.isfinite(g) or g < 0.0:
        raise DomainError(f"gamma must be a finite non-negative number, got {gamma!r}")
    return g


def _check_open(p: float, name: str = "p") -> float:
    p = float(p)
    if not (0.0 < p < 1.0):
        raise DomainError(f"{name} must lie in the open interval (0, 1), got {p!r}")
    return p


def focal_loss(gamma: float, p: float) -> float:
    """Focal loss ``(1-p)^gamma * log(1/p)`` for ``p`` in (0, 1]."""
    gamma = check_gamma(gamma)
    p = float(p)
    if not (0.0 < p <= 1.0):
        raise DomainError(f"p must lie in (0, 1], got {p!r}")
    if p == 1.0:
        return 0.0
    return (1.0 - p) ** gamma * -math.log(p)


def focal_loss_d1(gamma: float, p: float) -> float:
    """First derivative of the focal loss in ``p``; strictly negative on (0, 1)."""
    gamma = check_gamma(gamma)
    p = _check_open(p)
    q = 1.0 - p
    return -(q ** (gamma - 1.0)) * (gamma * -math.log(p) + q / p)


def focal_loss_d2(gamma: float, p: float) -> float:
    """Second derivative of the focal loss in ``p``; strictly positive on (0, 1)."""
    gamma = check_gamma(gamma)
    p = _check_open(p)
    q = 1.0 - p
    bracket = gamma * (1.0 - gamma) * p * p * math.log(p) + 2.0 * gamma * p * q + q * q
    return q ** (gamma - 2.0) / (p * p) * bracket


def phi(gamma: float, p: float) -> float:
    """``-p * focal_loss_d1(gamma, p)``, which tends to 1 at 0+ and to 0 at 1."""
    gamma = check_gamma(gamma)
    p = _check_open(p)
    q = 1.0 - p
    return q ** (gamma - 1.0) * (gamma * p * -math.log(p) + q)


def kappa(p: float) -> float:
    """Threshold on gamma separating the increasing and decreasing parts of phi.

    ``phi(gamma, .)`` is increasing at ``p`` when ``gamma < kappa(p)`` and
    decreasing when ``gamma > kappa(p)``.  The function diverges to +inf as
    ``p -> 0+``; arguments below 1e-300 are clamped there.
    """
    p = _check_open(p)
    p = max(p, _KAPPA_FLOOR)
    return 1.0 / p - 2.0 * (1.0 - p) / (p * -math.log(p))


# ---------------------------------------------------------------------------
# Lambert W, real branches
# ---------------------------------------------------------------------------


def _halley_w(x: float, w: float) -> float:
    for _ in range(MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        step = f / denom
        w_new = w - step
        if abs(w_new - w) <= 4e-16 * (1.0 + abs(w_new)):
            w = w_new
            break
        w = w_new
    return w


def _w_residual_ok(x: float, w: float) -> bool:
    res = abs(w * math.exp(w) - x)
    return res <= W_RTOL * max(abs(x), 1e-300) or res <= 1e-300


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function for ``x >= -1/e``."""
    x = float(x)
    if math.isnan(x) or x < -INV_E - 1e-17:
        raise DomainError(f"lambert_w0 requires x >= -1/e, got {x!r}")
    if x == 0.0:
        return 0.0
    if x <= -INV_E:
        return -1.0
    if math.isinf(x):
        return math.inf
    if x < -0.32:
        r = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        w = -1.0 + r - r * r / 3.0 + 11.0 / 72.0 * r ** 3
    elif x < 3.0:
        w = math.log1p(x)
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    w = _halley_w(x, w)
    if not _w_residual_ok(x, w):
        raise ConvergenceError(f"lambert_w0 did not converge at x={x!r}", residual=w * math.exp(w) - x)
    return w


def lambert_wm1(x: float) -> float:
    """Lower real branch W_{-1} of the Lambert W function on ``[-1/e, 0)``."""
    x = float(x)
    if math.isnan(x) or x < -INV_E - 1e-17 or x >= 0.0:
        raise DomainError(f"lambert_wm1 requires -1/e <= x < 0, got {x!r}")
    if x <= -INV_E:
        return -1.0
    if x < -0.25:
        r = -math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        w = -1.0 + r - r * r / 3.0 + 11.0 / 72.0 * r ** 3
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1
    w = _halley_w(x, w)
    if not _w_residual_ok(x, w):
        raise ConvergenceError(f"lambert_wm1 did not converge at x={x!r}", residual=w * math.exp(w) - x)
    return w


def _w0_of_exp(y: float) -> float:
    """``W0(exp(y))`` without overflowing for large ``y``."""
    if y < 700.0:
        return lambert_w0(math.exp(y))
    # w + log(w) = y
    w = y - math.log(y)
    for _ in range(MAX_ITER):
        step = (w + math.log(w) - y) / (1.0 + 1.0 / w)
        w -= step
        if abs(step) <= 4e-16 * w:
            break
    return w


# ---------------------------------------------------------------------------
# Inverse of the first derivative
# ---------------------------------------------------------------------------


def _softplus(x: float) -> float:
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def _expit(s: float) -> float:
    if s >= 0.0:
        return 1.0 / (1.0 + math.exp(-s))
    e = math.exp(s)
    return e / (1.0 + e)


def focal_d1_inverse(gamma: float, t: float) -> float:
    """Return the unique ``p`` in (0, 1) with ``focal_loss_d1(gamma, p) == t``.

    Closed forms are used for ``gamma`` in {0, 1}.  Otherwise the equation
    ``log(-L'(p)) = log(-t)`` is solved in the logit variable ``s`` with a
    bracketed Newton iteration that falls back to bisection whenever a step
    leaves the bracket.  For ``gamma = 0`` the derivative ranges over
    (-inf, -1) only, so ``t >= -1`` is rejected.

    Raises:
        DomainError: ``t`` is not strictly negative (or not below -1 when
            ``gamma == 0``).
        ConvergenceError: the iteration budget ran out.
    """
    gamma = check_gamma(gamma)
    t = float(t)
    if not (t < 0.0) or math.isinf(t):
        raise DomainError(f"t must be finite and strictly negative, got {t!r}")
    if gamma == 0.0:
        if t >= -1.0:
            raise DomainError(f"for gamma=0 the derivative only takes values below -1, got t={t!r}")
        return -1.0 / t
    if gamma == 1.0:
        return min(1.0 / _w0_of_exp(1.0 - t), math.nextafter(1.0, 0.0))

    log_target = math.log(-t)
    gm1 = gamma - 1.0

    def h(s: float) -> float:
        return -gm1 * _softplus(s) + math.log(gamma * _softplus(-s) + math.exp(-s)) - log_target

    def dh(s: float) -> float:
        p = _expit(s)
        q = _expit(-s)
        a = gamma * _softplus(-s) + math.exp(-s)
        return -gm1 * p - (gamma * q + math.exp(-s)) / a

    s_lo = math.log(_BRACKET_DELTA / (1.0 - _BRACKET_DELTA))
    s_hi = -s_lo
    while h(s_lo) <= 0.0:
        if s_lo < -700.0:
            return _expit(s_lo)
        s_lo -= 10.0
    while h(s_hi) >= 0.0:
        if s_hi > 700.0:
            return math.nextafter(1.0, 0.0)
        s_hi += 10.0

    # starting point from the small-p behaviour -L'(p) ~ 1/p
    s = math.log(-1.0 / t) - math.log1p(1.0 / t) if t < -2.0 else 0.0
    if not (s_lo < s < s_hi):
        s = 0.5 * (s_lo + s_hi)
    for it in range(MAX_ITER):
        hs = h(s)
        if hs == 0.0:
            return _expit(s)
        if hs > 0.0:
            s_lo = s
        else:
            s_hi = s
        d = dh(s)
        s_new = s - hs / d if d != 0.0 else math.nan
        if not (s_lo < s_new < s_hi):
            s_new = 0.5 * (s_lo + s_hi)
        p_old, p_new = _expit(s), _expit(s_new)
        s = s_new
        if abs(p_new - p_old) <= 0.1 * P_TOL or _expit(s_hi) - _expit(s_lo) <= 0.1 * P_TOL:
            return min(_expit(s), math.nextafter(1.0, 0.0))
    raise ConvergenceError(
        f"focal_d1_inverse did not converge for gamma={gamma!r}, t={t!r}",
        residual=h(s),
        iterations=MAX_ITER,
        bracket=(_expit(s_lo), _expit(s_hi)),
    )


# ---------------------------------------------------------------------------
# Peak of phi
# ---------------------------------------------------------------------------

#: Zero of kappa, ``-W0(-2/e^2) / 2``.
KAPPA_ZERO = -0.5 * lambert_w0(-2.0 * math.exp(-2.0))


@dataclass(frozen=True)
class PhiPeak:
    """Location and height of the maximum of ``phi(gamma, .)``.

    ``p_plus`` is None for ``gamma == 0`` where phi is identically one.
    """

    p_plus: Optional[float]
    phi_max: float


def phi_peak(gamma: float) -> PhiPeak:
    """Locate the maximizer of ``phi(gamma, .)`` by bisecting ``kappa(p) = gamma``.

    The bisection runs on ``log p`` over ``(1e-300, KAPPA_ZERO]`` since kappa
    is strictly decreasing and vanishes at ``KAPPA_ZERO``.
    """
    gamma = check_gamma(gamma)
    if gamma == 0.0:
        return PhiPeak(None, 1.0)
    lo, hi = math.log(_KAPPA_FLOOR), math.log(KAPPA_ZERO)
    if kappa(_KAPPA_FLOOR) <= gamma:
        raise ConvergenceError(f"phi peak lies below 1e-300 for gamma={gamma!r}")
    for it in range(MAX_ITER):
        mid = 0.5 * (lo + hi)
        if kappa(math.exp(mid)) > gamma:
            lo = mid
        else:
            hi = mid
        if math.exp(hi) - math.exp(lo) <= P_TOL * 1e-3 or hi - lo <= 1e-14:
            break
    else:
        raise ConvergenceError("phi_peak bisection did not converge", iterations=MAX_ITER)
    p_plus = math.exp(0.5 * (lo + hi))
    return PhiPeak(p_plus, phi(gamma, p_plus))
