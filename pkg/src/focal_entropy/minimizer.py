"""Minimizer of the focal entropy ``Q -> H_gamma(P, Q)`` over the simplex.

The minimizer has the form ``P*(x) = Linv(-alpha / P(x))`` on the support of
``P``, where ``Linv`` inverts the derivative of the focal loss and ``alpha``
is the unique root of ``F(alpha) = sum_x Linv(-alpha / P(x)) = 1``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from focal_entropy.errors import BracketError, ConvergenceError, DomainError
from focal_entropy.focal_scalar import (
    check_gamma,
    focal_d1_inverse,
    focal_loss_d1,
    kappa,
    phi,
    phi_peak,
)
from focal_entropy.pmf import Pmf, as_pmf, harmonic_mean

F_TOL = 1e-10
WIDTH_RTOL = 1e-14
EXPAND_FACTOR = 4.0
MAX_EXPANSIONS = 60
MAX_BISECTIONS = 400


@dataclass(frozen=True)
class MinimizerResult:
    """Output of :func:`solve_minimizer`.

    Attributes:
        p_star: The minimizing distribution, on the labels of the input.
        alpha_star: Root of the normalization equation.
        residual: ``|F(alpha_star) - 1|`` before the final rescaling.
        iterations: Number of bisection steps.
        bracket: Final ``(lo, hi)`` bracket around ``alpha_star``.
    """

    p_star: Pmf
    alpha_star: float
    residual: float
    iterations: int
    bracket: Tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "alpha_star": self.alpha_star,
            "residual": self.residual,
            "iterations": self.iterations,
            "p_star": self.p_star.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "MinimizerResult":
        a = float(data["alpha_star"])
        return cls(Pmf.from_dict(data["p_star"]), a, float(data["residual"]), int(data["iterations"]), (a, a))


@dataclass(frozen=True)
class AlphaBounds:
    """Provable intervals containing ``alpha_star``.

    ``phi_case`` is ``"decreasing"`` when ``gamma > kappa(p_min)`` (then
    ``phi(p_max) <= alpha <= phi(p_min)``), ``"increasing"`` when
    ``gamma < kappa(p_max)`` (then ``phi(p_min) < alpha < phi(p_max)``) and
    None otherwise, in which case ``phi_lo`` and ``phi_hi`` are None too.
    ``cap`` is the maximum of ``phi(gamma, .)``, itself at most ``1 + gamma``.
    """

    c_N_gamma: float
    box_lo: float
    box_hi: float
    phi_lo: Optional[float]
    phi_hi: Optional[float]
    phi_case: Optional[str]
    cap: float

    def contains(self, alpha: float, slack: float = 1e-12) -> bool:
        tol = slack * max(1.0, abs(alpha))
        ok = self.box_lo - tol <= alpha <= self.box_hi + tol and alpha <= self.cap + tol
        if self.phi_case is not None:
            ok = ok and self.phi_lo - tol <= alpha <= self.phi_hi + tol
        return ok


def normalization_F(gamma: float, p, alpha: float) -> float:
    """``sum_{x in S} focal_d1_inverse(gamma, -alpha / p(x))``; decreasing in alpha."""
    gamma = check_gamma(gamma)
    alpha = float(alpha)
    if not alpha > 0.0:
        raise DomainError(f"alpha must be positive, got {alpha!r}")
    s = as_pmf(p).support_probs
    return math.fsum(focal_d1_inverse(gamma, -alpha / px) for px in s)


def alpha_bounds(gamma: float, p) -> AlphaBounds:
    """Box, phi-based and global bounds on ``alpha_star`` for ``p``."""
    gamma = check_gamma(gamma)
    p = as_pmf(p)
    n = p.support_size
    cap = phi_peak(gamma).phi_max
    if n == 1:
        return AlphaBounds(0.0, 0.0, 0.0, None, None, None, cap)
    c = -focal_loss_d1(gamma, 1.0 / n)
    p_min, p_max = p.p_min, p.p_max
    phi_lo = phi_hi = case = None
    if gamma > kappa(p_min):
        phi_lo, phi_hi, case = phi(gamma, p_max), phi(gamma, p_min), "decreasing"
    elif p_max < 1.0 and gamma < kappa(p_max):
        phi_lo, phi_hi, case = phi(gamma, p_min), phi(gamma, p_max), "increasing"
    return AlphaBounds(c, p_min * c, p_max * c, phi_lo, phi_hi, case, cap)


def _midpoint(lo: float, hi: float) -> float:
    if lo > 0.0 and hi > 2.0 * lo:
        return math.sqrt(lo) * math.sqrt(hi)
    return 0.5 * (lo + hi)


def _assemble(gamma: float, p: Pmf, alpha: float) -> np.ndarray:
    out = np.zeros(len(p))
    for i, px in enumerate(p.probs):
        if px > 0.0:
            out[i] = focal_d1_inverse(gamma, -alpha / px)
    return out


def solve_minimizer(gamma: float, p) -> MinimizerResult:
    """Minimize ``H_gamma(p, .)`` by bisection on the normalization equation.

    The bisection starts from the box bounds and widens the bracket by a
    factor of 4 (at most 60 times) if rounding puts both endpoints on the same
    side.  The assembled minimizer is rescaled by its total, which differs
    from one by at most 1e-10.  For ``gamma == 0`` the input is returned with
    ``alpha_star = 1``.  A single-point support returns the input with
    ``alpha_star = 0``, the limit of the root as the support shrinks.

    Raises:
        BracketError: no sign change was found.
        ConvergenceError: the bracket collapsed with ``|F - 1| > 1e-10``.
    """
    gamma = check_gamma(gamma)
    p = as_pmf(p)
    if gamma == 0.0:
        return MinimizerResult(p, 1.0, 0.0, 0, (1.0, 1.0))
    if p.support_size == 1:
        return MinimizerResult(p, 0.0, 0.0, 0, (0.0, 0.0))

    bounds = alpha_bounds(gamma, p)
    lo, hi = bounds.box_lo, bounds.box_hi
    if not lo > 0.0:
        raise BracketError(
            f"alpha box underflows for gamma={gamma!r}", box=(bounds.box_lo, bounds.box_hi)
        )
    f_lo = normalization_F(gamma, p, lo) - 1.0
    f_hi = f_lo if hi == lo else normalization_F(gamma, p, hi) - 1.0
    best = min(((abs(f_lo), lo), (abs(f_hi), hi)))
    if best[0] <= F_TOL:
        alpha, resid, iters = best[1], best[0], 0
        lo = hi = alpha
    else:
        expansions = 0
        while not (f_lo > 0.0 > f_hi):
            if expansions >= MAX_EXPANSIONS:
                raise BracketError(
                    "could not bracket the normalization root",
                    residual=min(abs(f_lo), abs(f_hi)),
                    bracket=(lo, hi),
                    expansions=expansions,
                )
            if f_lo <= 0.0:
                lo /= EXPAND_FACTOR
                f_lo = normalization_F(gamma, p, lo) - 1.0
            if f_hi >= 0.0:
                hi *= EXPAND_FACTOR
                f_hi = normalization_F(gamma, p, hi) - 1.0
            expansions += 1
        alpha, resid = _midpoint(lo, hi), math.inf
        for iters in range(1, MAX_BISECTIONS + 1):
            alpha = _midpoint(lo, hi)
            f_mid = normalization_F(gamma, p, alpha) - 1.0
            resid = abs(f_mid)
            if resid <= F_TOL:
                break
            if f_mid > 0.0:
                lo = alpha
            else:
                hi = alpha
            if hi - lo <= WIDTH_RTOL * alpha:
                break
        if resid > F_TOL:
            raise ConvergenceError(
                "normalization root not resolved to 1e-10",
                residual=resid,
                iterations=iters,
                bracket=(lo, hi),
            )

    raw = _assemble(gamma, p, alpha)
    p_star = Pmf(raw / raw.sum(), p.labels)
    return MinimizerResult(p_star, alpha, resid, iters, (lo, hi))


def inverse_operator(gamma: float, p_star) -> Pmf:
    """Recover the distribution whose minimizer is ``p_star``.

    ``P(x)`` is proportional to ``1 / focal_loss_d1(gamma, p_star(x))`` on the
    support of ``p_star``.

    Raises:
        DomainError: ``p_star`` puts all of its mass on a single label.
    """
    gamma = check_gamma(gamma)
    q = as_pmf(p_star)
    if q.p_max >= 1.0:
        raise DomainError("inverse_operator needs every support entry strictly below 1")
    recip = np.zeros(len(q))
    for i, qx in enumerate(q.probs):
        if qx > 0.0:
            recip[i] = 1.0 / focal_loss_d1(gamma, qx)
    return Pmf(recip / recip.sum(), q.labels)


def recurse_minimizer(gamma: float, p0, steps: int) -> List[Pmf]:
    """Iterates ``p_{k+1} = P*(p_k)``; returns ``[p_1, ..., p_steps]``."""
    if int(steps) != steps or steps < 1:
        raise DomainError(f"steps must be a positive integer, got {steps!r}")
    out = []
    cur = as_pmf(p0)
    for _ in range(int(steps)):
        cur = solve_minimizer(gamma, cur).p_star
        out.append(cur)
    return out


def alpha_asymptotic(gamma: float, p) -> float:
    """Large-gamma approximation ``-L'(1/|S|) * HM(p)`` of ``alpha_star``."""
    gamma = check_gamma(gamma)
    p = as_pmf(p)
    if gamma == 0.0:
        raise DomainError("alpha_asymptotic needs gamma > 0")
    n = p.support_size
    if n == 1:
        raise DomainError("alpha_asymptotic needs at least two support points")
    return -focal_loss_d1(gamma, 1.0 / n) * harmonic_mean(p)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


def _objective(gamma, ps, q):
    return float(np.sum(ps * (1.0 - q) ** gamma * -np.log(q)))


def _grad(gamma, ps, q):
    r = 1.0 - q
    return -ps * r ** (gamma - 1.0) * (gamma * -np.log(q) + r / q)


def _lattice(n: int, k: int):
    """All ``k``-vectors of positive integers summing to ``n``."""
    for cuts in itertools.combinations(range(1, n), k - 1):
        bounds = (0,) + cuts + (n,)
        yield [bounds[i + 1] - bounds[i] for i in range(k)]


def _grid_search(gamma, ps, resolution):
    k = ps.size
    if k > 6:
        raise DomainError("grid mode supports at most 6 support points")
    if resolution < k:
        raise DomainError("resolution must be at least the support size")
    pts = np.array(list(_lattice(resolution, k)), dtype=float) / resolution
    vals = np.sum(ps * (1.0 - pts) ** gamma * -np.log(pts), axis=1)
    centre = pts[np.argmin(vals)]
    # one refinement on a finer lattice spanning the neighbouring cells
    h = 1.0 / resolution
    m = max(2, int(round(0.5 * 20000 ** (1.0 / max(k - 1, 1)))))
    offsets = np.array(list(itertools.product(range(-m, m + 1), repeat=k - 1)), dtype=float) * (h / m)
    cand = np.tile(centre, (offsets.shape[0], 1))
    cand[:, :-1] += offsets
    cand[:, -1] = 1.0 - cand[:, :-1].sum(axis=1)
    cand = cand[np.all(cand > 0.0, axis=1)]
    vals = np.sum(ps * (1.0 - cand) ** gamma * -np.log(cand), axis=1)
    return cand[np.argmin(vals)]


def _mirror_descent(gamma, ps, max_iter, tol):
    q = ps.copy()
    eta = 1.0
    spread = math.inf
    for it in range(max_iter):
        g = _grad(gamma, ps, q)
        # stationarity: p(x) L'(q(x)) is constant across the support
        spread = (g.max() - g.min()) / abs(g.mean())
        if spread <= tol:
            return q
        g_c = g - np.dot(q, g)
        while True:
            w = np.log(q) - eta * g_c
            w -= w.max()
            q_new = np.exp(w)
            q_new /= q_new.sum()
            # halve until the step stops short of the minimum along the path;
            # objective values are too flat near the optimum to compare
            if np.all(q_new > 0.0) and np.all(q_new < 1.0):
                g_new = _grad(gamma, ps, q_new)
                if np.dot(g_new - np.dot(q_new, g_new), q_new - q) <= 0.0:
                    break
            eta *= 0.5
            if eta < 1e-300:
                return q
        q = q_new
        eta *= 2.0
    raise ConvergenceError(
        "brute-force descent ran out of iterations", residual=float(spread), iterations=max_iter
    )


def brute_force_minimizer(
    gamma: float,
    p,
    mode: str = "descent",
    resolution: int = 200,
    max_iter: int = 100000,
    tol: float = 1e-8,
) -> Pmf:
    """Minimize ``H_gamma(p, .)`` directly, without the normalization equation.

    Args:
        gamma: Focus parameter.
        p: Target distribution.
        mode: ``"descent"`` runs exponentiated-gradient descent with a
            backtracking step until the focal gradient is constant across the
            support to relative precision ``tol``.  ``"grid"`` searches the
            interior simplex lattice with spacing ``1/resolution`` and then a
            finer lattice around the best point (support size at most 6).
        resolution: Lattice resolution for grid mode.
        max_iter: Iteration budget for descent mode.
        tol: Stationarity tolerance for descent mode.

    Raises:
        ConvergenceError: descent mode exhausted ``max_iter``.
    """
    gamma = check_gamma(gamma)
    p = as_pmf(p)
    mask = p.support_mask
    ps = p.probs[mask]
    out = np.zeros(len(p))
    if ps.size == 1:
        out[mask] = 1.0
        return Pmf(out, p.labels)
    if mode == "grid":
        q = _grid_search(gamma, ps, int(resolution))
    elif mode == "descent":
        q = _mirror_descent(gamma, ps, int(max_iter), float(tol))
    else:
        raise DomainError(f"unknown mode {mode!r}")
    out[mask] = q
    return Pmf(out / out.sum(), p.labels)
