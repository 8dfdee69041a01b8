"""Tabular data behind each reproduced figure.

Every builder returns ``(header, rows)`` with ``rows`` a list of tuples in
a fixed order, so emitters produce identical bytes for identical inputs.
"""

from __future__ import annotations

from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from focal_entropy.minimizer import alpha_asymptotic, recurse_minimizer, solve_minimizer
from focal_entropy.regime_analysis import (
    SCAN_HEADER,
    binary_bounds,
    focal_entropy_root,
    limit_target,
    simplex_scan,
)

Table = Tuple[Tuple[str, ...], List[tuple]]

FIG3_P = (0.182059, 0.462129, 0.355812)
FIG3_GAMMAS = (0.5, 1.0, 2.0)
FIG4_P0 = (0.48511729, 0.24276922, 0.22591902, 0.04619447)
FIG4_GAMMA = 1.0
FIG4_STEPS = 3
CONVERGENCE_PMFS = ((0.65, 0.35), (0.43, 0.32, 0.25), (0.35, 0.25, 0.25, 0.15))
ASYMPTOTE_PMFS = ((0.65, 0.35), (0.43, 0.32, 0.25))
BINARY_P = 0.05
LIMIT_P = (0.4, 0.58, 0.02)
LIMIT_QS = ((0.2, 0.02, 0.78), (0.2, 0.78, 0.02))


def convergence_grid() -> np.ndarray:
    return np.geomspace(0.01, 40, 10)


def asymptote_grid() -> np.ndarray:
    return np.logspace(-4, 1.5, 50)


def binary_grid() -> np.ndarray:
    return np.linspace(0.1, 5, 20)


def limit_grid() -> np.ndarray:
    return np.logspace(-1, 2, 50)


def figure_minimizer() -> Table:
    rows = []
    for g in FIG3_GAMMAS:
        star = solve_minimizer(g, FIG3_P).p_star.probs
        for i, (p, q) in enumerate(zip(FIG3_P, star)):
            rows.append((g, i, p, float(q)))
    return ("gamma", "index", "p", "p_star"), rows


def figure_recursion() -> Table:
    n = len(FIG4_P0)
    header = ("step",) + tuple(f"p{i + 1}" for i in range(n))
    rows = [(0, *FIG4_P0)]
    for k, pk in enumerate(recurse_minimizer(FIG4_GAMMA, FIG4_P0, FIG4_STEPS), start=1):
        rows.append((k, *pk.probs.tolist()))
    return header, rows


def figure_convergence() -> Table:
    rows = []
    for p in CONVERGENCE_PMFS:
        for g in convergence_grid():
            rows.append((len(p), float(g), solve_minimizer(g, p).p_star.p_max))
    return ("support_size", "gamma", "max_p_star"), rows


def figure_asymptote() -> Table:
    rows = []
    for p in ASYMPTOTE_PMFS:
        for g in asymptote_grid():
            rows.append((len(p), float(g), solve_minimizer(g, p).alpha_star, alpha_asymptotic(g, p)))
    return ("support_size", "gamma", "alpha_star", "alpha_asymptotic"), rows


def figure_heatmap(gamma: float = 1.0, resolution: int = 60, jobs: int = 1) -> Table:
    return SCAN_HEADER, simplex_scan(gamma, resolution, jobs=jobs).rows


def figure_binary(p: float = BINARY_P) -> Table:
    rows = []
    for g in binary_grid():
        b = binary_bounds(g, p)
        rows.append((float(g), b.q_gamma, b.p_star_1, b.q_gamma_plus1, b.gap_bound))
    return ("gamma", "q_gamma", "p_star_1", "q_gamma_plus1", "gap_bound"), rows


def figure_limit() -> Table:
    rows = []
    for k, q in enumerate(LIMIT_QS):
        target = limit_target(LIMIT_P, q)
        for g in limit_grid():
            rows.append((k, float(g), focal_entropy_root(g, LIMIT_P, q), target))
    return ("q_index", "gamma", "value", "target"), rows


#: Stable figure names and the figure numbers they answer to.
FIGURES: Dict[str, Tuple[Tuple[int, ...], Callable[..., Table], str]] = {
    "minimizer": ((3,), figure_minimizer, "gamma,index,p,p_star"),
    "recursion": ((4,), figure_recursion, "step,p1,p2,p3,p4 (step 0 is the input)"),
    "convergence": ((5,), figure_convergence, "support_size,gamma,max_p_star"),
    "asymptote": ((6,), figure_asymptote, "support_size,gamma,alpha_star,alpha_asymptotic"),
    "heatmap": ((7,), figure_heatmap, ",".join(SCAN_HEADER)),
    "binary": ((9,), figure_binary, "gamma,q_gamma,p_star_1,q_gamma_plus1,gap_bound"),
    "limit": ((10,), figure_limit, "q_index,gamma,value,target"),
}


def figure_name(number: int) -> str:
    for name, (numbers, _, _) in FIGURES.items():
        if number in numbers:
            return name
    raise KeyError(number)
