"""Focal loss, focal entropy and the distribution that minimizes it."""

from focal_entropy.errors import BracketError, ConvergenceError, DomainError, LabelMismatchError
from focal_entropy.focal_scalar import (
    KAPPA_ZERO,
    PhiPeak,
    focal_d1_inverse,
    focal_loss,
    focal_loss_d1,
    focal_loss_d2,
    kappa,
    lambert_w0,
    lambert_wm1,
    phi,
    phi_peak,
)
from focal_entropy.minimizer import (
    AlphaBounds,
    MinimizerResult,
    alpha_asymptotic,
    alpha_bounds,
    brute_force_minimizer,
    inverse_operator,
    normalization_F,
    recurse_minimizer,
    solve_minimizer,
)
from focal_entropy.pmf import (
    INFINITE,
    Pmf,
    cross_entropy,
    focal_entropy,
    focal_entropy_dgamma,
    h_gamma,
    harmonic_mean,
    is_infinite,
    kl_divergence,
    majorizes,
    rho_and_r,
    shannon_entropy,
    tilt,
)
from focal_entropy.regime_analysis import (
    RegimeReport,
    Tag,
    analyze,
    binary_bounds,
    entropy_consequences,
    limit_diagnostic,
    phi_roots,
    simplex_scan,
    sufficient_conditions,
)

__version__ = "0.1.0"
