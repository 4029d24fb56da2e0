"""Linearized heavy-ball dynamics around a quadratic minimum.

On an eigenmode of the Hessian with eigenvalue lam the update acts as
the 2x2 map

    J_lam = [[beta,     -lam    ],
             [eta beta, 1 - eta lam]]

on (momentum, weight).  Its eigenvalues are

    kappa_pm = (1 + beta - eta lam +- sqrt(disc)) / 2,
    disc     = (1 + beta - eta lam)^2 - 4 beta,

with kappa_+ kappa_- = beta and kappa_+ + kappa_- = 1 + beta - eta lam.
The momentum coordinate of the eigenvector scaled to unit weight
coordinate is mu_pm = (kappa_pm - 1 + eta lam) / (eta beta).
"""

import cmath
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError, DomainError, StabilityError
from .numerics import require_symmetric

__all__ = [
    "SpectralMode",
    "DecayRates",
    "mode_rates",
    "mode_vectors",
    "classify_mode",
    "jacobian",
    "decay_rates",
]

MARGINAL_TOL = 1e-12


def _check_args(eta, beta, lam=None):
    if not (np.isfinite(eta) and eta > 0.0):
        raise ContractError(f"eta must be positive, got {eta}")
    if not (0.0 <= beta < 1.0):
        raise ContractError(f"beta must lie in [0, 1), got {beta}")
    if lam is not None and not np.isfinite(lam):
        raise ContractError(f"eigenvalue must be finite, got {lam}")


def mode_rates(eta, beta, lam):
    """Both step multipliers (kappa_plus, kappa_minus) of one mode."""
    _check_args(eta, beta, lam)
    if lam == 0.0:
        # exact neutral pair, bypassing sqrt roundoff
        return complex(1.0), complex(beta)
    if beta == 0.0:
        return complex(1.0 - eta * lam), complex(0.0)
    half_trace = 0.5 * (1.0 + beta - eta * lam)
    disc = (1.0 + beta - eta * lam) ** 2 - 4.0 * beta
    root = 0.5 * cmath.sqrt(complex(disc))
    return half_trace + root, half_trace - root


def mode_vectors(eta, beta, lam):
    """Momentum coordinates (mu_plus, mu_minus) of the two eigenvectors,
    normalized to weight coordinate 1."""
    _check_args(eta, beta, lam)
    if beta == 0.0:
        raise DomainError("eigenvectors degenerate at beta = 0; momentum is slaved")
    kp, km = mode_rates(eta, beta, lam)
    return (kp - 1.0 + eta * lam) / (eta * beta), (km - 1.0 + eta * lam) / (eta * beta)


@dataclass(frozen=True)
class SpectralMode:
    eigenvalue: float
    kappa_plus: complex
    kappa_minus: complex
    mu_plus: Optional[complex]
    mu_minus: Optional[complex]
    regime: str  # "real" | "complex" | "marginal" | "neutral" | "unstable"


def classify_mode(eta, beta, lam, marginal_tol=MARGINAL_TOL):
    """Full per-mode report; the regime follows the discriminant sign."""
    _check_args(eta, beta, lam)
    kp, km = mode_rates(eta, beta, lam)
    mus = (None, None)
    if beta > 0.0 and lam != 0.0:
        mus = mode_vectors(eta, beta, lam)
    if lam == 0.0:
        regime = "neutral"
    elif lam < 0.0 or eta * lam >= 2.0 * (1.0 + beta):
        regime = "unstable"
    else:
        sqb = np.sqrt(beta)
        gap = min(abs(eta * lam - (1.0 - sqb) ** 2), abs(eta * lam - (1.0 + sqb) ** 2))
        disc = (1.0 + beta - eta * lam) ** 2 - 4.0 * beta
        if gap < marginal_tol:
            regime = "marginal"
        elif disc < 0.0:
            regime = "complex"
        else:
            regime = "real"
    return SpectralMode(
        eigenvalue=float(lam),
        kappa_plus=kp,
        kappa_minus=km,
        mu_plus=mus[0],
        mu_minus=mus[1],
        regime=regime,
    )


def jacobian(eta, beta, hessian):
    """The 2D x 2D one-step map on (momentum, weight) deviations."""
    _check_args(eta, beta)
    h = require_symmetric(np.asarray(hessian, dtype=np.float64), "hessian")
    d = h.shape[0]
    eye = np.eye(d)
    top = np.hstack([beta * eye, -h])
    bot = np.hstack([eta * beta * eye, eye - eta * h])
    return np.vstack([top, bot])


@dataclass(frozen=True)
class DecayRates:
    rho1: float  # slowest stable contraction, governs late-time decay
    rho2: float  # fastest stable contraction
    n_neutral: int


def decay_rates(eta, beta, hessian_or_eigs, rank_tol=1e-12):
    """Extreme stable multiplier magnitudes over the positive modes.

    Eigenvalues below rank_tol * max(eigenvalue) count as neutral and
    are skipped; any unstable mode raises StabilityError.
    """
    arr = np.asarray(hessian_or_eigs, dtype=np.float64)
    if arr.ndim == 2:
        arr = np.linalg.eigvalsh(require_symmetric(arr, "hessian"))
    _check_args(eta, beta)
    top = float(np.max(np.abs(arr))) if arr.size else 0.0
    if top == 0.0:
        raise ContractError("no nonzero eigenvalues to analyze")
    mags = []
    offending = []
    n_neutral = 0
    for lam in arr:
        if abs(lam) <= rank_tol * top:
            n_neutral += 1
            continue
        mode = classify_mode(eta, beta, lam)
        if mode.regime == "unstable":
            offending.append(float(lam))
            continue
        mags.extend([abs(mode.kappa_plus), abs(mode.kappa_minus)])
    if offending:
        raise StabilityError(
            f"{len(offending)} unstable modes at eta={eta}, beta={beta}",
            offending=tuple(offending),
        )
    stable = [m for m in mags if m < 1.0]
    if not stable:
        raise ContractError("no strictly stable modes found")
    return DecayRates(rho1=max(stable), rho2=min(stable), n_neutral=n_neutral)
