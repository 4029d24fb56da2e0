"""Slow drift along the zero-loss manifold under label noise.

With momentum scaled as beta = 1 - C eta**gamma, training splits into a
fast equilibration toward the manifold of interpolating points and a
slow drift along it.  In step-time units the limiting motion of the
manifold point Y is

    dY = eps (eta**(1-gamma)/C + eta) P_L sigma dW
         - eps^2 (eta**(2-2*gamma)/C^2) [ (1/2) Hpinv T[Sigma_LL]
                                          + P_L T[sym(Hpinv Sigma_TL)]
                                          + (1/2) P_L T[Linv Sigma_TT] ] dt

where T is the third-derivative contraction, P_T / P_L project onto
curved / flat directions of the Hessian, Sigma = sigma sigma^T is the
unscaled noise covariance (eps^2 is applied here), and Linv inverts the
damped Lyapunov operator

    L S = {H, S} + (eta**(1-2*gamma) / (2 C^2)) [[S, H], H]

on matrices supported by the curved directions.  For label noise the
covariance is proportional to the Hessian on the manifold and the drift
collapses to -(eps^2 eta**(2-2*gamma) / (4 C^2)) P_L grad Tr(c H).

The first drift term is transverse (it moves the base point of the
chart, not the manifold coordinate); the drift is tangent exactly when
Sigma_LL vanishes, which holds for label noise.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError, IntegrationError, ModelMismatch, ProjectionError
from .numerics import (
    DEFAULT_RANK_TOL,
    as_vector,
    pseudo_inverse,
    require_symmetric,
    sym_eigendecomposition,
)
from .optimizer import project_to_manifold

__all__ = [
    "ManifoldChart",
    "tangent_projectors",
    "ltilde_apply",
    "ltilde_inverse",
    "DriftBreakdown",
    "limiting_drift",
    "label_noise_drift",
    "equilibration_rate",
    "uv_drift_rate",
    "alpha_exponent",
    "optimal_scaling_constant",
    "matrix_sensing_scaling_constant",
    "DriftPath",
    "integrate_drift",
]

_MEMBERSHIP_TOL = 1e-9


def tangent_projectors(hessian, rank_tol=DEFAULT_RANK_TOL):
    """(P_L, P_T): projectors onto flat and curved directions.

    Warns when an eigenvalue sits near the rank threshold, where the
    flat/curved split is numerically ambiguous.
    """
    h = require_symmetric(np.asarray(hessian, dtype=np.float64), "hessian")
    vals, vecs = sym_eigendecomposition(h)
    top = float(np.max(np.abs(vals))) if vals.size else 0.0
    if top == 0.0:
        d = h.shape[0]
        return np.eye(d), np.zeros((d, d))
    thr = rank_tol * top
    if np.any((np.abs(vals) > 0.1 * thr) & (np.abs(vals) < 10.0 * thr)):
        warnings.warn(
            "Hessian eigenvalue within a decade of the rank threshold; "
            "tangent split may be ambiguous",
            RuntimeWarning,
            stacklevel=2,
        )
    curved = vecs[:, np.abs(vals) > thr]
    p_t = curved @ curved.T
    p_l = np.eye(h.shape[0]) - p_t
    return p_l, p_t


@dataclass
class ManifoldChart:
    """Spectral data of the Hessian at a manifold point."""

    point: np.ndarray
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray
    rank: int
    p_tangent: np.ndarray
    p_transverse: np.ndarray
    hessian: np.ndarray
    hessian_pinv: np.ndarray

    @classmethod
    def from_model(cls, model, w, rank_tol=DEFAULT_RANK_TOL):
        w = as_vector(w)
        h = require_symmetric(model.hessian(w), "hessian", tol=1e-10)
        return cls.from_hessian(h, point=w, rank_tol=rank_tol)

    @classmethod
    def from_hessian(cls, hessian, point=None, rank_tol=DEFAULT_RANK_TOL):
        h = require_symmetric(np.asarray(hessian, dtype=np.float64), "hessian")
        if point is None:
            point = np.zeros(h.shape[0])
        vals, vecs = sym_eigendecomposition(h)
        top = float(np.max(np.abs(vals)))
        if top <= 0.0:
            raise DomainError("Hessian vanishes; no chart available")
        thr = rank_tol * top
        keep = vals > thr
        if np.any(vals < -thr):
            raise DomainError("Hessian has a negative direction; not a minimum")
        rank = int(np.count_nonzero(keep))
        curved = vecs[:, keep]
        p_t = curved @ curved.T
        return cls(
            point=as_vector(point),
            eigenvalues=vals,
            eigenvectors=vecs,
            rank=rank,
            p_tangent=np.eye(h.shape[0]) - p_t,
            p_transverse=p_t,
            hessian=h,
            hessian_pinv=pseudo_inverse(h, rank_tol=rank_tol),
        )


def _commutator_weight(eta, scaling_constant, gamma):
    if eta <= 0.0 or scaling_constant <= 0.0:
        raise ContractError("eta and scaling_constant must be positive")
    return float(eta) ** (1.0 - 2.0 * gamma) / (2.0 * scaling_constant**2)


def _check_membership(name, s, p_t):
    scale = max(float(np.abs(s).max()), 1e-300)
    res = max(
        float(np.abs(p_t @ s - s).max()),
        float(np.abs(s @ p_t - s).max()),
    )
    if res > _MEMBERSHIP_TOL * scale:
        raise DomainError(
            f"{name} is not supported on the curved directions "
            f"(relative leakage {res / scale:.3e})"
        )


def ltilde_apply(chart, s, eta, scaling_constant, gamma):
    """Damped Lyapunov operator {H,S} + w [[S,H],H] on curved support."""
    s = require_symmetric(np.asarray(s, dtype=np.float64), "s")
    _check_membership("s", s, chart.p_transverse)
    h = chart.hessian
    omega = _commutator_weight(eta, scaling_constant, gamma)
    anti = h @ s + s @ h
    comm = s @ h - h @ s
    return anti + omega * (comm @ h - h @ comm)


def ltilde_inverse(chart, m, eta, scaling_constant, gamma):
    """Invert ltilde_apply on matrices supported by curved directions."""
    m = require_symmetric(np.asarray(m, dtype=np.float64), "m")
    _check_membership("m", m, chart.p_transverse)
    omega = _commutator_weight(eta, scaling_constant, gamma)
    r = chart.rank
    q = chart.eigenvectors[:, :r]
    lam = chart.eigenvalues[:r]
    m_eig = q.T @ m @ q
    denom = lam[:, None] + lam[None, :] + omega * (lam[:, None] - lam[None, :]) ** 2
    s_eig = m_eig / denom
    return q @ s_eig @ q.T


@dataclass
class DriftBreakdown:
    """Limiting SDE coefficients at one manifold point.

    drift is the sum of the three terms; diffusion_scale multiplies
    P_L sigma dW.  term_tangent_noise is the only transverse piece.
    """

    drift: np.ndarray
    term_tangent_noise: np.ndarray  # from Sigma_LL through the curvature
    term_cross_noise: np.ndarray  # from Sigma_TL
    term_transverse_noise: np.ndarray  # from Sigma_TT through Linv
    diffusion_scale: float
    chart: ManifoldChart


def limiting_drift(model, w, noise_covariance, eta, scaling_constant, gamma, epsilon, chart=None):
    """Full drift of the limiting equation for an arbitrary covariance.

    noise_covariance is the unscaled sigma sigma^T; epsilon**2 is
    applied internally.
    """
    if chart is None:
        chart = ManifoldChart.from_model(model, w)
    w = chart.point
    try:
        sig = require_symmetric(np.asarray(noise_covariance, dtype=np.float64), "noise_covariance")
    except ContractError as err:
        raise DomainError(str(err)) from err
    if sig.shape[0] != w.size:
        raise ContractError("noise covariance does not match the parameter dimension")
    sig_eigs = np.linalg.eigvalsh(sig)
    if sig_eigs.size and float(sig_eigs[0]) < -1e-10 * max(float(sig_eigs[-1]), 1e-300):
        raise DomainError("noise covariance must be positive semidefinite")
    p_l, p_t = chart.p_tangent, chart.p_transverse
    # the projected blocks are symmetric in exact arithmetic; enforce it
    # so downstream symmetry checks see clean zeros when a block vanishes
    s_ll = p_l @ sig @ p_l
    s_ll = 0.5 * (s_ll + s_ll.T)
    s_tl = p_t @ sig @ p_l
    s_tt = p_t @ sig @ p_t
    s_tt = 0.5 * (s_tt + s_tt.T)
    c2 = float(eta) ** (2.0 - 2.0 * gamma) / scaling_constant**2
    amp = epsilon**2 * c2
    # a block that vanishes relative to the covariance is roundoff, not
    # signal; short-circuit it so downstream domain checks see true zeros
    tiny = 1e-14 * max(float(np.abs(sig).max()), 1e-300)
    zero = np.zeros_like(w)

    if float(np.abs(s_ll).max()) <= tiny:
        term1 = zero
    else:
        term1 = -0.5 * amp * (chart.hessian_pinv @ model.third_derivative_contract(w, s_ll))
    if float(np.abs(s_tl).max()) <= tiny:
        term2 = zero
    else:
        cross = chart.hessian_pinv @ s_tl
        term2 = -amp * (p_l @ model.third_derivative_contract(w, 0.5 * (cross + cross.T)))
    if float(np.abs(s_tt).max()) <= tiny:
        term3 = zero
    else:
        term3 = -0.5 * amp * (
            p_l
            @ model.third_derivative_contract(
                w, ltilde_inverse(chart, s_tt, eta, scaling_constant, gamma)
            )
        )
    diffusion_scale = epsilon * (float(eta) ** (1.0 - gamma) / scaling_constant + float(eta))
    return DriftBreakdown(
        drift=term1 + term2 + term3,
        term_tangent_noise=term1,
        term_cross_noise=term2,
        term_transverse_noise=term3,
        diffusion_scale=diffusion_scale,
        chart=chart,
    )


def label_noise_drift(
    model, w, eta, scaling_constant, gamma, epsilon, chart=None, noise_constant=None, check=True
):
    """Drift for label noise: -(eps^2 eta^(2-2g) / 4 C^2) P_L grad Tr(c H).

    c defaults to the model's own noise constant.  check verifies
    sigma sigma^T = c H at w, the condition the closed form rests on;
    disable for large models where forming the covariance is too
    expensive.
    """
    if chart is None:
        chart = ManifoldChart.from_model(model, w)
    w = chart.point
    c = model.noise_constant if noise_constant is None else float(noise_constant)
    if check:
        sig = model.label_sigma(w)
        cov = sig @ sig.T
        ref = c * chart.hessian
        scale = max(float(np.abs(ref).max()), 1e-300)
        if float(np.abs(cov - ref).max()) > 1e-6 * scale:
            raise ModelMismatch(
                "label covariance is not proportional to the Hessian here; "
                "the closed-form drift does not apply"
            )
    amp = epsilon**2 * float(eta) ** (2.0 - 2.0 * gamma) / (4.0 * scaling_constant**2)
    grad_trace = c * model.trace_hessian_gradient(w)
    return -amp * (chart.p_tangent @ grad_trace)


def equilibration_rate(eta, scaling_constant, gamma):
    """Fast-phase relaxation rate (C/2) eta**gamma, in steps^-1."""
    return 0.5 * scaling_constant * float(eta) ** gamma


def uv_drift_rate(eta, gamma, scaling_constant, epsilon, mu2, n_dim, n_samples):
    """Norm decay rate of the bilinear model under label noise.

    |w(t)|^2 = exp(-2 t / tau) |w(0)|^2 with 1/tau the value returned
    here: eta**(2-2*gamma) eps^2 mu2 / (2 n P C^2), in steps^-1.
    """
    return (
        float(eta) ** (2.0 - 2.0 * gamma)
        * epsilon**2
        * mu2
        / (2.0 * n_dim * n_samples * scaling_constant**2)
    )


def alpha_exponent(gamma):
    """Power of 1/eta in the measured decay time: max(2(1-gamma), gamma)."""
    return max(2.0 * (1.0 - gamma), float(gamma))


def optimal_scaling_constant(epsilon, mu2, n_dim, n_samples):
    """C at which equilibration and drift collide: (eps^2 mu2 / (n P))^(1/3)."""
    return float(epsilon**2 * mu2 / (n_dim * n_samples)) ** (1.0 / 3.0)


def matrix_sensing_scaling_constant(epsilon, a_second_moment, d, n_samples):
    """Collision constant for matrix sensing: (2 eps^2 <A^2> / (d P))^(1/3)."""
    return float(2.0 * epsilon**2 * a_second_moment / (d * n_samples)) ** (1.0 / 3.0)


@dataclass
class DriftPath:
    t: np.ndarray  # in step-time units
    weight_norm_sq: np.ndarray
    final_w: np.ndarray
    zero_drift: bool


def integrate_drift(
    model,
    w0,
    eta,
    scaling_constant,
    gamma,
    epsilon,
    total_steps,
    n_nodes=100,
    stream=None,
    with_diffusion=False,
    max_move=0.01,
    projection_tol=1e-18,
):
    """Euler(-Maruyama) integration of the limiting label-noise drift.

    Time is measured in optimizer steps.  After every node the point is
    retracted to the manifold; a node is subdivided whenever the drift
    move would exceed max_move of the current norm.  Returns a flat
    path with zero_drift=True when the drift vanishes at the start.
    """
    if total_steps <= 0 or n_nodes < 1:
        raise ContractError("need positive total_steps and n_nodes")
    w = project_to_manifold(model, as_vector(w0), loss_tol=projection_tol)
    chart = ManifoldChart.from_model(model, w)
    drift0 = label_noise_drift(model, w, eta, scaling_constant, gamma, epsilon, chart=chart)
    ts = [0.0]
    norms = [float(w @ w)]
    if float(np.linalg.norm(drift0)) == 0.0 and not with_diffusion:
        return DriftPath(
            t=np.array([0.0, float(total_steps)]),
            weight_norm_sq=np.array([norms[0], norms[0]]),
            final_w=w,
            zero_drift=True,
        )
    gen = None
    if with_diffusion:
        if stream is None:
            raise ContractError("diffusion needs a random stream")
        gen = stream.generator() if hasattr(stream, "generator") else stream
    dt_node = float(total_steps) / n_nodes
    t = 0.0
    for _ in range(n_nodes):
        remaining = dt_node
        while remaining > 0.0:
            chart = ManifoldChart.from_model(model, w)
            drift = label_noise_drift(
                model, w, eta, scaling_constant, gamma, epsilon, chart=chart, check=False
            )
            speed = float(np.linalg.norm(drift))
            norm = float(np.linalg.norm(w))
            dt = remaining
            if speed * dt > max_move * norm:
                dt = max_move * norm / speed
            w = w + dt * drift
            if with_diffusion:
                sig = model.label_sigma(w)
                bump = chart.p_tangent @ (sig @ gen.standard_normal(sig.shape[1]))
                scale = epsilon * (float(eta) ** (1.0 - gamma) / scaling_constant + float(eta))
                w = w + np.sqrt(dt) * scale * bump
            remaining -= dt
        try:
            w = project_to_manifold(model, w, loss_tol=projection_tol)
        except ProjectionError as err:
            partial = DriftPath(
                t=np.asarray(ts),
                weight_norm_sq=np.asarray(norms),
                final_w=w,
                zero_drift=False,
            )
            raise IntegrationError(
                f"retraction to the manifold failed at t={t + dt_node:g}", partial=partial
            ) from err
        t += dt_node
        ts.append(t)
        norms.append(float(w @ w))
    return DriftPath(
        t=np.asarray(ts),
        weight_norm_sq=np.asarray(norms),
        final_w=w,
        zero_drift=False,
    )
