"""Shared helpers for models without closed-form higher derivatives."""

import numpy as np

from ..numerics import as_vector, require_symmetric, sym_eigendecomposition

__all__ = ["fd_third_derivative_contract"]


def fd_third_derivative_contract(model, w, S, h=None, mode_tol=1e-12):
    """Contract the third derivative of the loss against a symmetric S.

    Returns the vector with components sum_bc d^3 L / dw_a dw_b dw_c * S_bc,
    formed by central differences of the exact Hessian along the
    eigendirections of S.  Modes with relative weight below mode_tol are
    skipped.
    """
    w = as_vector(w)
    S = require_symmetric(np.asarray(S, dtype=np.float64), "S")
    if S.shape[0] != w.size:
        raise ValueError("S must match the parameter dimension")
    if h is None:
        h = 1e-3 * (1.0 + float(np.linalg.norm(w)))
    vals, vecs = sym_eigendecomposition(S)
    top = float(np.max(np.abs(vals))) if vals.size else 0.0
    out = np.zeros_like(w)
    if top == 0.0:
        return out
    for lam, q in zip(vals, vecs.T):
        if abs(lam) <= mode_tol * top:
            continue
        hp = model.hessian(w + h * q)
        hm = model.hessian(w - h * q)
        out += lam * ((hp - hm) @ q) / (2.0 * h)
    return out
