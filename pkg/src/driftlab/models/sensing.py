"""Low-rank matrix sensing with a two-factor parameterization.

Measurements are ``y_i = tr(A_i X*)`` for a planted rank-r matrix ``X*``
and i.i.d. standard normal sensing matrices ``A_i``.  The model predicts
``f_i = tr(A_i U V^T)`` with square factors ``U, V`` and minimizes

    L(U, V) = (1/(d P)) * sum_i (f_i - y_i)^2.

On the zero-loss set the Hessian trace has the closed form
``(2/d) * (tr(S2 U U^T) + tr(S1 V V^T))`` with the sample moments
``S1 = (1/P) sum_i A_i A_i^T`` and ``S2 = (1/P) sum_i A_i^T A_i``; the
expression stays exact off the manifold because the predictor is
bilinear, so the residual part of the Hessian is traceless.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from ..numerics import as_vector, gaussian_stream, require_finite, require_symmetric

__all__ = ["SensingDataset", "MatrixSensingModel", "sensing_dataset"]


@dataclass(frozen=True)
class SensingDataset:
    """Sensing matrices, planted target, and measurements."""

    A: np.ndarray  # (P, d, d)
    x_star: np.ndarray  # (d, d), rank r
    y: np.ndarray  # (P,)
    rank: int
    _moments: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        A = np.ascontiguousarray(np.asarray(self.A, dtype=np.float64))
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ContractError(f"A must be (P, d, d), got {A.shape}")
        require_finite(A, "A")
        xs = np.asarray(self.x_star, dtype=np.float64)
        if xs.shape != A.shape[1:]:
            raise ContractError("x_star shape mismatch")
        y = as_vector(self.y, "y")
        if y.size != A.shape[0]:
            raise ContractError("y length mismatch")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "x_star", xs)
        object.__setattr__(self, "y", y)

    @property
    def P(self):
        return self.A.shape[0]

    @property
    def d(self):
        return self.A.shape[1]

    @property
    def a_second_moment(self):
        """Mean squared entry of the sensing matrices."""
        return float(np.mean(self.A * self.A))

    def moment(self, which):
        """Cached sample moments S1 = mean(A A^T), S2 = mean(A^T A)."""
        if which not in self._moments:
            if which == "s1":
                self._moments[which] = np.einsum(
                    "pkl,pml->km", self.A, self.A
                ) / self.P
            elif which == "s2":
                self._moments[which] = np.einsum(
                    "pkl,pkm->lm", self.A, self.A
                ) / self.P
            else:
                raise ContractError(f"unknown moment {which!r}")
        return self._moments[which]


def sensing_dataset(d, r, P, stream):
    """Generate sensing matrices and a planted rank-r target.

    ``x_star`` is the top-r truncation of the SVD of a d x d standard
    normal matrix; measurements are recomputed exactly from it.
    """
    if not (1 <= r <= d):
        raise ContractError(f"need 1 <= r <= d, got r={r}, d={d}")
    A = gaussian_stream(stream, (P, d, d))
    g = gaussian_stream(stream, (d, d))
    w, s, zt = np.linalg.svd(g)
    x_star = (w[:, :r] * s[:r]) @ zt[:r, :]
    y = np.einsum("pkl,lk->p", A, x_star)
    return SensingDataset(A=A, x_star=x_star, y=y, rank=r)


class MatrixSensingModel:
    """Bilinear matrix sensing model over a fixed dataset."""

    kind = "matrix-sensing"

    def __init__(self, dataset):
        self.dataset = dataset
        self.d = dataset.d
        self._norm = 1.0 / (self.d * dataset.P)  # loss prefactor

    @property
    def dim(self):
        return 2 * self.d * self.d

    @property
    def n_samples(self):
        return self.dataset.P

    @property
    def clean_labels(self):
        return self.dataset.y

    @property
    def noise_constant(self):
        return 2.0 / (self.d * self.dataset.P)

    def split(self, w):
        w = as_vector(w)
        if w.size != self.dim:
            raise ContractError(f"expected dim {self.dim}, got {w.size}")
        d = self.d
        return w[: d * d].reshape(d, d), w[d * d :].reshape(d, d)

    def identity_init(self):
        """The stock starting point U = V = I."""
        eye = np.eye(self.d)
        return np.concatenate([eye.ravel(), eye.ravel()])

    def predictions(self, w):
        u, v = self.split(w)
        return np.einsum("pkl,lk->p", self.dataset.A, u @ v.T)

    def _labels(self, labels):
        if labels is None:
            return self.dataset.y
        labels = as_vector(labels, "labels")
        if labels.size != self.n_samples:
            raise ContractError("labels length mismatch")
        return labels

    def loss(self, w, labels=None):
        r = self.predictions(w) - self._labels(labels)
        return self._norm * float(r @ r)

    def gradient(self, w, labels=None):
        u, v = self.split(w)
        r = self.predictions(w) - self._labels(labels)
        g = np.einsum("p,pkl->kl", r, self.dataset.A)
        gu = 2.0 * self._norm * (g.T @ v)
        gv = 2.0 * self._norm * (g @ u)
        return np.concatenate([gu.ravel(), gv.ravel()])

    def _per_sample_grads(self, w):
        """Stacked per-measurement prediction gradients, shape (P, dim)."""
        u, v = self.split(w)
        A = self.dataset.A
        gu = np.einsum("pkl,km->plm", A, v)  # A^T V
        gv = np.einsum("pkl,lm->pkm", A, u)  # A U
        P = self.dataset.P
        return np.concatenate(
            [gu.reshape(P, -1), gv.reshape(P, -1)], axis=1
        )

    def hessian(self, w, labels=None):
        d = self.d
        g = self._per_sample_grads(w)
        h = (2.0 * self._norm) * (g.T @ g)
        # residual part: bilinear coupling between the U and V blocks
        r = self.predictions(w) - self._labels(labels)
        gmat = np.einsum("p,pkl->kl", r, self.dataset.A)
        cross = np.einsum("kl,mc->lmkc", gmat, np.eye(d)).reshape(d * d, d * d)
        h[: d * d, d * d :] += 2.0 * self._norm * cross
        h[d * d :, : d * d] += 2.0 * self._norm * cross.T
        return h

    def trace_hessian(self, w):
        u, v = self.split(w)
        s1 = self.dataset.moment("s1")
        s2 = self.dataset.moment("s2")
        return (2.0 / self.d) * float(
            np.sum(s2 * (u @ u.T)) + np.sum(s1 * (v @ v.T))
        )

    def trace_hessian_gradient(self, w):
        u, v = self.split(w)
        s1 = self.dataset.moment("s1")
        s2 = self.dataset.moment("s2")
        return (4.0 / self.d) * np.concatenate(
            [(s2 @ u).ravel(), (s1 @ v).ravel()]
        )

    def third_derivative_contract(self, w, S):
        """Exact contraction of the constant third derivative with S.

        For a squared bilinear predictor the third derivative reduces to
        ``2 nu * sum_i [2 K_i (S g_i) + tr(K_i S) g_i]`` where ``K_i`` is
        the constant curvature of ``f_i`` and ``g_i`` its gradient.
        """
        S = require_symmetric(S, "S")
        if S.shape[0] != self.dim:
            raise ContractError("S dimension mismatch")
        d = self.d
        A = self.dataset.A
        P = self.dataset.P
        g = self._per_sample_grads(w)  # (P, D)
        z = g @ S  # rows are (S g_i)^T
        zu = z[:, : d * d].reshape(P, d, d)
        zv = z[:, d * d :].reshape(P, d, d)
        ku = np.einsum("pkl,pkm->plm", A, zv)  # A_i^T ZV_i
        kv = np.einsum("pkl,plm->pkm", A, zu)  # A_i ZU_i
        ksg = np.concatenate([ku.reshape(P, -1), kv.reshape(P, -1)], axis=1)
        s4 = S[: d * d, d * d :].reshape(d, d, d, d)
        t2 = np.einsum("lmkm->lk", s4)
        tr_ks = 2.0 * np.einsum("pkl,lk->p", A, t2)
        out = 2.0 * self._norm * (2.0 * ksg.sum(axis=0) + tr_ks @ g)
        return out

    def label_sigma(self, w):
        """D x P matrix with gradient(y + eps*xi) - gradient(y) = -eps sigma xi."""
        return (2.0 * self._norm) * self._per_sample_grads(w).T

    def manifold_point(self, stream):
        """Random factors with U V^T exactly equal to the planted target."""
        d, r = self.d, self.dataset.rank
        w, s, zt = np.linalg.svd(self.dataset.x_star)
        a = w[:, :r] * np.sqrt(s[:r])
        b = zt[:r, :].T * np.sqrt(s[:r])
        q, _ = np.linalg.qr(gaussian_stream(stream, (r, r)))
        u = np.concatenate([a @ q, gaussian_stream(stream, (d, d - r))], axis=1)
        v = np.concatenate([b @ q, np.zeros((d, d - r))], axis=1)
        return np.concatenate([u.ravel(), v.ravel()])

    def test_error(self, w):
        """Expected squared error on a fresh standard normal measurement,
        ||U V^T - X*||_F^2 / d."""
        u, v = self.split(w)
        diff = u @ v.T - self.dataset.x_star
        return float(np.sum(diff * diff)) / self.d
