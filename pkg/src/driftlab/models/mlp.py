"""One-hidden-layer perceptron with selectable activation.

The predictor is ``f_j(x) = n**-0.5 * sum_i U_ji * act(V_i . x)`` with
parameters ``w = (vec U, vec V)`` and mean squared error loss
``(1/2P) * sum_aj (f_j(x_a) - y_aj)^2``.

With the linear activation and scalar input/output the model reduces to
the two-vector bilinear model; that case delegates to ``VectorUVModel``
so the arithmetic is literally identical.  ReLU derivatives use the
convention act'(0) = 0 and act'' = 0 away from the kink.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..numerics import as_vector, require_finite
from .uv import UVDataset, VectorUVModel

__all__ = ["MLPDataset", "MLPModel"]

_ACTIVATIONS = ("linear", "tanh", "relu")


@dataclass(frozen=True)
class MLPDataset:
    """Inputs (P, d_in) and targets (P, d_out)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if x.shape[0] != y.shape[0]:
            raise ContractError("x and y must have matching sample counts")
        require_finite(x, "x")
        require_finite(y, "y")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n_samples(self):
        return self.x.shape[0]


def _act(tag, z):
    if tag == "linear":
        return z
    if tag == "tanh":
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _act_d1(tag, z):
    if tag == "linear":
        return np.ones_like(z)
    if tag == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return (z > 0.0).astype(np.float64)


def _act_d2(tag, z):
    if tag == "linear" or tag == "relu":
        return np.zeros_like(z)
    t = np.tanh(z)
    return -2.0 * t * (1.0 - t * t)


class MLPModel:
    """One-hidden-layer MSE regression model over a fixed dataset.

    Parameters
    ----------
    widths : tuple (d_in, n, d_out)
    activation : str, one of 'linear', 'tanh', 'relu'
    dataset : MLPDataset
    """

    kind = "mlp"

    def __init__(self, widths, activation, dataset):
        d_in, n, d_out = (int(v) for v in widths)
        if min(d_in, n, d_out) < 1:
            raise ContractError(f"widths must be positive, got {widths}")
        if activation not in _ACTIVATIONS:
            raise ContractError(
                f"activation must be one of {_ACTIVATIONS}, got {activation!r}"
            )
        if dataset.x.shape[1] != d_in or dataset.y.shape[1] != d_out:
            raise ContractError("dataset shapes do not match widths")
        self.widths = (d_in, n, d_out)
        self.activation = activation
        self.dataset = dataset
        self.scale = 1.0 / np.sqrt(n)
        self._uv = None
        if activation == "linear" and d_in == 1 and d_out == 1:
            uv_ds = UVDataset(x=dataset.x[:, 0].copy(), y=dataset.y[:, 0].copy())
            self._uv = VectorUVModel(n=n, dataset=uv_ds)

    @property
    def dim(self):
        d_in, n, d_out = self.widths
        return d_out * n + n * d_in

    @property
    def n_samples(self):
        return self.dataset.n_samples

    @property
    def clean_labels(self):
        return self.dataset.y

    @property
    def noise_constant(self):
        return 1.0 / self.n_samples

    def split(self, w):
        w = as_vector(w)
        if w.size != self.dim:
            raise ContractError(f"expected dim {self.dim}, got {w.size}")
        d_in, n, d_out = self.widths
        return w[: d_out * n].reshape(d_out, n), w[d_out * n :].reshape(n, d_in)

    def _labels(self, labels):
        if labels is None:
            return self.dataset.y
        labels = np.asarray(labels, dtype=np.float64)
        if labels.ndim == 1:
            labels = labels[:, None]
        if labels.shape != self.dataset.y.shape:
            raise ContractError("labels shape mismatch")
        return labels

    def predictions_on(self, w, x):
        """Model outputs on arbitrary inputs, shape (len(x), d_out)."""
        u, v = self.split(w)
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        h = _act(self.activation, x @ v.T)
        return self.scale * (h @ u.T)

    def predictions(self, w):
        return self.predictions_on(w, self.dataset.x)

    def loss(self, w, labels=None):
        if self._uv is not None:
            return self._uv.loss(w, None if labels is None else self._labels(labels)[:, 0])
        r = self.predictions(w) - self._labels(labels)
        return 0.5 * float(np.sum(r * r)) / self.n_samples

    def gradient(self, w, labels=None):
        if self._uv is not None:
            return self._uv.gradient(w, None if labels is None else self._labels(labels)[:, 0])
        u, v = self.split(w)
        x = self.dataset.x
        z = x @ v.T
        h = _act(self.activation, z)
        dz = _act_d1(self.activation, z)
        r = self.scale * (h @ u.T) - self._labels(labels)
        P = self.n_samples
        gu = (self.scale / P) * (r.T @ h)
        wmat = (r @ u) * dz
        gv = (self.scale / P) * (wmat.T @ x)
        return np.concatenate([gu.ravel(), gv.ravel()])

    def hessian(self, w, labels=None):
        if self._uv is not None:
            return self._uv.hessian(w, None if labels is None else self._labels(labels)[:, 0])
        d_in, n, d_out = self.widths
        u, v = self.split(w)
        x = self.dataset.x
        z = x @ v.T
        h1 = _act(self.activation, z)
        dz = _act_d1(self.activation, z)
        ddz = _act_d2(self.activation, z)
        r = self.scale * (h1 @ u.T) - self._labels(labels)
        P = self.n_samples
        s2 = self.scale * self.scale

        nu = d_out * n
        big = np.zeros((self.dim, self.dim))

        # Gauss-Newton UU: block diagonal over the output index
        uu = (s2 / P) * (h1.T @ h1)
        for k in range(d_out):
            big[k * n : (k + 1) * n, k * n : (k + 1) * n] = uu

        # Gauss-Newton UV plus the residual coupling
        dx = dz[:, :, None] * x[:, None, :]  # (P, n, d_in)
        m3 = np.einsum("am,aic->mic", h1, dx)
        uv = (s2 / P) * np.einsum("ki,mic->kmic", u, m3)
        w2 = np.einsum("ak,aic->kic", r, dx)
        for k in range(d_out):
            for m in range(n):
                uv[k, m, m, :] += (self.scale / P) * w2[k, m, :]
        big[:nu, nu:] = uv.reshape(nu, n * d_in)
        big[nu:, :nu] = big[:nu, nu:].T

        # VV: Gauss-Newton part plus residual curvature on the diagonal
        t4 = np.einsum("aic,aje->icje", dx, dx)
        vv = (s2 / P) * np.einsum("ij,icje->icje", u.T @ u, t4)
        q = (r @ u) * ddz  # (P, n)
        for i in range(n):
            vv[i, :, i, :] += (self.scale / P) * (x * q[:, i : i + 1]).T @ x
        big[nu:, nu:] = vv.reshape(n * d_in, n * d_in)
        return 0.5 * (big + big.T)

    def trace_hessian(self, w, labels=None):
        if self._uv is not None:
            return self._uv.trace_hessian(w)
        u, v = self.split(w)
        x = self.dataset.x
        z = x @ v.T
        h1 = _act(self.activation, z)
        dz = _act_d1(self.activation, z)
        ddz = _act_d2(self.activation, z)
        r = self.scale * (h1 @ u.T) - self._labels(labels)
        P = self.n_samples
        d_out = self.widths[2]
        xsq = np.sum(x * x, axis=1)
        gn = d_out * np.sum(h1 * h1) + np.sum((dz * dz) @ (u * u).T * xsq[:, None])
        res = np.sum((r @ u) * ddz * xsq[:, None])
        return float(self.scale * self.scale * gn + self.scale * res) / P

    def trace_hessian_gradient(self, w, h=None):
        """Finite-difference gradient of the exact Hessian trace."""
        if self._uv is not None:
            return self._uv.trace_hessian_gradient(w)
        w = as_vector(w)
        if h is None:
            h = 1e-5 * (1.0 + float(np.linalg.norm(w)))
        g = np.empty_like(w)
        e = np.zeros_like(w)
        for i in range(w.size):
            e[i] = h
            g[i] = (self.trace_hessian(w + e) - self.trace_hessian(w - e)) / (2 * h)
            e[i] = 0.0
        return g

    def third_derivative_contract(self, w, S):
        if self._uv is not None:
            return self._uv.third_derivative_contract(w, S)
        from .common import fd_third_derivative_contract

        return fd_third_derivative_contract(self, w, S)

    def label_sigma(self, w):
        """D x (P*d_out) noise map; columns follow labels.ravel() order."""
        d_in, n, d_out = self.widths
        u, v = self.split(w)
        x = self.dataset.x
        z = x @ v.T
        h1 = _act(self.activation, z)
        dz = _act_d1(self.activation, z)
        P = self.n_samples
        sig = np.zeros((self.dim, P * d_out))
        dx = dz[:, :, None] * x[:, None, :]
        nu = d_out * n
        for a in range(P):
            for j in range(d_out):
                col = np.zeros(self.dim)
                col[j * n : (j + 1) * n] = self.scale * h1[a]
                col[nu:] = (self.scale * (u[j][:, None] * dx[a])).ravel()
                sig[:, a * d_out + j] = col / P
        return sig

    def test_error(self, w):
        return None
