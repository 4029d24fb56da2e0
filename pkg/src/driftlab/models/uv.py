"""Two-vector bilinear regression model.

The predictor is ``f(x) = n**-0.5 * (u . v) * x`` with scalar inputs and
parameters ``w = (u, v)`` of total dimension ``D = 2n``.  The loss is the
mean squared error

    L(w) = (1/2P) * sum_a (f(x_a) - y_a)**2.

With zero labels the zero-loss set is the cone ``u . v = 0``; on it the
Hessian has rank one and its trace is ``mu2/n * (|u|^2 + |v|^2)``, which
makes the model the simplest testbed where label noise drives a visible
drift of the weight norm along the manifold.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..numerics import as_vector, gaussian_stream, require_symmetric

__all__ = ["UVDataset", "VectorUVModel", "uv_dataset"]

#: Default width; all stock experiments use n = 10 unless configured.
DEFAULT_N = 10


@dataclass(frozen=True)
class UVDataset:
    """Scalar inputs and labels for the bilinear model."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = as_vector(self.x, "x")
        y = as_vector(self.y, "y")
        if x.shape != y.shape:
            raise ContractError("x and y must have matching lengths")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n_samples(self):
        return self.x.size

    @property
    def mu2(self):
        """Second moment of the inputs, (1/P) sum_a x_a**2."""
        return float(np.mean(self.x * self.x))


def uv_dataset(P, stream, zero_labels=True):
    """Draw ``P`` standard normal inputs; labels are zero by default."""
    x = gaussian_stream(stream, P)
    y = np.zeros(P)
    if not zero_labels:
        y = gaussian_stream(stream, P)
    return UVDataset(x=x, y=y)


class VectorUVModel:
    """Bilinear two-vector model over a fixed dataset.

    Parameters
    ----------
    n : int
        Width of each factor vector.
    dataset : UVDataset
        Frozen inputs and labels.
    """

    kind = "vector-uv"

    def __init__(self, n=DEFAULT_N, dataset=None):
        if dataset is None:
            raise ContractError("VectorUVModel requires a dataset")
        if n < 1:
            raise ContractError(f"n must be >= 1, got {n}")
        self.n = int(n)
        self.dataset = dataset
        self.scale = 1.0 / np.sqrt(self.n)
        # dataset moments reused by every derivative formula
        self._mu2 = dataset.mu2
        self._m1y = float(np.mean(dataset.x * dataset.y))
        self._meany2 = float(np.mean(dataset.y * dataset.y))

    # -- basic shape info -------------------------------------------------
    @property
    def dim(self):
        return 2 * self.n

    @property
    def n_samples(self):
        return self.dataset.n_samples

    @property
    def clean_labels(self):
        return self.dataset.y

    @property
    def mu2(self):
        return self._mu2

    #: sigma sigma^T = noise_constant * Hessian on the zero-loss manifold.
    @property
    def noise_constant(self):
        return 1.0 / self.n_samples

    def split(self, w):
        w = as_vector(w)
        if w.size != self.dim:
            raise ContractError(f"expected dim {self.dim}, got {w.size}")
        return w[: self.n], w[self.n :]

    def _swap(self, z):
        # gradient of s = u.v is p = (v, u); this applies the constant
        # second derivative of s, which swaps the two halves
        return np.concatenate([z[self.n :], z[: self.n]])

    def _label_moment(self, labels):
        if labels is None:
            return self._m1y, self._meany2
        labels = as_vector(labels, "labels")
        if labels.size != self.n_samples:
            raise ContractError("labels length mismatch")
        x = self.dataset.x
        return float(np.mean(x * labels)), float(np.mean(labels * labels))

    # -- loss and derivatives ---------------------------------------------
    def loss(self, w, labels=None):
        u, v = self.split(w)
        m1y, meany2 = self._label_moment(labels)
        s = float(u @ v)
        g = self.scale * s
        return 0.5 * (self._mu2 * g * g - 2.0 * g * m1y + meany2)

    def _residual_coeff(self, s, m1y):
        # d loss / d s, shared by gradient and Hessian
        return self._mu2 * s / self.n - self.scale * m1y

    def gradient(self, w, labels=None):
        u, v = self.split(w)
        m1y, _ = self._label_moment(labels)
        c = self._residual_coeff(float(u @ v), m1y)
        return c * self._swap(w)

    def hessian(self, w, labels=None):
        u, v = self.split(w)
        m1y, _ = self._label_moment(labels)
        c = self._residual_coeff(float(u @ v), m1y)
        p = self._swap(w)
        h = (self._mu2 / self.n) * np.outer(p, p)
        idx = np.arange(self.n)
        h[idx, idx + self.n] += c
        h[idx + self.n, idx] += c
        return h

    def trace_hessian(self, w):
        """Exact Hessian trace, mu2/n * (|u|^2 + |v|^2) at every w."""
        w = as_vector(w)
        return (self._mu2 / self.n) * float(w @ w)

    def trace_hessian_gradient(self, w):
        w = as_vector(w)
        return (2.0 * self._mu2 / self.n) * w

    def third_derivative_contract(self, w, S):
        """Contraction T[S]_k = sum_ij d^3 L / dw_k dw_i dw_j * S_ij.

        The loss is quartic in w, so the third derivative is linear in w
        and the contraction has the closed form
        ``mu2/n * (2 E S p + tr(E S) p)`` where E swaps the two halves
        and p = E w.
        """
        w = as_vector(w)
        S = require_symmetric(S, "S")
        if S.shape[0] != self.dim:
            raise ContractError("S dimension mismatch")
        p = self._swap(w)
        tr_es = 2.0 * float(np.sum(np.diagonal(S[: self.n, self.n :])))
        return (self._mu2 / self.n) * (2.0 * self._swap(S @ p) + tr_es * p)

    # -- noise map ---------------------------------------------------------
    def label_sigma(self, w):
        """Noise-injection matrix: gradient(labels + eps*xi) - gradient(labels)
        equals -eps * sigma @ xi exactly."""
        p = self._swap(as_vector(w))
        return np.outer(p, self.scale * self.dataset.x / self.n_samples)

    # -- manifold helpers ---------------------------------------------------
    def manifold_point(self, stream):
        """Random point exactly on the zero-loss cone u . v = 0.

        Only meaningful for zero labels; raises otherwise.
        """
        if np.any(self.dataset.y != 0.0):
            raise ContractError("manifold_point requires zero labels")
        u = gaussian_stream(stream, self.n)
        v = gaussian_stream(stream, self.n)
        v = v - (float(u @ v) / float(u @ u)) * u
        return np.concatenate([u, v])

    def test_error(self, w):
        return None
