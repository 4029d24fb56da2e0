"""Plain linear least squares, the constant-curvature testbed.

Loss (1/2P) ||X w - y||^2 has Hessian X^T X / P independent of w and a
vanishing third derivative, which makes closed-form decay rates exact.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..numerics import as_vector, gaussian_stream, require_finite

__all__ = ["LinearDataset", "linear_dataset", "LinearRegressionModel"]


@dataclass(frozen=True)
class LinearDataset:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.size:
            raise ContractError("expected x (P, d) and y (P,)")
        require_finite(x, "x")
        require_finite(y, "y")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n_samples(self):
        return self.x.shape[0]


def linear_dataset(P, d, stream, w_star=None, noise=0.0):
    """Gaussian design with labels X w_star + noise (w_star 0 by default)."""
    x = gaussian_stream(stream, (P, d))
    y = np.zeros(P)
    if w_star is not None:
        y = x @ as_vector(w_star)
    if noise:
        y = y + noise * gaussian_stream(stream, P)
    return LinearDataset(x=x, y=y)


class LinearRegressionModel:
    kind = "linear-regression"

    def __init__(self, dataset):
        self.dataset = dataset
        self._hessian = dataset.x.T @ dataset.x / dataset.n_samples

    @property
    def dim(self):
        return self.dataset.x.shape[1]

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
        return (as_vector(w),)

    def _labels(self, labels):
        if labels is None:
            return self.dataset.y
        labels = np.asarray(labels, dtype=np.float64)
        if labels.shape != self.dataset.y.shape:
            raise ContractError("labels shape mismatch")
        return labels

    def predictions(self, w):
        return self.dataset.x @ as_vector(w)

    def loss(self, w, labels=None):
        r = self.predictions(w) - self._labels(labels)
        return 0.5 * float(r @ r) / self.n_samples

    def gradient(self, w, labels=None):
        r = self.predictions(w) - self._labels(labels)
        return self.dataset.x.T @ r / self.n_samples

    def hessian(self, w=None, labels=None):
        return self._hessian.copy()

    def trace_hessian(self, w=None):
        return float(np.trace(self._hessian))

    def trace_hessian_gradient(self, w):
        return np.zeros(self.dim)

    def third_derivative_contract(self, w, S):
        return np.zeros(self.dim)

    def label_sigma(self, w=None):
        return self.dataset.x.T / self.n_samples

    def manifold_point(self, stream):
        raise ContractError("linear regression has no zero-loss manifold chart")

    def test_error(self, w):
        return None
