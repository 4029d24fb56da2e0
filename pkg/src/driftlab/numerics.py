"""Shared numerical primitives.

Conventions used throughout the package:

* parameter vectors are 1-D float64 arrays,
* symmetric matrices are square float64 arrays with
  ``max|A - A.T| <= 1e-12 * max|A|``,
* eigenvalues are reported in descending order,
* random streams are numpy ``Generator`` objects built from a documented
  (algorithm, seed, stream_index) triple so every consumer is replayable.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

__all__ = [
    "as_vector",
    "require_finite",
    "require_symmetric",
    "finite_diff_gradient",
    "sym_eigendecomposition",
    "pseudo_inverse",
    "RandomStream",
    "gaussian_stream",
]

#: Relative threshold separating "zero" from "nonzero" eigenvalues.
DEFAULT_RANK_TOL = 1e-8

_SYM_TOL = 1e-12


def as_vector(w, name="w"):
    """Validate and return ``w`` as a finite 1-D float64 array."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise ContractError(f"{name} must be 1-D, got shape {w.shape}")
    require_finite(w, name)
    return w


def require_finite(a, name="array"):
    """Raise ContractError unless every entry of ``a`` is finite."""
    if not np.all(np.isfinite(a)):
        raise ContractError(f"{name} contains non-finite entries")
    return a


def require_symmetric(a, name="matrix", tol=_SYM_TOL):
    """Validate ``a`` as a finite symmetric square matrix.

    The asymmetry ``max|A - A.T|`` must not exceed ``tol * max|A|``; the
    returned matrix is exactly symmetrized so downstream eigensolvers see
    a clean input.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"{name} must be square, got shape {a.shape}")
    require_finite(a, name)
    scale = np.max(np.abs(a)) if a.size else 0.0
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    if asym > tol * max(scale, 1e-300):
        raise ContractError(
            f"{name} is not symmetric: max|A - A.T| = {asym:.3e}, "
            f"allowed {tol * scale:.3e}"
        )
    return 0.5 * (a + a.T)


def finite_diff_gradient(f, w, h=1e-4):
    """Central-difference gradient of a scalar function.

    Parameters
    ----------
    f : callable
        Maps a 1-D float64 array to a float.
    w : array_like
        Point of evaluation.
    h : float
        Step size, must be positive.

    Returns
    -------
    ndarray
        ``g[i] = (f(w + h e_i) - f(w - h e_i)) / (2h)``.
    """
    if not h > 0.0:
        raise ContractError(f"h must be positive, got {h}")
    w = as_vector(w)
    g = np.empty_like(w)
    e = np.zeros_like(w)
    for i in range(w.size):
        e[i] = h
        fp = f(w + e)
        fm = f(w - e)
        e[i] = 0.0
        g[i] = (fp - fm) / (2.0 * h)
    require_finite(g, "finite-difference gradient")
    return g


def sym_eigendecomposition(a):
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    a : array_like
        Symmetric matrix (validated against the package tolerance).

    Returns
    -------
    (eigenvalues, eigenvectors)
        ``eigenvalues`` descending; ``eigenvectors[:, i]`` is the unit
        eigenvector for ``eigenvalues[i]`` and the columns are
        orthonormal.
    """
    a = require_symmetric(a)
    lam, q = np.linalg.eigh(a)
    order = np.argsort(lam)[::-1]
    return lam[order], q[:, order]


def pseudo_inverse(a, rank_tol=DEFAULT_RANK_TOL):
    """Moore-Penrose pseudo-inverse of a symmetric matrix.

    Eigenvalues with ``|lambda| <= rank_tol * max|lambda|`` are treated as
    exact zeros; the rest are inverted in the eigenbasis.
    """
    lam, q = sym_eigendecomposition(a)
    amax = np.max(np.abs(lam)) if lam.size else 0.0
    if amax == 0.0:
        return np.zeros_like(np.asarray(a, dtype=np.float64))
    keep = np.abs(lam) > rank_tol * amax
    inv = np.zeros_like(lam)
    inv[keep] = 1.0 / lam[keep]
    return (q * inv) @ q.T


_ALGORITHMS = ("pcg64", "philox")


@dataclass(frozen=True)
class RandomStream:
    """Replayable random source.

    A stream is fully identified by ``(algorithm_id, seed, stream_index)``.
    The underlying bit generator is numpy's PCG64 (or Philox) seeded with
    ``SeedSequence(entropy=seed, spawn_key=(stream_index,))``; Gaussian
    variates use numpy's ziggurat ``standard_normal``.  Identical triples
    reproduce identical sequences on a given platform and numpy version.
    """

    seed: int
    stream_index: int = 0
    algorithm_id: str = "pcg64"
    _gen: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.algorithm_id not in _ALGORITHMS:
            raise ContractError(
                f"unknown algorithm_id {self.algorithm_id!r}, "
                f"expected one of {_ALGORITHMS}"
            )
        if not (0 <= int(self.seed) < 2**64):
            raise ContractError("seed must fit in an unsigned 64-bit integer")
        if int(self.stream_index) < 0:
            raise ContractError("stream_index must be nonnegative")

    def generator(self):
        """The lazily created numpy Generator backing this stream."""
        if self._gen is None:
            ss = np.random.SeedSequence(
                entropy=int(self.seed), spawn_key=(int(self.stream_index),)
            )
            bitgen = np.random.PCG64(ss) if self.algorithm_id == "pcg64" else np.random.Philox(ss)
            object.__setattr__(self, "_gen", np.random.Generator(bitgen))
        return self._gen

    def child(self, stream_index):
        """A fresh stream with the same seed and a different index."""
        return RandomStream(self.seed, stream_index, self.algorithm_id)


def gaussian_stream(stream, count):
    """Draw ``count`` i.i.d. standard normal variates from a RandomStream.

    ``count`` may be an int or a shape tuple.  Consumption advances the
    stream state, so repeated calls continue the same sequence.
    """
    if isinstance(count, int):
        if count < 0:
            raise ContractError("count must be nonnegative")
        shape = count
    else:
        shape = tuple(int(c) for c in count)
        if any(c < 0 for c in shape):
            raise ContractError("count must be nonnegative")
    return stream.generator().standard_normal(shape)
