"""Per-step label noise sources.

Training resamples the labels fed to the gradient at every step.  Two
variants are supported:

* ``gaussian``: labels y + epsilon * xi with xi standard normal.
* ``sign-resample``: each clean label in {-1, +1} is independently
  flipped with probability p.  Relative to the mean labels (1 - 2p) y
  this is mean-zero noise with standard deviation 2 sqrt(p (1 - p)),
  exposed as the effective epsilon.

The diffusion factor of the noise is the model's label_sigma map; the
epsilon stored here multiplies it in the dynamics, it is never baked
into the map itself.
"""

from dataclasses import dataclass
from typing import ClassVar, Optional

import numpy as np

from ..errors import ContractError

__all__ = ["NoiseMap"]


@dataclass(frozen=True)
class NoiseMap:
    variant: str = "gaussian"
    epsilon: float = 0.0
    flip_probability: Optional[float] = None

    kind: ClassVar[str] = "label-noise"

    def __post_init__(self):
        if self.variant not in ("gaussian", "sign-resample"):
            raise ContractError(f"unknown noise variant {self.variant!r}")
        if self.variant == "gaussian":
            if self.flip_probability is not None:
                raise ContractError("flip_probability only applies to sign-resample")
            if not self.epsilon >= 0.0:
                raise ContractError("epsilon must be nonnegative")
        else:
            p = self.flip_probability
            if p is None or not 0.0 <= p <= 0.5:
                raise ContractError("sign-resample needs flip_probability in [0, 0.5]")
            eps = 2.0 * np.sqrt(p * (1.0 - p))
            if self.epsilon not in (0.0, eps):
                raise ContractError("epsilon of sign-resample is fixed by flip_probability")
            object.__setattr__(self, "epsilon", float(eps))

    def reference_labels(self, clean_labels):
        """Mean of the perturbed labels; what the drift theory sees as y."""
        clean_labels = np.asarray(clean_labels, dtype=np.float64)
        if self.variant == "gaussian":
            return clean_labels.copy()
        return (1.0 - 2.0 * self.flip_probability) * clean_labels

    def draw_labels(self, clean_labels, stream, count):
        """count independent per-step label vectors, shape (count,) + labels."""
        clean_labels = np.asarray(clean_labels, dtype=np.float64)
        gen = stream.generator() if hasattr(stream, "generator") else stream
        shape = (int(count),) + clean_labels.shape
        if self.variant == "gaussian":
            return clean_labels + self.epsilon * gen.standard_normal(shape)
        if not np.all(np.abs(np.abs(clean_labels) - 1.0) < 1e-12):
            raise ContractError("sign-resample expects labels in {-1, +1}")
        flips = gen.random(shape) < self.flip_probability
        return clean_labels * np.where(flips, -1.0, 1.0)

    def sigma(self, model, w):
        """Unscaled diffusion factor at w (multiply by epsilon to use)."""
        return model.label_sigma(w)
