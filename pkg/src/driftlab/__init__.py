"""driftlab: a numerical lab for heavy-ball SGD with label noise.

The package studies the momentum scaling beta = 1 - C * eta**gamma: how
it shapes equilibration toward the zero-loss manifold, the slow drift
along that manifold induced by label noise, and the spectral structure
of the linearized update.  Modules:

* ``numerics``  - shared primitives (eigendecompositions, random streams)
* ``models``    - testbed losses with exact derivatives and noise maps
* ``optimizer`` - the momentum update, trajectory runner, projection
* ``kernels``   - hot loops (numba build plus pure-numpy fallback)
* ``spectral``  - eigenstructure of the extended update map
* ``drift``     - manifold charts, the modified Lyapunov operator, drift
* ``analysis``  - exponential, power-law, joint, and piecewise fits
* ``harness``   - experiment configs, parallel sweeps, CLI, plots
"""

__version__ = "0.1.0"

from .backend import active_backend

__all__ = ["active_backend", "__version__"]
