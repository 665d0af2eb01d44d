"""Few-photon pulse scattering from a waveguide-coupled two-level emitter.

Two independent numerical routes to the same observables:

* ``scatter1`` / ``scatter2`` — frequency-domain scattering engine with
  closed-form one- and two-photon coefficients (exact up to quadrature).
* ``timebin`` — time-bin matrix-product-state engine that integrates the
  collision dynamics step by step and works for any photon number.

``harness`` runs both and compares; ``cli`` exposes ``wqed-sim``.
"""

__version__ = "0.1.0"

from .grids import SimGrid
from .pulse import Gaussian, PulseSpec, Sampled
from .scatter1 import Mode, SystemParams

__all__ = [
    "SimGrid",
    "Gaussian",
    "Sampled",
    "PulseSpec",
    "Mode",
    "SystemParams",
    "__version__",
]
