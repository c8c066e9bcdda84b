"""bubbleflow: a radial numerical laboratory for the energy-critical heat flow.

Grids, the bubble family and its energies, the linearized spectral problem,
modulation decompositions, adaptive IMEX evolution with a dissipation ledger,
and trajectory analysis into bubbles plus radiation.
"""

from .grids import BubbleConfig, RadialField, RadialGrid

__version__ = "0.1.0"

__all__ = ["RadialGrid", "RadialField", "BubbleConfig", "__version__"]
