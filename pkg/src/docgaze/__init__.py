"""Attention modeling toolkit for graphic-design documents.

Builds fixation-density and dwell maps from eye-tracking data, clusters
document layouts, predicts layout-conditioned component saliency,
simulates fixation scanpaths with a foveated belief-state model trained
by adversarial imitation, and evaluates everything with the standard
saliency and scanpath metric suite.
"""

from .backend import backend_name
from .density import DensityMap, Fixation, Scanpath

__version__ = "0.1.0"

__all__ = ["DensityMap", "Fixation", "Scanpath", "backend_name",
           "__version__"]
