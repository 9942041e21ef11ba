"""Uniform sampling of bounded-speed polygonal loops in a punctured plane."""

from .errors import DegenerateGeometry, IntegrityError, InvalidInput, LoopcastError, NotCertified, SamplingFailure
from .geometry import PunctureSet
from .loops import GnParams, PLLoop, discretize
from .mcmc import SamplerConfig, run
from .oracle import shortest_loop

__all__ = [
    "DegenerateGeometry", "IntegrityError", "InvalidInput", "LoopcastError", "NotCertified",
    "SamplingFailure", "PunctureSet", "GnParams", "PLLoop", "discretize", "SamplerConfig", "run",
    "shortest_loop",
]

__version__ = "0.1.0"
