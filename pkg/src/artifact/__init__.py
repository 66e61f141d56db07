"""Compensated cutoff collision operators for the homogeneous Boltzmann equation."""

from .errors import *  # noqa: F401,F403
from .kernel import KernelConfig
from .vgrid import Distribution, GridField, VelocityGrid
from ._spectral import OperatorSettings

__version__ = "0.1.0"
