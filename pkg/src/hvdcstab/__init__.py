"""Electromechanical simulation of AC grids segmented by VSC-HVDC links.

The package covers the full loop: power flow and dynamic initialization,
implicit time-domain simulation, numerical linearization with mode
screening, DC segmentation of an AC network, and sensitivity-based design
of supplementary reactive-power damping controllers at the converter
stations.
"""

__version__ = "0.1.0"

from .engine import SimConfig, SystemModel, initialize, simulate
from .errors import HvdcStabError
from .segmentation import SegmentationPlan, segment

__all__ = [
    "HvdcStabError",
    "SegmentationPlan",
    "SimConfig",
    "SystemModel",
    "__version__",
    "initialize",
    "segment",
    "simulate",
]
