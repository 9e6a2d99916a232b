"""Green's function backends."""

from .base import (GreensDomain, GreensError, HelmholtzCrossData, HelmholtzLocalData,
                   NeumannCrossData, NeumannLocalData, SourceTooCloseError,
                   helmholtz_local, helmholtz_value, neumann_local)
from .disk import Disk, HalfDisk
from .perturbed import PerturbedDisk
from .gridded import GriddedDomain
from .rectangle import Rectangle

__all__ = [
    "GreensDomain", "GreensError", "SourceTooCloseError", "HelmholtzCrossData",
    "HelmholtzLocalData", "NeumannCrossData", "NeumannLocalData", "helmholtz_local",
    "helmholtz_value", "neumann_local", "Disk", "GriddedDomain", "HalfDisk", "PerturbedDisk", "Rectangle",
]
