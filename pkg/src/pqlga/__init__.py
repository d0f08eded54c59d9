"""Parallel quantum lattice gas automata with amplitude estimation and minimum finding."""

from .lattice import CollisionModel, LatticeSpec, QoISpec, d1q2, d2q4
from .mapping import MappingSpec
from .parallel import ConfigurationSet
from .search import MinFindResult, PipelineSpec, run_durr_hoyer
from .simulator import CapacityError, CircuitBlock, CircuitOp, RegisterLayout, StateVector

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CircuitBlock",
    "CircuitOp",
    "CollisionModel",
    "ConfigurationSet",
    "LatticeSpec",
    "MappingSpec",
    "MinFindResult",
    "PipelineSpec",
    "QoISpec",
    "RegisterLayout",
    "StateVector",
    "d1q2",
    "d2q4",
    "run_durr_hoyer",
]
