"""Finite-difference peridynamics with a double-well bond potential."""
from .errors import (BlowUpError, BoundViolation, ConfigError, DomainError,
                     NonconvergenceError)
from .potential import InfluenceSpec, PotentialSpec
from .grid import Grid, build_grid
from .force import BondModel

__all__ = [
    "BlowUpError", "BoundViolation", "ConfigError", "DomainError", "NonconvergenceError",
    "InfluenceSpec", "PotentialSpec", "Grid", "build_grid", "BondModel",
]
