"""Whitham modulation laboratory for the defocusing cubic NLS."""
from .exceptions import AliasingError, BlowUpError, ConfigError, ConsistencyError
from .field_core import ComplexField, Grid1D, RealField

__all__ = ["AliasingError", "BlowUpError", "ConfigError", "ConsistencyError",
           "ComplexField", "Grid1D", "RealField"]
__version__ = "0.1.0"
