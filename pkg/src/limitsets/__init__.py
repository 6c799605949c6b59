"""Limit periodic sets of polynomial vector fields built from a real plane curve."""
from .poly import Polynomial, parse, to_text
from .family import FamilySpec, build_family, build_H, build_field, verify_identity
from .levelset import LevelSetTrace, trace_levelset, hausdorff

__all__ = ["Polynomial", "parse", "to_text", "FamilySpec", "build_family", "build_H",
           "build_field", "verify_identity", "LevelSetTrace", "trace_levelset", "hausdorff"]
__version__ = "0.1.0"
