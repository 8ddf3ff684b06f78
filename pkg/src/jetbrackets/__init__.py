"""Symmetries, adjoint-symmetries, symmetry actions and adjoint-symmetry brackets of PDE systems."""

from .errors import InputError, JetBracketsError, Refusal, ValidationError
from .fixtures import FIXTURE_NAMES, Fixture, load_file, load_fixture, load_system_text
from .paramscalar import ParamScalar
from .symexpr import Expr

__all__ = [
    "Expr",
    "FIXTURE_NAMES",
    "Fixture",
    "InputError",
    "JetBracketsError",
    "ParamScalar",
    "Refusal",
    "ValidationError",
    "load_file",
    "load_fixture",
    "load_system_text",
]

__version__ = "0.1.0"
