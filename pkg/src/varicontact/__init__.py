"""Numerical verification of boundary monotonicity for varifolds with a
prescribed contact angle on a curved wall."""

from . import contact, exact, fixtures, geom, mono, varifold
from .contact import ContactConfig, TestField, angle_residual, residual_sweep
from .fixtures import Fixture, build_fixture, cap_fixture, chord_fixture, mirror_fixture
from .geom import (CollarError, Domain, DomainError, make_ball_domain, make_ellipse_domain,
                   make_implicit_domain)
from .mono import MonotoneParams, density_limit, find_constant, profile_I
from .varifold import BoundaryPatch, DiscreteVarifold

__version__ = "0.1.0"

__all__ = [
    "contact", "exact", "fixtures", "geom", "mono", "varifold",
    "ContactConfig", "TestField", "angle_residual", "residual_sweep",
    "Fixture", "build_fixture", "cap_fixture", "chord_fixture", "mirror_fixture",
    "CollarError", "Domain", "DomainError", "make_ball_domain", "make_ellipse_domain",
    "make_implicit_domain", "MonotoneParams", "density_limit", "find_constant", "profile_I",
    "BoundaryPatch", "DiscreteVarifold",
]
