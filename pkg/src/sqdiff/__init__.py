"""Numerical laboratory for square differences in dense integer sets."""

from .counting import IndicatorSet, intersect_count, lambda_direct, lambda_fourier, varnavides_sum
from .fourier import ArcSystem, IntegerFunction, fourier_eval, integrate_energy
from .mollifier import DiscreteMollifier, ProfileKind
from .sets import SetKind, SetSpec, read_set, realize, write_set
from .weyl import EtaParams, WeylParams, major_arcs, minor_arc_sup, weyl_sum

__all__ = [
    "ArcSystem",
    "DiscreteMollifier",
    "EtaParams",
    "IndicatorSet",
    "IntegerFunction",
    "ProfileKind",
    "SetKind",
    "SetSpec",
    "WeylParams",
    "fourier_eval",
    "integrate_energy",
    "intersect_count",
    "lambda_direct",
    "lambda_fourier",
    "major_arcs",
    "minor_arc_sup",
    "read_set",
    "realize",
    "varnavides_sum",
    "weyl_sum",
    "write_set",
]

__version__ = "0.1.0"
