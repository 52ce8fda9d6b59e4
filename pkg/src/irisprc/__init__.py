"""Limit cycles, phase response and isochrons near a heteroclinic cycle.

``core`` solves the iris entry map, ``prc`` gives the closed-form phase
response, ``sim`` simulates the four-square system exactly and ``smooth``
integrates the smooth toroidal companion system.
"""
from .core import (
    DomainError,
    IrisCycle,
    IrisError,
    IrisParams,
    NoCycleError,
    Regime,
    classify_regime,
    find_roots,
    fold_offset,
    stable_cycle,
)
from .prc import PerturbDirection, iprc, prc_curve
from .sim import asymptotic_phase, isochron_field, numeric_iprc, simulate

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "IrisCycle",
    "IrisError",
    "IrisParams",
    "NoCycleError",
    "PerturbDirection",
    "Regime",
    "asymptotic_phase",
    "classify_regime",
    "find_roots",
    "fold_offset",
    "iprc",
    "isochron_field",
    "numeric_iprc",
    "prc_curve",
    "simulate",
    "stable_cycle",
]
