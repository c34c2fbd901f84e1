"""Anisotropic Littlewood-Paley calculus and a Friedrichs-Galerkin solver for the
Navier-Stokes-Boussinesq system with horizontal dissipation on a periodic box."""

from .grid import AnisoGrid, MixedNormSpec, SpectralField, VectorField
from .filterbank import DyadicFilterBank, bank_for
from .norms import NormSpec, PairingSpec, norm, pairing, parse_norm_spec

__version__ = "0.1.0"

__all__ = [
    "AnisoGrid",
    "DyadicFilterBank",
    "MixedNormSpec",
    "NormSpec",
    "PairingSpec",
    "SpectralField",
    "VectorField",
    "bank_for",
    "norm",
    "pairing",
    "parse_norm_spec",
]
