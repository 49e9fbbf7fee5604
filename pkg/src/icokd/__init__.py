"""Simulation and verification toolkit for quantum key distribution through a quantum switch."""

from .qmath import Basis, DenseOperator, KrausInstrument, Outcome

__all__ = ["Basis", "DenseOperator", "KrausInstrument", "Outcome"]
__version__ = "0.1.0"
