"""Hartree-Fock critical points, excited-level bounds and a full-CI oracle."""

__version__ = "0.1.0"
