"""Tranche pricing of a collateralised debt obligation by amplitude estimation on a statevector simulator."""

__version__ = "0.1.0"
