"""Class groups, toric orbits and central L-values at desk scale."""

__version__ = "0.1.0"
