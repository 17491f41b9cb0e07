"""Cut finite elements for 2D linear elasticity on fixed background grids."""

__version__ = "0.1.0"
