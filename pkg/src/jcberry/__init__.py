"""Berry phase of a driven Jaynes-Cummings mode: simulation and analytic checks."""

__version__ = "0.1.0"
