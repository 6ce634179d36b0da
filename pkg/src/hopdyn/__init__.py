"""Simulation and analysis toolkit for energy-accumulative hopping robots."""

__version__ = "0.1.0"
