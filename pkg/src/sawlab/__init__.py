"""Simulation and analysis toolkit for a transmon qubit coupled to a
surface-acoustic-wave phonon cavity through a tunable inductive coupler."""

__version__ = "0.1.0"
