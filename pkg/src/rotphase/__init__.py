"""Simulation and analysis of rotating-qubit phase: effective drive phase, spin-echo
pulse simulation, wire-field geometry and fringe fitting."""

__version__ = "0.1.0"
