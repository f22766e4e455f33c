"""Simulation toolkit for concatenated continuous driving of a two-level system."""
