"""Finite-volume laboratory for time-dependent magnetic Schrodinger operators."""
