"""Symbolic-numeric engine for nested systems of quadratures."""
