"""Vertical coupling of a 1D channel model with 2D floodplain flow."""
