"""Spatio-temporal splitting for multi-robot path planning on grids."""
