"""Synthetic least-squares problems with planted solution, and MatrixMarket I/O."""
