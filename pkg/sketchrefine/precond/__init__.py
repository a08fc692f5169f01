"""Sketched QR preconditioner R̂ from QR(SA)."""
