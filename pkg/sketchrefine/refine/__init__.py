"""Refinement drivers: SIR, SRR and their composition SIRR."""
