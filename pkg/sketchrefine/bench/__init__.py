"""Experiment harness: grids, per-instance runs, CSV results."""
