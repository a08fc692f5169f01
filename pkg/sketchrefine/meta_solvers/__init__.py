"""Single-shot approximate normal-equation solvers used as the refinement kernel."""
