"""SketchRefine — randomized least-squares solvers built on sketched iterative refinement."""

__version__ = "1.0.0"
