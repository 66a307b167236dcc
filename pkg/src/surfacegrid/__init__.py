"""surfacegrid: deterministic grid-marked surface dataset generator and evaluator."""

__version__ = "0.1.0"
