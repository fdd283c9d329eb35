"""Two-tower recommender with id-based baselines, a synthetic benchmark and theory calculators."""

__version__ = "0.1.0"
