"""Noisy non-adaptive group testing: information-theoretic thresholds, random
designs, decoders and a reproducible simulation harness."""

__version__ = "0.1.0"
