"""Synthetic minority-class augmentation for imbalanced flight records."""

__version__ = "0.1.0"
