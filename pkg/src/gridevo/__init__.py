"""Island-model evolution strategy for grid-reasoning models."""

__version__ = "0.1.0"
