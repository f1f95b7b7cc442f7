"""Local hidden-variable photodetection model for down-converted light."""

__version__ = "0.1.0"
