"""Cascaded camera/radar fusion for object ranging and tracking."""

__version__ = "0.1.0"
