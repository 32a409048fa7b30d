"""Multimodal transit network modeling kernel."""

__version__ = "0.1.0"
