"""Conditional diffusion synthesis of LV substation load profiles."""

__version__ = "0.1.0"
