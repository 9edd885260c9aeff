"""Wiretapped 1-of-2 string oblivious transfer over erasure broadcast channels."""

__version__ = "0.1.0"
