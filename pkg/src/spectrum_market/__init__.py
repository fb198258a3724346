"""Spectrum pricing games between primary and secondary users."""
__version__ = "0.1.0"
