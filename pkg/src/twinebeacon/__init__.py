"""Traceable randomness beacon built on the Twine hash graph."""

__version__ = "0.1.0"
