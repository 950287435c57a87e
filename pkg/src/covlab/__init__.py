"""Random covering of the line by balls with general centre distributions."""

__version__ = "0.1.0"
