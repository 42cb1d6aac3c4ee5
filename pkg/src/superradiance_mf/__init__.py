"""Mean-field simulator for incoherently pumped atoms in a lossy cavity."""

__version__ = "0.1.0"
