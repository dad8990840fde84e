"""qlearn-lab: finite-copy quantum classification experiments and bounds."""

__version__ = "0.1.0"
