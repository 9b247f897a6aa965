"""Resonances of dilated magnetic quantum graphs and their thin waveguides."""
__version__ = "0.1.0"
