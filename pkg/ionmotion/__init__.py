"""
ionmotion package

Motional-state simulation and heating analysis for a single trapped ion.
"""

from .version import __version__
