"""
Tape Moments - volume weighted price moments and price densities from trade tapes
"""

__version__ = "1.0.0"
