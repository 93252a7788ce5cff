"""Morphological segmentation of street-level point clouds.

Point clouds are projected to range/accumulation images, cut into building
blocks, split into facade and ground, and ground-level artifacts are detected,
separated and classified (car, lamppost, pedestrian, rest).
"""
from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
