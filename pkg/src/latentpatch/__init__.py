"""Latent-space search for patches that trigger false-positive detections."""

__version__ = "0.1.0"

from .tensor import Tensor, Tape, ShapeError, no_grad

__all__ = ["Tensor", "Tape", "ShapeError", "no_grad", "__version__"]
