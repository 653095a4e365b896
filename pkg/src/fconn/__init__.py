"""Connectivity-fingerprint classification toolkit.

Converts 4D functional volumes into voxel-level connectivity-fingerprint
volumes, trains 3D CNN and linear classifiers, evaluates them with
cross-validation and held-out testing, combines per-atlas models by majority
vote, and produces gradient saliency maps. A seeded synthetic generator makes
the whole pipeline verifiable at desk scale.
"""

__version__ = "0.1.0"

from . import precision
from ._kernels import backend_name as kernel_backend

__all__ = ["precision", "kernel_backend", "__version__"]
