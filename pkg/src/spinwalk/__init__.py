"""spinwalk: non-homogeneous random walks, their radial/angular diffusion
limits, excursion constructions, and the statistical suites verifying the
limit laws."""

__version__ = "0.1.0"

from .model import ModelSpec, builtin_models, isotropic, rotation2d, rotation4d  # noqa: F401
