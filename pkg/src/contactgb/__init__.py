"""Riemannian approximation of surfaces in contact sub-Riemannian 3-manifolds.

Curvature measures K^eps sigma^eps and their singular limit, characteristic
points with their order of degeneracy and index, and the scenario runner.
"""
__version__ = "0.1.0"

from .contact_core import ContactModel, builtin_model, make_model, normalize  # noqa: E402
from .surface_geometry import Box, Disk, SurfaceChart, make_chart  # noqa: E402

__all__ = ["ContactModel", "builtin_model", "make_model", "normalize", "Box", "Disk", "SurfaceChart",
           "make_chart", "__version__"]
