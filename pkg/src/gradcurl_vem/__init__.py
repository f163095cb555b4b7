"""Lowest-order virtual elements for the grad-curl (vector potential Stokes) problem."""

from .mesh import Mesh, build_cube_mesh, load_mesh, save_mesh, check_regularity

__version__ = "0.1.0"

__all__ = ["Mesh", "build_cube_mesh", "load_mesh", "save_mesh", "check_regularity"]
