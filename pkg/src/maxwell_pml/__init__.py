"""Structure-preserving 3D Maxwell solvers with a Berenger PML.

Modules: :mod:`grid` (staggered lattice), :mod:`ops` (discrete calculus),
:mod:`maxwell` (continuum structures and oracles), :mod:`pml` (split and
unsplit layer formulations), :mod:`yee` (leapfrog scheme and energy law),
:mod:`msrk` (symplectic Runge-Kutta stepping) and :mod:`harness` (experiments).
"""
from .grid import Boundary, StaggeredGrid3, make_grid
from .maxwell import MaxwellState, plane_wave
from .pml import PmlConfig, SplitState, UnsplitState
from .yee import YeeRun

__all__ = ["Boundary", "StaggeredGrid3", "make_grid", "MaxwellState", "plane_wave",
           "PmlConfig", "SplitState", "UnsplitState", "YeeRun"]
