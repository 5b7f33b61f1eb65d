"""hp-adaptive virtual element solver for 2D diffusion on polygonal meshes."""

from .cases import make_case
from .dofmap import DegreeMap
from .mesh import PolyMesh, build_mesh, nonconvex8_mesh, refine_elements
from .mixed import inf_sup_constant, solve_mixed
from .primal import solve_primal

__all__ = [
    "DegreeMap",
    "PolyMesh",
    "build_mesh",
    "inf_sup_constant",
    "make_case",
    "nonconvex8_mesh",
    "refine_elements",
    "solve_mixed",
    "solve_primal",
]

__version__ = "0.1.0"
