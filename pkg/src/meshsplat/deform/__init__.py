from .arap import ArapSolver, DeformState, SolveError, arap_solve
from .gradients import (DegenerateMatrixError, polar_decompose,
                        vertex_gradients, vertex_normals)
from .rotations import (blend_rotations, blend_rotations_batch, quat_log,
                        rotmat_to_quat, rotvec_to_quat)
from .transfer import bake_cloud, transfer

__all__ = [
    "ArapSolver", "DeformState", "SolveError", "arap_solve",
    "polar_decompose", "vertex_gradients", "vertex_normals",
    "DegenerateMatrixError", "blend_rotations", "blend_rotations_batch",
    "quat_log", "rotmat_to_quat", "rotvec_to_quat", "transfer", "bake_cloud",
]
