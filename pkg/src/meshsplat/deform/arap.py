"""Handle-driven as-rigid-as-possible deformation.

Alternates a closed-form local rotation fit per vertex (SVD of the weighted
1-ring covariance, det-corrected) with a global sparse SPD solve on the
cotangent Laplacian with constrained rows eliminated.  The factorization of
the reduced system depends only on the constrained vertex set, so it is
computed once per handle topology and reused across drags; each frame only
re-runs local fits and back-substitutions, which is what makes interactive
rates possible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..mesh import TriangleMesh
from .gradients import edge_arrays, polar_rotations, vertex_gradients


class SolveError(Exception):
    pass


@dataclass
class DeformState:
    """Deformed vertex positions plus the per-vertex rotation/shear factors
    of the local deformation gradient, and the final energy value."""

    deformed_vertices: np.ndarray
    rotations: np.ndarray            # (V, 4) unit quaternions
    shears: np.ndarray               # (V, 3, 3) symmetric
    energy: float
    iterations: int = 0
    fallback_flags: np.ndarray = field(default=None)

    @classmethod
    def identity(cls, mesh: TriangleMesh) -> "DeformState":
        V = mesh.n_vertices
        q = np.zeros((V, 4))
        q[:, 0] = 1.0
        return cls(
            deformed_vertices=mesh.vertices.copy(),
            rotations=q,
            shears=np.tile(np.eye(3), (V, 1, 1)),
            energy=0.0,
            fallback_flags=np.zeros(V, dtype=bool),
        )


class ArapSolver:
    """Reusable solver bound to one mesh; reuses the factorization across
    drags with the same constrained vertex set."""

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        self.rest = mesh.vertices.copy()
        self.edges, self.w = edge_arrays(mesh)
        if len(self.edges) == 0:
            raise SolveError("mesh has no edges")
        isolated = np.setdiff1d(np.arange(mesh.n_vertices),
                                np.unique(self.edges))
        if len(isolated):
            raise SolveError(
                f"non-manifold neighborhood: vertex {int(isolated[0])} "
                f"has no 1-ring")
        V = mesh.n_vertices
        E = len(self.edges)
        i, j = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([i, j, i, j])
        cols = np.concatenate([j, i, i, j])
        vals = np.concatenate([-self.w, -self.w, self.w, self.w])
        self.laplacian = sp.csr_matrix((vals, (rows, cols)), shape=(V, V))
        # edge -> endpoint scatter (both ends, and the signed variant) reused
        # every iteration
        ones = np.ones(E)
        self._scatter_both = sp.csr_matrix(
            (np.concatenate([ones, ones]),
             (np.concatenate([i, j]), np.concatenate([np.arange(E)] * 2))),
            shape=(V, E))
        self._scatter_signed = sp.csr_matrix(
            (np.concatenate([ones, -ones]),
             (np.concatenate([i, j]), np.concatenate([np.arange(E)] * 2))),
            shape=(V, E))
        self._rest_d = self.rest[i] - self.rest[j]
        self._constrained: np.ndarray | None = None
        self._solve = None
        self._free: np.ndarray | None = None
        self._L_fc = None

    # -- handle topology -------------------------------------------------

    def set_handles(self, constrained_indices) -> None:
        constrained = np.unique(np.asarray(constrained_indices, dtype=np.int64))
        if len(constrained) == 0:
            raise SolveError("at least one constrained vertex is required")
        if constrained.min() < 0 or constrained.max() >= self.mesh.n_vertices:
            raise SolveError("handle references an invalid vertex")
        if self._constrained is not None and np.array_equal(
                constrained, self._constrained):
            return
        V = self.mesh.n_vertices
        free_mask = np.ones(V, dtype=bool)
        free_mask[constrained] = False
        free = np.flatnonzero(free_mask)
        self._constrained = constrained
        self._free = free
        if len(free):
            L_ff = self.laplacian[free][:, free].tocsc()
            self._L_fc = self.laplacian[free][:, constrained].tocsr()
            self._solve = spla.factorized(L_ff)
        else:
            self._L_fc = None
            self._solve = None

    # -- per-frame solve ---------------------------------------------------

    def _local_rotations(self, deformed: np.ndarray) -> np.ndarray:
        i, j = self.edges[:, 0], self.edges[:, 1]
        d = self._rest_d
        dp = deformed[i] - deformed[j]
        wd = self.w[:, None] * d
        E = len(d)
        S = (self._scatter_both @ (wd[:, :, None] * dp[:, None, :]
                                   ).reshape(E, 9)).reshape(-1, 3, 3)
        # best rotation mapping rest edges onto deformed edges: the
        # orthogonal polar factor of S^T (det-corrected in the fallback)
        return polar_rotations(np.swapaxes(S, 1, 2))

    def _rotated_edges(self, R: np.ndarray):
        """R_i d_ij and R_j d_ij for every edge (shared by the global-step
        right-hand side and the energy)."""
        i, j = self.edges[:, 0], self.edges[:, 1]
        d = self._rest_d[:, :, None]
        r_i = (R[i] @ d)[:, :, 0]
        r_j = (R[j] @ d)[:, :, 0]
        return r_i, r_j

    def energy(self, deformed: np.ndarray, R: np.ndarray,
               rotated=None) -> float:
        """Directed-sum deformation energy: both orientations of each edge,
        each against its own endpoint's rotation."""
        i, j = self.edges[:, 0], self.edges[:, 1]
        dp = deformed[i] - deformed[j]
        r_i, r_j = self._rotated_edges(R) if rotated is None else rotated
        e_i = ((dp - r_i) ** 2).sum(axis=1)
        e_j = ((dp - r_j) ** 2).sum(axis=1)
        return float((self.w * (e_i + e_j)).sum())

    def solve(self, targets: dict[int, np.ndarray], max_iters: int = 20,
              tol: float = 1e-6, warm_start: np.ndarray | None = None,
              with_gradients: bool = True) -> DeformState:
        """Minimize the deformation energy subject to the handle targets.

        targets: vertex index -> world position.  The constrained set must
        match the one passed to set_handles (set_handles is called here when
        needed)."""
        if not targets:
            raise SolveError("empty handle set")
        idx = np.asarray(sorted(targets), dtype=np.int64)
        self.set_handles(idx)
        pos = np.asarray([targets[int(k)] for k in idx], dtype=np.float64)

        V = self.mesh.n_vertices
        deformed = np.empty((V, 3))
        if warm_start is not None:
            deformed[:] = warm_start
        else:
            # Uniform-translation start: exact for translated handles and a
            # good first guess otherwise.
            deformed[:] = self.rest + (pos - self.rest[idx]).mean(axis=0)
        deformed[idx] = pos

        free = self._free
        energy = np.inf
        R = None
        iterations = 0
        for it in range(max_iters):
            R = self._local_rotations(deformed)
            rotated = self._rotated_edges(R)
            if len(free):
                rhs_edge = 0.5 * self.w[:, None] * (rotated[0] + rotated[1])
                rhs = self._scatter_signed @ rhs_edge
                b = rhs[free] - self._L_fc @ pos
                deformed[free] = self._solve(np.ascontiguousarray(b))
            new_energy = self.energy(deformed, R, rotated=rotated)
            iterations = it + 1
            if new_energy > energy * (1.0 + 1e-9) + 1e-12:
                raise SolveError(
                    f"energy increased at iteration {it}: "
                    f"{energy} -> {new_energy}")
            decrease = energy - new_energy
            energy = new_energy
            if decrease <= tol * max(abs(energy), 1e-12):
                break

        if with_gradients:
            quats, shears, flags = vertex_gradients(self.mesh, deformed)
        else:
            quats, shears, flags = None, None, None
        return DeformState(deformed_vertices=deformed, rotations=quats,
                           shears=shears, energy=energy,
                           iterations=iterations, fallback_flags=flags)


    def solve_ramped(self, targets: dict[int, np.ndarray],
                     max_iters: int = 20, tol: float = 1e-6,
                     stages: int | None = None) -> DeformState:
        """Cold-start solve with incremental target loading.

        Large handle displacements strand the alternating solver in poor
        local minima when applied in one go; interpolating the targets over
        a few warm-started stages is the standard continuation fix.  Stage
        count defaults to a displacement-proportional heuristic (1 for small
        edits)."""
        if not targets:
            raise SolveError("empty handle set")
        idx = np.asarray(sorted(targets), dtype=np.int64)
        pos = np.asarray([targets[int(k)] for k in idx])
        if stages is None:
            # The translation component is free for this energy; only the
            # spread of the handle displacements calls for continuation.
            disp = pos - self.rest[idx]
            spread = np.linalg.norm(disp - disp.mean(axis=0), axis=1).max()
            diag = np.linalg.norm(np.ptp(self.rest, axis=0))
            stages = int(np.clip(np.ceil(6.0 * spread / max(diag, 1e-12)),
                                 1, 10))
        warm = None
        state = None
        for s in range(1, stages + 1):
            frac = s / stages
            stage_pos = (1.0 - frac) * self.rest[idx] + frac * pos
            stage_targets = {int(i): p for i, p in zip(idx, stage_pos)}
            state = self.solve(stage_targets, max_iters=max_iters, tol=tol,
                               warm_start=warm,
                               with_gradients=(s == stages))
            warm = state.deformed_vertices.copy()
        return state


def arap_solve(mesh: TriangleMesh, handles: dict[int, np.ndarray],
               max_iters: int = 20, tol: float = 1e-6,
               warm_start: np.ndarray | None = None,
               stages: int | None = None) -> DeformState:
    """One-shot solve (builds the factorization; interactive callers should
    keep an ArapSolver).  Cold starts load the targets incrementally."""
    solver = ArapSolver(mesh)
    if warm_start is not None:
        return solver.solve(handles, max_iters=max_iters, tol=tol,
                            warm_start=warm_start)
    return solver.solve_ramped(handles, max_iters=max_iters, tol=tol,
                               stages=stages)
