"""Per-vertex deformation gradients: weighted 1-ring least squares for the
local transformation, polar-decomposed into rotation and shear factors."""

from __future__ import annotations

import numpy as np

from ..mesh import TriangleMesh
from .rotations import rotmat_to_quat


class DegenerateMatrixError(ValueError):
    pass


def polar_decompose(M: np.ndarray):
    """M = R @ S with R a proper rotation (det +1) and S symmetric.

    For det(M) > 0, S is positive definite; a reflection is folded into S as
    a negative eigenvalue so R stays in SO(3).
    """
    M = np.asarray(M, dtype=np.float64)
    if M.shape != (3, 3):
        raise ValueError("polar_decompose expects a 3x3 matrix")
    if np.linalg.norm(M) < 1e-12:
        raise DegenerateMatrixError("matrix norm below 1e-12")
    R, S = _polar_batch(M[None])
    return R[0], S[0]


def _polar_batch_svd(M: np.ndarray):
    """SVD-based polar decomposition (reference path, handles reflections
    and rank deficiency); returns (R (N,3,3), S (N,3,3))."""
    U, sig, Vt = np.linalg.svd(M)
    det = np.linalg.det(U @ Vt)
    flip = np.where(det < 0.0, -1.0, 1.0)
    U = U.copy()
    sig = sig.copy()
    U[:, :, 2] *= flip[:, None]
    sig[:, 2] *= flip
    R = U @ Vt
    V = np.swapaxes(Vt, 1, 2)
    S = np.einsum("nij,nj,nkj->nik", V, sig, V)
    S = 0.5 * (S + np.swapaxes(S, 1, 2))
    return R, S


def _inv3_batch(M: np.ndarray, det: np.ndarray) -> np.ndarray:
    """Analytic batched 3x3 inverse (adjugate / det)."""
    a, b, c = M[:, 0, 0], M[:, 0, 1], M[:, 0, 2]
    d, e, f = M[:, 1, 0], M[:, 1, 1], M[:, 1, 2]
    g, h, i = M[:, 2, 0], M[:, 2, 1], M[:, 2, 2]
    adj = np.empty_like(M)
    adj[:, 0, 0] = e * i - f * h
    adj[:, 0, 1] = c * h - b * i
    adj[:, 0, 2] = b * f - c * e
    adj[:, 1, 0] = f * g - d * i
    adj[:, 1, 1] = a * i - c * g
    adj[:, 1, 2] = c * d - a * f
    adj[:, 2, 0] = d * h - e * g
    adj[:, 2, 1] = b * g - a * h
    adj[:, 2, 2] = a * e - b * d
    return adj / det[:, None, None]


def _det3_batch(M: np.ndarray) -> np.ndarray:
    return (M[:, 0, 0] * (M[:, 1, 1] * M[:, 2, 2] - M[:, 1, 2] * M[:, 2, 1])
            - M[:, 0, 1] * (M[:, 1, 0] * M[:, 2, 2] - M[:, 1, 2] * M[:, 2, 0])
            + M[:, 0, 2] * (M[:, 1, 0] * M[:, 2, 1] - M[:, 1, 1] * M[:, 2, 0]))


def polar_rotations(M: np.ndarray, newton_iters: int = 12) -> np.ndarray:
    """Batched orthogonal polar factor with det +1.

    Uses the scaled Newton iteration X <- (X + X^-T)/2 (quadratically
    convergent, pure vectorized arithmetic, much faster than batched LAPACK
    SVD for 3x3).  Rows with non-positive or tiny determinants fall back to
    the SVD path, which folds reflections properly.
    """
    M = np.asarray(M, dtype=np.float64)
    det = _det3_batch(M)
    norm = np.abs(M).sum(axis=(1, 2))
    good = det > 1e-12 * np.maximum(norm, 1e-30) ** 3
    R = np.empty_like(M)
    if good.any():
        X = M[good]
        # normalize so the iteration starts near the unit-determinant scale
        scale = np.cbrt(det[good])
        X = X / scale[:, None, None]
        for _ in range(newton_iters):
            d = _det3_batch(X)
            Xn = 0.5 * (X + np.swapaxes(_inv3_batch(X, d), 1, 2))
            delta = np.abs(Xn - X).max()
            X = Xn
            if delta < 1e-14:
                break
        R[good] = X
    if not good.all():
        bad = ~good
        R[bad] = _polar_batch_svd(M[bad])[0]
    return R


def _polar_batch(M: np.ndarray):
    """Batched polar decomposition; returns (R (N,3,3), S (N,3,3)) with
    R in SO(3) and S symmetric (PSD when det M > 0)."""
    R = polar_rotations(M)
    S = np.swapaxes(R, 1, 2) @ M
    return R, 0.5 * (S + np.swapaxes(S, 1, 2))


def edge_arrays(mesh: TriangleMesh):
    """Undirected edges and their cotangent weights as arrays
    ((E, 2) int, (E,) float), ordered by sorted index pair."""
    weights = mesh.edge_weights
    keys = sorted(weights)
    edges = np.asarray(keys, dtype=np.int64).reshape(-1, 2)
    w = np.asarray([weights[k] for k in keys], dtype=np.float64)
    return edges, w


def vertex_normals(mesh: TriangleMesh, vertices: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals for the given vertex positions."""
    f = mesh.faces
    pa, pb, pc = vertices[f[:, 0]], vertices[f[:, 1]], vertices[f[:, 2]]
    fn = np.cross(pb - pa, pc - pa)        # length = 2 * area
    V = len(vertices)
    idx = f.ravel()
    rep = np.repeat(fn, 3, axis=0)
    vn = np.stack([np.bincount(idx, weights=rep[:, k], minlength=V)
                   for k in range(3)], axis=1)
    norms = np.linalg.norm(vn, axis=1, keepdims=True)
    return vn / np.maximum(norms, 1e-30)


class _RestRingCache:
    """Rest-pose 1-ring quantities reused across solves on one mesh: the
    weighted edge covariance A (and its rank classification), a sparse
    scatter matrix for the deformed-side accumulations, and rest normals."""

    def __init__(self, mesh: TriangleMesh):
        import scipy.sparse as sp

        V = mesh.n_vertices
        self.edges, self.w = edge_arrays(mesh)
        i, j = self.edges[:, 0], self.edges[:, 1]
        E = len(self.edges)
        rows = np.concatenate([i, j])
        cols = np.concatenate([np.arange(E)] * 2)
        self.scatter = sp.csr_matrix((np.ones(2 * E), (rows, cols)),
                                     shape=(V, E))
        self.d = mesh.vertices[i] - mesh.vertices[j]
        wd = self.w[:, None] * self.d
        A = (self.scatter @ (wd[:, :, None] * self.d[:, None, :]
                             ).reshape(E, 9)).reshape(V, 3, 3)
        eigvals = np.linalg.eigvalsh(A)
        lam1 = np.maximum(eigvals[:, 2], 1e-30)
        self.planar = eigvals[:, 0] < 1e-9 * lam1
        self.colinear = eigvals[:, 1] < 1e-9 * lam1
        self.ok = ~self.colinear
        self.completion_scale = 0.5 * (eigvals[:, 1] + eigvals[:, 2])
        self.rest_normals = vertex_normals(mesh, mesh.vertices)
        fix = self.planar & ~self.colinear
        self.fix = fix
        if fix.any():
            A = A.copy()
            A[fix] += self.completion_scale[fix, None, None] * np.einsum(
                "ni,nj->nij", self.rest_normals[fix], self.rest_normals[fix])
        self.A_T = np.ascontiguousarray(np.swapaxes(A, 1, 2))
        # nearest valid neighbor for colinear fallbacks
        self.fallback_source = {}
        rest = mesh.vertices
        for vi in np.flatnonzero(self.colinear):
            neighbors = sorted(
                mesh.vertex_adjacency[vi],
                key=lambda k: np.linalg.norm(rest[k] - rest[vi]))
            self.fallback_source[vi] = next(
                (k for k in neighbors if self.ok[k]), None)


def _rest_ring_cache(mesh: TriangleMesh) -> _RestRingCache:
    cache = getattr(mesh, "_ring_cache", None)
    if cache is None or cache[0] is not mesh.vertices:
        cache = (mesh.vertices, _RestRingCache(mesh))
        mesh._ring_cache = cache
    return cache[1]


def vertex_gradients(mesh: TriangleMesh, deformed_vertices: np.ndarray):
    """Fit per vertex the linear map T best carrying rest 1-ring edges to
    deformed 1-ring edges (cotangent-weighted), then T = R @ S by polar
    decomposition.

    Planar 1-rings leave the normal direction unconstrained; those fits are
    completed with the rest->deformed vertex-normal correspondence, which
    keeps pure rotations exact.  Rank-1 (colinear) rings fall back to the
    nearest neighbor's fit and are flagged.

    Returns (rotations (V, 4) quats, shears (V, 3, 3), fallback_flags (V,)).
    """
    V = mesh.n_vertices
    rest = mesh.vertices
    deformed = np.asarray(deformed_vertices, dtype=np.float64)
    if deformed.shape != rest.shape:
        raise ValueError("deformed vertex array must match the mesh")
    rc = _rest_ring_cache(mesh)

    # Edge vectors flip sign between the two endpoints, so the outer
    # products dp d^T are endpoint-symmetric: one scatter serves both ends.
    dp = deformed[rc.edges[:, 0]] - deformed[rc.edges[:, 1]]
    wdp = rc.w[:, None] * dp
    E = len(rc.edges)
    B = (rc.scatter @ (wdp[:, :, None] * rc.d[:, None, :]
                       ).reshape(E, 9)).reshape(V, 3, 3)

    if rc.fix.any():
        n_def = vertex_normals(mesh, deformed)
        B[rc.fix] += rc.completion_scale[rc.fix, None, None] * np.einsum(
            "ni,nj->nij", n_def[rc.fix], rc.rest_normals[rc.fix])

    ok = rc.ok
    T = np.tile(np.eye(3), (V, 1, 1))
    # T A = B  =>  A^T T^T = B^T
    T[ok] = np.swapaxes(
        np.linalg.solve(rc.A_T[ok], np.swapaxes(B[ok], 1, 2)), 1, 2)

    flags = np.zeros(V, dtype=bool)
    for vi, source in rc.fallback_source.items():
        flags[vi] = True
        if source is not None:
            T[vi] = T[source]

    R, S = _polar_batch(T)
    return rotmat_to_quat(R), S, flags
