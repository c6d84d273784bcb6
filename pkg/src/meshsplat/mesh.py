"""Triangle mesh container: adjacency, cotangent weights, face frames,
midpoint subdivision and a minimal OBJ reader/writer.

The mesh is the explicit proxy everything else binds to.  Vertices and faces
are plain numpy arrays; adjacency and the discrete quantities (cotangent
weights, per-face normal/circumradius/centroid) are cached and invalidated
whenever a face is split.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

# Obtuse triangles produce non-positive cotangent weights; clamping keeps the
# deformation system positive definite.
MIN_COT_WEIGHT = 1e-6


class MeshError(Exception):
    pass


class DegenerateFaceError(MeshError):
    def __init__(self, face_index, message=None):
        self.face_index = face_index
        super().__init__(message or f"degenerate (zero-area) face {face_index}")


@dataclass(frozen=True)
class FaceFrame:
    """Per-face geometric frame: unit normal, circumradius and centroid."""

    normal: np.ndarray
    circumradius: float
    centroid: np.ndarray


class TriangleMesh:
    """Indexed triangle mesh with symmetric 1-ring adjacency.

    Parameters
    ----------
    vertices : (V, 3) float array
    faces : (F, 3) int array, counter-clockwise vertex index triples
    """

    def __init__(self, vertices, faces):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must be (V, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise MeshError("faces must be (F, 3)")
        self._validate_faces()
        self.vertex_adjacency: list[set[int]] = []
        self.vertex_faces: list[set[int]] = []
        self._midpoints: dict[tuple[int, int], int] = {}
        self._rebuild_adjacency()
        self._clear_caches()

    # ------------------------------------------------------------------
    # construction / bookkeeping

    def _validate_faces(self):
        nv = len(self.vertices)
        if len(self.faces):
            if self.faces.min() < 0 or self.faces.max() >= nv:
                raise MeshError("face references out-of-range vertex")
            a, b, c = self.faces[:, 0], self.faces[:, 1], self.faces[:, 2]
            if np.any(a == b) or np.any(b == c) or np.any(a == c):
                raise MeshError("face references repeated vertex")

    def _rebuild_adjacency(self):
        nv = len(self.vertices)
        self.vertex_adjacency = [set() for _ in range(nv)]
        self.vertex_faces = [set() for _ in range(nv)]
        for fi, (a, b, c) in enumerate(self.faces):
            self._register_face(fi, int(a), int(b), int(c))

    def _register_face(self, fi, a, b, c):
        self.vertex_adjacency[a].update((b, c))
        self.vertex_adjacency[b].update((a, c))
        self.vertex_adjacency[c].update((a, b))
        self.vertex_faces[a].add(fi)
        self.vertex_faces[b].add(fi)
        self.vertex_faces[c].add(fi)

    def _clear_caches(self):
        self._face_normals = None
        self._face_circumradii = None
        self._face_centroids = None
        self._face_areas = None
        self._edge_weights = None
        self._content_hash = None

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def content_hash(self) -> bytes:
        """SHA-256 over vertex and face buffers; identifies the binding target."""
        if self._content_hash is None:
            h = hashlib.sha256()
            h.update(b"v")
            h.update(self.vertices.tobytes())
            h.update(b"f")
            h.update(self.faces.tobytes())
            self._content_hash = h.digest()
        return self._content_hash

    def copy(self) -> "TriangleMesh":
        m = TriangleMesh(self.vertices.copy(), self.faces.copy())
        m._midpoints = dict(self._midpoints)
        return m

    # ------------------------------------------------------------------
    # per-face quantities

    def _compute_face_quantities(self):
        v = self.vertices
        f = self.faces
        pa, pb, pc = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
        cross = np.cross(pb - pa, pc - pa)
        norms = np.linalg.norm(cross, axis=1)
        areas = 0.5 * norms
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise DegenerateFaceError(bad)
        self._face_normals = cross / norms[:, None]
        la = np.linalg.norm(pc - pb, axis=1)
        lb = np.linalg.norm(pa - pc, axis=1)
        lc = np.linalg.norm(pb - pa, axis=1)
        self._face_circumradii = la * lb * lc / (4.0 * areas)
        self._face_centroids = (pa + pb + pc) / 3.0
        self._face_areas = areas

    @property
    def face_normals(self) -> np.ndarray:
        if self._face_normals is None:
            self._compute_face_quantities()
        return self._face_normals

    @property
    def face_circumradii(self) -> np.ndarray:
        if self._face_circumradii is None:
            self._compute_face_quantities()
        return self._face_circumradii

    @property
    def face_centroids(self) -> np.ndarray:
        if self._face_centroids is None:
            self._compute_face_quantities()
        return self._face_centroids

    @property
    def face_areas(self) -> np.ndarray:
        if self._face_areas is None:
            self._compute_face_quantities()
        return self._face_areas

    def face_frame(self, face: int) -> FaceFrame:
        """Frame of one face.  Raises DegenerateFaceError on zero area."""
        if not 0 <= face < self.n_faces:
            raise MeshError(f"face index {face} out of range")
        a, b, c = self.faces[face]
        pa, pb, pc = self.vertices[a], self.vertices[b], self.vertices[c]
        cross = np.cross(pb - pa, pc - pa)
        norm = float(np.linalg.norm(cross))
        if norm <= 0.0:
            raise DegenerateFaceError(face)
        area = 0.5 * norm
        la = float(np.linalg.norm(pc - pb))
        lb = float(np.linalg.norm(pa - pc))
        lc = float(np.linalg.norm(pb - pa))
        return FaceFrame(
            normal=cross / norm,
            circumradius=la * lb * lc / (4.0 * area),
            centroid=(pa + pb + pc) / 3.0,
        )

    # ------------------------------------------------------------------
    # cotangent weights

    @property
    def edge_weights(self) -> dict[tuple[int, int], float]:
        if self._edge_weights is None:
            self._edge_weights = cotangent_weights(self)
        return self._edge_weights

    # ------------------------------------------------------------------
    # midpoint subdivision

    def _midpoint(self, i: int, j: int) -> int:
        """Vertex index of the midpoint of edge (i, j), deduplicated by the
        sorted index pair so neighboring splits share it."""
        key = (i, j) if i < j else (j, i)
        vid = self._midpoints.get(key)
        if vid is None:
            vid = self.n_vertices
            mid = 0.5 * (self.vertices[i] + self.vertices[j])
            self.vertices = np.vstack([self.vertices, mid[None, :]])
            self.vertex_adjacency.append(set())
            self.vertex_faces.append(set())
            self._midpoints[key] = vid
        return vid

    def split_face(self, face: int) -> tuple[int, int, int, int]:
        """Subdivide `face` into four children at its edge midpoints.

        The parent slot is reused for the first child; the other three are
        appended.  Returns the four child face indices.
        """
        if not 0 <= face < self.n_faces:
            raise MeshError(f"face index {face} out of range")
        a, b, c = (int(x) for x in self.faces[face])
        mab = self._midpoint(a, b)
        mbc = self._midpoint(b, c)
        mca = self._midpoint(c, a)

        children = np.array(
            [
                [a, mab, mca],
                [mab, b, mbc],
                [mca, mbc, c],
                [mab, mbc, mca],
            ],
            dtype=np.int64,
        )
        # Unregister parent, reuse its slot for child 0.
        for vid in (a, b, c):
            self.vertex_faces[vid].discard(face)
        base = self.n_faces
        self.faces[face] = children[0]
        self.faces = np.vstack([self.faces, children[1:]])
        ids = (face, base, base + 1, base + 2)
        for fi, (x, y, z) in zip(ids, children):
            self._register_face(fi, int(x), int(y), int(z))
        # Parent corner edges survive only while some other face still uses
        # them; otherwise the 1-ring link is gone.
        for i, j in ((a, b), (b, c), (c, a)):
            if not (self.vertex_faces[i] & self.vertex_faces[j]):
                self.vertex_adjacency[i].discard(j)
                self.vertex_adjacency[j].discard(i)
        self._clear_caches()
        return ids

    # ------------------------------------------------------------------
    # I/O

    def save_obj(self, path):
        with open(path, "w") as fh:
            for v in self.vertices:
                fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
            for f in self.faces:
                fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def cotangent_weights(mesh: TriangleMesh) -> dict[tuple[int, int], float]:
    """Per-undirected-edge cotangent weights.

    w_ij = 0.5 * (cot(alpha) + cot(beta)) over the one or two angles opposite
    the edge; boundary edges use their single angle.  Weights are clamped
    below at MIN_COT_WEIGHT.
    """
    v = mesh.vertices
    sums: dict[tuple[int, int], float] = {}
    for fi, (a, b, c) in enumerate(mesh.faces):
        idx = (int(a), int(b), int(c))
        pts = v[list(idx)]
        area2 = np.linalg.norm(np.cross(pts[1] - pts[0], pts[2] - pts[0]))
        if area2 <= 0.0:
            raise DegenerateFaceError(fi)
        for k in range(3):
            opp = idx[k]
            i, j = idx[(k + 1) % 3], idx[(k + 2) % 3]
            u = v[i] - v[opp]
            w = v[j] - v[opp]
            cot = float(np.dot(u, w)) / float(np.linalg.norm(np.cross(u, w)))
            key = (i, j) if i < j else (j, i)
            sums[key] = sums.get(key, 0.0) + 0.5 * cot
    return {key: max(val, MIN_COT_WEIGHT) for key, val in sums.items()}


def load_obj(path) -> TriangleMesh:
    """Load a triangle-only Wavefront OBJ (`v` and `f` records; normals and
    UVs inside `f` tokens are ignored, quads are rejected)."""
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshError(f"malformed vertex at line {lineno}")
                try:
                    vertices.append([float(x) for x in parts[1:4]])
                except ValueError as exc:
                    raise MeshError(f"malformed vertex at line {lineno}: {exc}") from exc
            elif tag == "f":
                corners = parts[1:]
                if len(corners) != 3:
                    raise MeshError(f"non-triangular face at line {lineno}")
                try:
                    idx = [int(tok.split("/")[0]) for tok in corners]
                except ValueError as exc:
                    raise MeshError(f"malformed face at line {lineno}: {exc}") from exc
                faces.append([i - 1 for i in idx])
            # other record types (vn, vt, o, g, s, usemtl ...) are ignored
    if not vertices:
        raise MeshError("OBJ file contains no vertices")
    return TriangleMesh(np.asarray(vertices), np.asarray(faces, dtype=np.int64))


# ----------------------------------------------------------------------
# primitive constructors (used by tests, demos and the self-consistency fit)


def icosahedron() -> TriangleMesh:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return TriangleMesh(verts, faces)


def icosphere(subdivisions: int = 1, radius: float = 1.0) -> TriangleMesh:
    """Icosahedron subdivided `subdivisions` times, vertices pushed to the
    sphere of the given radius."""
    mesh = icosahedron()
    verts = mesh.vertices
    faces = mesh.faces
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}
        new_verts = [verts]
        next_id = len(verts)

        def midpoint(i, j):
            nonlocal next_id
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                m = 0.5 * (verts[i] + verts[j])
                new_verts.append(m[None, :])
                cache[key] = next_id
                next_id += 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
        verts = np.vstack(new_verts)
        faces = np.asarray(new_faces, dtype=np.int64)
    verts = radius * verts / np.linalg.norm(verts, axis=1, keepdims=True)
    return TriangleMesh(verts, faces)


def grid_strip(columns: int, rows: int = 2, spacing: float = 1.0) -> TriangleMesh:
    """Planar strip of `columns` x `rows` vertices triangulated into
    2*(columns-1)*(rows-1) faces; used by deformation tests."""
    xs = np.arange(columns) * spacing
    ys = np.arange(rows) * spacing
    verts = np.array([[x, y, 0.0] for y in ys for x in xs])
    faces = []
    for r in range(rows - 1):
        for cidx in range(columns - 1):
            v00 = r * columns + cidx
            v10 = v00 + 1
            v01 = v00 + columns
            v11 = v01 + 1
            faces += [[v00, v10, v11], [v00, v11, v01]]
    return TriangleMesh(verts, np.asarray(faces, dtype=np.int64))
