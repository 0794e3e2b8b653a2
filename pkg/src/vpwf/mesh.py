"""Closed oriented triangle meshes: storage, validation, elementary geometry.

A mesh is an indexed face set: an (n, 3) float64 array of vertex positions
and an (m, 3) int array of vertex index triples.  Face winding is
counter-clockwise as seen from the side the unit normal points away from;
generators in this package wind faces so the normal points toward the
bounded component ("inward"), which makes the signed volume positive.

Meshes are immutable after construction (the arrays are marked read-only);
every flow step builds a successor mesh instead of mutating in place, so a
mesh can be shared freely across threads for read-only analysis.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DanglingVertexError,
    DegenerateFaceError,
    InconsistentOrientationError,
    NonManifoldError,
)

# Degenerate faces are rejected relative to the squared bounding-box
# diagonal; they are never repaired, so downstream operators stay well-posed.
AREA_FLOOR_SCALE = 1e-12


def cross_rows(a, b):
    """Row-wise cross product, faster than np.cross for (n, 3) arrays."""
    out = np.empty_like(a)
    a0, a1, a2 = a[:, 0], a[:, 1], a[:, 2]
    b0, b1, b2 = b[:, 0], b[:, 1], b[:, 2]
    out[:, 0] = a1 * b2 - a2 * b1
    out[:, 1] = a2 * b0 - a0 * b2
    out[:, 2] = a0 * b1 - a1 * b0
    return out


def dot_rows(a, b):
    """Row-wise dot product of (n, 3) arrays."""
    return a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1] + a[:, 2] * b[:, 2]


@dataclass(frozen=True)
class MeshTopologySummary:
    """Counts and derived topological invariants of a closed oriented mesh."""

    vertex_count: int
    edge_count: int
    face_count: int
    euler_characteristic: int
    genus: int


class TriMesh:
    """Indexed triangle mesh with derived edge table built on demand.

    Parameters
    ----------
    positions : array_like
        (n, 3) vertex coordinates.
    faces : array_like
        (m, 3) vertex index triples, consistently wound.

    Notes
    -----
    Construction only checks array shapes; call :func:`validate` for the
    full closedness/orientation/degeneracy check.  The arrays are adopted
    without copying when already contiguous float64/int64 and are marked
    read-only; pass a copy if you need to keep writing to yours.
    """

    def __init__(self, positions, faces):
        positions = np.ascontiguousarray(positions, dtype=np.float64)
        faces = np.ascontiguousarray(faces, dtype=np.int64)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ValueError("positions must be an (n, 3) array")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValueError("faces must be an (m, 3) array")
        positions.setflags(write=False)
        faces.setflags(write=False)
        self.positions = positions
        self.faces = faces
        self._edges = None
        self._topology = None
        self._area_floor = None
        self._conn = None  # operator index structures, built by ddg

    @property
    def vertex_count(self):
        return self.positions.shape[0]

    @property
    def face_count(self):
        return self.faces.shape[0]

    def with_positions(self, positions):
        """Successor mesh with identical connectivity and new coordinates."""
        out = TriMesh(positions, self.faces)
        # connectivity-derived caches stay valid
        out._edges = self._edges
        out._topology = self._topology
        out._conn = self._conn
        return out

    def edges(self):
        """Return the (e, 2) array of undirected edges, i < j, sorted.

        Built on demand and cached; connectivity never changes behind the
        mesh's back, so the cache cannot go stale.
        """
        if self._edges is None:
            f = self.faces
            pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
            pairs.sort(axis=1)
            self._edges = np.unique(pairs, axis=0)
        return self._edges

    def bounding_box_diagonal(self):
        ext = self.positions.max(axis=0) - self.positions.min(axis=0)
        return float(np.linalg.norm(ext))

    def area_floor(self):
        """Face-area degeneracy floor for this mesh's scale (cached)."""
        if self._area_floor is None:
            diag = self.bounding_box_diagonal()
            self._area_floor = AREA_FLOOR_SCALE * (diag * diag if diag else 1.0)
        return self._area_floor

    def topology(self):
        """Validated topology summary (cached)."""
        if self._topology is None:
            self._topology = validate(self)
        return self._topology


def face_corner_positions(mesh):
    """Gather the three corner position arrays (each (m, 3)) of every face."""
    corners = mesh.positions[mesh.faces.reshape(-1)].reshape(-1, 3, 3)
    return corners[:, 0, :], corners[:, 1, :], corners[:, 2, :]


def face_areas_normals(mesh, check=True):
    """Areas and unit winding normals of all faces.

    Returns
    -------
    areas : (m,) array
    normals : (m, 3) array
        Unit normals following the face winding (right-hand rule).

    Raises
    ------
    DegenerateFaceError
        If ``check`` and any area is below the mesh's degeneracy floor.
    """
    p0, p1, p2 = face_corner_positions(mesh)
    cross = cross_rows(p1 - p0, p2 - p0)
    double_area = np.sqrt(dot_rows(cross, cross))
    areas = 0.5 * double_area
    if check:
        floor = mesh.area_floor()
        if np.any(areas < floor):
            worst = int(np.argmin(areas))
            raise DegenerateFaceError(
                "face %d has area %.3e below floor %.3e"
                % (worst, areas[worst], floor)
            )
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = cross / np.where(double_area > 0.0, double_area, 1.0)[:, None]
    return areas, normals


def face_area_normal(mesh, face_index):
    """Area and unit winding normal of one face.

    The area is half the cross-product magnitude of two edge vectors; the
    normal direction follows the winding.
    """
    p = mesh.positions
    i, j, k = mesh.faces[face_index]
    cross = np.cross(p[j] - p[i], p[k] - p[i])
    double_area = float(np.linalg.norm(cross))
    area = 0.5 * double_area
    if area < mesh.area_floor():
        raise DegenerateFaceError(
            "face %d has area %.3e below floor %.3e"
            % (face_index, area, mesh.area_floor())
        )
    return area, cross / double_area


def shortest_edge_length(mesh):
    """Minimum edge length (every edge appears among the face edges)."""
    p0, p1, p2 = face_corner_positions(mesh)
    l0 = np.linalg.norm(p1 - p0, axis=1)
    l1 = np.linalg.norm(p2 - p1, axis=1)
    l2 = np.linalg.norm(p0 - p2, axis=1)
    return float(min(l0.min(), l1.min(), l2.min()))


def face_quality(mesh):
    """Per-face shape quality 4*sqrt(3)*area / sum of squared edge lengths.

    Equals 1 for equilateral triangles and tends to 0 for slivers.
    """
    p0, p1, p2 = face_corner_positions(mesh)
    areas, _ = face_areas_normals(mesh, check=False)
    ssq = (
        np.sum((p1 - p0) ** 2, axis=1)
        + np.sum((p2 - p1) ** 2, axis=1)
        + np.sum((p0 - p2) ** 2, axis=1)
    )
    return 4.0 * np.sqrt(3.0) * areas / ssq


def validate(mesh):
    """Check all mesh invariants and return a :class:`MeshTopologySummary`.

    The checks, in order: indices in range and every vertex referenced by at
    least three faces; every undirected edge incident to exactly two faces
    (closed surface); the two incident faces traverse the edge in opposite
    directions (consistent orientation); no face area below the degeneracy
    floor.  Pure function: the mesh is not modified.

    Raises
    ------
    DanglingVertexError, NonManifoldError, InconsistentOrientationError,
    DegenerateFaceError
    """
    f = mesh.faces
    n = mesh.vertex_count
    if f.size == 0:
        raise NonManifoldError("mesh has no faces")
    if f.min() < 0 or f.max() >= n:
        raise DanglingVertexError(
            "face references vertex index outside [0, %d)" % n
        )
    if np.any(f[:, 0] == f[:, 1]) or np.any(f[:, 1] == f[:, 2]) or np.any(
        f[:, 2] == f[:, 0]
    ):
        raise DegenerateFaceError("face with repeated vertex indices")
    refs = np.bincount(f.reshape(-1), minlength=n)
    if np.any(refs < 3):
        bad = int(np.argmin(refs))
        raise DanglingVertexError(
            "vertex %d referenced by %d < 3 faces" % (bad, refs[bad])
        )

    directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    # encode each directed edge as a single integer for fast counting
    code = directed[:, 0] * np.int64(n) + directed[:, 1]
    code_sorted = np.sort(code)
    dup = code_sorted[1:] == code_sorted[:-1]
    if np.any(dup):
        i, j = divmod(int(code_sorted[:-1][dup][0]), n)
        raise InconsistentOrientationError(
            "directed edge (%d, %d) traversed twice in the same direction"
            % (i, j)
        )
    lo = np.minimum(directed[:, 0], directed[:, 1])
    hi = np.maximum(directed[:, 0], directed[:, 1])
    ucode = lo * np.int64(n) + hi
    uniq, counts = np.unique(ucode, return_counts=True)
    if np.any(counts != 2):
        bad = uniq[counts != 2][0]
        i, j = divmod(int(bad), n)
        raise NonManifoldError(
            "edge (%d, %d) incident to %d faces (expected 2)"
            % (i, j, int(counts[counts != 2][0]))
        )

    face_areas_normals(mesh)  # raises DegenerateFaceError

    edge_count = uniq.size
    face_count = f.shape[0]
    chi = n - edge_count + face_count
    genus = (2 - chi) // 2
    return MeshTopologySummary(
        vertex_count=n,
        edge_count=int(edge_count),
        face_count=int(face_count),
        euler_characteristic=int(chi),
        genus=int(genus),
    )
