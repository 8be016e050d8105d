"""Indexed triangle meshes, validation, quality metrics and file I/O.

Meshes are stored as a vertex array plus face index triples; adjacency is
derived on demand and is deterministic in face order. Instances are treated
as immutable after construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import polygon_signed_area

DEGENERATE_AREA_FACTOR = 1e-14  # relative to squared bbox diagonal
ANGLE_BUCKET_EDGES = (0.0, 15.0, 30.0, 45.0, 60.0)


class MeshError(Exception):
    """Invalid mesh topology, geometry or file contents."""


@dataclass
class ValidationResult:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


@dataclass
class MeshQualityReport:
    triangle_count: int
    min_angle: float
    max_angle: float
    min_angle_histogram: list[int]

    def fraction_at_least(self, degrees: float) -> float:
        """Fraction of triangles whose minimum angle is >= the given value.

        Only meaningful at bucket edges (15, 30, 45)."""
        start = ANGLE_BUCKET_EDGES.index(degrees)
        return sum(self.min_angle_histogram[start:]) / self.triangle_count

    def to_text(self) -> str:
        lines = [
            f"triangles:  {self.triangle_count}",
            f"min angle:  {self.min_angle:.4f}",
            f"max angle:  {self.max_angle:.4f}",
            "min-angle distribution:",
        ]
        labels = ["0-15", "15-30", "30-45", "45-60"]
        for label, count in zip(labels, self.min_angle_histogram):
            lines.append(f"  {label:>5}: {count}")
        return "\n".join(lines) + "\n"


class _MeshBase:
    """Shared topology queries for 2D and 3D triangle meshes."""

    vertices: np.ndarray
    faces: np.ndarray

    def _check_indices(self):
        if len(self.faces) and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise MeshError("face index out of range")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def undirected_edges(self) -> np.ndarray:
        """(E,2) array of unique undirected edges, i<j, lexicographically sorted."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def directed_edge_set(self) -> set[tuple[int, int]]:
        out = set()
        for a, b, c in self.faces:
            out.add((int(a), int(b)))
            out.add((int(b), int(c)))
            out.add((int(c), int(a)))
        return out

    def boundary_loops(self) -> list[list[int]]:
        """All boundary loops, longest first, each rotated to start at its
        smallest vertex index. Follows face orientation."""
        directed = self.directed_edge_set()
        boundary = [(a, b) for (a, b) in directed if (b, a) not in directed]
        succ: dict[int, int] = {}
        for a, b in boundary:
            if a in succ:
                raise MeshError(f"non-manifold boundary at vertex {a}")
            succ[a] = b
        loops = []
        remaining = set(succ)
        while remaining:
            start = min(remaining)
            loop = [start]
            remaining.discard(start)
            cur = succ[start]
            while cur != start:
                loop.append(cur)
                remaining.discard(cur)
                cur = succ[cur]
            k = loop.index(min(loop))
            loops.append(loop[k:] + loop[:k])
        loops.sort(key=lambda lp: (-len(lp), lp[0]))
        return loops

    @property
    def boundary_loop(self) -> list[int]:
        """The single boundary loop (longest one if the mesh is not a disk)."""
        loops = self.boundary_loops()
        if not loops:
            raise MeshError("mesh has no boundary")
        return loops[0]

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.undirected_edges()) + self.n_faces

    def vertex_neighbors(self) -> list[list[int]]:
        """Sorted neighbor lists per vertex."""
        nbrs: list[set[int]] = [set() for _ in range(self.n_vertices)]
        for a, b in self.undirected_edges():
            nbrs[a].add(int(b))
            nbrs[b].add(int(a))
        return [sorted(s) for s in nbrs]

    def face_corner_angles(self) -> np.ndarray:
        """(F,3) corner angles in degrees, corner k opposite edge k."""
        v = self.vertices[self.faces]
        angles = np.empty((len(self.faces), 3))
        for k in range(3):
            a = v[:, k]
            b = v[:, (k + 1) % 3]
            c = v[:, (k + 2) % 3]
            e1 = b - a
            e2 = c - a
            n1 = np.linalg.norm(e1, axis=1)
            n2 = np.linalg.norm(e2, axis=1)
            cosang = np.einsum("ij,ij->i", e1, e2) / (n1 * n2)
            angles[:, k] = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
        return angles

    def face_areas(self) -> np.ndarray:
        v = self.vertices[self.faces]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        if v.shape[2] == 2:
            return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)

    def bbox_diagonal(self) -> float:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.linalg.norm(hi - lo))


@dataclass
class TriangleMesh(_MeshBase):
    """Indexed 3D triangle mesh; `uv` optionally stores per-vertex parametric
    coordinates for meshes generated from a parametric surface."""

    vertices: np.ndarray
    faces: np.ndarray
    uv: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.uv is not None:
            self.uv = np.asarray(self.uv, dtype=float).reshape(-1, 2)
            if len(self.uv) != len(self.vertices):
                raise MeshError("uv array length does not match vertex count")
        self._check_indices()


@dataclass
class PlanarMesh(_MeshBase):
    """Indexed 2D triangle mesh with all faces counterclockwise."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        self._check_indices()

    def signed_areas(self) -> np.ndarray:
        v = self.vertices[self.faces]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def validate_disk_topology(mesh: _MeshBase) -> ValidationResult:
    """Accept iff the mesh is an edge-manifold disk: V - E + F = 1, one boundary loop."""
    if mesh.n_faces == 0:
        return ValidationResult(False, "mesh has no faces")
    directed = mesh.directed_edge_set()
    if len(directed) != 3 * mesh.n_faces:
        return ValidationResult(False, "duplicate directed edge (inconsistent orientation or repeated face)")
    counts: dict[tuple[int, int], int] = {}
    for a, b in directed:
        key = (a, b) if a < b else (b, a)
        counts[key] = counts.get(key, 0) + 1
    if any(c > 2 for c in counts.values()):
        bad = next(k for k, c in counts.items() if c > 2)
        return ValidationResult(False, f"non-manifold edge {bad} (more than two incident faces)")
    try:
        loops = mesh.boundary_loops()
    except MeshError as exc:
        return ValidationResult(False, str(exc))
    chi = mesh.euler_characteristic()
    if len(loops) != 1:
        return ValidationResult(
            False, f"found {len(loops)} boundary loops, expected exactly 1 "
                   f"(Euler characteristic {chi})")
    if chi != 1:
        return ValidationResult(False, f"Euler characteristic is {chi}, expected 1 (disk)")
    return ValidationResult(True)


def quality_report(mesh: _MeshBase) -> MeshQualityReport:
    """Per-face minimum-angle statistics and the 15-degree bucket histogram."""
    if mesh.n_faces == 0:
        raise MeshError("empty mesh")
    areas = mesh.face_areas()
    threshold = DEGENERATE_AREA_FACTOR * mesh.bbox_diagonal() ** 2
    bad = np.flatnonzero(areas < threshold)
    if len(bad):
        raise MeshError(f"degenerate face {int(bad[0])} (area {areas[bad[0]]:.3e})")
    angles = mesh.face_corner_angles()
    min_angles = angles.min(axis=1)
    buckets = np.clip((min_angles // 15.0).astype(int), 0, 3)
    hist = [int(np.sum(buckets == k)) for k in range(4)]
    return MeshQualityReport(
        triangle_count=mesh.n_faces,
        min_angle=float(min_angles.min()),
        max_angle=float(angles.max()),
        min_angle_histogram=hist,
    )


def hausdorff_estimate(mesh: TriangleMesh, surface, sample_density: int = 4) -> float:
    """One-sided distance estimate from the flat triangles to the smooth surface.

    Samples every face on the nested barycentric lattices of order 1..density;
    at each sample, compares the flat-triangle position against the exact
    surface position at the interpolated parametric coordinates. The estimate
    is monotone non-decreasing in sample_density.
    """
    if mesh.uv is None:
        raise MeshError("mesh has no stored parametric coordinates")
    if sample_density < 1:
        raise ValueError("sample_density must be >= 1")
    tri_xyz = mesh.vertices[mesh.faces]   # (F,3,3)
    tri_uv = mesh.uv[mesh.faces]          # (F,3,2)
    worst = 0.0
    for order in range(1, sample_density + 1):
        weights = []
        for i in range(order + 1):
            for j in range(order + 1 - i):
                k = order - i - j
                weights.append((i / order, j / order, k / order))
        w = np.asarray(weights)           # (S,3)
        flat = np.einsum("sk,fkd->fsd", w, tri_xyz)
        uv = np.einsum("sk,fkd->fsd", w, tri_uv)
        exact = surface.position(uv[..., 0], uv[..., 1])
        d = np.linalg.norm(flat - exact, axis=-1)
        worst = max(worst, float(d.max()))
    return worst


# ---------------------------------------------------------------------------
# File I/O: OBJ and OFF readers/writers, SVG writer for planar meshes.

def load_mesh(path) -> TriangleMesh:
    path = Path(path)
    text = path.read_text()
    ext = path.suffix.lower()
    if ext == ".obj":
        return _parse_obj(text)
    if ext == ".off":
        return _parse_off(text)
    raise MeshError(f"unsupported mesh format '{ext}' (expected .obj or .off)")


def _parse_obj(text: str) -> TriangleMesh:
    verts = []
    faces = []
    for ln, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            if len(parts) < 4:
                raise MeshError(f"line {ln}: malformed vertex record")
            verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            if len(idx) != 3:
                raise MeshError(f"line {ln}: non-triangular face")
            faces.append([i - 1 for i in idx])
    if not verts:
        raise MeshError("no vertices in OBJ file")
    return TriangleMesh(np.asarray(verts), np.asarray(faces, dtype=np.int64))


def _parse_off(text: str) -> TriangleMesh:
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise MeshError("missing OFF header")
    pos = 1
    try:
        nv, nf = int(tokens[pos]), int(tokens[pos + 1])
        pos += 3  # skip edge count
        verts = np.array(tokens[pos:pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            if k != 3:
                raise MeshError("non-triangular face")
            faces.append([int(t) for t in tokens[pos + 1:pos + 4]])
            pos += 1 + k
    except (ValueError, IndexError) as exc:
        raise MeshError(f"malformed OFF file: {exc}") from exc
    return TriangleMesh(verts, np.asarray(faces, dtype=np.int64))


def _vertex_rows_3d(mesh) -> np.ndarray:
    v = mesh.vertices
    if v.shape[1] == 2:
        v = np.column_stack([v, np.zeros(len(v))])
    return v


def save_mesh(path, mesh) -> None:
    """Write OBJ or OFF (by extension); planar meshes are written with z=0."""
    path = Path(path)
    v = _vertex_rows_3d(mesh)
    ext = path.suffix.lower()
    lines = []
    if ext == ".obj":
        for p in v:
            lines.append(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
        for f in mesh.faces:
            lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    elif ext == ".off":
        lines.append("OFF")
        lines.append(f"{len(v)} {len(mesh.faces)} 0")
        for p in v:
            lines.append(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
        for f in mesh.faces:
            lines.append(f"3 {f[0]} {f[1]} {f[2]}")
    else:
        raise MeshError(f"unsupported mesh format '{ext}' (expected .obj or .off)")
    path.write_text("\n".join(lines) + "\n")


def write_svg(path, mesh: PlanarMesh, stroke_width: float | None = None) -> None:
    """Render the edges of a planar mesh as SVG line segments."""
    path = Path(path)
    v = mesh.vertices
    lo = v.min(axis=0)
    hi = v.max(axis=0)
    span = hi - lo
    if stroke_width is None:
        stroke_width = 0.002 * max(float(span[0]), float(span[1]), 1e-12)
    # SVG y axis points down; flip about the bbox midline so the image is upright
    ymid = 0.5 * (lo[1] + hi[1])
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{lo[0]:.9g} {lo[1]:.9g} {span[0]:.9g} {span[1]:.9g}">',
        f'<g stroke="black" stroke-width="{stroke_width:.9g}" stroke-linecap="round">',
    ]
    for a, b in mesh.undirected_edges():
        pa, pb = v[a], v[b]
        out.append(
            f'<line x1="{pa[0]:.9g}" y1="{2 * ymid - pa[1]:.9g}" '
            f'x2="{pb[0]:.9g}" y2="{2 * ymid - pb[1]:.9g}"/>'
        )
    out.append("</g></svg>")
    path.write_text("\n".join(out) + "\n")


def planar_orientation_residual(mesh: PlanarMesh) -> float:
    """Relative difference between summed signed face areas and the shoelace
    area of the boundary loops (zero for a consistently oriented mesh)."""
    total = float(mesh.signed_areas().sum())
    loop_area = sum(polygon_signed_area(mesh.vertices[lp]) for lp in mesh.boundary_loops())
    scale = max(abs(total), abs(loop_area), 1e-300)
    return abs(total - loop_area) / scale
