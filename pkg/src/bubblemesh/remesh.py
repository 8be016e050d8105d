"""Re-meshing of a flattened mesh: bubble reconstruction at the vertices,
gap filling, boundary-region quantity control, relaxation, triangulation.

Bubble radii are reconstructed from the flat edge lengths, so they inherit
the conformal scale factors of the flattening and the re-mesh preserves the
original mesh's size distribution.
"""
from __future__ import annotations

import numpy as np

from .delaunay import delaunay_triangulate
from .mesh import MeshError, PlanarMesh
from .packing import (BOUNDARY, INTERIOR_ANCHOR, Bubble, PackingDomain,
                      pack_interior_quadtree)
from .relaxation import (ConvergenceTrace, DynamicsParams, ForceParams,
                         relax_until_converged)


def reconstruct_boundary_bubbles(flat: PlanarMesh) -> list[Bubble]:
    """One fixed bubble per boundary vertex, radius (l_prev + l_next)/4.

    Consecutive reconstructed bubbles are exactly tangent when the boundary
    edge lengths are uniform.
    """
    loop = flat.boundary_loop
    if len(loop) < 3:
        raise MeshError("boundary loop needs at least 3 vertices")
    pts = flat.vertices[loop]
    seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    if np.any(seg <= 0.0):
        raise MeshError("zero-length boundary edge")
    out = []
    n = len(loop)
    for k in range(n):
        l_prev = seg[(k - 1) % n]
        l_next = seg[k]
        out.append(Bubble(float(pts[k, 0]), float(pts[k, 1]),
                          float((l_prev + l_next) / 4.0), BOUNDARY))
    return out


def reconstruct_interior_bubbles(flat: PlanarMesh) -> list[Bubble]:
    """One mobile fixed-radius anchor per interior vertex.

    The radius is half the inverse-length-weighted average of the incident
    edge lengths, which keeps short edges authoritative and stops long
    stretched edges from inflating the bubble.
    """
    on_boundary = set()
    for loop in flat.boundary_loops():
        on_boundary.update(loop)
    neighbors = flat.vertex_neighbors()
    out = []
    for i in range(flat.n_vertices):
        if i in on_boundary:
            continue
        nbrs = neighbors[i]
        if not nbrs:
            raise MeshError(f"isolated vertex {i}")
        lens = np.linalg.norm(flat.vertices[nbrs] - flat.vertices[i], axis=1)
        if np.any(lens <= 0.0):
            raise MeshError(f"zero-length edge at vertex {i}")
        inv = 1.0 / lens
        weights = inv / inv.sum()
        radius = 0.5 * float((weights * lens).sum())
        out.append(Bubble(float(flat.vertices[i, 0]), float(flat.vertices[i, 1]),
                          radius, INTERIOR_ANCHOR))
    return out


def anchor_sizing(anchors: list[Bubble]):
    """Inverse-square-distance interpolation of anchor radii as a sizing field."""
    ax = np.array([a.x for a in anchors])
    ay = np.array([a.y for a in anchors])
    ar = np.array([a.radius for a in anchors])

    def bound(x: float, y: float) -> float:
        d2 = (ax - x) ** 2 + (ay - y) ** 2
        j = int(np.argmin(d2))
        if d2[j] < 1e-24:
            return float(ar[j])
        w = 1.0 / d2
        return float((w * ar).sum() / w.sum())

    return bound


def flat_domain(flat: PlanarMesh, anchors: list[Bubble]) -> PackingDomain:
    """Packing domain bounded by the flat mesh's boundary loop."""
    loop = flat.boundary_loop
    return PackingDomain(outer=flat.vertices[loop], holes=[],
                         sizing=anchor_sizing(anchors))


# fillers may brush anchors lightly; real gaps admit a near-tangent bubble
FILL_MAX_ANCHOR_OVERLAP = 0.4


def fill_gaps(flat: PlanarMesh, anchors: list[Bubble]) -> list[Bubble]:
    """Mobile bubbles filling the stretch-induced gaps between anchors."""
    return pack_interior_quadtree(flat_domain(flat, anchors), anchors,
                                  max_anchor_overlap=FILL_MAX_ANCHOR_OVERLAP)


def remesh_planar(flat: PlanarMesh, qc_threshold: float = 1.0,
                  dyn: DynamicsParams | None = None,
                  force: ForceParams | None = None,
                  seed: int = 0) -> tuple[PlanarMesh, ConvergenceTrace]:
    """Full planar re-mesh: reconstruct, fill, prune near anchors, relax,
    triangulate. Boundary bubbles never move; interior anchors move with
    fixed radii."""
    boundary = reconstruct_boundary_bubbles(flat)
    interior = reconstruct_interior_bubbles(flat)
    anchors = boundary + interior
    domain = flat_domain(flat, anchors)
    bubbles = anchors + fill_gaps(flat, anchors)

    if force is None:
        r_min = min(b.radius for b in bubbles)
        force = ForceParams(k=1.0, f0=r_min)
    if dyn is None:
        r_mean = float(np.mean([b.radius for b in bubbles]))
        dyn = DynamicsParams(force_tol=0.01 * force.k * r_mean)

    relaxed, trace = relax_until_converged(
        bubbles, domain, force=force, dyn=dyn,
        strategy="new-qc", qc_threshold=qc_threshold, seed=seed)
    mesh = delaunay_triangulate(relaxed, domain)
    return mesh, trace
