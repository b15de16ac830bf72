"""Triangulated cross-sections and their normalization.

A cross-section lives in the (x2, x3) plane.  All downstream theory assumes
the normalized placement

    area = 1,   int x2 = int x3 = 0,   int x2 x3 = 0,

with the principal-axis convention I2 >= I3 and the first principal axis
having a positive x2-component (ties broken toward positive x3).  Integrals
use the 3-point edge-midpoint rule per triangle, which is exact for
quadratics - every moment the theory needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError, MeshError

__all__ = [
    "CrossSection",
    "SectionMoments",
    "SimilarityMap",
    "moments",
    "normalize",
    "refine",
    "disc",
    "square",
    "rectangle",
    "polygon",
]


@dataclass(frozen=True)
class SectionMoments:
    area: float
    I2: float
    I3: float
    I23: float
    muS: float  # I2 + I3 by definition


@dataclass(frozen=True)
class SimilarityMap:
    """x -> scale * rotation @ (x - translation); proper rotation, det = +1."""

    scale: float
    rotation: np.ndarray  # (2, 2)
    translation: np.ndarray  # (2,)

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return self.scale * (np.asarray(pts, dtype=float) - self.translation) @ self.rotation.T


class CrossSection:
    """Conforming triangle mesh of a plane domain.

    Validation on construction: triangle indices in range, strictly positive
    orientation (CCW, nonzero area), no vertex unused, and conformity (every
    directed edge occurs at most once, every undirected edge in at most two
    triangles).
    """

    def __init__(self, vertices: np.ndarray, triangles: np.ndarray):
        vertices = np.ascontiguousarray(np.asarray(vertices, dtype=float))
        triangles = np.ascontiguousarray(np.asarray(triangles, dtype=np.int64))
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError(f"vertices must be (n, 2), got {vertices.shape}")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError(f"triangles must be (m, 3), got {triangles.shape}")
        if not np.all(np.isfinite(vertices)):
            raise MeshError("non-finite vertex coordinates")
        if triangles.min(initial=0) < 0 or triangles.max(initial=-1) >= len(vertices):
            raise MeshError("triangle index out of range")
        self.vertices = vertices
        self.triangles = triangles
        self._validate()

    # -- geometry ----------------------------------------------------------

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def quad_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge-midpoint quadrature: points (m, 3, 2) and weights (m, 3)."""
        p = self.vertices[self.triangles]
        mids = 0.5 * (p + np.roll(p, -1, axis=1))
        w = np.repeat(self.signed_areas()[:, None] / 3.0, 3, axis=1)
        return mids, w

    def integrate(self, f) -> float:
        """Integral of f(x2, x3) (vectorized over point arrays)."""
        pts, w = self.quad_points()
        return float(np.sum(w * f(pts[..., 0], pts[..., 1])))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    # -- validation ---------------------------------------------------------

    def _validate(self):
        areas = self.signed_areas()
        scale = max(np.abs(self.vertices).max(initial=0.0), 1.0)
        bad = np.nonzero(areas <= 1e-14 * scale**2)[0]
        if bad.size:
            raise MeshError(
                f"degenerate or negatively oriented triangles at indices {bad.tolist()[:10]}"
            )
        used = np.zeros(len(self.vertices), dtype=bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            raise MeshError(
                f"isolated vertices at indices {np.nonzero(~used)[0].tolist()[:10]}"
            )
        tri = self.triangles
        edges = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        keys = edges[:, 0] * np.int64(len(self.vertices)) + edges[:, 1]
        uniq, counts = np.unique(keys, return_counts=True)
        if np.any(counts > 1):
            k = int(uniq[np.argmax(counts > 1)])
            a, b = divmod(k, len(self.vertices))
            raise MeshError(f"duplicate directed edge ({a}, {b}): mesh not conforming")

    # -- serialization ------------------------------------------------------

    def to_json(self, path: str) -> None:
        payload = {
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str) -> "CrossSection":
        with open(path) as fh:
            payload = json.load(fh)
        try:
            return cls(np.asarray(payload["vertices"]), np.asarray(payload["triangles"]))
        except KeyError as exc:
            raise InputError(f"mesh file missing key {exc}") from None


# ---------------------------------------------------------------------------
# moments and normalization


def moments(section: CrossSection) -> SectionMoments:
    pts, w = section.quad_points()
    x2 = pts[..., 0]
    x3 = pts[..., 1]
    area = float(np.sum(w))
    I2 = float(np.sum(w * x2 * x2))
    I3 = float(np.sum(w * x3 * x3))
    I23 = float(np.sum(w * x2 * x3))
    return SectionMoments(area=area, I2=I2, I3=I3, I23=I23, muS=I2 + I3)


def first_moments(section: CrossSection) -> tuple[float, float]:
    pts, w = section.quad_points()
    return float(np.sum(w * pts[..., 0])), float(np.sum(w * pts[..., 1]))


NORMALIZED_TOL = {"area": 1e-12, "center": 1e-12, "I23": 1e-10}


def check_normalized(section: CrossSection) -> None:
    """Raise InputError unless the section satisfies the normalization."""
    m = moments(section)
    c2, c3 = first_moments(section)
    if abs(m.area - 1.0) > NORMALIZED_TOL["area"]:
        raise InputError(f"section not normalized: area = {m.area}")
    if abs(c2) > NORMALIZED_TOL["center"] or abs(c3) > NORMALIZED_TOL["center"]:
        raise InputError(f"section not normalized: centroid = ({c2}, {c3})")
    if abs(m.I23) > NORMALIZED_TOL["I23"]:
        raise InputError(f"section not normalized: I23 = {m.I23}")


def normalize(section: CrossSection) -> tuple[CrossSection, SimilarityMap]:
    """Center, rotate to principal axes, and scale to unit area.

    Deterministic conventions: I2 >= I3 after rotation; the first principal
    axis has positive x2-component (positive x3 when the x2-component
    vanishes).  Returns the new section and the applied similarity map.
    """
    m = moments(section)
    if m.area <= 0:
        raise MeshError("section has nonpositive area")
    c2, c3 = first_moments(section)
    c = np.array([c2 / m.area, c3 / m.area])

    shifted = CrossSection(section.vertices - c, section.triangles)
    mc = moments(shifted)
    if abs(mc.I23) <= 1e-13 * mc.muS and mc.I2 >= mc.I3 - 1e-13 * mc.muS:
        # already principal within round-off (includes the degenerate
        # I2 == I3 case, where any rotation works): identity for determinism
        R = np.eye(2)
    else:
        M = np.array([[mc.I2, mc.I23], [mc.I23, mc.I3]])
        evals, evecs = np.linalg.eigh(M)  # ascending
        u = evecs[:, 1]  # axis of the larger second moment
        if u[0] < 0 or (abs(u[0]) < 1e-14 and u[1] < 0):
            u = -u
        R = np.array([[u[0], u[1]], [-u[1], u[0]]])
    s = 1.0 / np.sqrt(m.area)
    tmap = SimilarityMap(scale=s, rotation=R, translation=c)
    out = CrossSection(tmap.apply(section.vertices), section.triangles)
    check_normalized(out)
    return out, tmap


def _center_and_scale(vertices: np.ndarray, triangles: np.ndarray) -> CrossSection:
    """Normalization without rotation, for symmetric generator meshes."""
    sec = CrossSection(vertices, triangles)
    m = moments(sec)
    c2, c3 = first_moments(sec)
    v = (sec.vertices - np.array([c2 / m.area, c3 / m.area])) / np.sqrt(m.area)
    out = CrossSection(v, triangles)
    check_normalized(out)
    return out


# ---------------------------------------------------------------------------
# generators


def disc(rings: int) -> CrossSection:
    """Unit-area polygonal disc from hexagonal rings; 6*rings^2 triangles."""
    if rings < 1:
        raise InputError("disc needs rings >= 1")
    verts = [(0.0, 0.0)]
    start = [1]
    for i in range(1, rings + 1):
        ang = 2.0 * np.pi * np.arange(6 * i) / (6 * i)
        r = i / rings
        verts.extend(zip(r * np.cos(ang), r * np.sin(ang)))
        start.append(start[-1] + 6 * i)
    tris = []
    # innermost fan
    for j in range(6):
        tris.append((0, 1 + j, 1 + (j + 1) % 6))
    # ring strips, sector by sector
    for i in range(2, rings + 1):
        n_in, n_out = 6 * (i - 1), 6 * i
        si, so = start[i - 2], start[i - 1]
        for s in range(6):
            inner = [si + (s * (i - 1) + j) % n_in for j in range(i)]
            outer = [so + (s * i + j) % n_out for j in range(i + 1)]
            for j in range(i):
                tris.append((outer[j], outer[j + 1], inner[j]))
            for j in range(i - 1):
                tris.append((inner[j], outer[j + 1], inner[j + 1]))
    return _center_and_scale(np.asarray(verts), np.asarray(tris))


def rectangle(width: float, height: float, nx: int, ny: int) -> CrossSection:
    """Unit-area rectangle mesh, alternating diagonals, long side along x2."""
    if nx < 1 or ny < 1:
        raise InputError("rectangle needs nx, ny >= 1")
    if width <= 0 or height <= 0:
        raise InputError("rectangle needs positive width and height")
    if width < height:  # convention I2 >= I3
        width, height, nx, ny = height, width, ny, nx
    xs = np.linspace(-width / 2, width / 2, nx + 1)
    ys = np.linspace(-height / 2, height / 2, ny + 1)
    xv, yv = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([xv.ravel(), yv.ravel()])

    def nid(ix, iy):
        return ix * (ny + 1) + iy

    tris = []
    for ix in range(nx):
        for iy in range(ny):
            bl, br = nid(ix, iy), nid(ix + 1, iy)
            tl, tr = nid(ix, iy + 1), nid(ix + 1, iy + 1)
            if (ix + iy) % 2 == 0:
                tris.append((bl, br, tr))
                tris.append((bl, tr, tl))
            else:
                tris.append((bl, br, tl))
                tris.append((br, tr, tl))
    return _center_and_scale(verts, np.asarray(tris))


def square(n: int) -> CrossSection:
    """Unit square mesh with 2*n^2 triangles."""
    return rectangle(1.0, 1.0, n, n)


def polygon(outline: np.ndarray, refinements: int = 0) -> CrossSection:
    """Fan-triangulated simple polygon (star-shaped about its vertex mean),
    uniformly refined, then fully normalized (rotation included)."""
    outline = np.asarray(outline, dtype=float)
    if outline.ndim != 2 or outline.shape[1] != 2 or len(outline) < 3:
        raise InputError("polygon outline must be (k, 2) with k >= 3")
    c = outline.mean(axis=0)
    verts = np.vstack([c[None, :], outline])
    k = len(outline)
    tris = np.array([(0, 1 + j, 1 + (j + 1) % k) for j in range(k)])
    try:
        sec = CrossSection(verts, tris)
    except MeshError as exc:
        raise MeshError(f"polygon is not star-shaped about its vertex mean: {exc}") from None
    for _ in range(refinements):
        sec = refine(sec)
    out, _ = normalize(sec)
    return out


def refine(section: CrossSection) -> CrossSection:
    """Uniform 4-way refinement by edge midpoints (nested: same polygon)."""
    verts = list(map(tuple, section.vertices))
    index = {}

    def midpoint(a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        if key not in index:
            index[key] = len(verts)
            pa, pb = section.vertices[a], section.vertices[b]
            verts.append(((pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0))
        return index[key]

    tris = []
    for a, b, c in section.triangles:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        tris.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
    return CrossSection(np.asarray(verts, dtype=float), np.asarray(tris))
