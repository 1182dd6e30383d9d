"""Triangulations of the channel-with-obstacle domain.

The generator places a background grid over the channel, cuts out a
regular polygon approximating the cylinder, surrounds it with a few rings
of points graded from the polygon edge length towards the grid spacing,
and triangulates the union with a Delaunay triangulation.  Polygon edges
are Gabriel edges of the point set by construction, so they survive in
the triangulation and the obstacle can be removed by a centroid test.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

__all__ = [
    "Tag",
    "Mesh",
    "ChannelParams",
    "MeshError",
    "MeshParseError",
    "generate_channel_mesh",
    "validate_mesh",
    "load_mesh",
    "save_mesh",
    "mesh_edges",
]


class Tag(str, enum.Enum):
    INFLOW = "INFLOW"
    WALL = "WALL"
    OUTFLOW = "OUTFLOW"
    CONTROL1 = "CONTROL1"
    CONTROL2 = "CONTROL2"


DIRICHLET_TAGS = frozenset({Tag.INFLOW, Tag.WALL})
CONTROL_TAGS = frozenset({Tag.CONTROL1, Tag.CONTROL2})


class MeshError(ValueError):
    """Raised for invalid geometry parameters or meshes."""


class MeshParseError(MeshError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh with tagged boundary edges.

    ``vertices`` is ``(V, 2)``, ``triangles`` is ``(T, 3)`` with
    counter-clockwise orientation, ``boundary_edges`` is ``(K, 2)`` and
    ``edge_tags`` holds one :class:`Tag` per boundary edge.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: tuple

    def __post_init__(self):
        for name, dtype in (("vertices", float), ("triangles", np.int64),
                            ("boundary_edges", np.int64)):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "vertices", self.vertices.reshape(-1, 2))
        object.__setattr__(self, "triangles", self.triangles.reshape(-1, 3))
        object.__setattr__(self, "boundary_edges",
                           self.boundary_edges.reshape(-1, 2))
        object.__setattr__(self, "edge_tags",
                           tuple(Tag(t) for t in self.edge_tags))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def tag_census(self) -> dict:
        census = {tag: 0 for tag in Tag}
        for t in self.edge_tags:
            census[t] += 1
        return census

    def edges_with_tag(self, *tags: Tag) -> np.ndarray:
        mask = np.array([t in tags for t in self.edge_tags], dtype=bool)
        return self.boundary_edges[mask] if len(mask) else self.boundary_edges

    def same_as(self, other: "Mesh") -> bool:
        return (np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.triangles, other.triangles)
                and np.array_equal(self.boundary_edges, other.boundary_edges)
                and self.edge_tags == other.edge_tags)


@dataclass(frozen=True)
class ChannelParams:
    """Geometry of the cylinder-wake channel.

    Defaults follow the proportions of the classical benchmark drawing:
    height 0.4 of the length, cylinder diameter 0.1 of the length centred
    at 0.3 / 0.2 of the length.
    """

    length: float = 2.5
    height: float = 1.0
    center: tuple = (0.75, 0.5)
    radius: float = 0.125
    sides: int = 16
    h: float = 0.25

    def check(self) -> None:
        cx, cy = self.center
        if not (self.length > 0 and self.height > 0 and self.h > 0):
            raise MeshError("length, height and h must be positive")
        if not 0 < 2 * self.radius < self.height:
            raise MeshError("need 0 < 2*radius < height")
        if not (cx - self.radius > 0 and cx + self.radius < self.length):
            raise MeshError("obstacle must lie strictly inside the channel in x")
        if not (cy - self.radius > 0 and cy + self.radius < self.height):
            raise MeshError("obstacle must lie strictly inside the channel in y")
        if self.sides < 8 or self.sides % 4:
            raise MeshError("sides must be >= 8 and divisible by 4")


def mesh_edges(triangles: np.ndarray):
    """Unique sorted edges and the (T, 3) triangle-to-edge map.

    Local edge ``k`` of a triangle joins local vertices ``k`` and ``(k+1) % 3``.
    """
    tri = np.asarray(triangles, dtype=np.int64)
    local = tri[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
    local = np.sort(local, axis=1)
    edges, inverse = np.unique(local, axis=0, return_inverse=True)
    return edges, inverse.reshape(-1, 3)


def _ring_points(params: ChannelParams):
    cx, cy = params.center
    n = params.sides
    r = params.radius
    side = 2 * r * math.sin(math.pi / n)
    clearance = min(cx, params.length - cx, cy, params.height - cy)
    rings = []
    radius, spacing, k = r, side, 0
    while True:
        step = min(params.h, spacing) * math.cos(math.pi / n) * 0.9
        nxt = radius + step
        if nxt + 0.5 * params.h > clearance:
            break
        k += 1
        count = n
        while 2 * math.pi * nxt / count > 1.6 * step and count < 8 * n:
            count *= 2
        offset = math.pi / count if k % 2 else 0.0
        ang = offset + 2 * math.pi * np.arange(count) / count
        rings.append(np.column_stack([cx + nxt * np.cos(ang),
                                      cy + nxt * np.sin(ang)]))
        radius = nxt
        spacing = 2 * math.pi * nxt / count
        if spacing >= params.h:
            break
    return rings, radius


def generate_channel_mesh(params: ChannelParams | None = None) -> Mesh:
    """Triangulate the channel around the polygonal cylinder.

    Control arcs are the two quarter arcs on the downstream side that touch
    the horizontal line through the centre: ``CONTROL1`` covers angles
    (0, 90) degrees, ``CONTROL2`` covers (270, 360) degrees.
    """
    params = params or ChannelParams()
    params.check()
    L, H, h = params.length, params.height, params.h
    cx, cy = params.center
    n = params.sides
    r = params.radius

    nx = max(2, math.ceil(L / h))
    ny = max(2, math.ceil(H / h))
    gx = np.linspace(0.0, L, nx + 1)
    gy = np.linspace(0.0, H, ny + 1)
    X, Y = np.meshgrid(gx, gy, indexing="xy")
    grid = np.column_stack([X.ravel(), Y.ravel()])
    on_boundary = ((grid[:, 0] == 0.0) | (grid[:, 0] == L)
                   | (grid[:, 1] == 0.0) | (grid[:, 1] == H))

    rings, outer = _ring_points(params)
    excl = outer + 0.6 * min(h, L / nx, H / ny)
    dist = np.hypot(grid[:, 0] - cx, grid[:, 1] - cy)
    grid = grid[on_boundary | (dist > excl)]

    # a point inside each corner cell keeps every triangle off three
    # Dirichlet vertices at the channel corners
    dx, dy = L / nx, H / ny
    corners = np.array([[0.5 * dx, 0.5 * dy], [L - 0.5 * dx, 0.5 * dy],
                        [0.5 * dx, H - 0.5 * dy], [L - 0.5 * dx, H - 0.5 * dy]])
    corners = corners[np.hypot(corners[:, 0] - cx, corners[:, 1] - cy) > excl]

    ang = 2 * math.pi * np.arange(n) / n
    polygon = np.column_stack([cx + r * np.cos(ang), cy + r * np.sin(ang)])
    pts = np.vstack([polygon, *rings, grid, corners])
    # exact snapping of the analytic vertices keeps boundary tests exact
    pts[np.abs(pts[:, 0]) < 1e-14, 0] = 0.0
    pts[np.abs(pts[:, 1]) < 1e-14, 1] = 0.0

    tri = Delaunay(pts).simplices.astype(np.int64)
    c = pts[tri].mean(axis=1)
    inside = np.hypot(c[:, 0] - cx, c[:, 1] - cy) < r * math.cos(math.pi / n)
    tri = tri[~inside]
    p = pts[tri]
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    tiny = 1e-12 * h * h
    tri = tri[np.abs(area) > tiny]
    area = area[np.abs(area) > tiny]
    flip = area < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]

    # drop points not used by any triangle and renumber
    used = np.unique(tri)
    remap = -np.ones(len(pts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    pts = pts[used]
    tri = remap[tri]
    n_poly = int(np.sum(used < n))

    edges, tri_edges = mesh_edges(tri)
    counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
    bedges = edges[counts == 1]
    tags = []
    for i, j in bedges:
        tags.append(_classify_edge(pts[i], pts[j], i < n_poly and j < n_poly,
                                   params))
    # orient each boundary edge as it appears in its triangle
    oriented = _orient_boundary(tri, bedges)
    return Mesh(pts, tri, oriented, tags)


def _classify_edge(a, b, on_polygon, params: ChannelParams) -> Tag:
    L, H = params.length, params.height
    if a[0] == 0.0 and b[0] == 0.0:
        return Tag.INFLOW
    if a[0] == L and b[0] == L:
        return Tag.OUTFLOW
    if (a[1] == 0.0 and b[1] == 0.0) or (a[1] == H and b[1] == H):
        return Tag.WALL
    if not on_polygon:
        raise MeshError("boundary edge off the channel and obstacle boundary")
    cx, cy = params.center
    m = 0.5 * (a + b)
    theta = math.degrees(math.atan2(m[1] - cy, m[0] - cx)) % 360.0
    if 0.0 < theta < 90.0:
        return Tag.CONTROL1
    if 270.0 < theta < 360.0:
        return Tag.CONTROL2
    return Tag.WALL


def _orient_boundary(tri: np.ndarray, bedges: np.ndarray) -> np.ndarray:
    lookup = {}
    for t in tri:
        for k in range(3):
            i, j = int(t[k]), int(t[(k + 1) % 3])
            lookup[(min(i, j), max(i, j))] = (i, j)
    return np.array([lookup[(int(i), int(j))] for i, j in bedges],
                    dtype=np.int64).reshape(-1, 2)


def validate_mesh(mesh: Mesh, require_control: bool = True) -> list:
    """Return a list of human-readable invariant violations (empty if valid)."""
    out = []
    V = mesh.n_vertices
    tri = mesh.triangles
    if len(tri) == 0:
        return ["mesh has no triangles"]
    if tri.min() < 0 or tri.max() >= V:
        bad = np.nonzero((tri < 0).any(1) | (tri >= V).any(1))[0]
        return [f"triangle {int(k)} references a missing vertex" for k in bad]
    be = mesh.boundary_edges
    if len(be) and (be.min() < 0 or be.max() >= V):
        bad = np.nonzero((be < 0).any(1) | (be >= V).any(1))[0]
        return [f"boundary edge {int(k)} references a missing vertex"
                for k in bad]
    if len(mesh.edge_tags) != len(be):
        out.append("edge tag count differs from boundary edge count")

    area = mesh.signed_areas()
    for k in np.nonzero(area <= 0)[0]:
        out.append(f"triangle {int(k)} has non-positive signed area "
                   f"{area[k]:.3e}")

    edges, tri_edges = mesh_edges(tri)
    counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
    incidence = {(int(a), int(b)): int(c) for (a, b), c in zip(edges, counts)}
    listed = {}
    for k, (i, j) in enumerate(be):
        key = (min(int(i), int(j)), max(int(i), int(j)))
        c = incidence.get(key, 0)
        if c == 0:
            out.append(f"boundary edge {k} ({i}, {j}) is not an edge of the mesh")
        elif c > 1:
            out.append(f"boundary edge {k} ({i}, {j}): edge not on boundary "
                       f"(shared by {c} triangles)")
        if key in listed:
            out.append(f"boundary edge {k} ({i}, {j}) duplicates edge "
                       f"{listed[key]}")
        listed.setdefault(key, k)
    for key, c in incidence.items():
        if c == 1 and key not in listed:
            out.append(f"boundary edge {key} carries no tag")
    if require_control and not any(t in CONTROL_TAGS for t in mesh.edge_tags):
        out.append("no CONTROL1/CONTROL2 edges")
    return out


def save_mesh(mesh: Mesh, path) -> None:
    lines = ["# oseencpf mesh", f"# VERTICES {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"# TRIANGLES {mesh.n_triangles}")
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines.append(f"# BOUNDARY_EDGES {len(mesh.boundary_edges)}")
    lines += [f"{i} {j} {t.value}"
              for (i, j), t in zip(mesh.boundary_edges.tolist(), mesh.edge_tags)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


_SECTIONS = {"VERTICES": 2, "TRIANGLES": 3, "BOUNDARY_EDGES": 3}


def load_mesh(path, require_control: bool = False) -> Mesh:
    """Read the text mesh format written by :func:`save_mesh`."""
    data = {name: [] for name in _SECTIONS}
    declared = {}
    section = None
    lineno = {name: [] for name in _SECTIONS}
    text = Path(path).read_text(encoding="ascii")
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] in _SECTIONS:
                section = parts[0]
                try:
                    declared[section] = int(parts[1])
                except ValueError:
                    raise MeshParseError(f"bad count {parts[1]!r}", no)
            continue
        if section is None:
            raise MeshParseError("data before any section header", no)
        fields = line.split()
        if len(fields) != _SECTIONS[section]:
            raise MeshParseError(
                f"expected {_SECTIONS[section]} fields in {section}", no)
        try:
            if section == "VERTICES":
                row = (float(fields[0]), float(fields[1]))
            elif section == "TRIANGLES":
                row = tuple(int(f) for f in fields)
            else:
                row = (int(fields[0]), int(fields[1]), Tag(fields[2].upper()))
        except ValueError as exc:
            raise MeshParseError(str(exc), no)
        data[section].append(row)
        lineno[section].append(no)

    for name in _SECTIONS:
        if name not in declared:
            raise MeshParseError(f"missing section {name}")
        if declared[name] != len(data[name]):
            raise MeshParseError(f"{name} declares {declared[name]} rows, "
                                 f"found {len(data[name])}")
    V = len(data["VERTICES"])
    for row, no in zip(data["TRIANGLES"], lineno["TRIANGLES"]):
        if min(row) < 0 or max(row) >= V:
            raise MeshParseError("triangle references a missing vertex", no)
    for row, no in zip(data["BOUNDARY_EDGES"], lineno["BOUNDARY_EDGES"]):
        if min(row[:2]) < 0 or max(row[:2]) >= V:
            raise MeshParseError("boundary edge references a missing vertex", no)

    mesh = Mesh(np.array(data["VERTICES"], dtype=float).reshape(-1, 2),
                np.array(data["TRIANGLES"], dtype=np.int64).reshape(-1, 3),
                np.array([r[:2] for r in data["BOUNDARY_EDGES"]],
                         dtype=np.int64).reshape(-1, 2),
                [r[2] for r in data["BOUNDARY_EDGES"]])
    problems = validate_mesh(mesh, require_control=require_control)
    if problems:
        raise MeshError(f"invalid mesh: {problems[0]}")
    return mesh
