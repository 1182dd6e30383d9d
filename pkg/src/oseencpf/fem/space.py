"""Taylor-Hood P2/P1 spaces, boundary profiles and observation patches."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mesh import DIRICHLET_TAGS, Mesh, Tag, mesh_edges, validate_mesh

__all__ = [
    "FemSpace",
    "BoundaryShape",
    "ObservationPatch",
    "build_spaces",
    "parabolic_bump",
    "zero_shape",
    "interpolate",
    "inflow_lift",
]


def _readonly(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FemSpace:
    """DOF maps of the P2 velocity / P1 pressure pair on a mesh.

    Scalar P2 nodes are the mesh vertices followed by the edge midpoints.
    Velocity DOF ``c * n_nodes + k`` is component ``c`` at node ``k``;
    pressure DOFs coincide with the vertices.
    """

    mesh: Mesh
    edges: np.ndarray
    tri_nodes: np.ndarray       # (T, 6) scalar P2 nodes per triangle
    node_coords: np.ndarray     # (n_nodes, 2)
    grads: np.ndarray           # (T, 3, 2) barycentric gradients
    areas: np.ndarray           # (T,)
    bnd_nodes: np.ndarray       # (K, 3) start, end, midpoint node per boundary edge
    bnd_tags: tuple
    bnd_normals: np.ndarray     # (K, 2) outward unit normals
    bnd_lengths: np.ndarray     # (K,)
    constrained: np.ndarray     # bool mask over velocity DOFs
    free: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.node_coords)

    @property
    def n_velocity(self) -> int:
        return 2 * self.n_nodes

    @property
    def n_pressure(self) -> int:
        return self.mesh.n_vertices

    @property
    def n_free(self) -> int:
        return len(self.free)

    @property
    def vel_dofs(self) -> np.ndarray:
        return np.hstack([self.tri_nodes, self.tri_nodes + self.n_nodes])

    def embed(self, v_free: np.ndarray, lift: np.ndarray | None = None) -> np.ndarray:
        """Full velocity vector from free DOF values (plus optional lift)."""
        v = np.zeros(self.n_velocity) if lift is None else np.array(lift, dtype=float)
        v[self.free] += v_free
        return v

    def boundary_edge_mask(self, *tags: Tag) -> np.ndarray:
        return np.array([t in tags for t in self.bnd_tags], dtype=bool)


def build_spaces(mesh: Mesh) -> FemSpace:
    problems = validate_mesh(mesh, require_control=False)
    if problems:
        raise ValueError(f"invalid mesh: {problems[0]}")
    V = mesh.n_vertices
    tri = mesh.triangles
    edges, tri_edges = mesh_edges(tri)
    tri_nodes = np.hstack([tri, V + tri_edges])
    node_coords = np.vstack([mesh.vertices,
                             0.5 * (mesh.vertices[edges[:, 0]]
                                    + mesh.vertices[edges[:, 1]])])

    p = mesh.vertices[tri]
    area = mesh.signed_areas()
    grads = np.empty((len(tri), 3, 2))
    for k in range(3):
        a, b = p[:, (k + 1) % 3], p[:, (k + 2) % 3]
        grads[:, k, 0] = (a[:, 1] - b[:, 1]) / (2 * area)
        grads[:, k, 1] = (b[:, 0] - a[:, 0]) / (2 * area)

    edge_index = {(int(a), int(b)): k for k, (a, b) in enumerate(edges)}
    owner = {}
    for t, row in enumerate(tri):
        for k in range(3):
            i, j = int(row[k]), int(row[(k + 1) % 3])
            owner[(min(i, j), max(i, j))] = int(row[(k + 2) % 3])

    K = len(mesh.boundary_edges)
    bnd_nodes = np.empty((K, 3), dtype=np.int64)
    normals = np.empty((K, 2))
    lengths = np.empty(K)
    for k, (i, j) in enumerate(mesh.boundary_edges):
        key = (min(int(i), int(j)), max(int(i), int(j)))
        bnd_nodes[k] = (i, j, V + edge_index[key])
        d = mesh.vertices[j] - mesh.vertices[i]
        lengths[k] = np.hypot(*d)
        n = np.array([d[1], -d[0]]) / lengths[k]
        inward = mesh.vertices[owner[key]] - mesh.vertices[i]
        normals[k] = n if n @ inward < 0 else -n

    dirichlet = np.array([t in DIRICHLET_TAGS for t in mesh.edge_tags], dtype=bool)
    node_fixed = np.zeros(len(node_coords), dtype=bool)
    if K:
        node_fixed[bnd_nodes[dirichlet].ravel()] = True
    constrained = np.concatenate([node_fixed, node_fixed])
    free = np.nonzero(~constrained)[0]
    return FemSpace(mesh=mesh, edges=_readonly(edges), tri_nodes=_readonly(tri_nodes),
                    node_coords=_readonly(node_coords), grads=_readonly(grads),
                    areas=_readonly(area), bnd_nodes=_readonly(bnd_nodes),
                    bnd_tags=tuple(mesh.edge_tags), bnd_normals=_readonly(normals),
                    bnd_lengths=_readonly(lengths), constrained=_readonly(constrained),
                    free=_readonly(free))


@dataclass(frozen=True, eq=False)
class BoundaryShape:
    """Scalar P2 profile carried by the nodes of one tagged boundary arc."""

    tag: Tag
    values: np.ndarray  # over scalar P2 nodes, zero off the arc

    def __post_init__(self):
        object.__setattr__(self, "tag", Tag(self.tag))
        object.__setattr__(self, "values", _readonly(np.array(self.values, dtype=float)))


def _arc_parameter(space: FemSpace, tag: Tag):
    """Normalised arc length of every node on the chain of ``tag`` edges."""
    mask = space.boundary_edge_mask(tag)
    if not mask.any():
        raise ValueError(f"no boundary edges tagged {tag.value}")
    bn = space.bnd_nodes[mask]
    lengths = space.bnd_lengths[mask]
    adj = {}
    for k, (i, j, _) in enumerate(bn):
        adj.setdefault(int(i), []).append(k)
        adj.setdefault(int(j), []).append(k)
    ends = sorted(v for v, ks in adj.items() if len(ks) == 1)
    if len(ends) != 2:
        raise ValueError(f"{tag.value} edges do not form a single open arc")
    s = {ends[0]: 0.0}
    node, used, total = ends[0], set(), 0.0
    while True:
        nxt = [k for k in adj[node] if k not in used]
        if not nxt:
            break
        k = nxt[0]
        used.add(k)
        i, j, m = (int(x) for x in bn[k])
        other = j if i == node else i
        s[m] = total + 0.5 * lengths[k]
        total += lengths[k]
        s[other] = total
        node = other
    return {n: v / total for n, v in s.items()}, ends


def parabolic_bump(space: FemSpace, tag: Tag, amplitude: float = 1.0) -> BoundaryShape:
    """``amplitude * 4 t (1 - t)`` in normalised arc length ``t`` along ``tag``."""
    tag = Tag(tag)
    param, _ = _arc_parameter(space, tag)
    values = np.zeros(space.n_nodes)
    for n, t in param.items():
        values[n] = amplitude * 4.0 * t * (1.0 - t)
    return BoundaryShape(tag, values)


def zero_shape(space: FemSpace, tag: Tag) -> BoundaryShape:
    return BoundaryShape(tag, np.zeros(space.n_nodes))


def check_shape(space: FemSpace, shape: BoundaryShape, tol: float = 1e-12) -> None:
    param, ends = _arc_parameter(space, shape.tag)
    off = np.ones(space.n_nodes, dtype=bool)
    off[list(param)] = False
    scale = max(1.0, float(np.abs(shape.values).max(initial=0.0)))
    if np.abs(shape.values[off]).max(initial=0.0) > tol * scale:
        raise ValueError(f"profile for {shape.tag.value} is nonzero off its arc")
    if np.abs(shape.values[ends]).max() > tol * scale:
        raise ValueError(f"profile for {shape.tag.value} must vanish at the arc ends")


@dataclass(frozen=True)
class ObservationPatch:
    """Axis-aligned averaging window; component is ``"x"``, ``"y"`` or ``"both"``."""

    x0: float
    y0: float
    x1: float
    y1: float
    component: str = "x"

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("patch must have positive extent")
        if self.component not in ("x", "y", "both"):
            raise ValueError(f"unknown component {self.component!r}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


def interpolate(space: FemSpace, func) -> np.ndarray:
    """Nodal P2 interpolant of ``func(x, y) -> (vx, vy)``."""
    x, y = space.node_coords[:, 0], space.node_coords[:, 1]
    vx, vy = func(x, y)
    return np.concatenate([np.broadcast_to(vx, x.shape),
                           np.broadcast_to(vy, x.shape)]).astype(float)


def inflow_lift(space: FemSpace, g0: BoundaryShape) -> np.ndarray:
    """Velocity with ``-n g0`` on the inflow nodes and zero elsewhere."""
    check_shape(space, g0)
    lift = np.zeros(space.n_velocity)
    N = space.n_nodes
    for k in np.nonzero(space.boundary_edge_mask(g0.tag))[0]:
        n = space.bnd_normals[k]
        for node in space.bnd_nodes[k]:
            lift[node] = -n[0] * g0.values[node]
            lift[N + node] = -n[1] * g0.values[node]
    return lift


def control_shapes(space: FemSpace, amplitude: float = 1.0):
    return (parabolic_bump(space, Tag.CONTROL1, amplitude),
            parabolic_bump(space, Tag.CONTROL2, amplitude))

