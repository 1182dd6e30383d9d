"""Sparse assembly of the weak Oseen operators.

The symmetric Stokes-Robin form is

    a(v, w) = nu * int (grad v + grad v^T) : (grad w + grad w^T)
              + (1/gamma) * int_{Gamma1 + Gamma2} v . w

and the linearized convection around a field ``z`` is

    b(v, w) = int ((z . grad) v) . w + ((v . grad) z) . w .

No boundary term is assembled on the outflow boundary (do-nothing
condition).  Matrices are indexed ``[test, trial]`` over all velocity DOFs;
:func:`eliminate_dirichlet` restricts them to the free DOFs.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..mesh import Tag
from . import kernels
from .quadrature import DPHI, LINE_PHI, LINE_WEIGHTS, PHI, TRI_POINTS, TRI_WEIGHTS, p2_values
from .space import BoundaryShape, FemSpace, ObservationPatch, check_shape

__all__ = [
    "assemble_mass",
    "assemble_scalar_mass",
    "assemble_h1",
    "assemble_stokes_volume",
    "assemble_robin_boundary",
    "assemble_stokes_robin",
    "assemble_convection",
    "assemble_divergence",
    "assemble_input",
    "assemble_output",
    "eliminate_dirichlet",
    "h1_norm",
]

def _sym(a):
    """Exactly symmetric copy (so assembled matrices satisfy M == M.T bitwise)."""
    return 0.5 * (a + np.swapaxes(a, -1, -2))


_REF_MASS = _sym(np.einsum("q,qi,qj->ij", TRI_WEIGHTS, PHI, PHI))
_LINE_MASS = _sym(np.einsum("q,qi,qj->ij", LINE_WEIGHTS, LINE_PHI, LINE_PHI))


def _scatter(rows, cols, local, shape):
    """Triplet assembly with a deterministic merge.

    Triplets are stably sorted by (row, col), so duplicates are summed in
    element order; entries ``(i, j)`` and ``(j, i)`` of a symmetric form
    therefore receive bitwise identical sums.
    """
    r = np.broadcast_to(rows[:, :, None], local.shape).ravel().astype(np.int64)
    c = np.broadcast_to(cols[:, None, :], local.shape).ravel().astype(np.int64)
    v = np.ascontiguousarray(local, dtype=float).ravel()
    keys = r * shape[1] + c
    order = np.argsort(keys, kind="stable")
    keys, v = keys[order], v[order]
    if len(keys):
        starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
        data = np.add.reduceat(v, starts)
        keys = keys[starts]
    else:
        data = v
    ri, ci = np.divmod(keys, shape[1])
    indptr = np.zeros(shape[0] + 1, dtype=np.int64)
    np.cumsum(np.bincount(ri, minlength=shape[0]), out=indptr[1:])
    return sp.csr_matrix((data, ci, indptr), shape=shape)


def _vector_block(scalar: sp.spmatrix) -> sp.csr_matrix:
    return sp.block_diag([scalar, scalar], format="csr")


def assemble_scalar_mass(space: FemSpace) -> sp.csr_matrix:
    local = space.areas[:, None, None] * _REF_MASS[None]
    N = space.n_nodes
    return _scatter(space.tri_nodes, space.tri_nodes, local, (N, N))


def assemble_mass(space: FemSpace) -> sp.csr_matrix:
    """Velocity mass matrix (both components)."""
    return _vector_block(assemble_scalar_mass(space))


def _scalar_stiffness(space: FemSpace) -> sp.csr_matrix:
    g = np.einsum("qik,tkd->tqid", DPHI, space.grads)
    local = _sym(np.einsum("t,q,tqid,tqjd->tij", space.areas, TRI_WEIGHTS, g, g))
    N = space.n_nodes
    return _scatter(space.tri_nodes, space.tri_nodes, local, (N, N))


def assemble_h1(space: FemSpace) -> sp.csr_matrix:
    """Gram matrix of the H1 inner product ``(v, w) + (grad v, grad w)``."""
    return _vector_block(assemble_scalar_mass(space) + _scalar_stiffness(space))


def h1_norm(space: FemSpace, v: np.ndarray, gram: sp.spmatrix | None = None) -> float:
    gram = assemble_h1(space) if gram is None else gram
    return float(np.sqrt(max(v @ (gram @ v), 0.0)))


def assemble_stokes_volume(space: FemSpace) -> sp.csr_matrix:
    """Symmetrized-gradient form with unit viscosity."""
    local = _sym(kernels.stokes_local(space.grads, space.areas))
    dofs = space.vel_dofs
    n = space.n_velocity
    return _scatter(dofs, dofs, local, (n, n))


def assemble_robin_boundary(space: FemSpace) -> sp.csr_matrix:
    """Boundary mass ``int v . w`` over the control arcs (unit weight)."""
    mask = space.boundary_edge_mask(Tag.CONTROL1, Tag.CONTROL2)
    nodes = space.bnd_nodes[mask][:, [0, 1, 2]]
    local = space.bnd_lengths[mask][:, None, None] * _LINE_MASS[None]
    N = space.n_nodes
    return _vector_block(_scatter(nodes, nodes, local, (N, N)))


def assemble_stokes_robin(space: FemSpace, nu: float, gamma: float) -> sp.csr_matrix:
    if not nu > 0:
        raise ValueError("viscosity must be positive")
    if not gamma > 0:
        raise ValueError("Robin parameter must be positive")
    K = nu * assemble_stokes_volume(space)
    if np.isfinite(gamma):
        K = K + (1.0 / gamma) * assemble_robin_boundary(space)
    return K.tocsr()


def assemble_convection(space: FemSpace, w: np.ndarray, parts: bool = False):
    """Linearized convection around ``w``.

    With ``parts=True`` returns ``(advection, reaction)`` separately, the
    first being the Picard (Oseen) operator ``v -> ((w . grad) v, .)``.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (space.n_velocity,):
        raise ValueError(f"field has length {w.shape}, expected {space.n_velocity}")
    dofs = space.vel_dofs
    adv, react = kernels.convection_local(space.grads, space.areas, w[dofs])
    n = space.n_velocity
    A = _scatter(dofs, dofs, adv, (n, n))
    R = _scatter(dofs, dofs, react, (n, n))
    return (A, R) if parts else (A + R).tocsr()


def assemble_divergence(space: FemSpace) -> sp.csr_matrix:
    """``(D v)_q = int q div v`` for P1 pressure test functions ``q``."""
    local = kernels.divergence_local(space.grads, space.areas)
    return _scatter(space.mesh.triangles, space.vel_dofs, local,
                    (space.n_pressure, space.n_velocity))


def assemble_input(space: FemSpace, g1: BoundaryShape, g2: BoundaryShape,
                   gamma: float) -> np.ndarray:
    """Columns ``-(1/gamma) int_{Gamma_i} g_i n . w ds`` over all velocity DOFs."""
    if not gamma > 0:
        raise ValueError("Robin parameter must be positive")
    if g1.tag != Tag.CONTROL1 or g2.tag != Tag.CONTROL2:
        raise ValueError("shapes must be tagged CONTROL1 and CONTROL2")
    N = space.n_nodes
    B = np.zeros((space.n_velocity, 2))
    for col, shape in enumerate((g1, g2)):
        check_shape(space, shape)
        for k in np.nonzero(space.boundary_edge_mask(shape.tag))[0]:
            nodes = space.bnd_nodes[k]
            gq = LINE_PHI @ shape.values[nodes]
            vec = space.bnd_lengths[k] * (LINE_WEIGHTS * gq) @ LINE_PHI
            n = space.bnd_normals[k]
            B[nodes, col] += -(1.0 / gamma) * n[0] * vec
            B[N + nodes, col] += -(1.0 / gamma) * n[1] * vec
    return B


def _clip(poly, x0, y0, x1, y1):
    """Sutherland-Hodgman clipping of a convex polygon to a rectangle."""
    def cut(pts, inside, inter):
        out = []
        for k in range(len(pts)):
            p, q = pts[k - 1], pts[k]
            if inside(q):
                if not inside(p):
                    out.append(inter(p, q))
                out.append(q)
            elif inside(p):
                out.append(inter(p, q))
        return out

    def at_x(x):
        return lambda p, q: (x, p[1] + (q[1] - p[1]) * (x - p[0]) / (q[0] - p[0]))

    def at_y(y):
        return lambda p, q: (p[0] + (q[0] - p[0]) * (y - p[1]) / (q[1] - p[1]), y)

    pts = [tuple(p) for p in poly]
    for inside, inter in ((lambda p: p[0] >= x0, at_x(x0)), (lambda p: p[0] <= x1, at_x(x1)),
                          (lambda p: p[1] >= y0, at_y(y0)), (lambda p: p[1] <= y1, at_y(y1))):
        if not pts:
            break
        pts = cut(pts, inside, inter)
    return np.array(pts)


def assemble_output(space: FemSpace, patches) -> np.ndarray:
    """One row per patch: mean of the selected velocity component."""
    N = space.n_nodes
    verts = space.mesh.vertices
    C = np.zeros((len(patches), space.n_velocity))
    for row, patch in enumerate(patches):
        if not isinstance(patch, ObservationPatch):
            patch = ObservationPatch(*patch)
        acc = np.zeros(N)
        covered = 0.0
        for t, tri in enumerate(space.mesh.triangles):
            p = verts[tri]
            if (p[:, 0].max() <= patch.x0 or p[:, 0].min() >= patch.x1
                    or p[:, 1].max() <= patch.y0 or p[:, 1].min() >= patch.y1):
                continue
            poly = _clip(p, patch.x0, patch.y0, patch.x1, patch.y1)
            if len(poly) < 3:
                continue
            # barycentric coordinates of the clipped polygon vertices
            T = np.array([[p[1, 0] - p[0, 0], p[2, 0] - p[0, 0]],
                          [p[1, 1] - p[0, 1], p[2, 1] - p[0, 1]]])
            rs = np.linalg.solve(T, (poly - p[0]).T).T
            bary = np.column_stack([1 - rs.sum(1), rs])
            for k in range(1, len(poly) - 1):
                a, b, c = poly[0], poly[k], poly[k + 1]
                sub = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
                if sub == 0.0:
                    continue
                lam = TRI_POINTS @ np.vstack([bary[0], bary[k], bary[k + 1]])
                acc[space.tri_nodes[t]] += sub * (TRI_WEIGHTS @ p2_values(lam))
                covered += sub
        if abs(covered - patch.area) > 1e-9 * patch.area:
            raise ValueError(f"patch {row} is not contained in the fluid domain "
                             f"(covers {covered:.6g} of {patch.area:.6g})")
        acc /= patch.area
        if patch.component == "x":
            C[row, :N] = acc
        elif patch.component == "y":
            C[row, N:] = acc
        else:
            C[row, :N] = 0.5 * acc
            C[row, N:] = 0.5 * acc
    return C


def eliminate_dirichlet(space: FemSpace, operators, lift: np.ndarray | None = None):
    """Restrict operators to the free velocity DOFs.

    Square velocity operators ``K`` give ``(K_ff, -K_fc lift_c)``; operators
    with velocity columns only (e.g. the divergence) give ``(D_f, -D_c lift_c)``.
    """
    fixed = np.nonzero(space.constrained)[0]
    free = space.free
    lift_c = (np.zeros(len(fixed)) if lift is None
              else np.asarray(lift, dtype=float)[fixed])
    out = []
    for op in operators:
        dense = not sp.issparse(op)
        op = np.asarray(op) if dense else sp.csr_matrix(op)
        square = op.shape == (space.n_velocity, space.n_velocity)
        rows = free if square else slice(None)
        if dense:
            sub = op[rows]
            red, coupling = sub[:, free], sub[:, fixed]
        else:
            sub = op[rows]
            red, coupling = sub[:, free].tocsr(), sub[:, fixed]
        out.append((red, -(coupling @ lift_c)))
    return out
