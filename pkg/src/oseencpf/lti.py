"""Descriptor and projected state-space realizations of the Oseen system.

The divergence constraint is removed with a mass-orthonormal basis of the
discrete divergence null space, giving a dense standard system
``x' = A x + B u, y = C x + D u`` whose transfer function coincides with
that of the saddle-point (descriptor) system.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import io
from .fem import (BoundaryShape, FemSpace, assemble_convection, assemble_divergence,
                  assemble_input, assemble_mass, assemble_output, assemble_stokes_robin)

__all__ = [
    "StateSpace",
    "DescriptorSystem",
    "ProjectedLti",
    "TransferSample",
    "SimulationResult",
    "ProjectionError",
    "SingularShiftError",
    "assemble_descriptor",
    "project",
    "project_perturbation",
    "eval_transfer",
    "frequency_response",
    "spectral_abscissa",
    "simulate",
    "save_system",
    "load_system",
]


class ProjectionError(RuntimeError):
    pass


class SingularShiftError(ValueError):
    def __init__(self, s, nearest):
        self.s = s
        self.nearest = nearest
        super().__init__(f"shift {s} is (numerically) an eigenvalue; "
                         f"nearest eigenvalue estimate {nearest}")


def _ro(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Dense realization ``(A, B, C, D)``; ``D`` defaults to zero."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray | None = None

    def __post_init__(self):
        A = _ro(np.atleast_2d(self.A))
        B = _ro(np.asarray(self.B).reshape(A.shape[0], -1))
        C = _ro(np.asarray(self.C).reshape(-1, A.shape[0]))
        D = np.zeros((C.shape[0], B.shape[1])) if self.D is None else self.D
        D = _ro(np.asarray(D).reshape(C.shape[0], B.shape[1]))
        if A.shape[0] != A.shape[1]:
            raise ValueError("state matrix must be square")
        for name, val in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, val)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def transfer(self, s: complex) -> np.ndarray:
        return eval_transfer(self, s).G

    def similarity(self, T: np.ndarray) -> "StateSpace":
        """Realization in the coordinates ``x = T z``."""
        Ti = np.linalg.inv(T)
        return StateSpace(Ti @ self.A @ T, Ti @ self.B, self.C @ T, self.D)


@dataclass(frozen=True, eq=False)
class ProjectedLti(StateSpace):
    """Projected system with optional divergence-free basis (``basis.T E basis = I``)."""

    basis: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class DescriptorSystem:
    """Saddle-point realization on the free velocity DOFs.

    ``E v' = A v + D^T lam + B u``, ``D v = 0``, ``y = C v``.
    """

    E: sp.csr_matrix
    A: sp.csr_matrix
    D: sp.csr_matrix
    B: np.ndarray
    C: np.ndarray

    @property
    def n_velocity(self) -> int:
        return self.E.shape[0]


@dataclass(frozen=True)
class TransferSample:
    s: complex
    G: np.ndarray


@dataclass(frozen=True, eq=False)
class SimulationResult:
    t: np.ndarray
    y: np.ndarray
    x: np.ndarray | None = None


def assemble_descriptor(space: FemSpace, nu: float, gamma: float, w: np.ndarray,
                        g1: BoundaryShape, g2: BoundaryShape, patches) -> DescriptorSystem:
    """State matrix ``-(Stokes-Robin + convection around w)`` on the free DOFs."""
    f = space.free
    K = assemble_stokes_robin(space, nu, gamma)
    N = assemble_convection(space, w)
    A = -(K + N)
    return DescriptorSystem(
        E=assemble_mass(space)[f][:, f].tocsr(),
        A=A[f][:, f].tocsr(),
        D=assemble_divergence(space)[:, f].tocsr(),
        B=assemble_input(space, g1, g2, gamma)[f],
        C=assemble_output(space, patches)[:, f],
    )


def project(sys: DescriptorSystem, rank_tol: float = 1e-10) -> ProjectedLti:
    """Restrict to ``ker D`` with a mass-orthonormal basis from a dense SVD."""
    Dd = sys.D.toarray()
    _, sv, Vt = la.svd(Dd, full_matrices=True)
    rank = int(np.sum(sv > rank_tol * sv[0])) if len(sv) else 0
    if rank < Dd.shape[0]:
        raise ProjectionError(f"divergence matrix has rank {rank} < {Dd.shape[0]} "
                              "pressure DOFs; is an outflow boundary missing?")
    theta0 = Vt[rank:].T
    E = sys.E
    gram = theta0.T @ (E @ theta0)
    R = la.cholesky(0.5 * (gram + gram.T), lower=True)
    theta = la.solve_triangular(R, theta0.T, lower=True).T
    A_r = theta.T @ (sys.A @ theta)
    return ProjectedLti(A_r, theta.T @ sys.B, sys.C @ theta, None, basis=_ro(theta))


def project_perturbation(space: FemSpace, proj: ProjectedLti, dv: np.ndarray) -> np.ndarray:
    """Projected state-matrix change ``-basis^T N(dv) basis`` for a shifted linearization point."""
    f = space.free
    N = assemble_convection(space, dv)[f][:, f]
    theta = proj.basis
    return -(theta.T @ (N @ theta))


def _nearest_eigenvalue(A, s, E=None):
    ev = la.eigvals(A) if E is None else la.eigvals(A, E)
    ev = ev[np.isfinite(ev)]
    return complex(ev[np.argmin(np.abs(ev - s))]) if len(ev) else complex("nan")


def eval_transfer(sys, s: complex) -> TransferSample:
    """``G(s)`` by a direct solve (dense for state-space, sparse saddle point otherwise)."""
    s = complex(s)
    if isinstance(sys, DescriptorSystem):
        P = sys.D.shape[0]
        S = sp.bmat([[s * sys.E - sys.A, sys.D.T], [sys.D, sp.csc_matrix((P, P))]],
                    format="csc", dtype=complex)
        rhs = np.vstack([sys.B, np.zeros((P, sys.B.shape[1]))]).astype(complex)
        try:
            x = spla.splu(S).solve(rhs)
        except RuntimeError:
            proj = project(sys)
            raise SingularShiftError(s, _nearest_eigenvalue(proj.A, s)) from None
        return TransferSample(s, sys.C @ x[:sys.n_velocity])
    n = sys.n_states
    M = s * np.eye(n) - sys.A
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)  # singularity handled below
        lu, piv = la.lu_factor(M, check_finite=False)
    d = np.abs(np.diag(lu))
    if n and d.min() <= 1e3 * np.finfo(float).eps * max(d.max(), 1.0):
        raise SingularShiftError(s, _nearest_eigenvalue(sys.A, s))
    X = la.lu_solve((lu, piv), sys.B.astype(complex))
    return TransferSample(s, sys.C @ X + sys.D)


def frequency_response(sys, omegas, workers: int = 1) -> np.ndarray:
    """``G(i w)`` for each ``w``; stacked to shape ``(len(omegas), k, m)``."""
    omegas = np.asarray(omegas, dtype=float)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            out = list(ex.map(lambda w: eval_transfer(sys, 1j * w).G, omegas))
    else:
        out = [eval_transfer(sys, 1j * w).G for w in omegas]
    return np.array(out)


def spectral_abscissa(sys_or_matrix) -> float:
    A = sys_or_matrix.A if hasattr(sys_or_matrix, "A") else np.asarray(sys_or_matrix)
    if sp.issparse(A):
        raise TypeError("spectral_abscissa needs a dense state matrix")
    if A.size == 0:
        return -np.inf
    try:
        ev = la.eigvals(A)
    except la.LinAlgError as exc:
        raise RuntimeError(f"eigenvalue computation failed: {exc}") from exc
    return float(np.max(ev.real))


def simulate(sys: StateSpace, u: np.ndarray, T: float, dt: float,
             return_states: bool = False) -> SimulationResult:
    """Crank-Nicolson integration from the zero state.

    ``u`` holds the input at ``t_k = k dt`` for ``k = 0 .. round(T/dt)``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    steps = int(round(T / dt))
    u = np.asarray(u, dtype=float).reshape(steps + 1, -1)
    if u.shape[1] != sys.n_inputs:
        raise ValueError(f"input has {u.shape[1]} channels, system has {sys.n_inputs}")
    n = sys.n_states
    I = np.eye(n)
    lu = la.lu_factor(I - 0.5 * dt * sys.A)
    Ap = I + 0.5 * dt * sys.A
    Bu = 0.5 * dt * (u @ sys.B.T)
    x = np.zeros(n)
    X = np.zeros((steps + 1, n))
    for k in range(steps):
        x = la.lu_solve(lu, Ap @ x + Bu[k] + Bu[k + 1])
        X[k + 1] = x
    y = X @ sys.C.T + u @ sys.D.T
    return SimulationResult(np.arange(steps + 1) * dt, y, X if return_states else None)


def save_system(sys: StateSpace, path, meta: dict | None = None, include_basis=False) -> None:
    mats = {"A": sys.A, "B": sys.B, "C": sys.C, "D": sys.D}
    if include_basis and getattr(sys, "basis", None) is not None:
        mats["basis"] = sys.basis
    meta = dict(meta or {})
    meta.setdefault("kind", type(sys).__name__)
    io.save_bundle(path, mats, meta)


def load_system(path) -> StateSpace:
    mats, meta = io.load_bundle(path)
    if "basis" in mats or meta.get("kind") == "ProjectedLti":
        return ProjectedLti(mats["A"], mats["B"], mats["C"], mats["D"],
                            basis=mats.get("basis"))
    return StateSpace(mats["A"], mats["B"], mats["C"], mats["D"])
