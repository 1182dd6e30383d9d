"""Stationary Navier-Stokes solves and families of inexact linearization points."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import (BoundaryShape, FemSpace, assemble_convection, assemble_divergence,
                  assemble_h1, assemble_mass, assemble_stokes_robin, h1_norm,
                  inflow_lift, interpolate)

logger = logging.getLogger(__name__)

__all__ = [
    "SteadyState",
    "SteadySolveError",
    "FamilyMember",
    "LinearizationFamily",
    "solve_steady",
    "linearization_family",
    "synthetic_family",
    "divergence_free_projection",
    "vortex_field",
    "save_state",
    "load_state",
]


class SteadySolveError(RuntimeError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


@dataclass(eq=False)
class SteadyState:
    velocity: np.ndarray
    pressure: np.ndarray
    residual: float
    history: list = field(default_factory=list)  # (velocity, residual, kind)
    nu: float = float("nan")
    gamma: float = float("nan")

    @property
    def iterations(self) -> int:
        return len(self.history)


class _Operators:
    """Cached assembled pieces shared by all iterations of one solve."""

    def __init__(self, space: FemSpace, nu: float, gamma: float, lift: np.ndarray):
        self.space = space
        self.K = assemble_stokes_robin(space, nu, gamma)
        self.D = assemble_divergence(space)
        self.lift = lift
        self.free = space.free
        self.fixed = np.nonzero(space.constrained)[0]
        self.Df = self.D[:, self.free].tocsc()
        P = space.n_pressure
        self.zero = sp.csc_matrix((P, P))

    def residual(self, v, lam):
        adv = assemble_convection(self.space, v, parts=True)[0]
        rv = (self.K @ v + adv @ v)[self.free] + self.Df.T @ lam
        rp = self.D @ v
        return np.concatenate([rv, rp])

    def solve(self, J, rhs_v, rhs_p):
        Jf = J[self.free][:, self.free]
        S = sp.bmat([[Jf, self.Df.T], [self.Df, self.zero]], format="csc")
        x = spla.splu(S).solve(np.concatenate([rhs_v, rhs_p]))
        n = len(self.free)
        return x[:n], x[n:]

    def linear_step(self, op):
        """Solve ``op v + D^T lam = 0, D v = 0`` with the inflow lift."""
        rhs_v = -(op[self.free][:, self.fixed] @ self.lift[self.fixed])
        rhs_p = -(self.D[:, self.fixed] @ self.lift[self.fixed])
        vf, lam = self.solve(op, rhs_v, rhs_p)
        return self.space.embed(vf, self.lift), lam


def solve_steady(space: FemSpace, nu: float, gamma: float, g0: BoundaryShape,
                 tol: float = 1e-10, max_iters: int = 50, picard_switch: float = 1e-2,
                 initial: np.ndarray | None = None, continuation: bool = True,
                 _depth: int = 0) -> SteadyState:
    """Picard iterations down to ``picard_switch``, then Newton, until ``tol``.

    Every iterate is recorded.  On divergence the solve is retried from the
    solution at twice the viscosity when ``continuation`` is set.
    """
    if not (nu > 0 and gamma > 0 and tol > 0):
        raise ValueError("nu, gamma and tol must be positive")
    lift = inflow_lift(space, g0)
    ops = _Operators(space, nu, gamma, lift)

    if initial is None:
        v, lam = ops.linear_step(ops.K)
        kind = "stokes"
    else:
        v = np.array(initial, dtype=float)
        v[space.constrained] = lift[space.constrained]
        lam = np.zeros(space.n_pressure)
        kind = "initial"
    history = []
    growth = 0
    try:
        while True:
            r = ops.residual(v, lam)
            res = float(np.linalg.norm(r))
            if history and res > history[-1][1]:
                growth += 1
            else:
                growth = 0
            history.append((v.copy(), res, kind))
            logger.debug("steady iterate %d (%s): residual %.3e", len(history), kind, res)
            if res <= tol:
                return SteadyState(v, -lam, res, history, nu, gamma)
            if growth >= 5 or not np.isfinite(res):
                raise SteadySolveError("steady iteration diverged", history)
            if len(history) > max_iters:
                raise SteadySolveError(f"no convergence in {max_iters} iterations", history)
            adv, react = assemble_convection(space, v, parts=True)
            if res >= picard_switch:
                v, lam = ops.linear_step((ops.K + adv).tocsr())
                kind = "picard"
            else:
                J = (ops.K + adv + react).tocsr()
                dv, dlam = ops.solve(J, -r[:space.n_free], -r[space.n_free:])
                v = v + space.embed(dv)
                lam = lam + dlam
                kind = "newton"
    except SteadySolveError:
        if not continuation or _depth >= 6:
            raise
        logger.info("continuation: solving at nu=%g first", 2 * nu)
        coarse = solve_steady(space, 2 * nu, gamma, g0, tol=max(tol, 1e-6),
                              max_iters=max_iters, picard_switch=picard_switch,
                              continuation=True, _depth=_depth + 1)
        return solve_steady(space, nu, gamma, g0, tol=tol, max_iters=max_iters,
                            picard_switch=picard_switch, initial=coarse.velocity,
                            continuation=False, _depth=_depth + 1)


@dataclass(frozen=True, eq=False)
class FamilyMember:
    v: np.ndarray
    dv: np.ndarray
    size: float


@dataclass(frozen=True, eq=False)
class LinearizationFamily:
    members: tuple
    v_inf: np.ndarray

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, k):
        return self.members[k]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([m.size for m in self.members])


def linearization_family(space: FemSpace, state: SteadyState, count: int,
                         gram=None) -> LinearizationFamily:
    """Pick ``count - 1`` iterates with decreasing distance to the solution, then the solution."""
    if count < 1:
        raise ValueError("count must be at least 1")
    gram = assemble_h1(space) if gram is None else gram
    v_inf = state.velocity
    exact = FamilyMember(v_inf.copy(), np.zeros_like(v_inf), 0.0)
    if count == 1:
        return LinearizationFamily((exact,), v_inf)
    cands = []
    best = np.inf
    for v, _, _ in state.history[:-1]:
        dv = v - v_inf
        size = h1_norm(space, dv, gram)
        if 0.0 < size < best:
            cands.append(FamilyMember(v.copy(), dv, size))
            best = size
    if len(cands) < count - 1:
        raise ValueError(f"only {len(cands)} usable iterates for {count - 1} perturbed members; "
                         "tighten the tolerance or use synthetic_family")
    if len(cands) > count - 1:
        logs = np.log([c.size for c in cands])
        picked = []
        for target in np.linspace(logs[0], logs[-1], count - 1):
            order = np.argsort(np.abs(logs - target), kind="stable")
            k = next(int(k) for k in order if int(k) not in picked)
            picked.append(k)
        cands = [cands[k] for k in sorted(picked)]
    return LinearizationFamily(tuple(cands) + (exact,), v_inf)


def divergence_free_projection(space: FemSpace, v: np.ndarray, mass=None,
                               div=None) -> np.ndarray:
    """Mass-orthogonal projection of the free part of ``v`` onto ``ker D``.

    Constrained DOFs of the result are zero.
    """
    M = assemble_mass(space) if mass is None else mass
    D = assemble_divergence(space) if div is None else div
    f = space.free
    Mf = M[f][:, f]
    Df = D[:, f]
    P = space.n_pressure
    S = sp.bmat([[Mf, Df.T], [Df, sp.csc_matrix((P, P))]], format="csc")
    rhs = np.concatenate([Mf @ np.asarray(v)[f], np.zeros(P)])
    x = spla.splu(S).solve(rhs)
    return space.embed(x[:len(f)])


def vortex_field(space: FemSpace, center=(1.25, 0.5), width=0.2) -> np.ndarray:
    """Nodal interpolant of the Gaussian vortex with stream function exp(-r^2/w^2)."""
    cx, cy = center

    def field(x, y):
        psi = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / width ** 2)
        return (-2 * (y - cy) / width ** 2 * psi, 2 * (x - cx) / width ** 2 * psi)

    return interpolate(space, field)


def synthetic_family(space: FemSpace, v_inf: np.ndarray, direction: np.ndarray, scales,
                     gram=None, div=None) -> LinearizationFamily:
    """Perturbations ``scale * direction`` of ``v_inf`` along a solenoidal direction."""
    direction = np.asarray(direction, dtype=float)
    scales = [float(s) for s in scales]
    if any(s < 0 for s in scales):
        raise ValueError("scales must be non-negative")
    if any(b >= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly decreasing")
    norm = np.linalg.norm(direction)
    if np.abs(direction[space.constrained]).max(initial=0.0) > 0.0:
        raise ValueError("direction must vanish on the Dirichlet boundary")
    D = assemble_divergence(space) if div is None else div
    if np.linalg.norm(D @ direction) > 1e-8 * norm:
        raise ValueError("direction is not discretely divergence free")
    gram = assemble_h1(space) if gram is None else gram
    unit = h1_norm(space, direction, gram)
    members = []
    for s in scales:
        dv = s * direction
        members.append(FamilyMember(v_inf + dv, dv, s * unit))
    return LinearizationFamily(tuple(members), np.asarray(v_inf, dtype=float))


def save_state(state: SteadyState, path, include_history: bool = True) -> None:
    lines = ["# oseencpf steady state",
             f"nu {state.nu!r}", f"gamma {state.gamma!r}", f"residual {state.residual!r}",
             f"n_velocity {len(state.velocity)}", f"n_pressure {len(state.pressure)}",
             f"history {len(state.history) if include_history else 0}",
             "VELOCITY"]
    lines += [repr(float(x)) for x in state.velocity]
    lines.append("PRESSURE")
    lines += [repr(float(x)) for x in state.pressure]
    if include_history:
        for k, (v, res, kind) in enumerate(state.history):
            lines.append(f"ITERATE {k} {res!r} {kind}")
            lines += [repr(float(x)) for x in v]
    Path(path).write_text("\n".join(lines) + "\n")


def load_state(path) -> SteadyState:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()
             if ln.strip() and not ln.startswith("#")]
    meta = {}
    k = 0
    while lines[k] != "VELOCITY":
        key, val = lines[k].split()
        meta[key] = val
        k += 1
    nv, npr, nh = int(meta["n_velocity"]), int(meta["n_pressure"]), int(meta["history"])
    vel = np.array([float(x) for x in lines[k + 1:k + 1 + nv]])
    k += 1 + nv
    if lines[k] != "PRESSURE":
        raise ValueError("missing PRESSURE block")
    pres = np.array([float(x) for x in lines[k + 1:k + 1 + npr]])
    k += 1 + npr
    history = []
    for _ in range(nh):
        _, _, res, kind = lines[k].split()
        v = np.array([float(x) for x in lines[k + 1:k + 1 + nv]])
        history.append((v, float(res), kind))
        k += 1 + nv
    return SteadyState(vel, pres, float(meta["residual"]), history,
                       float(meta["nu"]), float(meta["gamma"]))
