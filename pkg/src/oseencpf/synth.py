"""Normalized-coprime-factor robust controllers and closed-loop checks.

The central controller of the normalized left coprime factor problem is
built from the control Riccati solution ``X`` and the filter Riccati
solution ``Y``.  Its robustness margin ``b`` is verified after synthesis by
computing the four-block gain ``|| [I; K] (I - G K)^{-1} [I G] ||`` with the
H-infinity routine.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from . import io
from .hinf import hinf_norm
from .lti import StateSpace, spectral_abscissa
from .riccati import solve_control_riccati, solve_filter_riccati

logger = logging.getLogger(__name__)

__all__ = [
    "Controller",
    "ClosedLoopReport",
    "SynthesisError",
    "ncf_margin",
    "ncf_controller",
    "closed_loop",
    "four_block_gain",
    "balanced_truncation",
    "save_controller",
    "load_controller",
]

#: systems beyond this order are balanced-truncated before synthesis
TRUNCATION_THRESHOLD = 400


class SynthesisError(RuntimeError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True, eq=False)
class Controller(StateSpace):
    """Negative-feedback controller ``u = -K y``."""

    margin: float = float("nan")
    achieved_gain: float = float("nan")
    truncation_error: float = 0.0


@dataclass(frozen=True)
class ClosedLoopReport:
    abscissa: float
    stable: bool
    margin: float = float("nan")
    perturbation_size: float = float("nan")

    @property
    def certified(self) -> bool:
        """Small-gain certificate: perturbation strictly inside the margin."""
        return bool(self.perturbation_size < self.margin)


def _riccati_pair(sys):
    X = solve_control_riccati(sys).X
    Y = solve_filter_riccati(sys).X
    return X, Y


def ncf_margin(sys, riccati=None) -> float:
    """Optimal normalized-coprime-factor stability margin ``(1 + lmax(XY))^(-1/2)``."""
    X, Y = _riccati_pair(sys) if riccati is None else riccati
    lam = la.eigvals(X @ Y).real.max() if X.size else 0.0
    return float(1.0 / np.sqrt(1.0 + max(lam, 0.0)))


def balanced_truncation(sys, order: int | None = None, rtol: float = 1e-10):
    """Square-root balanced truncation of a stable system.

    Returns ``(reduced, error_bound)`` with the usual twice-the-tail bound.
    With ``order=None`` all Hankel singular values above ``rtol * hsv[0]``
    are kept.
    """
    A, B, C = sys.A, sys.B, sys.C
    if spectral_abscissa(A) >= 0:
        raise SynthesisError("balanced truncation needs a stable system")
    P = la.solve_continuous_lyapunov(A, -B @ B.T)
    Q = la.solve_continuous_lyapunov(A.T, -C.T @ C)

    def factor(G):
        w, V = la.eigh(0.5 * (G + G.T))
        return V * np.sqrt(np.clip(w, 0.0, None))

    Zp, Zq = factor(P), factor(Q)
    U, hsv, Vt = la.svd(Zq.T @ Zp)
    if order is None:
        order = max(1, int(np.sum(hsv > rtol * hsv[0])))
    order = min(order, len(hsv))
    S = 1.0 / np.sqrt(hsv[:order])
    T = Zp @ Vt[:order].T * S
    Ti = (S[:, None] * U[:, :order].T) @ Zq.T
    red = StateSpace(Ti @ A @ T, Ti @ B, C @ T, sys.D)
    return red, float(2.0 * hsv[order:].sum())


def four_block(sys, ctrl_pos: StateSpace) -> StateSpace:
    """Realization of ``[I; K](I - G K)^{-1}[I G]`` for a positive-feedback ``K``."""
    A, B, C = sys.A, sys.B, sys.C
    Ak, Bk, Ck = ctrl_pos.A, ctrl_pos.B, ctrl_pos.C
    n, nk = A.shape[0], Ak.shape[0]
    k, m = C.shape[0], B.shape[1]
    Af = np.block([[A, B @ Ck], [Bk @ C, Ak]])
    Bf = np.block([[np.zeros((n, k)), B], [Bk, np.zeros((nk, m))]])
    Cf = np.block([[C, np.zeros((k, nk))], [np.zeros((m, n)), Ck]])
    Df = np.block([[np.eye(k), np.zeros((k, m))], [np.zeros((m, k)), np.zeros((m, m))]])
    return StateSpace(Af, Bf, Cf, Df)


def four_block_gain(sys, controller: Controller, tol: float = 1e-4) -> float:
    pos = StateSpace(controller.A, controller.B, -controller.C, -controller.D)
    return hinf_norm(four_block(sys, pos), tol=tol).value


def ncf_controller(sys, b: float | None = None, fraction: float = 0.8,
                   verify: bool = True) -> Controller:
    """Central normalized-coprime-factor controller with margin ``b``.

    ``b`` defaults to ``fraction * b_opt``.  Systems with more than
    ``TRUNCATION_THRESHOLD`` states are balanced-truncated first; the
    truncation error bound is stored on the controller.
    """
    if np.abs(np.asarray(sys.D)).max(initial=0.0) > 0:
        raise SynthesisError("plant must be strictly proper")
    design, trunc = sys, 0.0
    if sys.n_states > TRUNCATION_THRESHOLD:
        design, trunc = balanced_truncation(sys, order=TRUNCATION_THRESHOLD)
        logger.info("synthesis on a %d-state truncation (error bound %.2e)",
                    design.n_states, trunc)
    X, Y = _riccati_pair(design)
    b_opt = ncf_margin(design, (X, Y))
    if b is None:
        b = fraction * b_opt
    if not 0 < b < b_opt:
        raise SynthesisError(f"margin b={b:.6g} must lie in (0, b_opt={b_opt:.6g})")
    g2 = 1.0 / b ** 2
    A, B, C = design.A, design.B, design.C
    n = A.shape[0]
    Lm = (1.0 - g2) * np.eye(n) + X @ Y
    Z = g2 * la.solve(Lm.T, Y @ C.T)
    Ak = A - B @ B.T @ X + Z @ C
    Bk = Z
    Ck = B.T @ X
    ctrl = Controller(Ak, Bk, -Ck, None, margin=float(b), truncation_error=trunc)
    if not verify:
        return ctrl
    cl = closed_loop(sys, ctrl)
    if not cl.stable:
        raise SynthesisError(f"closed loop unstable (abscissa {cl.abscissa:.3e})")
    achieved = four_block_gain(design, ctrl)
    if achieved > (1.0 + 1e-3) / b:
        raise SynthesisError(f"four-block gain {achieved:.6g} exceeds 1/b = {1 / b:.6g}",
                             achieved)
    return Controller(Ak, Bk, -Ck, None, margin=float(b), achieved_gain=float(achieved),
                      truncation_error=trunc)


def closed_loop(plant, controller, perturbation_size: float = float("nan")) -> ClosedLoopReport:
    """Negative-feedback interconnection ``u = -K y`` and its spectral abscissa."""
    A, B, C, D = plant.A, plant.B, plant.C, plant.D
    Ak, Bk, Ck, Dk = controller.A, controller.B, controller.C, controller.D
    if Bk.shape[1] != C.shape[0] or Ck.shape[0] != B.shape[1]:
        raise ValueError("controller dimensions do not match the plant")
    I = np.eye(B.shape[1])
    F = I + Dk @ D
    if np.linalg.cond(F) > 1e12:
        raise ValueError("ill-posed feedback loop: I + Dk D is singular")
    W = la.inv(F)
    Acl = np.block([
        [A - B @ W @ Dk @ C, -B @ W @ Ck],
        [Bk @ (C - D @ W @ Dk @ C), Ak - Bk @ D @ W @ Ck],
    ])
    a = spectral_abscissa(Acl)
    return ClosedLoopReport(a, bool(a < 0), float(getattr(controller, "margin", np.nan)),
                            float(perturbation_size))


def save_controller(ctrl: Controller, path) -> None:
    io.save_bundle(path, {"A": ctrl.A, "B": ctrl.B, "C": ctrl.C, "D": ctrl.D},
                   {"kind": "Controller", "margin": repr(float(ctrl.margin)),
                    "achieved_gain": repr(float(ctrl.achieved_gain)),
                    "truncation_error": repr(float(ctrl.truncation_error))})


def load_controller(path) -> Controller:
    mats, meta = io.load_bundle(path)
    return Controller(mats["A"], mats["B"], mats["C"], mats["D"],
                      margin=float(meta.get("margin", "nan")),
                      achieved_gain=float(meta.get("achieved_gain", "nan")),
                      truncation_error=float(meta.get("truncation_error", "0")))
