"""Dense algebraic Riccati equations by the Hamiltonian sign function.

The equation ``F^T X + X F - X G X + Q = 0`` is solved for its stabilizing
solution: the matrix sign function of the Hamiltonian
``[[F, -G], [-Q, -F^T]]`` is computed by the scaled Newton iteration, ``X``
is read off its stable invariant subspace, and a few Newton-Kleinman steps
polish the residual.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

logger = logging.getLogger(__name__)

__all__ = [
    "RiccatiError",
    "RiccatiSolution",
    "matrix_sign",
    "solve_care",
    "solve_filter_riccati",
    "solve_control_riccati",
    "filter_residual",
]


class RiccatiError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    X: np.ndarray
    residual: float          # max-abs residual entry
    iterations: int          # sign-function steps
    newton_steps: int = 0

    @property
    def relative_residual(self) -> float:
        scale = float(np.abs(self.X).max()) if self.X.size else 0.0
        return self.residual / scale if scale else self.residual


def matrix_sign(Z: np.ndarray, maxiter: int = 100, tol: float | None = None):
    """Scaled Newton iteration ``Z <- (Z / c + c Z^{-1}) / 2``.

    Returns ``(sign, iterations)``; raises :class:`RiccatiError` without
    convergence in ``maxiter`` steps.
    """
    Z = np.array(Z, dtype=float)
    n = Z.shape[0]
    tol = 10 * n * np.finfo(float).eps if tol is None else tol
    scale = True
    for k in range(1, maxiter + 1):
        Zi = np.linalg.inv(Z)
        if scale:
            _, logdet = np.linalg.slogdet(Z)
            c = np.exp(logdet / n)
        else:
            c = 1.0
        Zn = 0.5 * (Z / c + c * Zi)
        err = np.linalg.norm(Zn - Z, 1) / np.linalg.norm(Zn, 1)
        Z = Zn
        if err < 1e-2:
            scale = False
        if err <= tol:
            return Z, k
        if err <= np.sqrt(tol) and k > 1:
            # one more unscaled step reaches the quadratic limit
            Z = 0.5 * (Z + np.linalg.inv(Z))
            return Z, k + 1
    raise RiccatiError(f"sign iteration did not converge in {maxiter} steps")


def _care_residual(F, G, Q, X):
    return F.T @ X + X @ F - X @ G @ X + Q


def solve_care(F, G, Q, maxiter: int = 100, rtol: float = 1e-8,
               newton_max: int = 20) -> RiccatiSolution:
    """Stabilizing solution of ``F^T X + X F - X G X + Q = 0`` (G, Q symmetric PSD)."""
    F = np.asarray(F, dtype=float)
    G = 0.5 * (np.asarray(G, dtype=float) + np.asarray(G, dtype=float).T)
    Q = 0.5 * (np.asarray(Q, dtype=float) + np.asarray(Q, dtype=float).T)
    n = F.shape[0]
    H = np.block([[F, -G], [-Q, -F.T]])
    try:
        S, its = matrix_sign(H, maxiter=maxiter)
    except np.linalg.LinAlgError as exc:
        raise RiccatiError(f"Hamiltonian is singular: {exc}") from exc
    I = np.eye(n)
    lhs = np.vstack([S[:n, n:], S[n:, n:] + I])
    rhs = -np.vstack([S[:n, :n] + I, S[n:, :n]])
    X = la.lstsq(lhs, rhs)[0]
    X = 0.5 * (X + X.T)

    res = np.abs(_care_residual(F, G, Q, X)).max()
    steps = 0
    target = 1e-2 * rtol
    while steps < newton_max and res > target * max(np.abs(X).max(), 1e-300):
        Ak = F - G @ X
        Xn = la.solve_continuous_lyapunov(Ak.T, -(Q + X @ G @ X))
        Xn = 0.5 * (Xn + Xn.T)
        rn = np.abs(_care_residual(F, G, Q, Xn)).max()
        steps += 1
        if not np.isfinite(rn) or rn >= res:
            if rn < res:
                X, res = Xn, rn
            break
        X, res = Xn, rn
    logger.debug("care: %d sign steps, %d Newton steps, residual %.2e", its, steps, res)

    scale = np.abs(X).max()
    if scale and res > rtol * scale:
        raise RiccatiError(f"residual {res:.2e} exceeds {rtol:g} * |X| = {rtol * scale:.2e}")
    ev = la.eigvalsh(X) if n else np.zeros(0)
    if n and ev.min() < -1e-8 * max(1.0, abs(ev).max()):
        raise RiccatiError(f"solution is indefinite (min eigenvalue {ev.min():.3e})")
    closed = la.eigvals(F - G @ X) if n else np.zeros(0)
    if n and closed.real.max() >= 0:
        raise RiccatiError("solution is not stabilizing; check stabilizability/detectability")
    return RiccatiSolution(X, float(res), its, steps)


def _weights(sys, weights):
    B, C = sys.B, sys.C
    if weights is not None:
        wb, wc = weights
        B = B * wb if np.ndim(wb) == 0 else B @ np.asarray(wb)
        C = C * wc if np.ndim(wc) == 0 else np.asarray(wc) @ C
    return B, C


def solve_filter_riccati(sys, weights=None, **kw) -> RiccatiSolution:
    """``A X + X A^T - X C^T C X + B B^T = 0`` for a state-space system."""
    B, C = _weights(sys, weights)
    return solve_care(sys.A.T, C.T @ C, B @ B.T, **kw)


def solve_control_riccati(sys, weights=None, **kw) -> RiccatiSolution:
    """``A^T X + X A - X B B^T X + C^T C = 0`` for a state-space system."""
    B, C = _weights(sys, weights)
    return solve_care(sys.A, B @ B.T, C.T @ C, **kw)


def filter_residual(sys, X, weights=None) -> np.ndarray:
    B, C = _weights(sys, weights)
    A = sys.A
    return A @ X + X @ A.T - X @ C.T @ C @ X + B @ B.T
