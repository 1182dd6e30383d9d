"""H-infinity norm of stable state-space systems.

Level-set iteration on the imaginary-axis eigenvalues of the
Hamiltonian associated with a test level ``g``: ``g`` is a singular value of
``G(i w)`` exactly when ``i w`` is an eigenvalue.  Each level set yields the
frequency intervals where the gain exceeds ``g``; evaluating their midpoints
raises the lower bound, and the absence of crossings certifies ``g`` as an
upper bound.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize_scalar

logger = logging.getLogger(__name__)

__all__ = ["HinfResult", "HinfError", "hinf_norm", "gain", "hamiltonian"]


class HinfError(RuntimeError):
    pass


@dataclass(frozen=True)
class HinfResult:
    value: float
    peak_frequency: float
    bracket: float           # relative width (upper - value) / value
    grid_lower: float = 0.0  # best value seen on the initial grid
    iterations: int = 0

    @property
    def upper(self) -> float:
        return self.value * (1.0 + self.bracket)


def _mats(sys):
    return (np.asarray(sys.A, float), np.asarray(sys.B, float),
            np.asarray(sys.C, float), np.asarray(sys.D, float))


def gain(sys, w: float) -> float:
    """Largest singular value of ``G(i w)``."""
    A, B, C, D = _mats(sys)
    n = A.shape[0]
    if n == 0:
        return float(la.norm(D, 2)) if D.size else 0.0
    X = la.solve(1j * w * np.eye(n) - A, B.astype(complex))
    return float(la.svdvals(C @ X + D)[0])


def _svals(A, B, C, D, w):
    X = la.solve(1j * w * np.eye(A.shape[0]) - A, B.astype(complex))
    return la.svdvals(C @ X + D)


def hamiltonian(sys, g: float) -> np.ndarray:
    """Hamiltonian whose imaginary eigenvalues mark where ``g`` is a singular value."""
    A, B, C, D = _mats(sys)
    m, k = B.shape[1], C.shape[0]
    R = D.T @ D - g * g * np.eye(m)
    S = D @ D.T - g * g * np.eye(k)
    Ri = la.inv(R)
    return np.block([
        [A - B @ Ri @ D.T @ C, -g * B @ Ri @ B.T],
        [g * C.T @ la.solve(S, C), -A.T + C.T @ D @ Ri @ B.T],
    ])


def _grid(n_grid, lo, hi):
    return np.concatenate([[0.0], np.logspace(np.log10(lo), np.log10(hi), n_grid)])


def _polish(f, w, lo, hi):
    """Local maximisation of ``f`` on ``[lo, hi]`` around ``w``; returns (value, w)."""
    if hi <= lo:
        return f(w), w
    res = minimize_scalar(lambda x: -f(x), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * max(hi, 1.0)})
    if -res.fun > f(w):
        return -res.fun, float(res.x)
    return f(w), w


def hinf_norm(sys, tol: float = 1e-4, n_grid: int = 200, omega_range=(1e-3, 1e3),
              max_iter: int = 60, check_stability: bool = True) -> HinfResult:
    """``sup_w sigma_max(G(i w))`` for a stable realization.

    Returns the certified lower bound as ``value``; the level ``value *
    (1 + bracket)`` is verified to have no imaginary-axis crossings, and
    ``bracket <= tol`` on success.
    """
    A, B, C, D = _mats(sys)
    n = A.shape[0]
    sigma_d = float(la.norm(D, 2)) if D.size else 0.0
    if n == 0 or not B.any() or not C.any():
        return HinfResult(sigma_d, np.inf if sigma_d else 0.0, 0.0, sigma_d)
    ev = la.eigvals(A)
    if check_stability and ev.real.max() >= 0:
        raise HinfError(f"system is not stable (abscissa {ev.real.max():.3e})")

    f = lambda w: float(_svals(A, B, C, D, w)[0])  # noqa: E731
    lo, hi = omega_range
    # include the modal frequencies, where lightly damped peaks sit
    modal = np.abs(ev.imag)
    modal = modal[(modal > 0) & np.isfinite(modal)]
    omegas = np.unique(np.concatenate([_grid(n_grid, lo, hi), modal[modal <= 1e3 * hi]]))
    gains = np.array([f(w) for w in omegas])
    for _ in range(6):
        k = int(np.argmax(gains))
        if k != len(omegas) - 1:
            break
        hi *= 1e3
        extra = np.logspace(np.log10(omegas[-1]), np.log10(hi), n_grid // 4 + 2)[1:]
        omegas = np.concatenate([omegas, extra])
        gains = np.concatenate([gains, [f(w) for w in extra]])
    k = int(np.argmax(gains))
    lower, w_peak = float(gains[k]), float(omegas[k])
    if sigma_d > lower:
        lower, w_peak = sigma_d, np.inf
    grid_lower = lower

    if lower == 0.0:
        # identically zero on a grid denser than the system order
        return HinfResult(0.0, 0.0, 0.0, 0.0)

    # local refinement of the grid peak before the level-set loop
    if np.isfinite(w_peak):
        left = omegas[k - 1] if k > 0 else 0.0
        right = omegas[k + 1] if k + 1 < len(omegas) else 2 * w_peak
        val, w = _polish(f, w_peak, left, right)
        if val > lower:
            lower, w_peak = val, w

    eps_int = tol / 10.0
    upper = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = lower * (1.0 + 2 * eps_int)
        H = hamiltonian(sys, g)
        lam = la.eigvals(H)
        hn = max(np.abs(lam).max(), 1.0)
        cand = lam[(np.abs(lam.real) <= 1e-7 * np.maximum(np.abs(lam), 1e-6 * hn))
                   & (lam.imag >= 0)]
        # accept only frequencies where g really is a singular value
        vtol = 0.5 * (g - lower) / g
        crossings = []
        for w in np.sort(np.abs(cand.imag)):
            sv = _svals(A, B, C, D, w)
            if np.min(np.abs(sv - g)) <= vtol * g:
                if not crossings or w - crossings[-1] > 1e-10 * max(w, 1.0):
                    crossings.append(float(w))
        if not crossings:
            upper = g
            break
        pts = np.array([0.0] + crossings)
        mids = np.concatenate([0.5 * (pts[:-1] + pts[1:]), [0.0, 2 * crossings[-1]]])
        vals = np.array([f(w) for w in mids])
        best = int(np.argmax(vals))
        if vals[best] > lower * (1.0 + 1e-14):
            lower, w_peak = float(vals[best]), float(mids[best])
            continue
        # midpoints gave no progress; try local maximisation between crossings
        improved = False
        for a, b in zip(pts[:-1], pts[1:]):
            val, w = _polish(f, 0.5 * (a + b), a, b)
            if val > lower * (1.0 + 1e-14):
                lower, w_peak, improved = val, w, True
        if not improved:
            raise HinfError(f"bisection stalled at level {g:.6e} "
                            f"(crossings at {crossings[:4]})")
    else:
        raise HinfError(f"no certified upper bound after {max_iter} iterations")

    if np.isfinite(w_peak):
        val, w = _polish(f, w_peak, max(0.0, w_peak * 0.999), w_peak * 1.001 + 1e-12)
        if val > lower:
            lower, w_peak = min(val, upper), w
    bracket = (upper - lower) / lower
    logger.debug("hinf: %.10g at w=%.4g after %d level sets (bracket %.1e)",
                 lower, w_peak, it, bracket)
    return HinfResult(lower, w_peak, bracket, grid_lower, it)
