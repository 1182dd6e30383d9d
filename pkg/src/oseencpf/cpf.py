"""Left coprime factorizations and their perturbations.

With an output injection ``L`` making ``A + L C`` stable, the plant
``G = C (sI - A)^{-1} B`` factors as ``G = M^{-1} N`` with

    N(s) = C (sI - A - LC)^{-1} B,      M(s) = I + C (sI - A - LC)^{-1} L.

Perturbing the state matrix to ``A + dA`` while keeping ``L`` changes the
factors by ``[dN dM](s) = C R(s) dA R_d(s) [B L]`` where ``R`` and ``R_d``
are the resolvents of ``A + LC`` and ``A + dA + LC``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .hinf import HinfError, HinfResult, hinf_norm
from .lti import SingularShiftError, StateSpace, spectral_abscissa
from .riccati import (RiccatiError, RiccatiSolution, solve_control_riccati,
                      solve_filter_riccati)

__all__ = [
    "FactorRealization",
    "FactorError",
    "RiccatiError",
    "RiccatiSolution",
    "HinfError",
    "HinfResult",
    "solve_filter_riccati",
    "solve_control_riccati",
    "output_injection",
    "coprime_realization",
    "perturbation_realization",
    "perturbation_sample",
    "factor_sample",
    "hinf_norm",
]


class FactorError(ValueError):
    """A factor realization would be unstable."""


@dataclass(frozen=True, eq=False)
class FactorRealization(StateSpace):
    label: str = "NM"

    def __post_init__(self):
        super().__post_init__()
        if self.label not in ("NM", "dNdM"):
            raise ValueError(f"unknown factor label {self.label!r}")


def output_injection(sys, riccati: RiccatiSolution | None = None, weights=None) -> np.ndarray:
    """``L = -X C^T`` from the filter Riccati solution (``-wc^2 X C^T`` when weighted)."""
    if riccati is None:
        riccati = solve_filter_riccati(sys, weights=weights)
    C = sys.C
    if weights is not None:
        wc = weights[1]
        C = C * wc if np.ndim(wc) == 0 else np.asarray(wc) @ C
        L = -riccati.X @ C.T
        return L * wc if np.ndim(wc) == 0 else L @ np.asarray(wc)
    return -riccati.X @ C.T


def _check_stable(M, what):
    a = spectral_abscissa(M)
    if not a < 0:
        raise FactorError(f"{what} is not stable (spectral abscissa {a:.3e})")
    return a


def coprime_realization(sys, L) -> FactorRealization:
    """``[N M]`` on the shared state matrix ``A + L C``."""
    L = np.asarray(L, dtype=float).reshape(sys.n_states, sys.n_outputs)
    AL = sys.A + L @ sys.C
    _check_stable(AL, "A + LC")
    k = sys.n_outputs
    Dn = np.asarray(sys.D)
    return FactorRealization(AL, np.hstack([sys.B + L @ Dn, L]), sys.C,
                             np.hstack([Dn, np.eye(k)]), label="NM")


def perturbation_realization(sys, dA, L) -> FactorRealization:
    """Cascade realization of ``[dN dM]`` with 2n states.

    Stage 1 runs ``v1' = (A + dA + LC) v1 + [B L] u``; stage 2 runs
    ``v' = (A + LC) v + dA v1`` with output ``y = C v``.
    """
    n = sys.n_states
    dA = np.asarray(dA, dtype=float).reshape(n, n)
    L = np.asarray(L, dtype=float).reshape(n, sys.n_outputs)
    AL = sys.A + L @ sys.C
    _check_stable(AL + dA, "cascade stage 1 (A + dA + LC)")
    _check_stable(AL, "cascade stage 2 (A + LC)")
    BL = np.hstack([sys.B, L])
    Af = np.block([[AL, dA], [np.zeros((n, n)), AL + dA]])
    Bf = np.vstack([np.zeros_like(BL), BL])
    Cf = np.hstack([sys.C, np.zeros_like(sys.C)])
    return FactorRealization(Af, Bf, Cf, None, label="dNdM")


def _solve(M, rhs, s):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)  # singularity handled below
        lu, piv = la.lu_factor(M, check_finite=False)
    d = np.abs(np.diag(lu))
    if len(d) and d.min() <= 1e3 * np.finfo(float).eps * max(d.max(), 1.0):
        ev = la.eigvals(s * np.eye(len(M)) - M)
        raise SingularShiftError(s, complex(ev[np.argmin(np.abs(ev - s))]))
    return la.lu_solve((lu, piv), rhs)


def perturbation_sample(sys, dA, L, s: complex) -> np.ndarray:
    """``[dN(s) dM(s)]`` by two sequential solves, shape ``(k, m + k)``."""
    s = complex(s)
    n = sys.n_states
    I = np.eye(n)
    AL = sys.A + np.asarray(L) @ sys.C
    BL = np.hstack([sys.B, np.asarray(L)]).astype(complex)
    x1 = _solve(s * I - AL - dA, BL, s)
    x2 = _solve(s * I - AL, np.asarray(dA) @ x1, s)
    return sys.C @ x2


def factor_sample(sys, L, s: complex):
    """``(N(s), M(s))`` from the resolvent of ``A + LC``."""
    s = complex(s)
    L = np.asarray(L, dtype=float)
    AL = sys.A + L @ sys.C
    X = _solve(s * np.eye(sys.n_states) - AL, np.hstack([sys.B + L @ sys.D, L]).astype(complex), s)
    Y = sys.C @ X
    m = sys.n_inputs
    return Y[:, :m] + sys.D, Y[:, m:] + np.eye(sys.n_outputs)
