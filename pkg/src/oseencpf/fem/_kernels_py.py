"""Element kernels in NumPy; reference backend for the compiled one.

All kernels take ``grads`` (T, 3, 2), the constant gradients of the
barycentric coordinates, and ``area`` (T,).  Local vector DOFs are ordered
component-major: index ``a * 6 + i`` is component ``a`` of P2 node ``i``.
Rows index test functions, columns trial functions.
"""

import numpy as np

from .quadrature import DPHI, PHI, TRI_POINTS, TRI_WEIGHTS


def _basis_gradients(grads):
    return np.einsum("qik,tkd->tqid", DPHI, grads)


def stokes_local(grads, area):
    g = _basis_gradients(grads)
    W = area[:, None] * TRI_WEIGHTS[None, :]
    gg = np.einsum("tq,tqid,tqjd->tij", W, g, g)
    # cross[t, a, b, i, j] = int d_a phi_j * d_b phi_i
    cross = np.einsum("tq,tqja,tqib->tabij", W, g, g)
    T = len(area)
    out = 2.0 * cross
    out[:, 0, 0] += 2.0 * gg
    out[:, 1, 1] += 2.0 * gg
    return out.transpose(0, 1, 3, 2, 4).reshape(T, 12, 12)


def divergence_local(grads, area):
    g = _basis_gradients(grads)
    W = area[:, None] * TRI_WEIGHTS[None, :]
    out = np.einsum("tq,qp,tqjb->tpbj", W, TRI_POINTS, g)
    return out.reshape(len(area), 3, 12)


def convection_local(grads, area, wloc):
    """Advection ``((w.grad) v, phi)`` and reaction ``((v.grad) w, phi)`` parts."""
    g = _basis_gradients(grads)
    W = area[:, None] * TRI_WEIGHTS[None, :]
    w = np.asarray(wloc, dtype=float).reshape(-1, 2, 6)
    wval = np.einsum("qi,tai->tqa", PHI, w)
    gw = np.einsum("tai,tqid->tqad", w, g)
    T = len(area)
    adv_s = np.einsum("tq,qi,tqd,tqjd->tij", W, PHI, wval, g)
    adv = np.zeros((T, 2, 6, 2, 6))
    adv[:, 0, :, 0, :] = adv_s
    adv[:, 1, :, 1, :] = adv_s
    react = np.einsum("tq,qi,qj,tqab->taibj", W, PHI, PHI, gw)
    return adv.reshape(T, 12, 12), react.reshape(T, 12, 12)
