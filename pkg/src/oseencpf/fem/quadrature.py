"""Quadrature rules and the P2 reference basis in barycentric coordinates."""

import numpy as np

_s = np.sqrt(15.0)
_a1 = (6.0 - _s) / 21.0
_a2 = (6.0 + _s) / 21.0
_w1 = (155.0 - _s) / 1200.0
_w2 = (155.0 + _s) / 1200.0

# 7-point rule, exact for polynomials of degree 5; weights sum to 1
TRI_POINTS = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [1 - 2 * _a1, _a1, _a1], [_a1, 1 - 2 * _a1, _a1], [_a1, _a1, 1 - 2 * _a1],
    [1 - 2 * _a2, _a2, _a2], [_a2, 1 - 2 * _a2, _a2], [_a2, _a2, 1 - 2 * _a2],
])
TRI_WEIGHTS = np.array([9 / 40, _w1, _w1, _w1, _w2, _w2, _w2])

# 3-point Gauss-Legendre on [0, 1], exact for degree 5
_g = np.sqrt(3.0 / 5.0)
LINE_POINTS = 0.5 * np.array([1 - _g, 1.0, 1 + _g])
LINE_WEIGHTS = np.array([5 / 18, 8 / 18, 5 / 18])


def p2_values(lam):
    """P2 basis at barycentric points ``lam`` of shape (Q, 3) -> (Q, 6).

    Ordering: vertices 0, 1, 2, then midpoints of edges (0,1), (1,2), (2,0).
    """
    lam = np.atleast_2d(lam)
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    return np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])


def p2_lambda_derivatives(lam):
    """d phi_i / d lambda_k at ``lam`` -> (Q, 6, 3)."""
    lam = np.atleast_2d(lam)
    Q = len(lam)
    d = np.zeros((Q, 6, 3))
    for k in range(3):
        d[:, k, k] = 4 * lam[:, k] - 1
    for e, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
        d[:, 3 + e, i] = 4 * lam[:, j]
        d[:, 3 + e, j] = 4 * lam[:, i]
    return d


def p2_line_values(t):
    """Quadratic trace basis on an edge: (start vertex, end vertex, midpoint)."""
    t = np.asarray(t, dtype=float)
    return np.column_stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1),
                            4 * t * (1 - t)])


PHI = p2_values(TRI_POINTS)
DPHI = p2_lambda_derivatives(TRI_POINTS)
LINE_PHI = p2_line_values(LINE_POINTS)
