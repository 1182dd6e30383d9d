"""Plain-text exchange formats: coordinate sparse matrices and matrix bundles.

A matrix bundle is a sequence of blocks

    MATRIX <name> <rows> <cols>
    <row-major values, one matrix row per line>

optionally preceded by ``META <key> <value>`` lines.  Lines starting with
``#`` are comments.  Complex matrices are not supported.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

__all__ = ["export_coo", "import_coo", "save_bundle", "load_bundle"]


def export_coo(matrix, path) -> None:
    """Write ``i j value`` lines (0-based) preceded by a shape comment."""
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    lines = [f"# shape {m.shape[0]} {m.shape[1]} nnz {m.nnz}"]
    lines += [f"{int(m.row[k])} {int(m.col[k])} {float(m.data[k])!r}" for k in order]
    Path(path).write_text("\n".join(lines) + "\n")


def import_coo(path) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    shape = None
    for line in Path(path).read_text().splitlines():
        if line.startswith("# shape"):
            parts = line.split()
            shape = (int(parts[2]), int(parts[3]))
            continue
        if not line.strip() or line.startswith("#"):
            continue
        i, j, v = line.split()
        rows.append(int(i))
        cols.append(int(j))
        vals.append(float(v))
    return sp.csr_matrix((vals, (rows, cols)), shape=shape)


def save_bundle(path, matrices: dict, meta: dict | None = None) -> None:
    lines = ["# oseencpf matrix bundle"]
    for key, val in (meta or {}).items():
        lines.append(f"META {key} {val}")
    for name, mat in matrices.items():
        a = np.atleast_2d(np.asarray(mat, dtype=float))
        lines.append(f"MATRIX {name} {a.shape[0]} {a.shape[1]}")
        lines += [" ".join(repr(float(x)) for x in row) for row in a]
    Path(path).write_text("\n".join(lines) + "\n")


def load_bundle(path):
    """Return ``(matrices, meta)`` from a bundle file."""
    matrices, meta = {}, {}
    lines = Path(path).read_text().splitlines()
    k = 0
    while k < len(lines):
        line = lines[k].strip()
        k += 1
        if not line or line.startswith("#"):
            continue
        head = line.split()
        if head[0] == "META":
            meta[head[1]] = " ".join(head[2:])
        elif head[0] == "MATRIX":
            name, r, c = head[1], int(head[2]), int(head[3])
            rows = []
            for _ in range(r):
                rows.append([float(x) for x in lines[k].split()])
                k += 1
            a = np.array(rows, dtype=float).reshape(r, c)
            matrices[name] = a
        else:
            raise ValueError(f"line {k}: unexpected {head[0]!r}")
    return matrices, meta
