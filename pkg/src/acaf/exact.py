"""Exact rational linear algebra on numpy object arrays, backed by FLINT."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from flint import fmpq, fmpq_mat, fmpq_poly

ZERO = fmpq(0)
ONE = fmpq(1)


class InconsistentSystem(ValueError):
    """Raised when a linear system has no exact solution."""


def q(x) -> fmpq:
    """Coerce an int, fmpq or "p/q" string to fmpq."""
    if isinstance(x, fmpq):
        return x
    if isinstance(x, str):
        if "/" in x:
            p, d = x.split("/")
            return fmpq(int(p), int(d))
        return fmpq(int(x))
    return fmpq(x)


def qarray(data) -> np.ndarray:
    """Object array of fmpq built from nested int/fmpq data."""
    a = np.array(data, dtype=object)
    out = np.empty(a.shape, dtype=object)
    for idx in np.ndindex(a.shape):
        out[idx] = q(a[idx])
    return out


def qzeros(shape) -> np.ndarray:
    out = np.empty(shape, dtype=object)
    out.fill(ZERO)
    return out


def qeye(n: int) -> np.ndarray:
    out = qzeros((n, n))
    for i in range(n):
        out[i, i] = ONE
    return out


def to_mat(a: np.ndarray) -> fmpq_mat:
    a = np.asarray(a, dtype=object)
    r, c = a.shape
    return fmpq_mat(r, c, [q(v) for v in a.ravel()])


def from_mat(m: fmpq_mat) -> np.ndarray:
    r, c = m.nrows(), m.ncols()
    out = np.empty((r, c), dtype=object)
    ent = m.entries()
    for k, v in enumerate(ent):
        out[k // c, k % c] = v
    return out


def is_zero(a) -> bool:
    """True when every entry of an object array (or scalar) is zero."""
    if isinstance(a, np.ndarray):
        return all(v == 0 for v in a.ravel())
    return a == 0


def rank(a: np.ndarray) -> int:
    a = np.asarray(a, dtype=object)
    if a.size == 0:
        return 0
    return to_mat(a).rank()


def rref(a: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form and the pivot columns."""
    m, rk = to_mat(a).rref()
    r = from_mat(m)[:rk]
    pivots = []
    for i in range(rk):
        for j in range(r.shape[1]):
            if r[i, j] != 0:
                pivots.append(j)
                break
    return r, pivots


def nullspace(a: np.ndarray) -> np.ndarray:
    """Basis of the right kernel, as the columns of the returned array."""
    a = np.asarray(a, dtype=object)
    ncols = a.shape[1]
    if a.shape[0] == 0:
        return qeye(ncols)
    r, pivots = rref(a)
    free = [j for j in range(ncols) if j not in set(pivots)]
    out = qzeros((ncols, len(free)))
    for k, f in enumerate(free):
        out[f, k] = ONE
        for i, p in enumerate(pivots):
            out[p, k] = -r[i, f]
    return out


def column_basis(a: np.ndarray) -> np.ndarray:
    """Independent columns spanning the column space of ``a``."""
    a = np.asarray(a, dtype=object)
    if a.shape[1] == 0:
        return a
    _, pivots = rref(a)
    return a[:, pivots]


def solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """One exact solution of ``a @ x = b``; ``b`` may be a vector or matrix."""
    a = np.asarray(a, dtype=object)
    b = np.asarray(b, dtype=object)
    vec = b.ndim == 1
    bb = b.reshape(-1, 1) if vec else b
    aug = np.concatenate([a, bb], axis=1)
    r, pivots = rref(aug)
    n = a.shape[1]
    if any(p >= n for p in pivots):
        raise InconsistentSystem("linear system has no solution")
    x = qzeros((n, bb.shape[1]))
    for i, p in enumerate(pivots):
        x[p] = r[i, n:]
    return x[:, 0] if vec else x


def left_inverse(a: np.ndarray) -> np.ndarray:
    """Matrix ``L`` with ``L @ a = I`` for ``a`` of full column rank."""
    a = np.asarray(a, dtype=object)
    m, k = a.shape
    _, rows = rref(a.T)
    if len(rows) != k:
        raise InconsistentSystem("matrix does not have full column rank")
    sub = to_mat(a[rows])
    inv = from_mat(sub.inv())
    out = qzeros((k, m))
    out[:, rows] = inv
    return out


def inverse(a: np.ndarray) -> np.ndarray:
    return from_mat(to_mat(a).inv())


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact product via FLINT (much faster than object-dtype ``@``)."""
    a = np.asarray(a, dtype=object)
    b = np.asarray(b, dtype=object)
    if a.ndim == 1:
        return matmul(a.reshape(1, -1), b)[0]
    if b.ndim == 1:
        return matmul(a, b.reshape(-1, 1))[:, 0]
    if 0 in a.shape or 0 in b.shape:
        out = qzeros((a.shape[0], b.shape[1]))
        return out
    return from_mat(to_mat(a) * to_mat(b))


def in_span(basis: np.ndarray, v: np.ndarray) -> bool:
    try:
        solve(basis, v)
    except InconsistentSystem:
        return False
    return True


def intersect(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Basis (columns) of the intersection of two column spaces."""
    a = column_basis(a)
    b = column_basis(b)
    if a.shape[1] == 0 or b.shape[1] == 0:
        return qzeros((a.shape[0], 0))
    ker = nullspace(np.concatenate([a, -b], axis=1))
    return column_basis(matmul(a, ker[: a.shape[1]])) if ker.shape[1] else qzeros((a.shape[0], 0))


def charpoly(a: np.ndarray) -> fmpq_poly:
    return to_mat(a).charpoly()


def minpoly(a: np.ndarray) -> fmpq_poly:
    return to_mat(a).minpoly()


def rational_eigenvalues(a: np.ndarray) -> tuple[dict[fmpq, int], bool]:
    """Rational roots of the characteristic polynomial with multiplicity.

    The flag reports whether the characteristic polynomial splits over Q.
    """
    p = charpoly(a)
    roots = {fmpq(r): int(m) for r, m in p.roots()}
    return roots, sum(roots.values()) == p.degree()


def block_diag_sum(blocks: Iterable[np.ndarray]) -> np.ndarray:
    blocks = list(blocks)
    r = sum(b.shape[0] for b in blocks)
    c = sum(b.shape[1] for b in blocks)
    out = qzeros((r, c))
    i = j = 0
    for b in blocks:
        out[i : i + b.shape[0], j : j + b.shape[1]] = b
        i += b.shape[0]
        j += b.shape[1]
    return out


def fmt(x) -> str:
    """Serialize an exact rational as "p/q" (integers as "p/1")."""
    x = q(x)
    return f"{x.p}/{x.q}"


def hstack(cols: Sequence[np.ndarray], nrows: int) -> np.ndarray:
    if not cols:
        return qzeros((nrows, 0))
    return np.concatenate([np.asarray(c, dtype=object).reshape(nrows, -1) for c in cols], axis=1)
