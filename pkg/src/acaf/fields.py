"""Polynomial tensor fields on a flat chart.

A field is a numpy object array whose entries are FLINT ``fmpq_mpoly``
polynomials in the chart coordinates ``x0 .. x{n-1}``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
from flint import fmpq, fmpq_mpoly, fmpq_mpoly_ctx

PolyScalar = fmpq_mpoly


@lru_cache(maxsize=None)
def ring(n: int) -> fmpq_mpoly_ctx:
    """Polynomial ring in the ``n`` chart coordinates."""
    return fmpq_mpoly_ctx.get(("x", n), "deglex")


def coords(n: int) -> tuple[PolyScalar, ...]:
    return ring(n).gens()


def const(n: int, c) -> PolyScalar:
    return ring(n).constant(fmpq(c) if not isinstance(c, fmpq) else c)


def from_terms(n: int, terms: dict[tuple[int, ...], object]) -> PolyScalar:
    """Polynomial from an exponent-vector -> coefficient mapping."""
    return ring(n).from_dict({tuple(k): fmpq(v) if not isinstance(v, fmpq) else v for k, v in terms.items()})


def zeros(n: int, shape) -> np.ndarray:
    z = ring(n).constant(0)
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(out.shape):
        out[idx] = z
    return out


def lift(n: int, a: np.ndarray) -> np.ndarray:
    """Promote an array of rationals (or mixed) to a polynomial field."""
    a = np.asarray(a, dtype=object)
    ctx = ring(n)
    out = np.empty(a.shape, dtype=object)
    for idx in np.ndindex(a.shape):
        v = a[idx]
        out[idx] = v if isinstance(v, fmpq_mpoly) else ctx.constant(fmpq(v) if not isinstance(v, fmpq) else v)
    return out


def normalize(n: int, a: np.ndarray) -> np.ndarray:
    """Replace stray int/fmpq entries (e.g. from empty einsum sums) by polynomials."""
    return lift(n, a)


def grad(f: np.ndarray, n: int) -> np.ndarray:
    """Coordinate gradient; the derivative index becomes the first axis."""
    f = np.asarray(f, dtype=object)
    out = np.empty((n,) + f.shape, dtype=object)
    for idx in np.ndindex(f.shape):
        v = f[idx]
        for a in range(n):
            out[(a,) + idx] = v.derivative(a)
    return out


def pack(items, shape=None) -> np.ndarray:
    """Object array from a flat list of entries.

    ``np.array`` must not be used on polynomials: they expose ``__len__`` and
    ``__getitem__`` and numpy would unpack them as sequences.
    """
    items = list(items)
    out = np.empty(len(items), dtype=object)
    for i, v in enumerate(items):
        out[i] = v
    return out.reshape(shape) if shape is not None else out


def scale(a: np.ndarray, c) -> np.ndarray:
    """Entrywise ``a * c`` for a scalar polynomial ``c`` (numpy would unpack it)."""
    a = np.asarray(a, dtype=object)
    return pack([v * c for v in a.reshape(-1)], a.shape)


def is_zero(f) -> bool:
    if isinstance(f, np.ndarray):
        return all(v == 0 for v in f.ravel())
    return f == 0


def evaluate(f: np.ndarray, point) -> np.ndarray:
    """Evaluate every entry at a rational point."""
    pt = [fmpq(p) if not isinstance(p, fmpq) else p for p in point]
    out = np.empty(np.shape(f), dtype=object)
    for idx in np.ndindex(out.shape):
        v = f[idx]
        out[idx] = v(*pt) if isinstance(v, fmpq_mpoly) else fmpq(v)
    return out


def max_degree(f: np.ndarray) -> int:
    degs = [v.total_degree() for v in np.asarray(f, dtype=object).ravel() if v != 0]
    return max(degs) if degs else -1


def monomials(n: int, degree: int) -> list[tuple[int, ...]]:
    """All exponent vectors of total degree <= ``degree``."""
    out = []
    for d in range(degree + 1):
        for c in itertools.combinations_with_replacement(range(n), d):
            e = [0] * n
            for i in c:
                e[i] += 1
            out.append(tuple(e))
    return out


def terms(p: PolyScalar) -> dict[tuple[int, ...], fmpq]:
    return {tuple(k): v for k, v in p.to_dict().items()}


def linear_apply(M, f: np.ndarray, n: int) -> np.ndarray:
    """Apply a rational matrix (``fmpq_mat``, k x size) to a flattened field.

    The product is taken coefficient by coefficient, so the cost is one
    FLINT matrix product instead of k * size polynomial operations. A purely
    rational input gives a rational output.
    """
    from flint import fmpq_mat

    flat = np.asarray(f, dtype=object).reshape(-1)
    k = M.nrows()
    if not any(isinstance(v, fmpq_mpoly) for v in flat):
        v = fmpq_mat(len(flat), 1, [fmpq(x) if not isinstance(x, fmpq) else x for x in flat])
        return pack((M * v).entries())
    index: dict[tuple[int, ...], int] = {}
    per = []
    for v in flat:
        d = terms(v) if isinstance(v, fmpq_mpoly) else ({(0,) * n: fmpq(v)} if v != 0 else {})
        per.append(d)
        for e in d:
            index.setdefault(e, len(index))
    m = len(index)
    if m == 0:
        return zeros(n, (k,))
    C = fmpq_mat(len(flat), m)
    for i, d in enumerate(per):
        for e, c in d.items():
            C[i, index[e]] = c
    P = M * C
    exps = list(index)
    ctx = ring(n)
    out = np.empty(k, dtype=object)
    for i in range(k):
        out[i] = ctx.from_dict({exps[j]: P[i, j] for j in range(m) if P[i, j] != 0})
    return out
