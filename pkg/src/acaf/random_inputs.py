"""Seeded generators of exact test data.

Every generator takes an explicit ``seed`` (or a ``random.Random``) so that
a failing case can be replayed from the command line.
"""

from __future__ import annotations

import random

import numpy as np
from flint import fmpq

from . import exact, fields
from .connection_lab import PolyConnection, transform_connection
from .tensor_core import standard_J_matrix


def _rng(seed) -> random.Random:
    return seed if isinstance(seed, random.Random) else random.Random(seed)


def rational(rng: random.Random, bound: int = 3) -> fmpq:
    return fmpq(rng.randint(-bound, bound), rng.choice((1, 1, 2, 3)))


def poly(n: int, degree: int, rng: random.Random, terms: int = 3) -> fields.PolyScalar:
    """A sparse random polynomial of total degree at most ``degree``."""
    mons = fields.monomials(n, degree)
    picks = {tuple(rng.choice(mons)): rational(rng) for _ in range(terms)}
    return fields.from_terms(n, picks)


def poly_array(n: int, shape, degree: int, seed, terms: int = 3) -> np.ndarray:
    rng = _rng(seed)
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(out.shape):
        out[idx] = poly(n, degree, rng, terms)
    return out


def rational_array(shape, seed, bound: int = 3) -> np.ndarray:
    rng = _rng(seed)
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(out.shape):
        out[idx] = rational(rng, bound)
    return out


def symmetric(T: np.ndarray) -> np.ndarray:
    return (T + T.T) * fmpq(1, 2)


def antisymmetric(T: np.ndarray) -> np.ndarray:
    return (T - T.T) * fmpq(1, 2)


def random_torsion_free(n: int, degree: int, seed, terms: int = 2) -> PolyConnection:
    """A torsion-free connection with random polynomial coefficients."""
    g = poly_array(n, (n, n, n), degree, seed, terms)
    g = (g + g.transpose(1, 0, 2)) * fmpq(1, 2)
    return PolyConnection(n, g, True)


def random_symplectic_connection(n: int, degree: int, seed, terms: int = 2) -> PolyConnection:
    """A torsion-free connection preserving J.

    gamma_abc = Gamma_ab^e J_ec is totally symmetric, so
    Gamma_ab^d = -gamma_abc J^{cd}.
    """
    g = poly_array(n, (n, n, n), degree, seed, terms)
    sym = sum(g.transpose(p) for p in _perms3()) * fmpq(1, 6)
    J = standard_J_matrix(n)
    return PolyConnection(n, -np.tensordot(sym, J, axes=([2], [0])), True)


def _perms3():
    return [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


def random_cf(n: int, degree: int, seed, terms: int = 2) -> PolyConnection:
    """A torsion-free connection projectively equivalent to a symplectic one."""
    rng = _rng(seed)
    base = random_symplectic_connection(n, degree, rng, terms)
    U = poly_array(n, (n,), degree, rng, terms)
    return transform_connection(base, "projective", upsilon=U)


def random_symplectic_matrix(n: int, seed, steps: int = 3) -> np.ndarray:
    """A rational matrix g with g^T J g = J, built from shears."""
    rng = _rng(seed)
    h = n // 2
    g = exact.qeye(n)
    for _ in range(steps):
        S = symmetric(rational_array((h, h), rng, 2))
        M = exact.qeye(n)
        if rng.random() < 0.5:
            M[:h, h:] = S
        else:
            M[h:, :h] = S
        g = exact.matmul(g, M)
    return g


def random_sym(n: int, seed, degree: int | None = None) -> np.ndarray:
    T = rational_array((n, n), seed) if degree is None else poly_array(n, (n, n), degree, seed)
    return symmetric(T)


def random_anti_tracefree(n: int, seed, degree: int | None = None) -> np.ndarray:
    """Antisymmetric with J^{ab} T_ab = 0."""
    T = rational_array((n, n), seed) if degree is None else poly_array(n, (n, n), degree, seed)
    T = antisymmetric(T)
    J = standard_J_matrix(n)
    tr = np.einsum("ab,ab->", J, T)
    # J^{ab} J_ab = n
    return T - J * (tr * fmpq(1, n))

