"""Weighted symplectic tensor algebra.

Index conventions follow the printed abstract-index displays literally:
lowering contracts J's first index (xi_b = xi^a J_ab) and raising contracts
J's second index (U^d = J^db U_b). Lowering shifts the conformal weight by -2,
raising by +2.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import exact
from .exact import ONE, ZERO, qzeros

UP = "u"
LO = "l"


class TensorError(ValueError):
    """Rejected input to a tensor operation."""


def _check_n(n: int, minimum: int = 4) -> None:
    if not isinstance(n, (int, np.integer)) or n % 2 or n < minimum:
        raise TensorError(f"dimension must be an even integer >= {minimum}, got {n!r}")


@dataclass(frozen=True)
class WeightedTensor:
    """Dense tensor with index variance and integer conformal weight.

    ``symmetries`` is an optional tuple of ``(slots, kind)`` with kind in
    {"sym", "antisym"}; declared symmetries are verified at construction.
    """

    dim: int
    variance: tuple[str, ...]
    weight: int
    components: np.ndarray
    symmetries: tuple[tuple[tuple[int, ...], str], ...] = field(default=())

    def __post_init__(self) -> None:
        comps = np.asarray(self.components, dtype=object)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "variance", tuple(self.variance))
        if any(v not in (UP, LO) for v in self.variance):
            raise TensorError("variance entries must be 'u' or 'l'")
        if comps.shape != (self.dim,) * len(self.variance):
            raise TensorError(
                f"component array has shape {comps.shape}, expected {(self.dim,) * len(self.variance)}"
            )
        for slots, kind in self.symmetries:
            proj = _sym_apply(comps, slots, kind)
            if not _all_equal(proj, comps):
                raise TensorError(f"declared {kind} symmetry on slots {slots} does not hold")

    @property
    def rank(self) -> int:
        return len(self.variance)

    def __add__(self, other: "WeightedTensor") -> "WeightedTensor":
        _compatible(self, other)
        return WeightedTensor(self.dim, self.variance, self.weight, self.components + other.components)

    def __sub__(self, other: "WeightedTensor") -> "WeightedTensor":
        _compatible(self, other)
        return WeightedTensor(self.dim, self.variance, self.weight, self.components - other.components)

    def __neg__(self) -> "WeightedTensor":
        return WeightedTensor(self.dim, self.variance, self.weight, -self.components)

    def scale(self, c) -> "WeightedTensor":
        return WeightedTensor(self.dim, self.variance, self.weight, self.components * exact.q(c))

    def equals(self, other: "WeightedTensor") -> bool:
        return (
            self.dim == other.dim
            and self.variance == other.variance
            and self.weight == other.weight
            and _all_equal(self.components, other.components)
        )

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.components.ravel())


def _all_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return all(x == y for x, y in zip(a.ravel(), b.ravel()))


def _compatible(a: WeightedTensor, b: WeightedTensor) -> None:
    if a.dim != b.dim or a.variance != b.variance or a.weight != b.weight:
        raise TensorError("tensors differ in dimension, variance or weight")


@dataclass(frozen=True)
class SymplecticData:
    dim: int
    J_lower: WeightedTensor
    J_upper: WeightedTensor


def standard_J_matrix(n: int) -> np.ndarray:
    """Block matrix of sum_i x_i y_{n/2+i} - y_i x_{n/2+i}."""
    if n % 2 or n < 2:
        raise TensorError("J needs an even dimension")
    m = n // 2
    J = qzeros((n, n))
    for i in range(m):
        J[i, m + i] = ONE
        J[m + i, i] = -ONE
    return J


@lru_cache(maxsize=None)
def make_standard_J(n: int) -> SymplecticData:
    """Standard symplectic pair (J_ab of weight -2, J^bc of weight +2)."""
    _check_n(n)
    J = standard_J_matrix(n)
    lower = WeightedTensor(n, (LO, LO), -2, J, (((0, 1), "antisym"),))
    upper = WeightedTensor(n, (UP, UP), 2, J.copy(), (((0, 1), "antisym"),))
    prod = np.einsum("ab,bd->ad", lower.components, upper.components)
    if not _all_equal(prod, -exact.qeye(n)):
        raise TensorError("J_ab J^bd != -delta_a^d")
    return SymplecticData(n, lower, upper)


def delta(n: int, variance: tuple[str, str] = (LO, UP)) -> WeightedTensor:
    return WeightedTensor(n, variance, 0, exact.qeye(n))


def adjust_index(t: WeightedTensor, position: int, direction: str, J: SymplecticData | None = None) -> WeightedTensor:
    """Raise or lower one slot with the printed contraction order."""
    J = J or make_standard_J(t.dim)
    if not 0 <= position < t.rank:
        raise TensorError("slot out of range")
    var = list(t.variance)
    if direction == "lower":
        if var[position] != UP:
            raise TensorError("can only lower an upper slot")
        # xi_b = xi^a J_ab : contract slot with J's first index
        comps = np.moveaxis(np.tensordot(t.components, J.J_lower.components, axes=([position], [0])), -1, position)
        var[position] = LO
        return WeightedTensor(t.dim, tuple(var), t.weight - 2, comps)
    if direction == "raise":
        if var[position] != LO:
            raise TensorError("can only raise a lower slot")
        # U^d = J^db U_b : contract slot with J's second index
        comps = np.moveaxis(np.tensordot(t.components, J.J_upper.components, axes=([position], [1])), -1, position)
        var[position] = UP
        return WeightedTensor(t.dim, tuple(var), t.weight + 2, comps)
    raise TensorError("direction must be 'raise' or 'lower'")


def contract_trace(t: WeightedTensor, upper_slot: int, lower_slot: int) -> WeightedTensor:
    if t.variance[upper_slot] != UP or t.variance[lower_slot] != LO:
        raise TensorError("trace needs one upper and one lower slot")
    comps = np.trace(t.components, axis1=upper_slot, axis2=lower_slot)
    var = tuple(v for i, v in enumerate(t.variance) if i not in (upper_slot, lower_slot))
    if not var:
        comps = np.asarray(comps, dtype=object)
    return WeightedTensor(t.dim, var, t.weight, comps)


def tensor_product(a: WeightedTensor, b: WeightedTensor) -> WeightedTensor:
    if a.dim != b.dim:
        raise TensorError("dimension mismatch")
    comps = np.multiply.outer(a.components, b.components)
    return WeightedTensor(a.dim, a.variance + b.variance, a.weight + b.weight, comps)


def permute(t: WeightedTensor, perm: Sequence[int]) -> WeightedTensor:
    """New tensor whose slot i is the old slot perm[i]."""
    comps = np.transpose(t.components, perm)
    return WeightedTensor(t.dim, tuple(t.variance[p] for p in perm), t.weight, comps)


def _perm_sign(p: Sequence[int]) -> int:
    s = 1
    p = list(p)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                s = -s
    return s


def _sym_apply(comps: np.ndarray, slots: Sequence[int], kind: str) -> np.ndarray:
    slots = list(slots)
    k = len(slots)
    rank = comps.ndim
    acc = None
    for p in itertools.permutations(range(k)):
        axes = list(range(rank))
        for i, j in enumerate(p):
            axes[slots[i]] = slots[j]
        term = np.transpose(comps, axes)
        if kind == "antisym" and _perm_sign(p) < 0:
            term = -term
        acc = term if acc is None else acc + term
    return acc * exact.q(exact.fmpq(1, math.factorial(k)))


def symmetrize_project(
    t: WeightedTensor, slots: Sequence[int], mode: str, symmetry: str | None = None
) -> WeightedTensor:
    """Projector onto (anti)symmetric or J-trace-free tensors in the given slots.

    Projectors carry the 1/k! normalization and are idempotent. ``trace_free``
    needs the symmetry class of the slots (``symmetry`` in {"sym", "antisym",
    "none"}); its output has all J-contractions over slot pairs equal to zero.
    """
    slots = tuple(slots)
    vs = {t.variance[s] for s in slots}
    if len(vs) != 1:
        raise TensorError("slots must share variance")
    if mode in ("sym", "antisym"):
        return WeightedTensor(t.dim, t.variance, t.weight, _sym_apply(t.components, slots, mode))
    if mode != "trace_free":
        raise TensorError("mode must be sym, antisym or trace_free")
    if symmetry is None:
        raise TensorError("trace_free needs a declared symmetry class")
    P = trace_free_projector(t.dim, t.rank, slots, symmetry)
    flat = t.components.reshape(-1)
    out = P.dot(flat) if not _is_rational(flat) else exact.matmul(P, flat)
    return WeightedTensor(t.dim, t.variance, t.weight, out.reshape(t.components.shape))


def _is_rational(a: np.ndarray) -> bool:
    return all(isinstance(v, (int, exact.fmpq)) for v in a.ravel())


def _index_matrix_sym(n: int, rank: int, slots: tuple[int, ...], kind: str) -> np.ndarray:
    size = n**rank
    basis = np.empty(size, dtype=object)
    M = qzeros((size, size))
    eye = np.arange(size).reshape((n,) * rank)
    for idx in np.ndindex((n,) * rank):
        e = qzeros((n,) * rank)
        e[idx] = ONE
        M[:, eye[idx]] = _sym_apply(e, slots, kind).reshape(-1) if kind != "none" else e.reshape(-1)
    del basis
    return M


@lru_cache(maxsize=None)
def trace_free_projector(n: int, rank: int, slots: tuple[int, ...], symmetry: str) -> np.ndarray:
    """Matrix of the J-trace-free projection on the given symmetry class.

    The complement removed is the span of J-insertions, which is invariant
    under the conformal symplectic group.
    """
    J = standard_J_matrix(n)
    size = n**rank
    S = _index_matrix_sym(n, rank, slots, symmetry)
    # trace rows: contract every slot pair (i, j) with J^{ij}
    rows = []
    insert_cols = []
    for i, j in itertools.combinations(slots, 2):
        rest = [s for s in range(rank) if s not in (i, j)]
        for r in np.ndindex((n,) * len(rest)):
            row = qzeros((n,) * rank)
            col = qzeros((n,) * rank)
            for a in range(n):
                for b in range(n):
                    if J[a, b] != 0:
                        idx = [0] * rank
                        for s, v in zip(rest, r):
                            idx[s] = v
                        idx[i], idx[j] = a, b
                        row[tuple(idx)] += J[a, b]
                        col[tuple(idx)] += J[a, b]
            rows.append(row.reshape(-1))
            insert_cols.append(col.reshape(-1))
    if not rows:
        return S
    T = np.array(rows, dtype=object)
    X = exact.column_basis(S)
    # traceless part of the symmetry class
    kerT = exact.nullspace(exact.matmul(T, X))
    B = exact.matmul(X, kerT)
    C = exact.column_basis(exact.matmul(S, np.array(insert_cols, dtype=object).T))
    full = np.concatenate([B, C], axis=1)
    if full.shape[1] != X.shape[1]:
        raise TensorError("trace decomposition is not a direct sum")
    L = exact.left_inverse(full)
    coeffB = exact.matmul(L[: B.shape[1]], S)
    return exact.matmul(B, coeffB)


def raise_lower_roundtrip(t: WeightedTensor, position: int) -> WeightedTensor:
    """Lower a slot then raise it back (upper slot) or the reverse (lower slot)."""
    if t.variance[position] == UP:
        return adjust_index(adjust_index(t, position, "lower"), position, "raise")
    return adjust_index(adjust_index(t, position, "raise"), position, "lower")
