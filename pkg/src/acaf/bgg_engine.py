"""Form spaces, Lie algebra (co)differentials, Hodge data and BGG-like operators.

A form is stored by its components phi_S = phi(e_S) on increasing index
tuples S. Directions 0..n-1 are X_0..X_{n-1} (the l_{-1} part); direction n,
present only in the ``full_W`` flavor, is x (the g_{-2} part). A component
vector is laid out subset-major: position ``p * dim(W) + u`` holds the
module coordinate u of phi at the p-th subset.

Flavors of degree i:

* ``full_W``: all W-valued i-forms on g_- (i.e. Lambda^i p_+ (x) W).
* ``L_V``: the subspace L^i(V) of W-valued i-forms on l/p.
* ``L_V2``: L^i(V[2]), realized inside the (i+1)-forms of ``full_W`` as
  e^x ^ phi.

The codifferential uses the element convention Lambda^i p_+ with
Z^{a_1} ^ .. ^ Z^{a_i} summed over ordered tuples, which puts a factor i! in
front of the sorted components; e^x corresponds to 2z, the dual of x under
the normalized Killing pairing.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from flint import fmpq, fmpq_mat

from . import exact, fields
from .connection_lab import PolyConnection, RhoTensor
from .lie_core import GradedAlgebra, RepAction, adjoint_rep, build_algebra, normalized_pairing, tractor_rep
from .tensor_core import TensorError, standard_J_matrix

FLAVORS = ("L_V", "L_V2", "full_W")


class StructuralError(TensorError):
    """A decomposition or eigenvalue condition that the theory guarantees failed."""


# ----------------------------------------------------------- matrix helpers


def _zero(r: int, c: int) -> fmpq_mat:
    return fmpq_mat(r, c)


def _eye(k: int) -> fmpq_mat:
    M = fmpq_mat(k, k)
    for i in range(k):
        M[i, i] = 1
    return M


def _kernel(M: fmpq_mat) -> fmpq_mat:
    """Columns spanning the right kernel (rref based, small entries)."""
    c = M.ncols()
    if M.nrows() == 0:
        return _eye(c)
    R, rk = M.rref()
    pivots = []
    for i in range(rk):
        for j in range(c):
            if R[i, j] != 0:
                pivots.append(j)
                break
    free = [j for j in range(c) if j not in set(pivots)]
    out = fmpq_mat(c, len(free))
    for k, f in enumerate(free):
        out[f, k] = 1
        for i, p in enumerate(pivots):
            out[p, k] = -R[i, f]
    return out


def _colbasis(M: fmpq_mat) -> fmpq_mat:
    if M.ncols() == 0:
        return M
    R, rk = M.rref()
    piv = []
    for i in range(rk):
        for j in range(M.ncols()):
            if R[i, j] != 0:
                piv.append(j)
                break
    return _cols(M, piv)


def _cols(M: fmpq_mat, idx: list[int]) -> fmpq_mat:
    out = fmpq_mat(M.nrows(), len(idx))
    for k, j in enumerate(idx):
        for i in range(M.nrows()):
            v = M[i, j]
            if v != 0:
                out[i, k] = v
    return out


def _rows(M: fmpq_mat, idx: list[int]) -> fmpq_mat:
    out = fmpq_mat(len(idx), M.ncols())
    for k, i in enumerate(idx):
        for j in range(M.ncols()):
            v = M[i, j]
            if v != 0:
                out[k, j] = v
    return out


def _hcat(mats: list[fmpq_mat], nrows: int) -> fmpq_mat:
    c = sum(m.ncols() for m in mats)
    out = fmpq_mat(nrows, c)
    j0 = 0
    for m in mats:
        for i in range(nrows):
            for j in range(m.ncols()):
                v = m[i, j]
                if v != 0:
                    out[i, j0 + j] = v
        j0 += m.ncols()
    return out


def _is_zero_mat(M: fmpq_mat) -> bool:
    return all(v == 0 for v in M.entries())


def _rank(M: fmpq_mat) -> int:
    return 0 if M.nrows() == 0 or M.ncols() == 0 else M.rank()


def _solve_cols(A: fmpq_mat, B: fmpq_mat) -> fmpq_mat:
    """X with A X = B for A of full column rank (B in the column space)."""
    k = A.ncols()
    if k == 0:
        return fmpq_mat(0, B.ncols())
    R, rk = A.transpose().rref()
    rows = []
    for i in range(rk):
        for j in range(A.nrows()):
            if R[i, j] != 0:
                rows.append(j)
                break
    if len(rows) != k:
        raise StructuralError("matrix does not have full column rank")
    X = _rows(A, rows).inv() * _rows(B, rows)
    if A * X != B:
        raise StructuralError("right-hand side is not in the column space")
    return X


def _sparse(shape: tuple[int, int], entries) -> fmpq_mat:
    M = fmpq_mat(*shape)
    for (i, j), v in entries.items():
        if v != 0:
            M[i, j] = v
    return M


def _np(M: fmpq_mat) -> np.ndarray:
    return exact.from_mat(M)


# ------------------------------------------------------------ combinatorics


@lru_cache(maxsize=None)
def subsets(m: int, i: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations(range(m), i))


@lru_cache(maxsize=None)
def _subset_index(m: int, i: int) -> dict[tuple[int, ...], int]:
    return {s: k for k, s in enumerate(subsets(m, i))}


def sort_sign(seq) -> tuple[int, tuple[int, ...]]:
    """Sign of the sorting permutation (0 on repeated entries) and the sorted tuple."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0, ()
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign, tuple(sorted(seq))


# ------------------------------------------------------------------ modules


@lru_cache(maxsize=None)
def value_rep(n: int, module: str) -> RepAction:
    alg = build_algebra(n)
    if module in ("tractor", "T", "standard"):
        return tractor_rep(alg)
    if module in ("adjoint", "sp"):
        return adjoint_rep(alg)
    raise TensorError(f"unknown value module {module!r}")


def _rep_mats(rep: RepAction) -> list[fmpq_mat]:
    return [exact.to_mat(M) for M in rep.matrices]


@lru_cache(maxsize=None)
def _rep_cache(n: int, module: str) -> tuple[RepAction, list[fmpq_mat]]:
    rep = value_rep(n, module)
    return rep, _rep_mats(rep)


@lru_cache(maxsize=None)
def x_dual_scale(n: int) -> fmpq:
    """mu with e^x = mu z: the element of p2 dual to x under the normalized pairing."""
    alg = build_algebra(n)
    return 1 / normalized_pairing(n)[alg.idx_x, alg.idx_z]


def _kron(form_entries: dict, W: fmpq_mat | None, d: int, shape: tuple[int, int]) -> fmpq_mat:
    """(form operator) (x) W, with W = identity when None."""
    M = fmpq_mat(shape[0] * d, shape[1] * d)
    if W is None:
        for (p, q), c in form_entries.items():
            if c != 0:
                for u in range(d):
                    M[p * d + u, q * d + u] += c
        return M
    nz = [(u, v, W[u, v]) for u in range(d) for v in range(d) if W[u, v] != 0]
    for (p, q), c in form_entries.items():
        if c == 0:
            continue
        for u, v, w in nz:
            M[p * d + u, q * d + v] += c * w
    return M


# ------------------------------------------------------- full W operators


@lru_cache(maxsize=None)
def wedge_matrix(m: int, i: int, j: int) -> dict:
    """e^j ^ : Lambda^i -> Lambda^{i+1} on components (normalized wedge)."""
    src = _subset_index(m, i)
    out = {}
    for p, S in enumerate(subsets(m, i + 1)):
        if j in S:
            k = S.index(j)
            rest = S[:k] + S[k + 1 :]
            out[(p, src[rest])] = (-1) ** k
    return out


@lru_cache(maxsize=None)
def full_differential(n: int, module: str, i: int) -> fmpq_mat:
    """Lie algebra differential of g_- with values in W, on i-form components.

    (d phi)(Y_0..Y_i) = sum_k (-1)^k dtau(Y_k) phi(..^..)
                      + sum_{k<l} (-1)^(k+l) phi([Y_k, Y_l], ..^..^..)
    with the bracket of g_- itself.
    """
    alg = build_algebra(n)
    rep, mats = _rep_cache(n, module)
    d = rep.dim
    m = n + 1
    C = alg.structure_constants
    e = list(alg.idx_X) + [alg.idx_x]
    src = _subset_index(m, i)
    rows, cols = len(subsets(m, i + 1)), len(subsets(m, i))
    M = fmpq_mat(rows * d, cols * d)
    for p, S in enumerate(subsets(m, i + 1)):
        for k, s in enumerate(S):
            q = src[S[:k] + S[k + 1 :]]
            A = mats[e[s]]
            sg = (-1) ** k
            for u in range(d):
                for v in range(d):
                    a = A[u, v]
                    if a != 0:
                        M[p * d + u, q * d + v] += sg * a
        if n in S or i == 0:
            continue
        for k in range(len(S)):
            for l in range(k + 1, len(S)):
                c = C[e[S[k]], e[S[l]], alg.idx_x]
                if c == 0:
                    continue
                rest = S[:k] + S[k + 1 : l] + S[l + 1 :]
                # phi(x, rest) = (-1)^(i-1) phi(rest, x)
                q = src[rest + (n,)]
                coef = (-1) ** (k + l) * c * (-1) ** (i - 1)
                for u in range(d):
                    M[p * d + u, q * d + u] += coef
    return M


@lru_cache(maxsize=None)
def _element_scale(n: int, i: int) -> list[fmpq]:
    """Element coordinate / component for each i-subset: i! times mu if x is present."""
    mu = x_dual_scale(n)
    f = math.factorial(i)
    return [fmpq(f) * (mu if n in S else 1) for S in subsets(n + 1, i)]


@lru_cache(maxsize=None)
def full_codifferential(n: int, module: str, i: int) -> fmpq_mat:
    """Kostant codifferential Lambda^i p_+ (x) W -> Lambda^{i-1}, on components.

    On elements:
    Z_1 ^..^ Z_i (x) v -> sum_k (-1)^k Z_1 ^..^..^ Z_i (x) dtau(Z_k) v
                          + sum_{k<j} (-1)^(k+j) [Z_k, Z_j] ^ Z_1 ^..^..^..^ Z_i (x) v
    with k, j counted from 1.
    """
    if i == 0:
        rep, _ = _rep_cache(n, module)
        return fmpq_mat(0, rep.dim)
    alg = build_algebra(n)
    rep, mats = _rep_cache(n, module)
    d = rep.dim
    m = n + 1
    C = alg.structure_constants
    z = list(alg.idx_Z) + [alg.idx_z]
    dst = _subset_index(m, i - 1)
    rows, cols = len(subsets(m, i - 1)), len(subsets(m, i))
    E = fmpq_mat(rows * d, cols * d)
    for q, S in enumerate(subsets(m, i)):
        for k, s in enumerate(S):
            p = dst[S[:k] + S[k + 1 :]]
            A = mats[z[s]]
            sg = (-1) ** (k + 1)
            for u in range(d):
                for v in range(d):
                    a = A[u, v]
                    if a != 0:
                        E[p * d + u, q * d + v] += sg * a
        if n in S:
            continue
        for k in range(len(S)):
            for j in range(k + 1, len(S)):
                c = C[z[S[k]], z[S[j]], alg.idx_z]
                if c == 0:
                    continue
                rest = S[:k] + S[k + 1 : j] + S[j + 1 :]
                # z ^ rest = (-1)^(i-2) rest ^ z
                p = dst[rest + (n,)]
                coef = (-1) ** (k + j + 2) * c * (-1) ** (i - 2)
                for u in range(d):
                    E[p * d + u, q * d + u] += coef
    # components -> elements -> components
    s_in = _element_scale(n, i)
    s_out = _element_scale(n, i - 1)
    for r in range(rows * d):
        for c_ in range(cols * d):
            v = E[r, c_]
            if v != 0:
                E[r, c_] = v * s_in[c_ // d] / s_out[r // d]
    return E


@lru_cache(maxsize=None)
def _padj(n: int, beta: int) -> fmpq_mat:
    """ad(b_beta) on p_+ in the component basis (e^0..e^{n-1}, e^x = mu z)."""
    alg = build_algebra(n)
    C = alg.structure_constants
    z = list(alg.idx_Z) + [alg.idx_z]
    mu = x_dual_scale(n)
    scale = [fmpq(1)] * n + [mu]
    A = fmpq_mat(n + 1, n + 1)
    for j in range(n + 1):
        for c in range(n + 1):
            v = C[beta, z[j], z[c]]
            if v != 0:
                # e^j = Z_j / scale_j
                A[c, j] = v * scale[c] / scale[j]
    for j in range(n + 1):
        v = sum(C[beta, z[j], k] for k in range(alg.dim) if k not in z and C[beta, z[j], k] != 0)
        if v != 0:
            raise TensorError("element does not preserve p_+")
    return A


@lru_cache(maxsize=None)
def form_action(n: int, module: str, i: int, beta: int) -> fmpq_mat:
    """Action of the basis element b_beta (in p) on i-form components of full_W."""
    rep, mats = _rep_cache(n, module)
    d = rep.dim
    m = n + 1
    A = _padj(n, beta)
    idx = _subset_index(m, i)
    ent: dict = {}
    for q, S in enumerate(subsets(m, i)):
        for k, s in enumerate(S):
            for c in range(m):
                a = A[c, s]
                if a == 0:
                    continue
                sg, T = sort_sign(S[:k] + (c,) + S[k + 1 :])
                if sg:
                    key = (idx[T], q)
                    ent[key] = ent.get(key, 0) + sg * a
    size = len(subsets(m, i))
    M = _kron(ent, None, d, (size, size))
    M += _kron({(p, p): 1 for p in range(size)}, mats[beta], d, (size, size))
    return M


@lru_cache(maxsize=None)
def value_action(n: int, module: str, i: int, beta: int) -> fmpq_mat:
    """1 (x) dtau(b_beta): the action on values only."""
    rep, mats = _rep_cache(n, module)
    size = len(subsets(n + 1, i))
    return _kron({(p, p): 1 for p in range(size)}, mats[beta], rep.dim, (size, size))


@lru_cache(maxsize=None)
def full_wedge(n: int, module: str, i: int, j: int) -> fmpq_mat:
    rep, _ = _rep_cache(n, module)
    m = n + 1
    return _kron(wedge_matrix(m, i, j), None, rep.dim, (len(subsets(m, i + 1)), len(subsets(m, i))))


# ----------------------------------------------------------- form spaces


@dataclass(frozen=True, eq=False)
class ModuleSpace:
    """One degree of a flavor: ambient components plus the L subspace.

    ``basis`` holds the L subspace as columns in ambient coordinates,
    ``coords`` maps ambient vectors of L to L coordinates, ``r0`` is the
    projection onto L along the trace complement, ``embed`` lists for every
    ambient index its position in the full_W form of degree ``full_degree``
    and the sign.
    """

    n: int
    module: str
    flavor: str
    degree: int
    full_degree: int
    subsets: tuple[tuple[int, ...], ...]
    value_dim: int
    basis: fmpq_mat
    coords: fmpq_mat
    r0: fmpq_mat
    homogeneity: tuple[int, ...]
    embed: tuple[tuple[int, int], ...]
    value_slots: dict = field(default_factory=dict)

    @property
    def ambient_dim(self) -> int:
        return len(self.subsets) * self.value_dim

    @property
    def dim(self) -> int:
        return self.basis.ncols()

    def index(self, S: tuple[int, ...], u: int) -> int:
        return self.subsets.index(tuple(S)) * self.value_dim + u

    def contains(self, v) -> bool:
        """Membership in L by a rank test."""
        col = exact.to_mat(np.asarray(v, dtype=object).reshape(-1, 1)) if not isinstance(v, fmpq_mat) else v
        return _rank(_hcat([self.basis, col], self.ambient_dim)) == self.dim

    def embed_matrix(self) -> fmpq_mat:
        full = len(subsets(self.n + 1, self.full_degree)) * self.value_dim
        M = fmpq_mat(full, self.ambient_dim)
        for k, (pos, sg) in enumerate(self.embed):
            M[pos, k] = sg
        return M

    def restrict_matrix(self) -> fmpq_mat:
        return self.embed_matrix().transpose()


def _contraction(n: int, i: int) -> dict:
    """Trace with J^{cd} on the first two arguments: Lambda^i -> Lambda^{i-2}."""
    J = standard_J_matrix(n)
    src = _subset_index(n, i)
    ent: dict = {}
    for p, T in enumerate(subsets(n, i - 2)):
        for c in range(n):
            for e in range(n):
                if J[c, e] == 0:
                    continue
                sg, S = sort_sign((c, e) + T)
                if sg:
                    key = (p, src[S])
                    ent[key] = ent.get(key, 0) + sg * J[c, e]
    return ent


def _J_wedge(n: int, i: int) -> dict:
    """J ^ : Lambda^{i-2} -> Lambda^i, (J ^ psi)(Y..) = sum over pairs J(Y_k, Y_l) psi(rest)."""
    J = standard_J_matrix(n)
    src = _subset_index(n, i - 2)
    ent: dict = {}
    for p, S in enumerate(subsets(n, i)):
        for k in range(i):
            for l in range(k + 1, i):
                jv = J[S[k], S[l]]
                if jv == 0:
                    continue
                rest = S[:k] + S[k + 1 : l] + S[l + 1 :]
                key = (p, src[rest])
                ent[key] = ent.get(key, 0) + (-1) ** (k + l + 1) * jv
    return ent


@lru_cache(maxsize=None)
def kernel_split(n: int, module: str) -> tuple[fmpq_mat, fmpq_mat, fmpq_mat]:
    """Ker dtau(p2), its complement Im dtau(x), and the projection onto the complement."""
    alg = build_algebra(n)
    rep, mats = _rep_cache(n, module)
    d = rep.dim
    K = _kernel(mats[alg.idx_z])
    V = _colbasis(mats[alg.idx_x])
    B = _hcat([K, V], d)
    if B.nrows() != B.ncols() or _rank(B) != d:
        raise StructuralError("Ker dtau(p2) and Im dtau(x) are not complementary")
    Bi = B.inv()
    pi = V * _rows(Bi, list(range(K.ncols(), d)))
    return K, V, pi


@lru_cache(maxsize=None)
def build_form_space(i: int, module: str = "tractor", flavor: str = "L_V", n: int = 6) -> ModuleSpace:
    if flavor not in FLAVORS:
        raise TensorError(f"flavor must be one of {FLAVORS}")
    top = n + 1 if flavor == "full_W" else n
    if not 0 <= i <= top:
        raise TensorError(f"degree {i} out of range 0..{top} for {flavor}")
    rep, mats = _rep_cache(n, module)
    d = rep.dim
    if flavor == "full_W":
        subs = subsets(n + 1, i)
        full_degree = i
        embed = tuple((k, 1) for k in range(len(subs) * d))
        hom = tuple(
            sum(1 for s in S if s < n) + (2 if n in S else 0) + rep.grades[u] for S in subs for u in range(d)
        )
        size = len(subs) * d
        return ModuleSpace(n, module, flavor, i, full_degree, subs, d, _eye(size), _eye(size), _eye(size), hom, embed, rep.slots)
    subs = subsets(n, i)
    full_idx = _subset_index(n + 1, i + (flavor == "L_V2"))
    emb = []
    for S in subs:
        if flavor == "L_V":
            pos, sg = full_idx[S], 1
        else:
            pos, sg = full_idx[S + (n,)], (-1) ** i
        for u in range(d):
            emb.append((pos * d + u, sg))
    shift = 2 if flavor == "L_V2" else 0
    hom = tuple(len(S) + shift + rep.grades[u] for S in subs for u in range(d))
    size = len(subs) * d
    if i < 2:
        B = _eye(size)
        coords = _eye(size)
        r0 = _eye(size)
    else:
        _, V, pi = kernel_split(n, module)
        lower = len(subsets(n, i - 2))
        F = _kron(_contraction(n, i), pi, d, (lower, len(subs)))
        B = _kernel(F)
        Cm = _kron(_J_wedge(n, i), None, d, (len(subs), lower)) * _kron(
            {(p, p): 1 for p in range(lower)}, None, d, (lower, lower)
        )
        incl = _kron({(p, p): 1 for p in range(lower)}, pi, d, (lower, lower))
        comp = _colbasis(Cm * incl) if lower else fmpq_mat(size, 0)
        T = _hcat([B, comp], size)
        if T.ncols() != size or _rank(T) != size:
            raise StructuralError(f"L^{i} and its trace complement do not span the forms")
        Ti = T.inv()
        coords = _rows(Ti, list(range(B.ncols())))
        r0 = B * coords
    return ModuleSpace(n, module, flavor, i, i + (flavor == "L_V2"), subs, d, B, coords, r0, hom, tuple(emb), rep.slots)


# -------------------------------------------------------- linear operators


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """An exact matrix between two form spaces, in ambient coordinates.

    ``shift`` is the homogeneity offset (0 for the algebraic operators).
    """

    name: str
    domain: ModuleSpace
    codomain: ModuleSpace
    matrix: fmpq_mat
    shift: int = 0

    def on_L(self) -> fmpq_mat:
        """The matrix between L coordinates."""
        return self.codomain.coords * self.matrix * self.domain.basis

    def __call__(self, v):
        return self.matrix * v

    def check_shift(self) -> bool:
        """Every nonzero entry maps homogeneity h to h + shift."""
        M = self.matrix
        hd, hc = self.domain.homogeneity, self.codomain.homogeneity
        return all(
            M[r, c] == 0 or hc[r] == hd[c] + self.shift for r in range(M.nrows()) for c in range(M.ncols())
        )


def _flavor_op(src: ModuleSpace, dst: ModuleSpace, full: fmpq_mat) -> fmpq_mat:
    return dst.r0 * dst.restrict_matrix() * full * src.embed_matrix()


@lru_cache(maxsize=None)
def build_differential(i: int, module: str = "tractor", flavor: str = "L_V", n: int = 6) -> LinearOperator:
    src = build_form_space(i, module, flavor, n)
    top = n + 1 if flavor == "full_W" else n
    if i == top:
        dst = src
        return LinearOperator("d", src, _empty_space(src), fmpq_mat(0, src.ambient_dim))
    dst = build_form_space(i + 1, module, flavor, n)
    full = full_differential(n, module, src.full_degree)
    return LinearOperator("d", src, dst, _flavor_op(src, dst, full))


@lru_cache(maxsize=None)
def build_codifferential(i: int, module: str = "tractor", flavor: str = "L_V", n: int = 6) -> LinearOperator:
    src = build_form_space(i, module, flavor, n)
    if i == 0:
        return LinearOperator("d*", src, _empty_space(src), fmpq_mat(0, src.ambient_dim))
    dst = build_form_space(i - 1, module, flavor, n)
    full = full_codifferential(n, module, src.full_degree)
    return LinearOperator("d*", src, dst, _flavor_op(src, dst, full))


def _empty_space(like: ModuleSpace) -> ModuleSpace:
    z = fmpq_mat(0, 0)
    return ModuleSpace(like.n, like.module, like.flavor, -1, -1, (), like.value_dim, z, z, z, (), ())


@lru_cache(maxsize=None)
def codifferential_zero(i: int, module: str = "tractor", n: int = 6) -> LinearOperator:
    """d*_0 = r d* iota on all V-valued i-forms on l/p (no r0, no trace condition)."""
    src = _all_forms(i, module, n)
    dst = _all_forms(i - 1, module, n)
    full = full_codifferential(n, module, i)
    return LinearOperator("d*_0", src, dst, dst.restrict_matrix() * full * src.embed_matrix())


@lru_cache(maxsize=None)
def codiff0_squared_formula(i: int, module: str = "tractor", n: int = 6) -> fmpq_mat:
    """phi -> dtau(c E_{0,n+1}) phi_{S a}^a with c = -(i+1)(i+2), from (i+2)- to i-forms."""
    alg = build_algebra(n)
    rep, _ = _rep_cache(n, module)
    d = rep.dim
    M = np.full((n + 2, n + 2), fmpq(0), dtype=object)
    M[0, n + 1] = fmpq(-(i + 1) * (i + 2))
    A = exact.to_mat(rep.matrix(alg.coords(M)))
    J = standard_J_matrix(n)
    src = _subset_index(n, i + 2)
    dst = subsets(n, i)
    out = _zero(len(dst) * d, len(src) * d)
    for p, S in enumerate(dst):
        for a in range(n):
            for b in range(n):
                if J[a, b] == 0:
                    continue
                sg, T = sort_sign(S + (a, b))
                if not sg:
                    continue
                q = src[T]
                for u in range(d):
                    for v in range(d):
                        if A[u, v] != 0:
                            out[p * d + u, q * d + v] += A[u, v] * J[a, b] * sg
    return out


@lru_cache(maxsize=None)
def differential_zero(i: int, module: str = "tractor", n: int = 6) -> LinearOperator:
    src = _all_forms(i, module, n)
    dst = _all_forms(i + 1, module, n)
    full = full_differential(n, module, i)
    return LinearOperator("d_0", src, dst, dst.restrict_matrix() * full * src.embed_matrix())


@lru_cache(maxsize=None)
def _all_forms(i: int, module: str, n: int) -> ModuleSpace:
    """All W-valued i-forms on l/p, without the L condition."""
    L = build_form_space(min(i, 1), module, "L_V", n) if i < 2 else None
    rep, _ = _rep_cache(n, module)
    d = rep.dim
    subs = subsets(n, i)
    full_idx = _subset_index(n + 1, i)
    emb = tuple((full_idx[S] * d + u, 1) for S in subs for u in range(d))
    hom = tuple(len(S) + rep.grades[u] for S in subs for u in range(d))
    size = len(subs) * d
    del L
    return ModuleSpace(n, module, "forms", i, i, subs, d, _eye(size), _eye(size), _eye(size), hom, emb, rep.slots)


# ------------------------------------------------------------------ Hodge


@dataclass(frozen=True, eq=False)
class HodgeData:
    """Hodge decomposition of one degree, everything in L coordinates.

    ``blocks`` lists (eigenvalue, basis of its eigenspace inside Im d*).
    ``green`` inverts d*d on Im d* and vanishes on the other two summands.
    ``projection`` is pi: the projection onto the harmonic part.
    """

    space: ModuleSpace
    im_codiff: fmpq_mat
    harmonic: fmpq_mat
    im_diff: fmpq_mat
    eigenvalues: dict
    blocks: list
    green: fmpq_mat
    projection: fmpq_mat

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.im_codiff.ncols(), self.harmonic.ncols(), self.im_diff.ncols()


@lru_cache(maxsize=None)
def hodge_decompose(i: int, module: str = "tractor", flavor: str = "L_V", n: int = 6) -> HodgeData:
    space = build_form_space(i, module, flavor, n)
    dim = space.dim
    top = n + 1 if flavor == "full_W" else n
    d_here = build_differential(i, module, flavor, n).on_L() if i < top else fmpq_mat(0, dim)
    ds_here = build_codifferential(i, module, flavor, n).on_L() if i > 0 else fmpq_mat(0, dim)
    if i < top:
        ds_up = build_codifferential(i + 1, module, flavor, n).on_L()
        d_up = build_differential(i, module, flavor, n).on_L()
    else:
        ds_up = fmpq_mat(dim, 0)
        d_up = fmpq_mat(0, dim)
    d_down = build_differential(i - 1, module, flavor, n).on_L() if i > 0 else fmpq_mat(dim, 0)
    Q = _colbasis(ds_up) if ds_up.ncols() else fmpq_mat(dim, 0)
    Qd = _colbasis(d_down) if d_down.ncols() else fmpq_mat(dim, 0)
    stack = fmpq_mat(d_here.nrows() + ds_here.nrows(), dim)
    for r in range(d_here.nrows()):
        for c in range(dim):
            stack[r, c] = d_here[r, c]
    for r in range(ds_here.nrows()):
        for c in range(dim):
            stack[d_here.nrows() + r, c] = ds_here[r, c]
    H = _kernel(stack)
    T = _hcat([Q, H, Qd], dim)
    if T.ncols() != dim or _rank(T) != dim:
        raise StructuralError(f"Hodge decomposition fails in degree {i}: dims {Q.ncols()}+{H.ncols()}+{Qd.ncols()} vs {dim}")
    Ti = T.inv()
    kq, kh = Q.ncols(), H.ncols()
    proj = H * _rows(Ti, list(range(kq, kq + kh)))
    eig: dict = {}
    blocks: list = []
    green = fmpq_mat(dim, dim)
    if kq:
        box = ds_up * d_up
        M = _solve_cols(Q, box * Q)
        roots, split = exact.rational_eigenvalues(_np(M))
        if not split:
            raise StructuralError(f"d*d on Im d* has irrational eigenvalues in degree {i}")
        if any(r >= 0 for r in roots):
            raise StructuralError(f"d*d has a non-negative eigenvalue on Im d* in degree {i}: {sorted(roots)}")
        eig = dict(sorted(roots.items()))
        for lam in eig:
            K = _kernel(M - lam * _eye(kq))
            blocks.append((lam, Q * K))
        green = Q * M.inv() * _rows(Ti, list(range(kq)))
    return HodgeData(space, Q, H, Qd, eig, blocks, green, proj)


def laplacian_on_image(i: int, module: str = "tractor", flavor: str = "L_V", n: int = 6) -> fmpq_mat:
    """d*d restricted to Im d* (in the basis of Im d*)."""
    h = hodge_decompose(i, module, flavor, n)
    ds_up = build_codifferential(i + 1, module, flavor, n).on_L()
    d_up = build_differential(i, module, flavor, n).on_L()
    return _solve_cols(h.im_codiff, ds_up * d_up * h.im_codiff)


def block_slots(space: ModuleSpace, vectors: fmpq_mat) -> list[str]:
    """Names of value slots on which ambient vectors (columns, L coordinates) are supported."""
    amb = space.basis * vectors
    used = set()
    for r in range(amb.nrows()):
        if any(amb[r, c] != 0 for c in range(amb.ncols())):
            used.add(r % space.value_dim)
    return [name for name, idx in space.value_slots.items() if used & set(idx)]


def slot_eigenvalues(i: int, module: str = "tractor", flavor: str = "L_V", n: int = 6) -> dict[str, list[fmpq]]:
    """Eigenvalues of d*d on Im d*, grouped by the value slot carrying each eigenspace."""
    h = hodge_decompose(i, module, flavor, n)
    out: dict[str, list[fmpq]] = {}
    for lam, basis in h.blocks:
        key = "+".join(block_slots(h.space, basis))
        out.setdefault(key, []).append(lam)
    return {k: sorted(set(v)) for k, v in out.items()}


# ---------------------------------------------------------- section forms


@dataclass(frozen=True, eq=False)
class SectionForm:
    """A polynomial section: one coefficient per ambient basis vector of ``space``."""

    space: ModuleSpace
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = fields.lift(self.space.n, np.asarray(self.coeffs, dtype=object).reshape(-1))
        if len(c) != self.space.ambient_dim:
            raise TensorError("coefficient count does not match the form space")
        object.__setattr__(self, "coeffs", c)

    def __add__(self, other: "SectionForm") -> "SectionForm":
        return SectionForm(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "SectionForm") -> "SectionForm":
        return SectionForm(self.space, self.coeffs - other.coeffs)

    def is_zero(self) -> bool:
        return fields.is_zero(self.coeffs)

    def in_L(self) -> bool:
        return fields.is_zero(fields.linear_apply(self.space.r0, self.coeffs, self.space.n) - self.coeffs)

    def homogeneous_part(self, h: int) -> "SectionForm":
        out = self.coeffs.copy()
        z = fields.const(self.space.n, 0)
        for k, hk in enumerate(self.space.homogeneity):
            if hk != h:
                out[k] = z
        return SectionForm(self.space, out)

    def homogeneities(self) -> list[int]:
        return sorted({self.space.homogeneity[k] for k, v in enumerate(self.coeffs) if v != 0})


def apply_matrix(M: fmpq_mat, s: SectionForm, dst: ModuleSpace) -> SectionForm:
    return SectionForm(dst, fields.linear_apply(M, s.coeffs, s.space.n))


@dataclass(frozen=True, eq=False)
class SectionOperator:
    """A differential operator between section spaces."""

    name: str
    domain: ModuleSpace
    codomain: ModuleSpace
    fn: Callable[[SectionForm], SectionForm]

    def __call__(self, s: SectionForm) -> SectionForm:
        if s.space is not self.domain:
            raise TensorError(f"{self.name}: section lives in the wrong space")
        return self.fn(s)


def algebraic_operator(op: LinearOperator) -> SectionOperator:
    return SectionOperator(op.name, op.domain, op.codomain, lambda s: apply_matrix(op.matrix, s, op.codomain))


def _scale(vec: np.ndarray, p) -> np.ndarray:
    return fields.pack([p * v for v in vec])


# ----------------------------------------------------- twisted derivatives


@dataclass(frozen=True, eq=False)
class WeylData:
    """Chart data of a Weyl structure: connection coordinates and Rho.

    ``gamma[a]`` holds the p0 coordinates of the connection form along X_a,
    ``rho[a]`` the p_+ coordinates of P(X_a) = P_ac Z^c + P_a z.
    """

    n: int
    gamma: np.ndarray
    rho: np.ndarray
    p0: tuple[int, ...]
    pplus: tuple[int, ...]


def _csp_coords(alg: GradedAlgebra, M: np.ndarray) -> np.ndarray:
    """Algebra coordinates of csp_to_p0(M) for a polynomial matrix M (acting on vectors)."""
    from .curvature_lab import _coords_field

    n = alg.n
    N = n + 2
    out = fields.zeros(n, (N, N))
    t = sum(M[i, i] for i in range(n)) * fmpq(1, n)
    for d in range(n):
        for b in range(n):
            out[d + 1, b + 1] = M[d, b] - (t if b == d else 0)
    out[0, 0] = -t
    out[N - 1, N - 1] = t
    return _coords_field(alg, out)


def weyl_data(nabla0: PolyConnection, P: RhoTensor | None = None) -> WeylData:
    n = nabla0.n
    alg = build_algebra(n)
    G = nabla0.gamma
    gam = np.empty((n, alg.dim), dtype=object)
    for a in range(n):
        try:
            gam[a] = _csp_coords(alg, G[a].T)
        except TensorError as exc:
            raise TensorError("connection is not csp(n)-valued, so it is not an ACS connection") from exc
    p0 = tuple(alg.idx_p0)
    for a in range(n):
        for k in range(alg.dim):
            if k not in p0 and gam[a][k] != 0:
                raise TensorError("connection form leaves p0")
    pplus = tuple(alg.idx_Z) + (alg.idx_z,)
    rho = fields.zeros(n, (n, alg.dim))
    if P is not None:
        Pab = fields.lift(n, P.P_ab)
        Pa = fields.lift(n, P.P_a)
        for a in range(n):
            for c, k in enumerate(alg.idx_Z):
                rho[a, k] = Pab[a, c]
            rho[a, alg.idx_z] = Pa[a]
    return WeylData(n, gam, rho, p0, pplus)


def covariant_derivative_full(w: WeylData, module: str, j: int, phi: np.ndarray) -> list[np.ndarray]:
    """nabla_a phi for every a, on full_W components of degree j."""
    n = w.n
    acted = {}
    for b in w.p0:
        if any(w.gamma[a][b] != 0 for a in range(n)):
            acted[b] = fields.linear_apply(form_action(n, module, j, b), phi, n)
    out = []
    for a in range(n):
        v = fields.pack([c.derivative(a) for c in phi])
        for b, vb in acted.items():
            g = w.gamma[a][b]
            if g != 0:
                v = v + _scale(vb, g)
        out.append(v)
    return out


def _rho_term(w: WeylData, module: str, j: int, phi: np.ndarray, a: int) -> np.ndarray | None:
    n = w.n
    acc = None
    for b in w.pplus:
        g = w.rho[a][b]
        if g != 0:
            v = _scale(fields.linear_apply(value_action(n, module, j, b), phi, n), g)
            acc = v if acc is None else acc + v
    return acc


def dW_full(w: WeylData, module: str, j: int, phi: np.ndarray) -> np.ndarray:
    """d^W on full_W components of degree j.

    (d^W phi) = sum_a e^a ^ (nabla_a phi + dtau(P(X_a)) phi) + d phi.
    """
    n = w.n
    out = fields.linear_apply(full_differential(n, module, j), phi, n)
    nab = covariant_derivative_full(w, module, j, phi)
    for a in range(n):
        v = nab[a]
        r = _rho_term(w, module, j, phi, a)
        if r is not None:
            v = v + r
        out = out + fields.linear_apply(full_wedge(n, module, j, a), v, n)
    return fields.normalize(n, out)


def _to_full(s: SectionForm) -> np.ndarray:
    sp = s.space
    full = len(subsets(sp.n + 1, sp.full_degree)) * sp.value_dim
    out = fields.zeros(sp.n, (full,))
    for k, (pos, sg) in enumerate(sp.embed):
        out[pos] = s.coeffs[k] * sg
    return out


def _from_full(v: np.ndarray, sp: ModuleSpace) -> np.ndarray:
    return fields.pack([v[pos] * sg for pos, sg in sp.embed])


def twisted_exterior_derivative(
    space: ModuleSpace, nabla0: PolyConnection, P: RhoTensor | None = None
) -> SectionOperator:
    """d^W on full_W, or d^V = r0 r d^W iota iota0 on the L flavors."""
    n = space.n
    top = n + 1 if space.flavor == "full_W" else n
    if space.degree >= top:
        raise TensorError("no forms above the top degree")
    dst = build_form_space(space.degree + 1, space.module, space.flavor, n)
    w = weyl_data(nabla0, P)

    def fn(s: SectionForm) -> SectionForm:
        full = dW_full(w, space.module, space.full_degree, _to_full(s))
        v = _from_full(full, dst)
        if space.flavor != "full_W":
            v = fields.linear_apply(dst.r0, v, n)
        return SectionForm(dst, v)

    name = "d^W" if space.flavor == "full_W" else "d^V"
    return SectionOperator(name, space, dst, fn)


def fundamental_derivative(
    w: WeylData,
    module: str,
    j: int,
    s: np.ndarray,
    phi: np.ndarray,
    form_part: np.ndarray | None = None,
    rho_term: bool = True,
) -> np.ndarray:
    """d^omega(s) phi = nabla_{s_-} phi + dtau(P(s_-)) phi - dtau(s_0 + s_1 + s_2) phi.

    ``s`` holds algebra coordinates (polynomial); dtau acts on the values and
    the g_{-2} part acts by zero. ``form_part`` (p0 coordinates) is the
    element whose action on the form slots accompanies the value action; by
    default it is s_0. ``rho_term=False`` leaves out dtau(P(s_-)).
    """
    n = w.n
    alg = build_algebra(n)
    out = fields.zeros(n, (len(phi),))
    nab = None
    for a, k in enumerate(alg.idx_X):
        if s[k] == 0:
            continue
        nab = nab or covariant_derivative_full(w, module, j, phi)
        out = out + _scale(nab[a], s[k])
        r = _rho_term(w, module, j, phi, a) if rho_term else None
        if r is not None:
            out = out + _scale(r, s[k])
    fp = s if form_part is None else form_part
    for b in alg.idx_p0:
        if fp[b] != 0:
            only_forms = form_action(n, module, j, b) - value_action(n, module, j, b)
            out = out - _scale(fields.linear_apply(only_forms, phi, n), fp[b])
    for b in list(alg.idx_p0) + list(alg.idx_Z) + [alg.idx_z]:
        if s[b] != 0:
            out = out - _scale(fields.linear_apply(value_action(n, module, j, b), phi, n), s[b])
    return out


def alt2(n: int, module: str, j: int, psi: np.ndarray) -> np.ndarray:
    """sum_{a<b} e^a ^ e^b ^ psi[a][b] for degree-j component vectors psi[a][b]."""
    out = fields.zeros(n, (len(subsets(n + 1, j + 2)) * _rep_cache(n, module)[0].dim,))
    for a in range(n):
        for b in range(a + 1, n):
            v = fields.linear_apply(full_wedge(n, module, j, b), psi[a][b], n)
            out = out + fields.linear_apply(full_wedge(n, module, j + 1, a), v, n)
    return out


def curvature_action(
    w: WeylData,
    module: str,
    j: int,
    Rtilde_coords: np.ndarray,
    phi: np.ndarray,
    csp_coords: np.ndarray | None = None,
    rho_on_torsion: bool = True,
) -> np.ndarray:
    """Alt_2(d^omega(-R~)) phi on full_W components of degree j.

    R~ acts on the values through dtau. On the form slots only the csp part
    of the curvature of nabla0 acts (``csp_coords``, the p0 coordinates of
    that curvature); the Rho-quadratic part of R~ touches values only, as
    nabla0 carries no Rho. With ``csp_coords=None`` the whole p0 part of R~
    acts on the form slots. ``rho_on_torsion=False`` drops the
    dtau(P(R~_-)) term, which is what (d^W)^2 actually produces when both
    the torsion and Rho are nonzero.
    """
    n = w.n
    psi = [[None] * n for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            neg = fields.pack([-c for c in Rtilde_coords[a, b]])
            fp = None if csp_coords is None else fields.pack([-c for c in csp_coords[a, b]])
            psi[a][b] = fundamental_derivative(w, module, j, neg, phi, fp, rho_on_torsion)
    return alt2(n, module, j, psi)


def csp_curvature_coords(nabla0: PolyConnection) -> np.ndarray:
    """p0 coordinates of the curvature of nabla0 (csp-valued two-form)."""
    from .curvature_lab import curvature_of

    n = nabla0.n
    alg = build_algebra(n)
    R = curvature_of(nabla0)
    out = np.empty((n, n, alg.dim), dtype=object)
    for a in range(n):
        for b in range(n):
            out[a, b] = _csp_coords(alg, R[a, b].T)
    return out


def plain_part(n: int, module: str, j: int, v: np.ndarray) -> np.ndarray:
    """Components of a degree-j full_W vector whose arguments all lie in l/p."""
    plain, _ = _x_split(n, j, _rep_cache(n, module)[0].dim)
    return fields.pack([v[k] for k in plain])


# --------------------------------------------------------- compressability


@dataclass(frozen=True)
class CompressResult:
    compressable: bool
    reason: str = ""


def check_compressable(op: SectionOperator, i: int, probes: int = 2) -> CompressResult:
    """Filtration preservation and degree-zero part equal to the algebraic d.

    Probed on constant and linear sections along every ambient basis vector
    of L^i.
    """
    sp = op.domain
    if sp.degree != i or op.codomain.degree != i + 1:
        return CompressResult(False, f"maps degree {sp.degree} to {op.codomain.degree}, not {i} to {i + 1}")
    if op.codomain.flavor != sp.flavor:
        return CompressResult(False, "changes flavor")
    dmat = build_differential(i, sp.module, sp.flavor, sp.n).matrix
    n = sp.n
    xs = fields.coords(n)
    for col in range(sp.dim):
        v = [sp.basis[r, col] for r in range(sp.ambient_dim)]
        h = min(sp.homogeneity[r] for r in range(sp.ambient_dim) if v[r] != 0)
        for mult in [fields.const(n, 1)] + list(xs[:probes]):
            s = SectionForm(sp, fields.pack([mult * c for c in v]))
            out = op(s)
            low = [k for k, c in enumerate(out.coeffs) if c != 0 and op.codomain.homogeneity[k] < h]
            if low:
                return CompressResult(False, "lowers the filtration degree")
            zero = SectionForm(sp, fields.pack([mult * c for c in v])).homogeneous_part(h)
            want = apply_matrix(dmat, zero, op.codomain)
            if not fields.is_zero(out.homogeneous_part(h).coeffs - want.coeffs):
                return CompressResult(False, "degree-zero part differs from d")
    return CompressResult(True)


# ------------------------------------------------- splitting and BGG operators


def _ambient_green(h: HodgeData) -> fmpq_mat:
    sp = h.space
    return sp.basis * h.green * sp.coords


def _ambient_projection(h: HodgeData) -> fmpq_mat:
    sp = h.space
    return sp.basis * h.projection * sp.coords


@dataclass(frozen=True, eq=False)
class SplittingOperator:
    """L_i(D): harmonic sections of degree i -> sections with d* L = 0 = d* D L.

    ``factors`` records the eigenvalues a_j used at each correction step.
    """

    D: SectionOperator
    hodge: HodgeData
    max_steps: int = 16

    def __call__(self, s: SectionForm) -> SectionForm:
        return self.apply(s)[0]

    def apply(self, s: SectionForm) -> tuple[SectionForm, list[tuple[int, list]]]:
        sp = self.D.domain
        n = sp.n
        ds = build_codifferential(sp.degree + 1, sp.module, sp.flavor, n)
        G = _ambient_green(self.hodge)
        cur = s
        steps = []
        for _ in range(self.max_steps):
            err = apply_matrix(ds.matrix, self.D(cur), sp)
            hs = err.homogeneities()
            if not hs:
                return cur, steps
            low = err.homogeneous_part(hs[0])
            corr = apply_matrix(G, low, sp)
            used = [lam for lam, B in self.hodge.blocks if _touches(sp, B, low)]
            steps.append((hs[0], used))
            cur = cur - corr
        raise StructuralError("splitting operator did not terminate")


def _touches(sp: ModuleSpace, B: fmpq_mat, s: SectionForm) -> bool:
    """Whether the block spanned by B (L coordinates) meets the values of s."""
    amb = sp.basis * B
    rows = {r for r in range(amb.nrows()) for c in range(amb.ncols()) if amb[r, c] != 0}
    return any(s.coeffs[r] != 0 for r in rows)


def splitting_operator(D: SectionOperator, i: int) -> SplittingOperator:
    sp = D.domain
    res = check_compressable(D, i)
    if not res.compressable:
        raise TensorError(f"operator is not compressable: {res.reason}")
    return SplittingOperator(D, hodge_decompose(i, sp.module, sp.flavor, sp.n))


def harmonic_projection(s: SectionForm) -> SectionForm:
    sp = s.space
    h = hodge_decompose(sp.degree, sp.module, sp.flavor, sp.n)
    return apply_matrix(_ambient_projection(h), s, sp)


def bgg_operator(D: SectionOperator, i: int) -> SectionOperator:
    """B_i = pi o D o L_i(D) on harmonic sections."""
    L = splitting_operator(D, i)

    def fn(s: SectionForm) -> SectionForm:
        return harmonic_projection(D(L(s)))

    return SectionOperator(f"B_{i}", D.domain, D.codomain, fn)


# ---------------------------------------------------- Ricci-type modification


def theta_element(Theta: np.ndarray, n: int) -> np.ndarray:
    """Algebra coordinates of the sp(n+2)-valued Theta for a constant symmetric Theta_ab.

    Matrix: block Theta_c^d, corner (1/n) Theta_ef Theta^ef, zero elsewhere.
    """
    Theta = np.asarray(Theta, dtype=object)
    if not all(Theta[i, j] == Theta[j, i] for i in range(n) for j in range(n)):
        raise TensorError("Theta must be symmetric")
    alg = build_algebra(n)
    J = standard_J_matrix(n)
    N = n + 2
    up = exact.matmul(Theta, J.T)  # Theta_c^d = Theta_ce J^{de}
    M = exact.qzeros((N, N))
    for d in range(n):
        for c in range(n):
            M[d + 1, c + 1] = up[c, d]
    Tuu = exact.matmul(exact.matmul(J, Theta), J.T)
    M[0, N - 1] = sum(Theta[e, f] * Tuu[e, f] for e in range(n) for f in range(n)) * fmpq(1, n)
    return alg.coords(M)


def _value_matrix(n: int, module: str, j: int, c: np.ndarray) -> fmpq_mat:
    rep, mats = _rep_cache(n, module)
    A = fmpq_mat(rep.dim, rep.dim)
    for k, ck in enumerate(c):
        if ck != 0:
            A += mats[k] * ck
    size = len(subsets(n + 1, j))
    return _kron({(p, p): 1 for p in range(size)}, A, rep.dim, (size, size))


def _x_split(n: int, j: int, d: int) -> tuple[list[int], list[int]]:
    """Ambient indices of full_W degree j without and with the x direction."""
    plain, withx = [], []
    for p, S in enumerate(subsets(n + 1, j)):
        (withx if n in S else plain).extend(range(p * d, p * d + d))
    return plain, withx


def theta_map(n: int, module: str, j: int, c: np.ndarray) -> fmpq_mat:
    """dtau(Theta): plain W-valued j-forms -> W[2]-valued j-forms, i.e. phi -> e^x ^ dtau(Theta) phi.

    Acts by zero on the part that already contains e^x.
    """
    rep, _ = _rep_cache(n, module)
    d = rep.dim
    A = _value_matrix(n, module, j, c)
    plain, _ = _x_split(n, j, d)
    keep = fmpq_mat(A.nrows(), A.ncols())
    for r in plain:
        for col in plain:
            v = A[r, col]
            if v != 0:
                keep[r, col] = v
    ex = _ex_wedge(n, module, j)
    return ex * keep


@lru_cache(maxsize=None)
def _ex_wedge(n: int, module: str, j: int) -> fmpq_mat:
    """e^x ^ on full_W components of degree j."""
    rep, _ = _rep_cache(n, module)
    m = n + 1
    return _kron(wedge_matrix(m, j, n), None, rep.dim, (len(subsets(m, j + 1)), len(subsets(m, j))))


@lru_cache(maxsize=None)
def J_insertion(n: int, module: str, j: int) -> fmpq_mat:
    """J ^ (with e^x removed): W[2]-valued forms e^x ^ psi -> J ^ psi; zero on plain forms."""
    rep, _ = _rep_cache(n, module)
    d = rep.dim
    m = n + 1
    J = standard_J_matrix(n)
    src = _subset_index(m, j)
    ent: dict = {}
    for p, S in enumerate(subsets(m, j + 1)):
        if n in S:
            continue
        for k in range(len(S)):
            for l in range(k + 1, len(S)):
                jv = J[S[k], S[l]]
                if jv == 0:
                    continue
                rest = S[:k] + S[k + 1 : l] + S[l + 1 :]
                # e^x ^ rest has component (-1)^(j-1) at rest + (x,)
                q = src[rest + (n,)]
                ent[(p, q)] = ent.get((p, q), 0) + (-1) ** (k + l + 1) * jv * (-1) ** (j - 1)
    return _kron(ent, None, d, (len(subsets(m, j + 1)), len(subsets(m, j))))


def ricci_cancellation(n: int, module: str, j: int, Theta: np.ndarray) -> fmpq_mat:
    """Alt_2(dtau(-2 J Theta)) + 2 J ^ o dtau(Theta) + dtau(Theta) o 2 J ^ on degree-j forms.

    The first term is built literally as sum_{a<b} e^a ^ e^b ^ (-2 J_ab dtau(Theta)),
    with dtau(Theta) acting on the values of both the W and the W[2] part.
    """
    c = theta_element(Theta, n)
    J = standard_J_matrix(n)
    A = _value_matrix(n, module, j, c)
    alt = fmpq_mat(len(subsets(n + 1, j + 2)) * _rep_cache(n, module)[0].dim, A.ncols())
    for a in range(n):
        for b in range(a + 1, n):
            if J[a, b] != 0:
                alt += full_wedge(n, module, j + 1, a) * full_wedge(n, module, j, b) * A * (-2 * J[a, b])
    # dtau(Theta) adds e^x (degree j -> j+1), 2 J ^ removes it (degree j+1 -> j+2)
    first = J_insertion(n, module, j + 1) * theta_map(n, module, j, c) * 2
    second = theta_map(n, module, j + 1, c) * J_insertion(n, module, j) * 2
    return alt + first + second


def ricci_modified_operator(
    space: ModuleSpace, nabla0: PolyConnection, Theta: np.ndarray, P: RhoTensor | None = None
) -> SectionOperator:
    """D = d^W + dtau(Theta) + 2 J ^ on full_W sections (Theta constant here)."""
    if space.flavor != "full_W":
        raise TensorError("the Ricci-type modification acts on full_W forms")
    n = space.n
    c = theta_element(Theta, n)
    dW = twisted_exterior_derivative(space, nabla0, P)
    j = space.degree
    extra = theta_map(n, space.module, j, c) + J_insertion(n, space.module, j) * 2

    def fn(s: SectionForm) -> SectionForm:
        out = dW(s)
        return SectionForm(out.space, out.coeffs + fields.linear_apply(extra, s.coeffs, n))

    return SectionOperator("D_Theta", space, dW.codomain, fn)


# ------------------------------------------------------- cohomology blocks


def sp_cartan(n: int) -> list[np.ndarray]:
    """h_i = e_ii - e_{h+i,h+i}, i < n/2."""
    h = n // 2
    out = []
    for i in range(h):
        M = exact.qzeros((n, n))
        M[i, i] = 1
        M[h + i, h + i] = -1
        out.append(M)
    return out


def sp_positive_roots(n: int) -> list[np.ndarray]:
    """Root vectors of sp(n) for the positive roots e_i - e_j, e_i + e_j and 2 e_i."""
    h = n // 2
    out = []
    for i in range(h):
        for j in range(i + 1, h):
            M = exact.qzeros((n, n))
            M[i, j] = 1
            M[h + j, h + i] = -1
            out.append(M)
            M = exact.qzeros((n, n))
            M[i, h + j] = 1
            M[j, h + i] = 1
            out.append(M)
        M = exact.qzeros((n, n))
        M[i, h + i] = 1
        out.append(M)
    return out


def _in_sp(M: np.ndarray, n: int) -> bool:
    J = standard_J_matrix(n)
    return exact.is_zero(exact.matmul(M.T, J) + exact.matmul(J, M))


def weyl_dimension(labels: tuple[int, ...]) -> int:
    """Weyl dimension formula for C_h with Dynkin labels (a_1, .., a_h)."""
    h = len(labels)
    lam = [sum(labels[i:]) for i in range(h)]
    delta = [h - i for i in range(h)]
    l = [lam[i] + delta[i] for i in range(h)]
    num = fmpq(1)
    for i in range(h):
        num *= fmpq(l[i], delta[i])
        for j in range(i + 1, h):
            num *= fmpq(l[i] ** 2 - l[j] ** 2, delta[i] ** 2 - delta[j] ** 2)
    if num.q != 1:
        raise StructuralError("Weyl dimension is not an integer")
    return int(num.p)


@dataclass(frozen=True)
class CohomologyBlock:
    labels: tuple[int, ...]
    dim: int
    weyl_dim: int
    grading: fmpq

    @property
    def name(self) -> str:
        return "".join(str(a) for a in self.labels)

    def as_dict(self) -> dict:
        return {"labels": self.name, "dim": self.dim, "weyl_dim": self.weyl_dim, "E": exact.fmt(self.grading)}


def levi_action(space: ModuleSpace, M: np.ndarray) -> fmpq_mat:
    """Action of csp_to_p0(M) on the L coordinates of a form space."""
    alg = build_algebra(space.n)
    c = alg.coords(alg.csp_to_p0(M))
    size = len(subsets(space.n + 1, space.full_degree)) * space.value_dim
    full = _zero(size, size)
    for b in alg.idx_p0:
        if c[b] != 0:
            full += form_action(space.n, space.module, space.full_degree, b) * c[b]
    return space.coords * space.restrict_matrix() * full * space.embed_matrix() * space.basis


def _joint_eigenspaces(mats: list[fmpq_mat], basis: fmpq_mat) -> list[tuple[tuple, fmpq_mat]]:
    """Split span(basis) into joint eigenspaces of commuting matrices (rational eigenvalues)."""
    spaces = [((), basis)]
    for A in mats:
        nxt = []
        for key, B in spaces:
            R = _solve_cols(B, A * B)
            roots, split = exact.rational_eigenvalues(_np(R))
            if not split:
                raise StructuralError("Cartan element has irrational eigenvalues")
            got = 0
            for lam in sorted(roots, reverse=True):
                K = _kernel(R - lam * _eye(R.nrows()))
                got += K.ncols()
                nxt.append((key + (lam,), B * K))
            if got != B.ncols():
                raise StructuralError("Cartan element is not diagonalizable")
        spaces = nxt
    return spaces


def cohomology_blocks(i: int, module: str = "tractor", flavor: str = "L_V", n: int = 6) -> list[CohomologyBlock]:
    """Irreducible sp(n) blocks of the harmonic space, by highest weight vectors."""
    space = build_form_space(i, module, flavor, n)
    H = hodge_decompose(i, module, flavor, n).harmonic
    if H.ncols() == 0:
        return []
    for M in sp_cartan(n) + sp_positive_roots(n):
        if not _in_sp(M, n):
            raise StructuralError("root vector is not in sp(n)")
    pos = [_solve_cols(H, levi_action(space, M) * H) for M in sp_positive_roots(n)]
    neg = [_solve_cols(H, levi_action(space, M.T) * H) for M in sp_positive_roots(n)]
    cart = [_solve_cols(H, levi_action(space, M) * H) for M in sp_cartan(n)]
    k = H.ncols()
    stack = fmpq_mat(k * len(pos), k)
    for r, A in enumerate(pos):
        for u in range(k):
            for v in range(k):
                if A[u, v] != 0:
                    stack[r * k + u, v] = A[u, v]
    hw = _kernel(stack)
    E = _solve_cols(H, levi_action(space, -exact.qeye(n)) * H)
    blocks = []
    total = 0
    for lam, V in _joint_eigenspaces(cart, hw):
        labels = tuple(int(lam[j] - lam[j + 1]) for j in range(len(lam) - 1)) + (int(lam[-1]),)
        span = V
        while True:
            cols = [span] + [A * span for A in neg]
            nxt = _colbasis(_hcat(cols, k))
            if nxt.ncols() == span.ncols():
                break
            span = nxt
        mult = V.ncols()
        if span.ncols() % mult:
            raise StructuralError("block dimension is not a multiple of the multiplicity")
        ev, _ = exact.rational_eigenvalues(_np(_solve_cols(V, E * V)))
        grading = next(iter(ev))
        for _ in range(mult):
            blocks.append(CohomologyBlock(labels, span.ncols() // mult, weyl_dimension(labels), grading))
        total += span.ncols()
    if total != k:
        raise StructuralError(f"blocks cover {total} of {k} harmonic dimensions")
    return sorted(blocks, key=lambda b: (-sum(b.labels), [-a for a in b.labels]))


def cohomology_diagram(module: str = "tractor", flavor: str = "L_V", n: int = 6) -> list[list[str]]:
    top = n + 1 if flavor == "full_W" else n
    return [[b.name for b in cohomology_blocks(i, module, flavor, n)] for i in range(top + 1)]


def euler_characteristic(module: str = "tractor", flavor: str = "L_V", n: int = 6) -> tuple[int, int]:
    """(alternating sum of form dimensions, alternating sum of harmonic dimensions)."""
    top = n + 1 if flavor == "full_W" else n
    forms = sum((-1) ** i * build_form_space(i, module, flavor, n).dim for i in range(top + 1))
    harm = sum((-1) ** i * hodge_decompose(i, module, flavor, n).harmonic.ncols() for i in range(top + 1))
    return forms, harm
