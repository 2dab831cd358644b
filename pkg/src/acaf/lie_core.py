"""Matrix realization of sp(n+2, R) with its contact grading.

Rows and columns of the (n+2)x(n+2) matrices are indexed 0, 1..n, n+1. The
ambient symplectic form pairs index 0 with n+1 and uses J on the middle
block. The grading element E = diag(1, 0, .., 0, -1) gives matrix entry
(i, j) the degree E_i - E_j.

Basis order (degree-major):

* ``x`` (degree -2): the entry (n+1, 0).
* ``X_a`` (degree -1): column 0 carries delta^d_a, row n+1 carries -J_ac.
* p0: first ``E``, then the sp(n) block -J S for S = e_ij + e_ji, i <= j row-major.
* ``Z^b`` (degree 1): row 0 carries delta^b_c, column n+1 carries J^db.
* ``z`` (degree 2): the entry (0, n+1).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from flint import fmpq

from . import exact
from .exact import ONE, ZERO, qzeros
from .tensor_core import TensorError, standard_J_matrix


@dataclass(frozen=True, eq=False)
class GradedAlgebra:
    n: int
    omega: np.ndarray
    basis: tuple[np.ndarray, ...]
    grading: tuple[int, ...]
    labels: tuple[str, ...]

    @property
    def N(self) -> int:
        return self.n + 2

    @property
    def dim(self) -> int:
        return len(self.basis)

    @cached_property
    def l_mask(self) -> tuple[bool, ...]:
        return tuple(g >= -1 for g in self.grading)

    def indices(self, degree: int) -> list[int]:
        return [i for i, g in enumerate(self.grading) if g == degree]

    @cached_property
    def idx_x(self) -> int:
        return self.indices(-2)[0]

    @cached_property
    def idx_X(self) -> list[int]:
        return self.indices(-1)

    @cached_property
    def idx_p0(self) -> list[int]:
        return self.indices(0)

    @cached_property
    def idx_Z(self) -> list[int]:
        return self.indices(1)

    @cached_property
    def idx_z(self) -> int:
        return self.indices(2)[0]

    @cached_property
    def idx_E(self) -> int:
        return self.idx_p0[0]

    @cached_property
    def _flat_basis(self) -> np.ndarray:
        return np.array([b.reshape(-1) for b in self.basis], dtype=object).T

    @cached_property
    def _coord_map(self) -> np.ndarray:
        return exact.left_inverse(self._flat_basis)

    def coords(self, M: np.ndarray) -> np.ndarray:
        """Coordinates of an sp(n+2) matrix in the basis (exact, checked)."""
        c = exact.matmul(self._coord_map, np.asarray(M, dtype=object).reshape(-1))
        if not all(a == b for a, b in zip(exact.matmul(self._flat_basis, c), np.asarray(M).reshape(-1))):
            raise TensorError("matrix is not in sp(n+2)")
        return c

    def element(self, c: np.ndarray) -> np.ndarray:
        return exact.matmul(self._flat_basis, np.asarray(c, dtype=object)).reshape(self.N, self.N)

    @cached_property
    def structure_constants(self) -> np.ndarray:
        """C[i, j, k] with [b_i, b_j] = sum_k C[i, j, k] b_k."""
        d = self.dim
        C = qzeros((d, d, d))
        for i in range(d):
            for j in range(i + 1, d):
                c = self.coords(commutator(self.basis[i], self.basis[j]))
                C[i, j] = c
                C[j, i] = -c
        return C

    def bracket(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return commutator(X, Y)

    def bracket_coords(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.einsum("i,j,ijk->k", a, b, self.structure_constants)

    @cached_property
    def ad(self) -> tuple[np.ndarray, ...]:
        """Adjoint matrices: ad(b_i)[k, j] = C[i, j, k]."""
        C = self.structure_constants
        return tuple(np.ascontiguousarray(C[i].T) for i in range(self.dim))

    def csp_to_p0(self, M: np.ndarray) -> np.ndarray:
        """Embed a csp(n) matrix (acting on vectors) as a p0 matrix.

        The identity of csp goes to -E, so that the induced action on R[w] is
        -(w/n) trace.
        """
        n = self.n
        M = np.asarray(M, dtype=object)
        t = sum(M[i, i] for i in range(n)) * fmpq(1, n)
        out = qzeros((self.N, self.N)) if _rational(M) else _poly_zeros(M, self.N)
        out[1 : n + 1, 1 : n + 1] = M - t * exact.qeye(n)
        out[0, 0] = out[0, 0] - t
        out[n + 1, n + 1] = out[n + 1, n + 1] + t
        return out

    def p0_to_csp(self, A: np.ndarray) -> np.ndarray:
        n = self.n
        e = A[0, 0]
        return A[1 : n + 1, 1 : n + 1] - e * exact.qeye(n)


def _rational(M: np.ndarray) -> bool:
    return all(isinstance(v, (int, fmpq)) for v in M.ravel())


def _poly_zeros(M: np.ndarray, N: int) -> np.ndarray:
    z = next(v for v in M.ravel() if not isinstance(v, (int, fmpq))) * 0
    out = np.empty((N, N), dtype=object)
    out.fill(z)
    return out


def commutator(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return exact.matmul(X, Y) - exact.matmul(Y, X)


def ambient_form(n: int) -> np.ndarray:
    N = n + 2
    om = qzeros((N, N))
    om[0, N - 1] = ONE
    om[N - 1, 0] = -ONE
    om[1 : n + 1, 1 : n + 1] = standard_J_matrix(n)
    return om


def in_sp(M: np.ndarray, omega: np.ndarray) -> bool:
    return exact.is_zero(exact.matmul(M.T, omega) + exact.matmul(omega, M))


@lru_cache(maxsize=None)
def build_algebra(n: int) -> GradedAlgebra:
    if not isinstance(n, int) or n % 2 or n < 6:
        raise TensorError(f"the algebra needs an even n >= 6, got {n!r}")
    N = n + 2
    J = standard_J_matrix(n)
    om = ambient_form(n)
    basis: list[np.ndarray] = []
    grading: list[int] = []
    labels: list[str] = []

    def add(M, g, lab):
        basis.append(M)
        grading.append(g)
        labels.append(lab)

    x = qzeros((N, N))
    x[N - 1, 0] = ONE
    add(x, -2, "x")
    for a in range(n):
        M = qzeros((N, N))
        M[a + 1, 0] = ONE
        for c in range(n):
            M[N - 1, c + 1] = -J[a, c]
        add(M, -1, f"X_{a}")
    E = qzeros((N, N))
    E[0, 0] = ONE
    E[N - 1, N - 1] = -ONE
    add(E, 0, "E")
    for i in range(n):
        for j in range(i, n):
            S = qzeros((n, n))
            S[i, j] += ONE
            S[j, i] += ONE
            M = qzeros((N, N))
            M[1 : n + 1, 1 : n + 1] = -exact.matmul(J, S)
            add(M, 0, f"S_{i}{j}")
    for b in range(n):
        M = qzeros((N, N))
        M[0, b + 1] = ONE
        for d in range(n):
            M[d + 1, N - 1] = J[d, b]
        add(M, 1, f"Z^{b}")
    z = qzeros((N, N))
    z[0, N - 1] = ONE
    add(z, 2, "z")
    alg = GradedAlgebra(n, om, tuple(basis), tuple(grading), tuple(labels))
    _verify(alg)
    return alg


def _verify(alg: GradedAlgebra) -> None:
    n, N = alg.n, alg.N
    if alg.dim != (N * (N + 1)) // 2:
        raise TensorError("wrong dimension")
    for M in alg.basis:
        if not in_sp(M, alg.omega):
            raise TensorError("basis element outside sp(n+2)")
    if exact.rank(alg._flat_basis) != alg.dim:
        raise TensorError("basis is degenerate")
    E = alg.basis[alg.idx_E]
    for M, g in zip(alg.basis, alg.grading):
        if not exact.is_zero(commutator(E, M) - g * M):
            raise TensorError("grading element does not act by the declared degree")


def degree_projection(alg: GradedAlgebra, c: np.ndarray, degree: int) -> np.ndarray:
    out = np.array(c, dtype=object)
    for i, g in enumerate(alg.grading):
        if g != degree:
            out[i] = ZERO
    return out


# representations ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RepAction:
    """Matrices dtau(b_i) for every basis element of the algebra.

    ``grades`` lists the eigenvalue of dtau(E) on each module basis vector.
    ``slots`` names blocks of module coordinates (for the standard module:
    r, s, t).
    """

    kind: str
    algebra: GradedAlgebra
    matrices: tuple[np.ndarray, ...]
    grades: tuple[int, ...]
    slots: dict

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    def act(self, X: np.ndarray, v: np.ndarray) -> np.ndarray:
        """dtau(X) v for an algebra element given by coordinates."""
        M = self.matrix(X)
        return exact.matmul(M, v)

    def matrix(self, c: np.ndarray) -> np.ndarray:
        acc = qzeros((self.dim, self.dim))
        for ci, Mi in zip(c, self.matrices):
            if ci != 0:
                acc = acc + Mi * ci
        return acc


def standard_rep(alg: GradedAlgebra) -> RepAction:
    n = alg.n
    grades = tuple([1] + [0] * n + [-1])
    slots = {"r": [0], "s": list(range(1, n + 1)), "t": [n + 1]}
    return RepAction("standard", alg, alg.basis, grades, slots)


def standard_slot_change(n: int) -> np.ndarray:
    """Matrix taking ambient vectors v to slot values (r, s_d, t).

    r = v^0, s_d = v^c J_cd, t = v^{n+1}.
    """
    J = standard_J_matrix(n)
    M = qzeros((n + 2, n + 2))
    M[0, 0] = ONE
    M[n + 1, n + 1] = ONE
    M[1 : n + 1, 1 : n + 1] = J.T
    return M


def tractor_rep(alg: GradedAlgebra) -> RepAction:
    """Standard module written in the slot coordinates (r, s_d, t)."""
    C = standard_slot_change(alg.n)
    Ci = exact.inverse(C)
    mats = tuple(exact.matmul(exact.matmul(C, M), Ci) for M in alg.basis)
    base = standard_rep(alg)
    return RepAction("tractor", alg, mats, base.grades, base.slots)


def adjoint_rep(alg: GradedAlgebra) -> RepAction:
    slots = {f"g{d}": alg.indices(d) for d in (-2, -1, 0, 1, 2)}
    return RepAction("adjoint", alg, alg.ad, alg.grading, slots)


def density_rep(alg: GradedAlgebra, w: int) -> RepAction:
    """R[w] as a p0-module: E acts by w, the sp(n) block trivially.

    Only p0 acts; the other basis elements act by zero, which is the
    infinitesimal form of A -> det(A)^(-w/n).
    """
    mats = []
    for i in range(alg.dim):
        M = qzeros((1, 1))
        if i == alg.idx_E:
            M[0, 0] = fmpq(w)
        mats.append(M)
    return RepAction("density", alg, tuple(mats), (w,), {"w": [0]})


def density_action(alg: GradedAlgebra, A_csp: np.ndarray, w: int) -> fmpq:
    """Action of a csp(n) element on R[w] through the p0 embedding."""
    c = alg.coords(alg.csp_to_p0(A_csp))
    return c[alg.idx_E] * w


def rep_action(rep: RepAction, X: np.ndarray, v: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=object)
    if X.shape == (rep.algebra.N, rep.algebra.N):
        X = rep.algebra.coords(X)
    if len(X) != rep.algebra.dim or len(v) != rep.dim:
        raise TensorError("dimension mismatch")
    return rep.act(X, v)


def check_homomorphism(rep: RepAction, pairs) -> bool:
    alg = rep.algebra
    for i, j in pairs:
        lhs = rep.matrix(alg.structure_constants[i, j])
        A, B = rep.matrices[i], rep.matrices[j]
        if not exact.is_zero(lhs - (exact.matmul(A, B) - exact.matmul(B, A))):
            return False
    return True


# invariant forms --------------------------------------------------------------


@lru_cache(maxsize=None)
def killing_form(n: int) -> np.ndarray:
    """Killing form of sp(n+2): (n+4) tr(XY), as a Gram matrix on the basis."""
    alg = build_algebra(n)
    d = alg.dim
    B = qzeros((d, d))
    for i in range(d):
        for j in range(i, d):
            v = (n + 4) * exact.matmul(alg.basis[i], alg.basis[j]).trace()
            B[i, j] = B[j, i] = fmpq(v)
    return B


def normalized_pairing(n: int) -> np.ndarray:
    """Killing form divided by 2(n+4), so that N(X_a, Z^b) = delta_a^b."""
    return killing_form(n) * fmpq(1, 2 * (n + 4))


@dataclass(frozen=True)
class BracketDual:
    """Coefficients c with {X_a, X_b} = c[a, b] x.

    ``killing_dual`` is the form dual to the p1 bracket under the Killing
    identifications, ``g_minus`` is the actual bracket of l_{-1} into
    g_{-2}, and ``ratio`` the scalar g_minus / killing_dual.
    """

    killing_dual: np.ndarray
    g_minus: np.ndarray
    ratio: fmpq


def dual_pairing(n: int, kind: str):
    alg = build_algebra(n)
    if kind == "killing":
        return killing_form(n)
    if kind != "bracket_dual":
        raise TensorError("kind must be 'killing' or 'bracket_dual'")
    B = killing_form(n)
    C = alg.structure_constants
    X, Z, x, z = alg.idx_X, alg.idx_Z, alg.idx_x, alg.idx_z
    # dual bases under B: Zhat^b = Z^b / B(X_b, Z^b), zhat = z / B(x, z)
    bXZ = B[X[0], Z[0]]
    bxz = B[x, z]
    kd = qzeros((n, n))
    gm = qzeros((n, n))
    for a in range(n):
        for b in range(n):
            # [Zhat^a, Zhat^b] = c zhat  =>  c = C[Z^a, Z^b, z] * bxz / bXZ^2
            kd[a, b] = C[Z[a], Z[b], z] * bxz / (bXZ * bXZ)
            gm[a, b] = C[X[a], X[b], x]
    ratio = None
    for a in range(n):
        for b in range(n):
            if kd[a, b] != 0:
                r = gm[a, b] / kd[a, b]
                if ratio is None:
                    ratio = r
                elif r != ratio:
                    raise TensorError("bracket and its Killing dual are not proportional")
    return BracketDual(kd, gm, ratio)


def p1_identification(n: int) -> np.ndarray:
    """Matrix of N(X_a, Z^b); the identity realizes p1 = (l_{-1})^*."""
    alg = build_algebra(n)
    Np = normalized_pairing(n)
    return Np[np.ix_(alg.idx_X, alg.idx_Z)]
