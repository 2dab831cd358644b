"""Connection calculus on a flat chart.

Connection coefficients are stored as ``gamma[a, b, d]`` with
nabla_a nu^d = d_a nu^d + gamma[a, b, d] nu^b. Rank-3 tensors of the
decomposition of DJ keep the printed slot order, so ``H[b, c, a]`` is H_bca.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from flint import fmpq

from . import exact, fields
from .exact import qzeros
from .tensor_core import LO, UP, TensorError, WeightedTensor, standard_J_matrix


@dataclass(frozen=True, eq=False)
class PolyConnection:
    n: int
    gamma: np.ndarray
    torsion_free: bool = False

    def __post_init__(self) -> None:
        g = fields.lift(self.n, self.gamma)
        object.__setattr__(self, "gamma", g)
        if g.shape != (self.n,) * 3:
            raise TensorError("connection coefficients must have shape (n, n, n)")
        if self.torsion_free and not fields.is_zero(g - g.transpose(1, 0, 2)):
            raise TensorError("connection declared torsion-free has torsion")

    def __add__(self, diff: np.ndarray) -> "PolyConnection":
        g = self.gamma + fields.lift(self.n, diff)
        tf = fields.is_zero(g - g.transpose(1, 0, 2))
        return PolyConnection(self.n, g, tf)

    def equals(self, other: "PolyConnection") -> bool:
        return fields.is_zero(self.gamma - other.gamma)


def flat(n: int) -> PolyConnection:
    return PolyConnection(n, fields.zeros(n, (n, n, n)), True)


def J_field(n: int) -> WeightedTensor:
    return WeightedTensor(n, (LO, LO), -2, fields.lift(n, standard_J_matrix(n)))


def Jup_field(n: int) -> WeightedTensor:
    return WeightedTensor(n, (UP, UP), 2, fields.lift(n, standard_J_matrix(n)))


def raise_last(t: np.ndarray, n: int) -> np.ndarray:
    """Raise the last slot: X^d = J^{de} X_e."""
    return np.tensordot(t, standard_J_matrix(n), axes=([-1], [1]))


def raise_vec(v: np.ndarray, n: int) -> np.ndarray:
    return raise_last(v, n)


def covariant_derivative(conn: PolyConnection, t: WeightedTensor) -> WeightedTensor:
    """nabla t with the derivative slot first.

    Upper slots get +Gamma, lower slots -Gamma, and a density of weight w the
    term -(w/n) Gamma_ai^i.
    """
    n = conn.n
    if t.dim != n:
        raise TensorError("dimension mismatch")
    comps = fields.lift(n, t.components)
    G = conn.gamma
    out = fields.grad(comps, n)
    r = t.rank
    for slot, var in enumerate(t.variance):
        moved = np.moveaxis(comps, slot, 0)
        if var == UP:
            # Gamma_{a b}^{d} t^{..b..} -> slot value d
            term = np.tensordot(G, moved, axes=([1], [0]))  # a, d, rest
        else:
            # -Gamma_{a c}^{e} t_{..e..}
            term = -np.tensordot(G, moved, axes=([2], [0]))  # a, c, rest
        term = np.moveaxis(term, 1, slot + 1)
        out = out + term
    if t.weight:
        tr = np.einsum("aii->a", G)
        out = out - np.multiply.outer(tr, comps) * fmpq(t.weight, n)
    return WeightedTensor(n, (LO,) + t.variance, t.weight, fields.lift(n, out))


def torsion_of(conn: PolyConnection) -> np.ndarray:
    return conn.gamma - conn.gamma.transpose(1, 0, 2)


def nabla_J(conn: PolyConnection) -> np.ndarray:
    return covariant_derivative(conn, J_field(conn.n)).components


# decomposition of DJ -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DJDecomposition:
    alpha: np.ndarray
    beta: np.ndarray
    H: np.ndarray
    S: np.ndarray

    def reconstruct(self, n: int) -> np.ndarray:
        return dj_from_components(n, self.alpha, self.beta, self.H, self.S)


def dj_from_components(n, alpha, beta, H, S) -> np.ndarray:
    """2 alpha_a J_bc + J_ab beta_c - J_ac beta_b - H_bca + 2 S_bca (slots a, b, c)."""
    J = standard_J_matrix(n)
    out = 2 * np.multiply.outer(alpha, J)
    out = out + np.einsum("ab,c->abc", J, beta) - np.einsum("ac,b->abc", J, beta)
    out = out - np.transpose(H, (2, 0, 1)) + 2 * np.transpose(S, (2, 0, 1))
    return out


def _rows_perm(n, perm, sign):
    idx = np.arange(n**3).reshape(n, n, n)
    rows = qzeros((n**3, n**3))
    k = 0
    for t in np.ndindex(n, n, n):
        u = tuple(t[p] for p in perm)
        rows[k, idx[t]] += 1
        rows[k, idx[u]] -= sign
        k += 1
    return rows


def _rows_cyclic(n):
    idx = np.arange(n**3).reshape(n, n, n)
    rows = qzeros((n**3, n**3))
    for k, (b, c, a) in enumerate(np.ndindex(n, n, n)):
        rows[k, idx[b, c, a]] += 1
        rows[k, idx[c, a, b]] += 1
        rows[k, idx[a, b, c]] += 1
    return rows


def _rows_trace13(n):
    """J^{be} X_{bce} = 0 for every c."""
    J = standard_J_matrix(n)
    idx = np.arange(n**3).reshape(n, n, n)
    rows = qzeros((n, n**3))
    for c in range(n):
        for b in range(n):
            for e in range(n):
                if J[b, e] != 0:
                    rows[c, idx[b, c, e]] += J[b, e]
    return rows


@lru_cache(maxsize=None)
def component_spaces(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Bases (columns) of the H and S spaces in the slot order (b, c, a)."""
    anti_bc = _rows_perm(n, (1, 0, 2), -1)
    H = exact.nullspace(np.concatenate([anti_bc, _rows_cyclic(n), _rows_trace13(n)]))
    S = exact.nullspace(np.concatenate([anti_bc, _rows_perm(n, (0, 2, 1), -1), _rows_trace13(n)]))
    return H, S


@lru_cache(maxsize=None)
def _dj_extractor(n: int):
    Hb, Sb = component_spaces(n)
    J = standard_J_matrix(n)
    cols = []
    for i in range(n):
        e = qzeros(n)
        e[i] = 1
        cols.append(dj_from_components(n, e, qzeros(n), qzeros((n,) * 3), qzeros((n,) * 3)).reshape(-1))
    for i in range(n):
        e = qzeros(n)
        e[i] = 1
        cols.append(dj_from_components(n, qzeros(n), e, qzeros((n,) * 3), qzeros((n,) * 3)).reshape(-1))
    for k in range(Hb.shape[1]):
        cols.append(dj_from_components(n, qzeros(n), qzeros(n), Hb[:, k].reshape((n,) * 3), qzeros((n,) * 3)).reshape(-1))
    for k in range(Sb.shape[1]):
        cols.append(dj_from_components(n, qzeros(n), qzeros(n), qzeros((n,) * 3), Sb[:, k].reshape((n,) * 3)).reshape(-1))
    M = np.array(cols, dtype=object).T
    L = exact.left_inverse(M)
    nh = Hb.shape[1]
    del J
    # frozen rational maps from DJ components to each irreducible part
    alpha = L[:n]
    beta = L[n : 2 * n]
    H = exact.matmul(Hb, L[2 * n : 2 * n + nh])
    S = exact.matmul(Sb, L[2 * n + nh :])
    return alpha, beta, H, S


def _apply(M: np.ndarray, v: np.ndarray, n: int) -> np.ndarray:
    out = np.empty(M.shape[0], dtype=object)
    nz = [np.nonzero(row)[0] for row in (M != 0)]
    zero = fields.const(n, 0)
    for i, cols in enumerate(nz):
        acc = zero
        for j in cols:
            acc = acc + v[j] * M[i, j]
        out[i] = acc
    return out


def decompose_dj_tensor(n: int, DJ: np.ndarray) -> DJDecomposition:
    if n % 2:
        raise TensorError("n must be even")
    A, B, H, S = _dj_extractor(n)
    v = fields.lift(n, DJ).reshape(-1)
    dec = DJDecomposition(_apply(A, v, n), _apply(B, v, n), _apply(H, v, n).reshape((n,) * 3), _apply(S, v, n).reshape((n,) * 3))
    if not fields.is_zero(dec.reconstruct(n) - fields.lift(n, DJ)):
        raise TensorError("DJ reconstruction mismatch")
    return dec


def decompose_DJ(D: PolyConnection) -> DJDecomposition:
    return decompose_dj_tensor(D.n, nabla_J(D))


def check_dj_symmetries(n: int, dec: DJDecomposition) -> dict[str, bool]:
    """The four symmetry/trace conditions on S and H."""
    J = standard_J_matrix(n)
    H, S = dec.H, dec.S
    # slots are (b, c, a)
    return {
        "S_b(ca)=0": fields.is_zero(S + S.transpose(0, 2, 1)),
        "S_bc^b=0": fields.is_zero(np.einsum("be,bce->c", J, S)),
        "H_[bca]=0": fields.is_zero(H + H.transpose(1, 2, 0) + H.transpose(2, 0, 1)),
        "H_bc^b=0": fields.is_zero(np.einsum("be,bce->c", J, H)),
    }


# connection changes ------------------------------------------------------------


def _eye(n):
    return exact.qeye(n)


def projective_tensor(n, U):
    d = _eye(n)
    return np.einsum("a,bd->abd", U, d) + np.einsum("b,ad->abd", U, d)


def acs_geodesic_tensor(n, s):
    J = standard_J_matrix(n)
    d = _eye(n)
    return np.einsum("a,bd->abd", s, d) - np.einsum("b,ad->abd", s, d) - np.einsum("ab,d->abd", J, raise_vec(s, n))


def weyl_tensor_change(n, beta):
    J = standard_J_matrix(n)
    return projective_tensor(n, beta) + np.einsum("ab,d->abd", J, raise_vec(beta, n))


def acs_projective_tensor(n, s, beta):
    J = standard_J_matrix(n)
    d = _eye(n)
    bs, bm = beta + s, beta - s
    return (
        np.einsum("a,bd->abd", bs, d)
        + np.einsum("b,ad->abd", bm, d)
        + np.einsum("ab,d->abd", J, raise_vec(bm, n))
    )


def nabla_beta_s_tensor(n, s, beta, H, S):
    """s_a d_b^d - s_b d_a^d - s^d J_ab + H_ab^d + S_ab^d + J_ab beta^d."""
    J = standard_J_matrix(n)
    return acs_geodesic_tensor(n, s) + raise_last(H, n) + raise_last(S, n) + np.einsum("ab,d->abd", J, raise_vec(beta, n))


def transform_connection(conn: PolyConnection, kind: str, **p) -> PolyConnection:
    n = conn.n

    def vec(name):
        v = p.get(name)
        return fields.zeros(n, (n,)) if v is None else fields.lift(n, v)

    if kind == "projective":
        return conn + projective_tensor(n, vec("upsilon"))
    if kind == "acs_same_geodesics":
        return conn + acs_geodesic_tensor(n, vec("s"))
    if kind == "acs_projective":
        return conn + acs_projective_tensor(n, vec("s"), vec("beta"))
    if kind == "weyl":
        return conn + weyl_tensor_change(n, vec("beta"))
    if kind == "nabla_beta_s":
        if not conn.torsion_free:
            raise TensorError("nabla^{beta,s} is built from a torsion-free connection")
        dec = p.get("decomposition") or decompose_DJ(conn)
        beta = vec("beta")
        Dbeta = conn + projective_tensor(n, beta - dec.beta)
        return Dbeta + nabla_beta_s_tensor(n, vec("s"), beta, dec.H, dec.S)
    raise TensorError(f"unknown connection change {kind!r}")


def class_member(D: PolyConnection, beta: np.ndarray, dec: DJDecomposition | None = None) -> PolyConnection:
    """The member D^beta of the projective class of D."""
    dec = dec or decompose_DJ(D)
    return transform_connection(D, "projective", upsilon=fields.lift(D.n, beta) - dec.beta)


def build_nabla0(D: PolyConnection) -> PolyConnection:
    """The ACS connection with totally trace-free torsion in the class of D."""
    if not D.torsion_free:
        raise TensorError("build_nabla0 needs a torsion-free connection")
    n = D.n
    dec = decompose_DJ(D)
    D0 = transform_connection(D, "projective", upsilon=-dec.beta)
    zero = fields.zeros(n, (n,))
    return D0 + nabla_beta_s_tensor(n, zero, zero, dec.H, dec.S)


def torsion_traces(T: np.ndarray, n: int) -> dict[str, np.ndarray]:
    J = standard_J_matrix(n)
    return {"T_ab^b": np.einsum("abb->a", T), "J^ab T_ab^d": np.einsum("ab,abd->d", J, T)}


def torsion_display(n, s, beta, H, S) -> np.ndarray:
    """2(s_a d_b^d - s_b d_a^d - s^d J_ab + H_ab^d + S_ab^d + J_ab beta^d)."""
    return 2 * nabla_beta_s_tensor(n, fields.lift(n, s), fields.lift(n, beta), H, S)


def projective_part(D: PolyConnection) -> PolyConnection:
    """Torsion-free part of a connection (same geodesics up to parametrization)."""
    g = (D.gamma + D.gamma.transpose(1, 0, 2)) * fmpq(1, 2)
    return PolyConnection(D.n, g, True)


# Rho tensors ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RhoTensor:
    P_ab: np.ndarray
    P_a: np.ndarray

    def equals(self, other: "RhoTensor") -> bool:
        return fields.is_zero(self.P_ab - other.P_ab) and fields.is_zero(self.P_a - other.P_a)


def zero_rho(n: int) -> RhoTensor:
    return RhoTensor(fields.zeros(n, (n, n)), fields.zeros(n, (n,)))


def rho_transform(P: RhoTensor, U: np.ndarray, y, conn: PolyConnection) -> RhoTensor:
    """Change of Rho tensors under the Weyl-structure change (U, y J).

    P_ab -> P_ab - U_a U_b + nabla_a U_b + y J_ab
    P_a  -> P_a + nabla_a y + 2 P_ab U^b + nabla_a U_b U^b - 2 U_a y
    with U of weight 0 and y a density of weight 2.
    """
    n = conn.n
    J = standard_J_matrix(n)
    U = fields.lift(n, U)
    yv = fields.lift(n, y if isinstance(y, np.ndarray) else fields.pack([y], ()))
    Uup = raise_vec(U, n)
    dU = covariant_derivative(conn, WeightedTensor(n, (LO,), 0, U)).components
    dy = covariant_derivative(conn, WeightedTensor(n, (), 2, yv)).components
    P_ab = P.P_ab - np.multiply.outer(U, U) + dU + fields.scale(J, yv[()])
    P_a = P.P_a + dy + 2 * np.einsum("ab,b->a", P.P_ab, Uup) + np.einsum("ab,b->a", dU, Uup) - fields.scale(2 * U, yv[()])
    return RhoTensor(fields.lift(n, P_ab), fields.lift(n, P_a))


def weyl_change_for_rho(conn: PolyConnection, U: np.ndarray) -> PolyConnection:
    """The Weyl connection paired with the changed Rho tensor."""
    return transform_connection(conn, "weyl", beta=U)
