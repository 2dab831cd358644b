"""Curvature of polynomial connections and its CSp(n)-decomposition.

Rank-4 tensors are indexed (a, b, c, d) and flattened in C order. Lowered
curvature means ``R_abcd = R_abc^e J_ed``. A trace written ``X_{..e..}^{..e..}``
contracts the two slots with ``J^{eg}``, the lower index going into the first
slot of ``J``.

The decomposition spaces are computed once per dimension as exact integer
nullspaces of the listed symmetry and trace conditions. Extraction is a
cached left inverse of the parametrization matrix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from flint import fmpq, fmpq_mat, fmpz_mat

from . import exact, fields
from .connection_lab import PolyConnection, RhoTensor, covariant_derivative, raise_last
from .exact import ONE, ZERO, qzeros
from .tensor_core import LO, TensorError, WeightedTensor, standard_J_matrix


def _check_dim(n: int) -> None:
    if n % 2 or n < 6:
        raise TensorError(f"curvature decomposition needs even n >= 6, got {n}")


# ---------------------------------------------------------------- curvature


def curvature_of(conn: PolyConnection) -> np.ndarray:
    """R[a, b, c, d] = R_abc^d of a connection on the flat chart."""
    n = conn.n
    G = conn.gamma
    dG = fields.grad(G, n)
    quad = np.einsum("aed,bce->abcd", G, G)
    R = dG - dG.transpose(1, 0, 2, 3) + quad - quad.transpose(1, 0, 2, 3)
    return fields.normalize(n, R)


def lower_curvature(R: np.ndarray, n: int) -> np.ndarray:
    """R_abcd = R_abc^e J_ed."""
    J = standard_J_matrix(n)
    return np.tensordot(R, J, axes=([3], [0]))


def raise_curvature(R: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`lower_curvature`: R_abc^d = -R_abce J^{ed}."""
    J = standard_J_matrix(n)
    return -np.tensordot(R, J, axes=([3], [0]))


def bianchi_defect(R: np.ndarray) -> np.ndarray:
    """Cyclic sum R_abc + R_bca + R_cab over the first three slots."""
    return R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)


def jtrace(t: np.ndarray, i: int, j: int, n: int) -> np.ndarray:
    """Contract slots i < j with J^{eg} (e in slot i, g in slot j)."""
    J = standard_J_matrix(n)
    r = t.ndim
    letters = "abcdefgh"[:r]
    sub = list(letters)
    sub[i], sub[j] = "y", "z"
    out = "".join(ch for k, ch in enumerate(letters) if k not in (i, j))
    return np.einsum(f"yz,{''.join(sub)}->{out}", J, t)


# ---------------------------------------------------------- linear systems


def _index(n: int) -> np.ndarray:
    return np.arange(n**4).reshape(n, n, n, n)


def _perm_rows(n: int, perm, sign: int) -> list[dict[int, int]]:
    """Rows of X - sign * X o perm = 0."""
    idx = _index(n)
    rows = []
    for t in itertools.product(range(n), repeat=4):
        u = tuple(t[p] for p in perm)
        r = {idx[t]: 1}
        r[idx[u]] = r.get(idx[u], 0) - sign
        rows.append(r)
    return rows


def _cyclic_rows(n: int) -> list[dict[int, int]]:
    idx = _index(n)
    rows = []
    for a, b, c, d in itertools.product(range(n), repeat=4):
        r: dict[int, int] = {}
        for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
            k = idx[x, y, z, d]
            r[k] = r.get(k, 0) + 1
        rows.append(r)
    return rows


def _alt4_rows(n: int) -> list[dict[int, int]]:
    idx = _index(n)
    perms = [(p, _sign(p)) for p in itertools.permutations(range(4))]
    rows = []
    for t in itertools.combinations(range(n), 4):
        r: dict[int, int] = {}
        for p, s in perms:
            k = idx[tuple(t[i] for i in p)]
            r[k] = r.get(k, 0) + s
        rows.append(r)
    return rows


def _sign(p) -> int:
    s = 1
    p = list(p)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                s = -s
    return s


def _trace_rows(n: int, i: int, j: int) -> list[dict[int, int]]:
    J = standard_J_matrix(n)
    idx = _index(n)
    rest = [k for k in range(4) if k not in (i, j)]
    rows = []
    for r0, r1 in itertools.product(range(n), repeat=2):
        r: dict[int, int] = {}
        for e in range(n):
            for g in range(n):
                if J[e, g] != 0:
                    t = [0] * 4
                    t[rest[0]], t[rest[1]], t[i], t[j] = r0, r1, e, g
                    k = idx[tuple(t)]
                    r[k] = r.get(k, 0) + int(J[e, g])
        rows.append(r)
    return rows


def _sym_pair_rows(n: int, a: int, b: int, sign: int) -> list[dict[int, int]]:
    p = list(range(4))
    p[a], p[b] = p[b], p[a]
    return _perm_rows(n, p, sign)


def _rows(n: int, names: tuple[str, ...]) -> list[dict[int, int]]:
    rows: list[dict[int, int]] = []
    for name in names:
        if name == "ab_anti":
            rows += _sym_pair_rows(n, 0, 1, -1)
        elif name == "cd_anti":
            rows += _sym_pair_rows(n, 2, 3, -1)
        elif name == "cd_sym":
            rows += _sym_pair_rows(n, 2, 3, 1)
        elif name == "bc_anti":
            rows += _sym_pair_rows(n, 1, 2, -1)
        elif name == "pair_sym":
            rows += _perm_rows(n, (2, 3, 0, 1), 1)
        elif name == "bianchi":
            rows += _cyclic_rows(n)
        elif name == "alt4":
            rows += _alt4_rows(n)
        elif name.startswith("tr"):
            rows += _trace_rows(n, int(name[2]), int(name[3]))
        else:
            raise ValueError(name)
    return rows


def _pair_reduction(n: int, i: int) -> tuple[dict[int, tuple[int, int]], int]:
    """Full index -> (reduced index, sign) for tensors antisymmetric in slots i, i+1."""
    idx = _index(n)
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    red = {}
    k = 0
    for p, (a, b) in enumerate(pairs):
        for c in range(n):
            for d in range(n):
                t = [c, d]
                t.insert(i, b)
                t.insert(i, a)
                u = list(t)
                u[i], u[i + 1] = b, a
                red[int(idx[tuple(t)])] = (k, 1)
                red[int(idx[tuple(u)])] = (k, -1)
                k += 1
    return red, k


_REDUCIBLE = {"ab_anti": 0, "bc_anti": 1}


@lru_cache(maxsize=None)
def constrained_space(n: int, names: tuple[str, ...]) -> fmpq_mat:
    """Basis (as columns) of the rank-4 tensors satisfying the named conditions.

    One antisymmetry in adjacent slots, when requested, is imposed by working
    in reduced coordinates, which keeps the integer nullspace small.
    """
    N = n**4
    key = next((x for x in names if x in _REDUCIBLE), None)
    if key is not None:
        red, M_cols = _pair_reduction(n, _REDUCIBLE[key])
        rows = []
        for r in _rows(n, tuple(x for x in names if x != key)):
            rr: dict[int, int] = {}
            for k, v in r.items():
                if k in red:
                    j, s = red[k]
                    rr[j] = rr.get(j, 0) + s * v
            rows.append(rr)
    else:
        M_cols = N
        rows = _rows(n, names)
    rows = [r for r in rows if any(r.values())]
    M = fmpz_mat(max(len(rows), 1), M_cols)
    for i, r in enumerate(rows):
        for k, v in r.items():
            if v:
                M[i, k] = v
    X = _rref_kernel(M)
    nul = X.ncols()
    B = fmpq_mat(N, nul)
    if key is not None:
        for full, (j, s) in red.items():
            for c in range(nul):
                v = X[j, c]
                if v:
                    B[full, c] = v * s
    else:
        B = X
    return B


def _rref_kernel(M: fmpz_mat) -> fmpq_mat:
    """Kernel basis in reduced echelon form (free variables set to unit vectors).

    This keeps entries small, unlike FLINT's fraction-free nullspace.
    """
    R, den, rk = M.rref()
    ncols = M.ncols()
    pivots = []
    j = 0
    for i in range(rk):
        while R[i, j] == 0:
            j += 1
        pivots.append(j)
    pset = set(pivots)
    free = [j for j in range(ncols) if j not in pset]
    X = fmpq_mat(ncols, len(free))
    for k, f in enumerate(free):
        X[f, k] = 1
        for i, p in enumerate(pivots):
            v = R[i, f]
            if v:
                X[p, k] = fmpq(-int(v), int(den))
    return X


def _pairing_perm(n: int) -> tuple[np.ndarray, np.ndarray]:
    """The full J-contraction pairing as a signed permutation of indices."""
    J = standard_J_matrix(n)
    partner = [int(np.nonzero([J[a, e] != 0 for e in range(n)])[0][0]) for a in range(n)]
    sgn = [int(J[a, partner[a]]) for a in range(n)]
    idx = _index(n)
    perm = np.zeros(n**4, dtype=int)
    signs = np.zeros(n**4, dtype=int)
    for t in itertools.product(range(n), repeat=4):
        perm[idx[t]] = idx[tuple(partner[x] for x in t)]
        signs[idx[t]] = sgn[t[0]] * sgn[t[1]] * sgn[t[2]] * sgn[t[3]]
    return perm, signs


def _pair_apply(n: int, B: fmpq_mat) -> fmpq_mat:
    """G @ B for the pairing G[(abcd),(efgh)] = J_ae J_bf J_cg J_dh."""
    perm, signs = _pairing_perm(n)
    out = fmpq_mat(B.nrows(), B.ncols())
    for i in range(B.nrows()):
        p, s = int(perm[i]), int(signs[i])
        for j in range(B.ncols()):
            v = B[p, j]
            if v:
                out[i, j] = v * s
    return out


def _null_fmpq(M: fmpq_mat) -> fmpq_mat:
    """Right kernel of a rational matrix, as columns."""
    num, _ = M.numer_denom()
    return _rref_kernel(num)


def _hcat(mats: list[fmpq_mat]) -> fmpq_mat:
    rows = mats[0].nrows()
    cols = sum(m.ncols() for m in mats)
    out = fmpq_mat(rows, cols)
    off = 0
    for m in mats:
        for j in range(m.ncols()):
            for i in range(rows):
                v = m[i, j]
                if v:
                    out[i, off + j] = v
        off += m.ncols()
    return out


def complement(n: int, space: fmpq_mat, sub: fmpq_mat) -> fmpq_mat:
    """Vectors of ``space`` orthogonal to ``sub`` under the J pairing."""
    if sub.ncols() == 0:
        return space
    cond = sub.transpose() * _pair_apply(n, space)
    return space * _null_fmpq(cond)


# ------------------------------------------------------ trace-type displays


def _JJ(n: int) -> np.ndarray:
    return standard_J_matrix(n)


def _scalar(x) -> np.ndarray:
    """0-d object array; numpy would otherwise unpack a polynomial."""
    o = np.empty((), dtype=object)
    o[()] = x
    return o


def _tj(T: np.ndarray, pattern: str, n: int) -> np.ndarray:
    """T_xy J_zw laid out on slots abcd, e.g. "ac,bd"."""
    return np.einsum(f"{pattern}->abcd", T, _JJ(n))


def projective_trace_part(n: int, Theta, Sigma, rhoS, rhoA, rhoT) -> np.ndarray:
    """The trace-type rows of the projective decomposition display."""
    J = _JJ(n)
    a = fmpq(3, n - 1)
    b = fmpq(1, n + 1)
    out = (
        _tj(Theta, "ac,bd", n) * (-a)
        + _tj(Theta, "bc,ad", n) * a
        + _tj(Theta, "ad,bc", n)
        - _tj(Theta, "bd,ac", n)
        - _tj(Theta, "cd,ab", n) * 2
    )
    out = out + (
        _tj(Sigma, "ab,cd", n) * (2 * b)
        + _tj(Sigma, "ac,bd", n) * b
        - _tj(Sigma, "bc,ad", n) * b
        + _tj(Sigma, "ad,bc", n)
        - _tj(Sigma, "bd,ac", n)
        - _tj(Sigma, "cd,ab", n) * 2
    )
    out = out + (
        -_tj(rhoS, "bc,ad", n)
        + _tj(rhoS, "ac,bd", n)
        - _tj(rhoA, "bc,ad", n)
        + _tj(rhoA, "ac,bd", n)
        + _tj(rhoA, "ab,cd", n) * 2
    )
    JJ = -np.einsum("bc,ad->abcd", J, J) + np.einsum("ac,bd->abcd", J, J) + 2 * np.einsum("ab,cd->abcd", J, J)
    return out + JJ * _scalar(rhoT)


def acs_trace_part(n: int, A, B, F, C, E) -> np.ndarray:
    """The trace-type rows of the csp-valued decomposition display."""
    J = _JJ(n)
    out = _tj(A, "cd,ab", n) * 2 + _tj(B, "ab,cd", n) * 2 + np.einsum("ab,cd->abcd", J, J) * _scalar(F)
    for T in (C, E):
        out = out + _tj(T, "ac,bd", n) - _tj(T, "bc,ad", n) + _tj(T, "ad,bc", n) - _tj(T, "bd,ac", n)
    return out


def ricci_type_R(Theta: np.ndarray, n: int | None = None) -> np.ndarray:
    """Theta_ac J_bd - Theta_bc J_ad + Theta_ad J_bc - Theta_bd J_ac - 2 Theta_cd J_ab."""
    Theta = np.asarray(Theta, dtype=object)
    n = n or Theta.shape[0]
    if not all(Theta[i, j] == Theta[j, i] for i in range(n) for j in range(n)):
        raise TensorError("Theta must be symmetric")
    return (
        _tj(Theta, "ac,bd", n)
        - _tj(Theta, "bc,ad", n)
        + _tj(Theta, "ad,bc", n)
        - _tj(Theta, "bd,ac", n)
        - _tj(Theta, "cd,ab", n) * 2
    )


# ------------------------------------------------------------ decomposition

PROJECTIVE_TRACES = (("Theta", "sym"), ("Sigma", "anti"), ("rhoS", "sym"), ("rhoA", "anti"), ("rhoT", "scalar"))
ACS_TRACES = (("A", "sym"), ("B", "anti"), ("F", "scalar"), ("C", "sym"), ("E", "anti"))
PROJECTIVE_TENSORS = ("W", "Y", "Z")
ACS_TENSORS = ("U", "V")

_WEYL = ("ab_anti", "bianchi", "tr01", "tr02", "tr03", "tr12", "tr13", "tr23")


@lru_cache(maxsize=None)
def _two_basis(n: int, kind: str) -> tuple[np.ndarray, ...]:
    """Bases of symmetric, trace-free antisymmetric 2-tensors, or scalars."""
    if kind == "scalar":
        return (None,)
    out = []
    if kind == "sym":
        for i in range(n):
            for j in range(i, n):
                T = qzeros((n, n))
                T[i, j] = T[j, i] = ONE
                out.append(T)
        return tuple(out)
    J = standard_J_matrix(n)
    cols = []
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    # trace J^{ij} T_ij = 2 sum_{i<j} J_ij T_ij
    cond = exact.qarray([[J[i, j] for i, j in pairs]])
    ker = exact.nullspace(cond)
    for k in range(ker.shape[1]):
        cols.append(ker[:, k])
    for c in cols:
        T = qzeros((n, n))
        for (i, j), v in zip(pairs, c):
            T[i, j] = v
            T[j, i] = -v
        out.append(T)
    return tuple(out)


def _flat_col(t: np.ndarray) -> list:
    return [fmpq(v) if not isinstance(v, fmpq) else v for v in np.asarray(t).reshape(-1)]


def _cols_to_mat(cols: list[list], rows: int) -> fmpq_mat:
    M = fmpq_mat(rows, len(cols))
    for j, c in enumerate(cols):
        for i, v in enumerate(c):
            if v:
                M[i, j] = v
    return M


def _left_inverse(P: fmpq_mat) -> fmpq_mat:
    """Exact left inverse built on a maximal set of independent rows."""
    num, _ = P.transpose().numer_denom()
    R, _, rk = num.rref()
    if rk != P.ncols():
        raise TensorError("parametrization is not injective")
    pivots = []
    j = 0
    for i in range(rk):
        while R[i, j] == 0:
            j += 1
        pivots.append(j)
    sq = fmpq_mat(rk, rk)
    for a, p in enumerate(pivots):
        for b in range(rk):
            v = P[p, b]
            if v:
                sq[a, b] = v
    inv = sq.inv()
    L = fmpq_mat(rk, P.nrows())
    for a in range(rk):
        for b, p in enumerate(pivots):
            v = inv[a, b]
            if v:
                L[a, p] = v
    return L


def _phi_cd(n: int, B: fmpq_mat) -> fmpq_mat:
    """Columns V -> V_abcd + V_abdc."""
    idx = _index(n)
    out = fmpq_mat(B.nrows(), B.ncols())
    for t in itertools.product(range(n), repeat=4):
        a, b, c, d = t
        i, k = int(idx[t]), int(idx[a, b, d, c])
        for j in range(B.ncols()):
            v = B[i, j] + B[k, j]
            if v:
                out[i, j] = v
    return out


@dataclass(frozen=True, eq=False)
class _Decomposer:
    n: int
    kind: str
    blocks: tuple  # (name, shape, basis fmpq_mat with one column per coefficient)
    extract: fmpq_mat
    dims: dict


@lru_cache(maxsize=None)
def decomposer(n: int, kind: str) -> _Decomposer:
    _check_dim(n)
    N = n**4
    blocks = []
    param_cols: list[fmpq_mat] = []
    traces = PROJECTIVE_TRACES if kind == "projective" else ACS_TRACES
    for name, typ in traces:
        basis = _two_basis(n, typ)
        shape = () if typ == "scalar" else (n, n)
        coeff = fmpq_mat(1 if typ == "scalar" else n * n, len(basis))
        cols = []
        for j, T in enumerate(basis):
            args = {nm: qzeros((n, n)) for nm, t in traces if t != "scalar"}
            args.update({nm: ZERO for nm, t in traces if t == "scalar"})
            if typ == "scalar":
                args[name] = ONE
                coeff[0, j] = ONE
            else:
                args[name] = T
                for i, v in enumerate(_flat_col(T)):
                    if v:
                        coeff[i, j] = v
            f = projective_trace_part if kind == "projective" else acs_trace_part
            cols.append(_flat_col(f(n, **args)))
        blocks.append((name, shape, coeff))
        param_cols.append(_cols_to_mat(cols, N))
    if kind == "projective":
        weyl = constrained_space(n, _WEYL)
        W = constrained_space(n, _WEYL + ("cd_sym",))
        Y = constrained_space(n, _WEYL + ("cd_anti", "pair_sym"))
        Z = complement(n, weyl, _hcat([W, Y]))
        for name, B in (("W", W), ("Y", Y), ("Z", Z)):
            blocks.append((name, (n,) * 4, B))
            param_cols.append(B)
        dims = {"weyl": weyl.ncols(), "W": W.ncols(), "Y": Y.ncols(), "Z": Z.ncols()}
    elif kind == "acs":
        U = constrained_space(n, ("ab_anti", "cd_sym", "bianchi", "tr01"))
        TF = constrained_space(n, ("ab_anti", "cd_sym", "tr01", "tr02", "tr03", "tr12", "tr13"))
        VS = complement(n, TF, U)
        LV = constrained_space(n, ("bc_anti", "alt4", "tr01"))
        K = constrained_space(n, ("bc_anti", "alt4", "tr01", "cd_anti"))
        Q = complement(n, LV, K)
        # V is the preimage of the symmetrized part inside the complement of the kernel
        y = _solve_cols(_phi_cd(n, Q), VS)
        V = Q * y
        blocks.append(("U", (n,) * 4, U))
        param_cols.append(U)
        blocks.append(("V", (n,) * 4, V))
        param_cols.append(VS)
        dims = {"U": U.ncols(), "Vsym": VS.ncols(), "V_listed": LV.ncols(), "V_kernel": K.ncols()}
    else:
        raise ValueError(f"unknown decomposition kind {kind!r}")
    P = _hcat(param_cols)
    dims["total"] = P.ncols()
    return _Decomposer(n, kind, tuple(blocks), _left_inverse(P), dims)


def _solve_cols(A: fmpq_mat, B: fmpq_mat) -> fmpq_mat:
    """X with A X = B for A of full column rank (checked)."""
    L = _left_inverse(A)
    X = L * B
    if A * X != B:
        raise exact.InconsistentSystem("columns are not in the image")
    return X


@dataclass(frozen=True, eq=False)
class CurvatureComponents:
    """Named pieces of a decomposed curvature tensor.

    ``parts`` maps component names to arrays (2-tensors, rank-4 tensors) or
    scalars; entries are rationals or polynomials. For the csp-valued kind
    the rank-4 entry ``V`` enters the curvature as ``V_abcd + V_abdc``.
    """

    kind: str
    n: int
    parts: dict = field(default_factory=dict)

    def __getitem__(self, name: str):
        return self.parts[name]

    def names(self) -> list[str]:
        return list(self.parts)

    def equals(self, other: "CurvatureComponents") -> bool:
        if self.kind != other.kind or set(self.parts) != set(other.parts):
            return False
        return all(_same(self.parts[k], other.parts[k]) for k in self.parts)


def _same(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        a = np.asarray(a, dtype=object)
        b = np.asarray(b, dtype=object)
        return a.shape == b.shape and all(x == y for x, y in zip(a.ravel(), b.ravel()))
    return a == b


def _is_poly(arr) -> bool:
    return any(isinstance(v, fields.PolyScalar) for v in np.asarray(arr, dtype=object).ravel())


def synthesize(comp: CurvatureComponents) -> np.ndarray:
    """Reassemble the lowered curvature from its components."""
    n, p = comp.n, comp.parts
    if comp.kind == "projective":
        out = projective_trace_part(n, p["Theta"], p["Sigma"], p["rhoS"], p["rhoA"], p["rhoT"])
        out = out + p["W"] + p["Y"] + p["Z"]
    else:
        out = acs_trace_part(n, p["A"], p["B"], p["F"], p["C"], p["E"])
        out = out + p["U"] + p["V"] + p["V"].transpose(0, 1, 3, 2)
    return out


def decompose_curvature(R: np.ndarray, kind: str) -> CurvatureComponents:
    """Split a lowered curvature tensor R_abcd into its irreducible pieces.

    ``kind="projective"`` expects the first Bianchi identity and antisymmetry
    in ab; ``kind="acs"`` expects csp-valuedness in cd. The result is checked
    by exact reconstruction.
    """
    R = np.asarray(R, dtype=object)
    n = R.shape[0]
    _check_dim(n)
    dec = decomposer(n, kind)
    poly = _is_poly(R)
    coeffs = fields.linear_apply(dec.extract, R, n)
    parts = {}
    off = 0
    for name, shape, basis in dec.blocks:
        k = basis.ncols()
        c = coeffs[off : off + k]
        off += k
        vals = fields.linear_apply(basis, c, n) if k else (fields.zeros(n, basis.nrows()) if poly else qzeros(basis.nrows()))
        parts[name] = vals[0] if shape == () else vals.reshape(shape)
    comp = CurvatureComponents(kind, n, parts)
    back = synthesize(comp)
    if not _same(fields.normalize(n, back) if poly else back, R):
        raise TensorError(f"curvature does not lie in the {kind} decomposition space")
    return comp


def component_symmetries(comp: CurvatureComponents) -> dict[str, bool]:
    """Evaluate every symmetry and trace condition listed for the components."""
    n, p = comp.n, comp.parts
    z = lambda t: fields.is_zero(t)
    def cyc(t):
        return z(bianchi_defect(t))
    out: dict[str, bool] = {}
    if comp.kind == "projective":
        for nm in ("W", "Y", "Z"):
            t = p[nm]
            out[f"{nm}_[abc]d=0"] = cyc(t)
            out[f"{nm}_abc^c=0"] = z(jtrace(t, 2, 3, n))
        W, Y, Zt = p["W"], p["Y"], p["Z"]
        out["W_ab[cd]=0"] = z(W - W.transpose(0, 1, 3, 2))
        out["W_a^a_cd=0"] = z(jtrace(W, 0, 1, n))
        out["Y_ab(cd)=0"] = z(Y + Y.transpose(0, 1, 3, 2))
        out["Y_abcd=Y_cdab"] = z(Y - Y.transpose(2, 3, 0, 1))
        out["Z_ab(cd)=0"] = z(Zt + Zt.transpose(0, 1, 3, 2))
        out["Z_abcd=-Z_cdab"] = z(Zt + Zt.transpose(2, 3, 0, 1))
        out["Theta_[ab]=0"] = z(p["Theta"] - p["Theta"].T)
        out["Sigma_(ab)=0"] = z(p["Sigma"] + p["Sigma"].T)
        out["Sigma_a^a=0"] = z(jtrace(p["Sigma"], 0, 1, n))
        out["rhoS_[ab]=0"] = z(p["rhoS"] - p["rhoS"].T)
        out["rhoA_(ab)=0"] = z(p["rhoA"] + p["rhoA"].T)
        out["rhoA_a^a=0"] = z(jtrace(p["rhoA"], 0, 1, n))
    else:
        U, V = p["U"], p["V"]
        out["A_[ab]=0"] = z(p["A"] - p["A"].T)
        out["B_(ab)=0"] = z(p["B"] + p["B"].T)
        out["B_a^a=0"] = z(jtrace(p["B"], 0, 1, n))
        out["C_[ab]=0"] = z(p["C"] - p["C"].T)
        out["E_(ab)=0"] = z(p["E"] + p["E"].T)
        out["E_a^a=0"] = z(jtrace(p["E"], 0, 1, n))
        out["U_[abc]d=0"] = cyc(U)
        out["U_ab[cd]=0"] = z(U - U.transpose(0, 1, 3, 2))
        out["U_a^a_cd=0"] = z(jtrace(U, 0, 1, n))
        out["V_a(bc)d=0"] = z(V + V.transpose(0, 2, 1, 3))
        alt = sum(
            (V.transpose(pp) * _sign(pp) for pp in itertools.permutations(range(4))),
            start=V * 0,
        )
        out["V_[abcd]=0"] = z(alt)
        out["V_a^a_cd=0"] = z(jtrace(V, 0, 1, n))
    return out


# ------------------------------------------------- torsion contribution K


def _lower3(n: int, t: np.ndarray) -> WeightedTensor:
    return WeightedTensor(n, (LO, LO, LO), 0, fields.lift(n, t))


def K_tensor(H: np.ndarray, S: np.ndarray, nabla0: PolyConnection) -> np.ndarray:
    """Difference R0 - kappa0 of the lowered curvatures, from the torsions.

    X = H + S is stored as X[b, c, d] = X_bcd and X_bc^e = J^{ed} X_bcd.
    """
    n = nabla0.n
    X = fields.lift(n, H + S)
    Xu = raise_last(X, n)
    dX = covariant_derivative(nabla0, _lower3(n, X)).components
    K = dX - dX.transpose(1, 0, 2, 3)
    K = K + 2 * np.einsum("ced,bae->abcd", X, Xu)
    K = K - np.einsum("aed,bce->abcd", X, Xu) + np.einsum("bed,ace->abcd", X, Xu)
    return fields.normalize(n, K)


def torsion_free_partner(nabla0: PolyConnection, H: np.ndarray, S: np.ndarray) -> PolyConnection:
    """D0 = nabla0 - (H + S), the torsion-free member of the projective class."""
    n = nabla0.n
    return nabla0 + (-raise_last(fields.lift(n, H + S), n))


def _ktraces(K: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """T1[a,b] = K_e^e_ab, T2[b,a] = K_eb^e_a, T3[b,a] = K_eba^e."""
    return jtrace(K, 0, 1, n), jtrace(K, 0, 2, n), jtrace(K, 0, 3, n)


def solved_components(n: int, K: np.ndarray, Theta: np.ndarray) -> dict[str, np.ndarray]:
    """Right-hand sides of the solved trace formulas, in terms of K and Theta."""
    T1, T2, T3 = _ktraces(K, n)
    t1, t2, t3 = T1.T, T2.T, T3.T  # index order (b, a)
    f = fmpq
    out = {}
    out["A"] = -Theta + (n * t1 + n * T1 - 2 * t2 - 2 * T2 - 2 * t3 - 2 * T3) * f(1, 4 * (n - 2) * (n + 2))
    out["B"] = (2 * (-t3 + T3) + T1 - t1 + 2 * t2 - 2 * T2) * f(1, 4 * (n - 4))
    out["C"] = Theta + (-(n + 1) * (t2 + T2) + t1 + T1 + t3 + T3) * f(1, 2 * (n - 2) * (n + 2))
    out["E"] = ((n - 2) * (T1 - t1) + 2 * (n - 2) * (t2 - T2) - 4 * t3 + 4 * T3) * f(1, 4 * (n - 4) * n)
    out["Sigma"] = ((n * n - 2 * n - 4) * (T1 - t1) + 2 * n * (t2 - T2) + 2 * n * (-t3 + T3)) * f(1, 4 * (n - 4) * n * (n + 2))
    out["rhoA"] = (T1 - t1 + 2 * t2 - 2 * T2 - 2 * t3 + 2 * T3) * f(n, 4 * (n - 4) * (n + 1))
    out["rhoS"] = Theta * f(n + 2, n - 1) + (t3 + T3 - t2 - T2) * f(1, 2 * (n - 2))
    return out


def verify_escur(R0: np.ndarray, H: np.ndarray, S: np.ndarray, nabla0: PolyConnection):
    """Check the essential-curvature identities on genuine pipeline data.

    ``R0`` is the lowered curvature of ``nabla0``; kappa0 is recovered as
    R0 - K. Each identity becomes one entry of the returned report.
    """
    from .report import Check, Report, compare, zero_check

    n = nabla0.n
    _check_dim(n)
    K = K_tensor(H, S, nabla0)
    kappa0 = fields.normalize(n, R0 - K)
    proj = decompose_curvature(kappa0, "projective")
    acs = decompose_curvature(R0, "acs")
    rep = Report("essential curvature")
    rep.add(zero_check("F=0", acs["F"]))
    rep.add(zero_check("rhoT=0", proj["rhoT"]))
    Theta = proj["Theta"]
    sol = solved_components(n, K, Theta)
    for name in ("A", "B", "C", "E"):
        rep.add(compare(f"{name}0 formula", acs[name], sol[name]))
    for name in ("Sigma", "rhoA", "rhoS"):
        rep.add(compare(f"{name}0 formula" if name != "Sigma" else "Sigma formula", proj[name], sol[name]))
    # trace displays
    Rup = raise_curvature(R0, n)
    ric = np.einsum("aici->ac", Rup)
    X = fields.lift(n, H + S)
    Xu = raise_last(X, n)
    dXu = covariant_derivative(nabla0, WeightedTensor(n, (LO, LO, "u"), 0, Xu)).components
    rhs = (
        proj["rhoS"] * (n - 1)
        + proj["rhoA"] * (n + 1)
        - np.einsum("eace->ac", dXu)
        - np.einsum("cef,afe->ac", Xu, Xu)
    )
    rep.add(compare("(R0)_aic^i display", ric, rhs))
    tr = np.einsum("abii->ab", Rup)
    rep.add(compare("(R0)_abi^i = 2(n+1) rhoA", tr, proj["rhoA"] * (2 * (n + 1))))
    rep.add(zero_check("(R0)_aic^i trace-free", jtrace(fields.lift(n, ric), 0, 1, n)))
    rep.add(zero_check("(R0)_abi^i trace-free", jtrace(fields.lift(n, tr), 0, 1, n)))
    rep.add(compare("R0 = kappa0 + K", R0, kappa0 + K))
    rep.extend(_bianchi_solved(n, K, proj, acs))
    rep.data = {"proj": proj, "acs": acs, "K": K, "kappa0": kappa0}
    return rep


def _bianchi_solved(n: int, K: np.ndarray, proj: CurvatureComponents, acs: CurvatureComponents):
    """The V + V_abdc and U expressions obtained from the Bianchi identity.

    The printed J_bc coefficient in the V expression contains ``B_bd``, which
    repeats the free index b; it is read as ``B_ad`` like its three siblings.
    """
    from .report import compare

    A, B, C, E = (acs[x] for x in "ABCE")
    Th, Sg, rS, rA, W = (proj[x] for x in ("Theta", "Sigma", "rhoS", "rhoA", "W"))

    def k(s):
        # K with its slots permuted: k("bcad")[a, b, c, d] = K_bcad
        return np.einsum(f"{s}->abcd", K)

    Kp = k("abcd") + k("bcad") + k("cabd") + k("abdc") + k("bdac") + k("dabc")
    Km = k("abcd") - k("bcad") - k("cabd") + k("abdc") - k("bdac") - k("dabc")
    v = Kp - _tj(A + C, "cd,ab", n) * 4
    v = v - _tj(A + C - B + 2 * E, "ad,bc", n) * 2
    v = v - _tj(-A - C + B - 2 * E, "bc,ad", n) * 2
    v = v - _tj(A + C - B + 2 * E, "ac,bd", n) * 2
    v = v - _tj(-A - C + B - 2 * E, "bd,ac", n) * 2
    lhs_v = acs["V"] + acs["V"].transpose(0, 1, 3, 2)
    note = "printed expression; not one of the solved formulas"
    checks = [compare("V+V_abdc Bianchi expression", lhs_v, v * fmpq(1, 4), note, required=False)]
    u = W + _tj(C - 2 * Th - A, "cd,ab", n)

    def g(x, y):
        return (
            Th[x, y] * fmpq(n - 4, 2 * (n - 1))
            - C[x, y] * fmpq(1, 2)
            + rS[x, y] * fmpq(1, 2)
            + Sg[x, y] * fmpq(n + 2, 2 * (n + 1))
            + rA[x, y] * fmpq(1, 2)
            + (A[x, y] - B[x, y]) * fmpq(1, 2)
        )

    G = np.empty((n, n), dtype=object)
    for x in range(n):
        for y in range(n):
            G[x, y] = g(x, y)
    u = u + _tj(G, "ac,bd", n) + _tj(G, "ad,bc", n) - _tj(G, "bc,ad", n) - _tj(G, "bd,ac", n)
    u = u + Km * fmpq(1, 4)
    checks.append(compare("U Bianchi expression", acs["U"], u, note, required=False))
    return checks


# ------------------------------------------------------------------ R tilde


@dataclass(frozen=True, eq=False)
class TildeR:
    """An l-valued two-form: ``matrices[a, b]`` is an (n+2)x(n+2) matrix.

    ``coords[a, b]`` holds the coordinates in the algebra basis of
    :func:`acaf.lie_core.build_algebra`.
    """

    n: int
    matrices: np.ndarray
    coords: np.ndarray

    def slot(self, which: str) -> np.ndarray:
        """Named block of the matrices (e.g. "x", "X", "a", "A", "Y_low", "z")."""
        n = self.n
        M = self.matrices
        table = {
            "a": M[:, :, 0, 0],
            "Y_low": M[:, :, 0, 1 : n + 1],
            "z": M[:, :, 0, n + 1],
            "X": M[:, :, 1 : n + 1, 0],
            "A": M[:, :, 1 : n + 1, 1 : n + 1],
            "Y_up": M[:, :, 1 : n + 1, n + 1],
            "x": M[:, :, n + 1, 0],
        }
        return table[which]


def _cov(conn: PolyConnection, t: np.ndarray, variance: tuple[str, ...], weight: int = 0) -> np.ndarray:
    return covariant_derivative(conn, WeightedTensor(conn.n, variance, weight, fields.lift(conn.n, t))).components


def _coords_field(alg, M: np.ndarray) -> np.ndarray:
    """Algebra coordinates of a matrix with polynomial entries (membership checked)."""
    n = alg.n
    L = exact.to_mat(alg._coord_map)
    c = fields.linear_apply(L, M, n)
    back = fields.linear_apply(exact.to_mat(alg._flat_basis), c, n)
    if not fields.is_zero(back - fields.lift(n, M).reshape(-1)):
        raise TensorError("matrix field is not sp(n+2)-valued")
    return c


def rtilde_blocks(
    nabla0: PolyConnection, H, S, R0: np.ndarray, P: RhoTensor, parts: str = "both", printed_p1_sign: bool = False
) -> np.ndarray:
    """The two-matrix sum defining R~, as an (n, n, n+2, n+2) array.

    ``parts`` selects the Rho-quadratic matrix ("rho"), the derivative,
    curvature and torsion matrix ("nabla"), or their sum ("both").

    The p1 entry of the Rho-quadratic matrix is P_b J_ac - P_a J_bc, which is
    what the bracket expression ad(P(s))t - ad(P(t))s + ad(P(s))P(t) gives
    and what makes the matrix sp(n+2)-valued. ``printed_p1_sign=True``
    uses the opposite sign instead, for comparison.
    """
    n = nabla0.n
    N = n + 2
    J = standard_J_matrix(n)
    Pab = fields.lift(n, P.P_ab)
    Pa = fields.lift(n, P.P_a)
    Pu = raise_last(Pab, n)  # P_a^d
    X = fields.lift(n, H + S)
    Xu = raise_last(X, n)
    I = exact.qeye(n)
    M = fields.zeros(n, (n, n, N, N))
    if parts in ("rho", "both"):
        M[:, :, 0, 0] += Pab - Pab.T
        p1 = np.einsum("b,ac->abc", Pa, J) - np.einsum("a,bc->abc", Pa, J)
        M[:, :, 0, 1 : n + 1] += -p1 if printed_p1_sign else p1
        M[:, :, 0, n + 1] += 2 * np.einsum("af,bf->ab", Pab, Pu)
        # rows d, columns c
        M[:, :, 1 : n + 1, 1 : n + 1] += (
            np.einsum("ad,bc->abdc", I, Pab)
            - np.einsum("bd,ac->abdc", I, Pab)
            - np.einsum("bc,ad->abdc", J, Pu)
            + np.einsum("ac,bd->abdc", J, Pu)
        )
        M[:, :, 1 : n + 1, n + 1] += np.einsum("b,ad->abd", Pa, I) - np.einsum("a,bd->abd", Pa, I)
        M[:, :, n + 1, n + 1] += -(Pab - Pab.T)
    if parts in ("nabla", "both"):
        Rup = raise_curvature(R0, n)
        tr = np.einsum("abii->ab", Rup) * fmpq(1, n)
        dP = _cov(nabla0, Pab, (LO, LO))
        dPa = _cov(nabla0, Pa, (LO,))
        dPu = raise_last(dP, n)
        M[:, :, 0, 0] += -tr
        M[:, :, 0, 1 : n + 1] += dP - dP.transpose(1, 0, 2)
        M[:, :, 0, n + 1] += dPa - dPa.T
        M[:, :, 1 : n + 1, 0] += 2 * Xu
        M[:, :, 1 : n + 1, 1 : n + 1] += Rup.transpose(0, 1, 3, 2) - np.einsum("ab,dc->abdc", tr, I)
        M[:, :, 1 : n + 1, n + 1] += dPu - dPu.transpose(1, 0, 2)
        M[:, :, n + 1, 1 : n + 1] += -2 * X
        M[:, :, n + 1, n + 1] += tr
    return fields.normalize(n, M)


def build_Rtilde(nabla0: PolyConnection, H, S, R0: np.ndarray, P: RhoTensor, parts: str = "both") -> TildeR:
    """Assemble R~ and map every value into the algebra basis."""
    from .lie_core import build_algebra

    n = nabla0.n
    M = rtilde_blocks(nabla0, H, S, R0, P, parts)
    alg = build_algebra(n)
    C = np.empty((n, n, alg.dim), dtype=object)
    for a in range(n):
        for b in range(n):
            C[a, b] = _coords_field(alg, M[a, b])
    return TildeR(n, M, C)


def rho_bracket_part(n: int, P_ab: np.ndarray, P_a: np.ndarray) -> np.ndarray:
    """ad(P(s))(t) - ad(P(t))(s) + ad(P(s))(P(t)) for s = X_a, t = X_b (constant Rho).

    P(X_a) = P_ac Z^c + P_a z. Returns coordinates of shape (n, n, dim).
    """
    from .lie_core import build_algebra

    alg = build_algebra(n)
    C = alg.structure_constants
    out = qzeros((n, n, alg.dim))
    rho = []
    for a in range(n):
        v = qzeros(alg.dim)
        for c, k in enumerate(alg.idx_Z):
            v[k] = P_ab[a, c]
        v[alg.idx_z] = P_a[a]
        rho.append(v)
    X = []
    for a in range(n):
        v = qzeros(alg.dim)
        v[alg.idx_X[a]] = ONE
        X.append(v)
    br = lambda u, w: np.einsum("i,j,ijk->k", u, w, C)
    for a in range(n):
        for b in range(n):
            out[a, b] = br(rho[a], X[b]) - br(rho[b], X[a]) + br(rho[a], rho[b])
    return out


# ----------------------------------------------------------- normal Rho


class NormalizationObstruction(TensorError):
    """No Rho tensor makes the codifferential of R~ vanish; carries the obstruction."""

    def __init__(self, value: np.ndarray):
        super().__init__("H != 0: the p0 entry -2H_ac^d - 2H_a^d_c of (1/2) d* R~ cannot vanish")
        self.value = value


def h_obstruction(H: np.ndarray, n: int) -> np.ndarray:
    """-2 H_ac^d - 2 H_a^d_c, indexed [a, d, c] (row d, column c)."""
    J = standard_J_matrix(n)
    Hu = raise_last(H, n)  # H_ac^d as [a, c, d]
    Hm = np.einsum("de,aec->adc", J, H)  # H_a^d_c
    return -2 * Hu.transpose(0, 2, 1) - 2 * Hm


def normal_rho(R0: np.ndarray, S: np.ndarray, nabla0: PolyConnection, H: np.ndarray | None = None) -> RhoTensor:
    """The Rho tensors for which the codifferential of R~ vanishes.

    Requires H = 0; otherwise the obstruction value is attached to the error.
    """
    n = nabla0.n
    _check_dim(n)
    if H is not None and not fields.is_zero(H):
        raise NormalizationObstruction(h_obstruction(fields.lift(n, H), n))
    Rup = raise_curvature(R0, n)
    ric = np.einsum("aici->ac", Rup)
    P_ab = ric * fmpq(n + 1, n * (n + 2)) + ric.T * fmpq(1, n * (n + 2))
    P_ab = fields.lift(n, P_ab)
    dP = raise_last(_cov(nabla0, P_ab, (LO, LO)), n)
    P_a = np.einsum("iai->a", dP) * fmpq(1, 1 - n)
    return RhoTensor(P_ab, fields.lift(n, P_a))


def normal_rho_alternative(n: int, proj: CurvatureComponents, S: np.ndarray, nabla0: PolyConnection) -> np.ndarray:
    """Second expression for P_ac via rhoS, rhoA of kappa0 and the torsion S."""
    S = fields.lift(n, S)
    Su = raise_last(S, n)
    dSu = _cov(nabla0, Su, (LO, LO, "u"))
    out = proj["rhoS"] * fmpq(n - 1, n) + proj["rhoA"] * fmpq(n + 1, n + 2)
    out = out - np.einsum("eace->ac", dSu) * fmpq(1, n + 2) - np.einsum("cef,afe->ac", Su, Su) * fmpq(1, n)
    return fields.lift(n, out)


def half_codiff_display(R0: np.ndarray, H: np.ndarray, nabla0: PolyConnection, P: RhoTensor) -> np.ndarray:
    """The printed matrix (1/2)(d* R~)_a, shape (n, n+2, n+2)."""
    n = nabla0.n
    N = n + 2
    J = standard_J_matrix(n)
    Pab = fields.lift(n, P.P_ab)
    Pa = fields.lift(n, P.P_a)
    Rup = raise_curvature(R0, n)
    ric = np.einsum("aici->ac", Rup)
    dP = raise_last(_cov(nabla0, Pab, (LO, LO)), n)
    M = fields.zeros(n, (n, N, N))
    M[:, 0, 1 : n + 1] += Pab.T - (n + 1) * Pab + ric
    M[:, 0, n + 1] += 2 * (1 - n) * Pa - 2 * np.einsum("iai->a", dP)
    M[:, 1 : n + 1, 1 : n + 1] += h_obstruction(fields.lift(n, H), n)
    # P^d_a = J^{de} P_ea, P_a^d = J^{de} P_ae, R_ai^{di} = J^{dc} R_aic^i
    M[:, 1 : n + 1, n + 1] += (
        np.einsum("de,ea->ad", J, Pab) - (n + 1) * raise_last(Pab, n) + raise_last(fields.lift(n, ric), n)
    )
    return fields.normalize(n, M)
