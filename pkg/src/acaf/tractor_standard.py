"""The standard tractor instance written out by hand.

A T-valued k-form is a triple (r, s, t): r_{a_1..a_k} of weight 1,
s_{a_1..a_k d} of weight -1 and t_{a_1..a_k} of weight -1, antisymmetric in
the a indices. The formulas below are transcribed directly; the module
converts to and from the generic engine so that both can be compared.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from flint import fmpq

from . import bgg_engine as engine
from . import exact, fields
from .connection_lab import PolyConnection, covariant_derivative
from .curvature_lab import jtrace, raise_curvature
from .tensor_core import LO, TensorError, WeightedTensor, standard_J_matrix, trace_free_projector

MODULE = "tractor"


def _perm_sign(p) -> int:
    sign = 1
    p = list(p)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


def antisymmetric_from_subsets(n: int, k: int, comps: dict, tail: int = 0) -> np.ndarray:
    """Full tensor from values on increasing k-tuples; ``tail`` extra trailing slots."""
    out = fields.zeros(n, (n,) * (k + tail))
    for S, v in comps.items():
        for perm in itertools.permutations(range(k)):
            idx = tuple(S[p] for p in perm)
            sg = _perm_sign(perm)
            out[idx] = v * sg if tail == 0 else fields.pack([c * sg for c in np.asarray(v).reshape(-1)], (n,) * tail)
    return out


def is_antisymmetric(T: np.ndarray, k: int) -> bool:
    for i in range(k - 1):
        perm = list(range(T.ndim))
        perm[i], perm[i + 1] = perm[i + 1], perm[i]
        if not fields.is_zero(T + T.transpose(perm)):
            return False
    return True


@dataclass(frozen=True, eq=False)
class TractorSection:
    """(r, s, t) as full polynomial tensors, antisymmetric in the first k slots."""

    n: int
    k: int
    r: np.ndarray
    s: np.ndarray
    t: np.ndarray

    def __post_init__(self) -> None:
        n, k = self.n, self.k
        for name, arr, rank in (("r", self.r, k), ("s", self.s, k + 1), ("t", self.t, k)):
            a = fields.lift(n, _arr(arr))
            if a.shape != (n,) * rank:
                raise TensorError(f"slot {name} must have shape {(n,) * rank}")
            if not is_antisymmetric(a, k):
                raise TensorError(f"slot {name} is not antisymmetric in its form indices")
            object.__setattr__(self, name, a)

    @classmethod
    def zero(cls, n: int, k: int) -> "TractorSection":
        return cls(n, k, fields.zeros(n, (n,) * k), fields.zeros(n, (n,) * (k + 1)), fields.zeros(n, (n,) * k))

    def __sub__(self, other: "TractorSection") -> "TractorSection":
        return TractorSection(self.n, self.k, self.r - other.r, self.s - other.s, self.t - other.t)

    def is_zero(self) -> bool:
        return fields.is_zero(self.r) and fields.is_zero(self.s) and fields.is_zero(self.t)

    def in_L(self) -> bool:
        """t totally trace-free."""
        if self.k < 2:
            return True
        return all(
            fields.is_zero(jtrace(self.t, i, j, self.n)) for i, j in itertools.combinations(range(self.k), 2)
        )

    def to_engine(self) -> engine.SectionForm:
        n, k = self.n, self.k
        sp = engine.build_form_space(k, MODULE, "L_V", n)
        out = []
        for S in sp.subsets:
            out.append(self.r[S])
            out.extend(self.s[S + (d,)] for d in range(n))
            out.append(self.t[S])
        return engine.SectionForm(sp, fields.pack(out))

    @classmethod
    def from_engine(cls, sf: engine.SectionForm) -> "TractorSection":
        sp = sf.space
        n, k, d = sp.n, sp.degree, sp.value_dim
        if sp.module != MODULE or d != n + 2:
            raise TensorError("not a standard tractor form space")
        r, s, t = {}, {}, {}
        for p, S in enumerate(sp.subsets):
            v = sf.coeffs[p * d : (p + 1) * d]
            r[S], s[S], t[S] = v[0], fields.pack(list(v[1 : n + 1])), v[n + 1]
        return cls(
            n,
            k,
            antisymmetric_from_subsets(n, k, r),
            antisymmetric_from_subsets(n, k, s, tail=1),
            antisymmetric_from_subsets(n, k, t),
        )


def random_section(n: int, k: int, degree: int, seed, in_L: bool = True, slots: str = "rst") -> TractorSection:
    """Random polynomial section; ``slots`` selects which of r, s, t are nonzero."""
    from .random_inputs import poly_array

    sp = engine.build_form_space(k, MODULE, "L_V", n)
    coeffs = poly_array(n, (sp.ambient_dim,), degree, seed, terms=2)
    keep = {"r": [0], "s": list(range(1, n + 1)), "t": [n + 1]}
    allowed = {u for name in slots for u in keep[name]}
    coeffs = fields.pack([c if (i % sp.value_dim) in allowed else c * 0 for i, c in enumerate(coeffs)])
    if in_L:
        coeffs = fields.linear_apply(sp.r0, coeffs, n)
    return TractorSection.from_engine(engine.SectionForm(sp, coeffs))


# ------------------------------------------------------------ operators


def _alt_derivative(nabla0: PolyConnection, X: np.ndarray, k: int, weight: int, tail: int) -> np.ndarray:
    """sum_i (-1)^(i+1) nabla_{a_i} X_{a_1..^a_i..a_{k+1}, tail}."""
    n = nabla0.n
    D = covariant_derivative(nabla0, WeightedTensor(n, (LO,) * (k + tail), weight, X)).components
    out = fields.zeros(n, (n,) * (k + 1 + tail))
    for i in range(k + 1):
        term = np.moveaxis(D, 0, i)
        out = out + term if i % 2 == 0 else out - term
    return out


def trace_free(T: np.ndarray, k: int, n: int) -> np.ndarray:
    """Totally trace-free part of an antisymmetric k-tensor (r0 on the bottom slot)."""
    if k < 2:
        return T
    if k > 4:
        raise TensorError("the hand-written trace-free projection is limited to k <= 4; use bgg_engine")
    P = exact.to_mat(trace_free_projector(n, k, tuple(range(k)), "antisym"))
    return fields.linear_apply(P, T, n).reshape((n,) * k)


def tractor_connection(nabla0: PolyConnection, sec: TractorSection) -> TractorSection:
    """nabla^T_a (r, s_d, t) = (nabla_a r, nabla_a s_d + J_ad r, nabla_a t + s_a), a degree-1 result."""
    if sec.k != 0:
        raise TensorError("the tractor connection acts on degree-0 sections")
    n = nabla0.n
    J = fields.lift(n, standard_J_matrix(n))
    r = covariant_derivative(nabla0, WeightedTensor(n, (), 1, sec.r)).components
    s = covariant_derivative(nabla0, WeightedTensor(n, (LO,), -1, sec.s)).components
    t = covariant_derivative(nabla0, WeightedTensor(n, (), -1, sec.t)).components
    rr = sec.r[()]
    s = s + fields.pack([J[a, d] * rr for a in range(n) for d in range(n)], (n, n))
    return TractorSection(n, 1, r, s, t + sec.s)


def tractor_dT(nabla0: PolyConnection, sec: TractorSection) -> TractorSection:
    """d^T on k-forms, transcribed slot by slot (r0 on the bottom slot)."""
    n, k = nabla0.n, sec.k
    J = fields.lift(n, standard_J_matrix(n))
    top = _alt_derivative(nabla0, sec.r, k, 1, 0)
    mid = _alt_derivative(nabla0, sec.s, k, -1, 1)
    bot = _alt_derivative(nabla0, sec.t, k, -1, 0)
    # J_{a_i d} r_{..^a_i..}: build E[a, A, d] = J_ad r_A and move a into place
    if k:
        E = fields.lift(n, np.einsum("ad,...->a...d", J, sec.r))
    else:
        E = fields.pack([J[a, d] * sec.r[()] for a in range(n) for d in range(n)], (n, n))
    for i in range(k + 1):
        term = np.moveaxis(E, 0, i)
        mid = mid + term if i % 2 == 0 else mid - term
    for i in range(k + 1):
        term = np.moveaxis(sec.s, -1, i)
        bot = bot + term if i % 2 == 0 else bot - term
    return TractorSection(n, k + 1, top, mid, trace_free(fields.normalize(n, bot), k + 1, n))


def _arr(x) -> np.ndarray:
    """Wrap a scalar einsum result as a 0-d object array."""
    if isinstance(x, np.ndarray):
        return x
    out = np.empty((), dtype=object)
    out[()] = x
    return out


def _mul(a: np.ndarray, c) -> np.ndarray:
    """Entrywise product that keeps 0-d arrays as arrays."""
    a = _arr(a)
    return fields.pack([v * c for v in a.reshape(-1)], a.shape)


def _add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = _arr(a), _arr(b)
    return fields.pack([u + v for u, v in zip(a.reshape(-1), b.reshape(-1))], a.shape)


def _jtr(T: np.ndarray, i: int, j: int, n: int) -> np.ndarray:
    return fields.lift(n, _arr(jtrace(T, i, j, n)))


def _trace_last_two(T: np.ndarray, n: int) -> np.ndarray:
    return _jtr(T, T.ndim - 2, T.ndim - 1, n)


def codiff0_display(sec: TractorSection) -> TractorSection:
    """(-1)^k k (s_{a_1..a_{k-1} i}^i, t_{a_1..a_{k-1} d}, 0)."""
    n, k = sec.n, sec.k
    if k == 0:
        raise TensorError("degree 0 has no codifferential")
    c = (-1) ** k * k
    r = _mul(_trace_last_two(sec.s, n), c)
    s = _mul(sec.t, c)
    return TractorSection(n, k - 1, r, s, fields.zeros(n, (n,) * (k - 1)))


def codiff0_squared_display(sec: TractorSection) -> TractorSection:
    """-k(k+1) (t_{a_1..a_{k-2} i}^i, 0, 0)."""
    n, k = sec.n, sec.k
    if k < 2:
        raise TensorError("needs degree >= 2")
    r = _mul(_trace_last_two(sec.t, n), -k * (k + 1))
    return TractorSection(n, k - 2, r, fields.zeros(n, (n,) * (k - 1)), fields.zeros(n, (n,) * (k - 2)))


def composite_display(nabla0: PolyConnection, sec: TractorSection) -> TractorSection:
    """The printed closed form of d* d^T on k-forms (two brackets, common factor (-1)^(k+1)(k+1)).

    Both middle-slot expressions are antisymmetric in (a_1..a_k, d); r0 there
    is the totally trace-free projection of that (k+1)-form.
    """
    n, k = nabla0.n, sec.k
    sgn = (-1) ** k
    # algebraic bracket
    top = _mul(sec.r, (n - k) * sgn)
    mid = fields.zeros(n, (n,) * (k + 1))
    # s_{a_1..^a_i..a_k d a_i}: output slot i reads the tractor slot of s, slot k the last form slot
    for i in range(k):
        axes = [m if m < i else m - 1 for m in range(k)] + [k - 1]
        axes[i] = k
        term = sec.s.transpose(axes)
        mid = mid + term if i % 2 == 0 else mid - term
    mid = mid + sec.s * sgn
    # derivative bracket
    Ds = covariant_derivative(nabla0, WeightedTensor(n, (LO,) * (k + 1), -1, sec.s)).components
    Dt = covariant_derivative(nabla0, WeightedTensor(n, (LO,) * k, -1, sec.t)).components
    top2 = fields.zeros(n, (n,) * k)
    if k >= 1:
        # sum_i (-1)^(i+1) nabla_{a_i} s_{a_1..^a_i..a_k d}^d
        base = _jtr(Ds, k, k + 1, n)  # [b, a_1..a_{k-1}]
        for i in range(k):
            term = np.moveaxis(base, 0, i)
            top2 = top2 + term if i % 2 == 0 else top2 - term
    # (-1)^k nabla_d s_{a_1..a_k}^d: contract derivative slot with the tractor slot
    top2 = _add(top2, _mul(_jtr(Ds, 0, k + 1, n), sgn))
    mid2 = fields.zeros(n, (n,) * (k + 1))
    # sum_i (-1)^(i+1) nabla_{a_i} t_{a_1..^a_i..a_k d}: derivative into slot i, d last
    if k >= 1:
        for i in range(k):
            # Dt[b, A'] with A' = (a_1..^a_i..a_k, d): put b at position i
            term = np.moveaxis(Dt, 0, i)
            mid2 = mid2 + term if i % 2 == 0 else mid2 - term
    # (-1)^k nabla_d t_{a_1..a_k}
    mid2 = mid2 + np.moveaxis(Dt, 0, -1) * sgn
    c = (-1) ** (k + 1) * (k + 1)
    return TractorSection(
        n,
        k,
        _mul(_add(top, top2), c),
        _mul(trace_free(fields.normalize(n, mid + mid2), k + 1, n), c),
        fields.zeros(n, (n,) * k),
    )


# --------------------------------------------------- printed n = 6 operators


def _laplacian_t(nabla0: PolyConnection, t) -> object:
    """nabla_i nabla^i t = J^{ig} nabla_i nabla_g t."""
    n = nabla0.n
    Dt = covariant_derivative(nabla0, WeightedTensor(n, (), -1, t)).components
    DDt = covariant_derivative(nabla0, WeightedTensor(n, (LO,), -1, Dt)).components
    return _jtr(DDt, 0, 1, n)[()], Dt, DDt


def L0_display(nabla0: PolyConnection, t) -> TractorSection:
    """(-1/6 nabla_i nabla^i t, -nabla_d t, t)."""
    n = nabla0.n
    t = _arr(t)
    lap, Dt, _ = _laplacian_t(nabla0, t)
    return TractorSection(n, 0, fields.pack([lap * fmpq(-1, 6)], ()), -Dt, t)


def B0_display(nabla0: PolyConnection, t) -> TractorSection:
    """-nabla_(a nabla_d) t in the middle slot."""
    n = nabla0.n
    _, _, DDt = _laplacian_t(nabla0, _arr(t))
    sym = (DDt + DDt.T) * fmpq(-1, 2)
    return TractorSection(n, 1, fields.zeros(n, (n,)), sym, fields.zeros(n, (n,)))


def _div_sym(nabla0: PolyConnection, s: np.ndarray) -> np.ndarray:
    """nabla_d (s_a^d + s^d_a) = J^{dg} nabla_d (s_{ag} + s_{ga})."""
    n = nabla0.n
    Ds = covariant_derivative(nabla0, WeightedTensor(n, (LO, LO), -1, s + s.T)).components
    # Ds[d, a, g]: contract d with g
    return _jtr(np.moveaxis(Ds, 0, 1), 1, 2, n)


def L1_display(nabla0: PolyConnection, s: np.ndarray) -> TractorSection:
    """(-1/10 nabla_d (s_a^d + s^d_a), s_(ad), 0) for symmetric s."""
    n = nabla0.n
    s = fields.lift(n, s)
    if not fields.is_zero(s - s.T):
        raise TensorError("L1 is printed for symmetric s")
    return TractorSection(n, 1, _div_sym(nabla0, s) * fmpq(-1, 10), s, fields.zeros(n, (n,)))


def B1_display(nabla0: PolyConnection, s: np.ndarray) -> np.ndarray:
    """The printed four-term expression, a tensor [a_1, a_2, d]."""
    n = nabla0.n
    s = fields.lift(n, s)
    J = fields.lift(n, standard_J_matrix(n))
    Ds = covariant_derivative(nabla0, WeightedTensor(n, (LO, LO), -1, s)).components
    div = _div_sym(nabla0, s) * fmpq(1, 10)
    out = Ds - Ds.transpose(1, 0, 2)
    out = out - np.einsum("ad,b->abd", J, div) + np.einsum("bd,a->abd", J, div)
    return fields.normalize(n, out)


def dT_squared_display(R0: np.ndarray, sec: TractorSection) -> TractorSection:
    """(0, sum_{i<j} (-1)^(i+j+1) R_{a_i a_j d}^e s_{a_1..^..^..a_k e}, 0) on k-forms."""
    n, k = sec.n, sec.k
    R = fields.lift(n, raise_curvature(R0, n))  # R[a, b, d, e] = R_abd^e
    RS = np.einsum("abde,...e->ab...d", R, sec.s)  # [a_i, a_j, rest..., d]
    mid = fields.zeros(n, (n,) * (k + 3))
    for i in range(k + 2):
        for j in range(i + 1, k + 2):
            # place slot 0 at position i and slot 1 at position j
            order = list(range(2, k + 2))
            perm = [None] * (k + 2)
            perm[i], perm[j] = 0, 1
            it = iter(order)
            for p in range(k + 2):
                if perm[p] is None:
                    perm[p] = next(it)
            term = RS.transpose(perm + [k + 2])
            # 1-based (i+1) + (j+1) + 1
            mid = mid + term if (i + j + 3) % 2 == 0 else mid - term
    return TractorSection(n, k + 2, fields.zeros(n, (n,) * (k + 2)), fields.normalize(n, mid), fields.zeros(n, (n,) * (k + 2)))


# ------------------------------------------------------- engine operators


def engine_dT(nabla0: PolyConnection, k: int) -> engine.SectionOperator:
    return engine.twisted_exterior_derivative(engine.build_form_space(k, MODULE, "L_V", nabla0.n), nabla0)


def apply_engine(op: engine.SectionOperator, sec: TractorSection) -> TractorSection:
    return TractorSection.from_engine(op(sec.to_engine()))


def engine_codiff0(sec: TractorSection) -> TractorSection:
    """d*_0 from the engine (no trace condition), as a section."""
    n, k = sec.n, sec.k
    op = engine.codifferential_zero(k, MODULE, n)
    src = engine.SectionForm(op.domain, sec.to_engine().coeffs)
    out = engine.apply_matrix(op.matrix, src, op.codomain)
    sp = engine.build_form_space(k - 1, MODULE, "L_V", n)
    return TractorSection.from_engine(engine.SectionForm(sp, out.coeffs))


def engine_codiff(sec: TractorSection) -> TractorSection:
    n, k = sec.n, sec.k
    op = engine.build_codifferential(k, MODULE, "L_V", n)
    return TractorSection.from_engine(engine.apply_matrix(op.matrix, sec.to_engine(), op.codomain))


def tractor_splitting(nabla0: PolyConnection, k: int) -> engine.SplittingOperator:
    return engine.splitting_operator(engine_dT(nabla0, k), k)


def tractor_bgg(nabla0: PolyConnection, k: int) -> engine.SectionOperator:
    return engine.bgg_operator(engine_dT(nabla0, k), k)


def harmonic_t(n: int, t) -> TractorSection:
    return TractorSection(n, 0, fields.zeros(n, ()), fields.zeros(n, (n,)), _arr(t))


def harmonic_s(n: int, s: np.ndarray) -> TractorSection:
    return TractorSection(n, 1, fields.zeros(n, (n,)), fields.lift(n, s), fields.zeros(n, (n,)))


def cohomology_diagram(n: int = 6) -> list[list[str]]:
    return engine.cohomology_diagram(MODULE, "L_V", n)


PRINTED_DIAGRAM = [["000"], ["200"], ["110", "100"], ["101", "010", "200"], ["110", "100"], ["200"], ["000"]]
