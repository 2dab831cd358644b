"""The acceptance suite: one report per criterion, shared by the tests and ``acaf selftest``.

Every check is an exact identity. Sub-checks that reproduce a printed
constant or display literally stay required even when they fail; informational
probes are marked ``required=False``.
"""

from __future__ import annotations

import random
from typing import Callable

import numpy as np
from flint import fmpq, fmpq_mat

from . import bgg_engine as B
from . import connection_lab as cl
from . import curvature_lab as cv
from . import exact, fields
from . import random_inputs as ri
from . import tractor_standard as T
from .report import Check, Report, compare, zero_check
from .tensor_core import LO, UP, WeightedTensor, adjust_index, delta, make_standard_J, raise_lower_roundtrip

N = 6


def _mat_check(name: str, M: fmpq_mat, note: str = "", required: bool = True) -> Check:
    nz = [M[i, j] for i in range(M.nrows()) for j in range(M.ncols()) if M[i, j] != 0]
    res = "0" if not nz else f"{len(nz)} nonzero entries, e.g. {exact.fmt(nz[0])}"
    return Check(name, not nz, res, note, required)


def _flag(name: str, ok: bool, detail: str = "", note: str = "", required: bool = True) -> Check:
    return Check(name, bool(ok), "0" if ok else (detail or "mismatch"), note, required)


def _section_check(name: str, a: T.TractorSection, b: T.TractorSection, note: str = "", required: bool = True) -> Check:
    diffs = [fields.normalize(a.n, getattr(a, s) - getattr(b, s)) for s in "rst"]
    bad = [s for s, d in zip("rst", diffs) if not fields.is_zero(d)]
    return _flag(name, not bad, "slots differ: " + ",".join(bad), note, required)


# ---------------------------------------------------------------- 1


def criterion_1() -> Report:
    rep = Report("sign and weight conventions")
    for n in (4, 6, 8):
        Jd = make_standard_J(n)
        prod = np.einsum("ab,bd->ad", Jd.J_lower.components, Jd.J_upper.components)
        rep.add(compare(f"n={n} J_ab J^bd = -delta_a^d", prod, -exact.qeye(n)))
        t = WeightedTensor(n, (LO, UP), 0, ri.rational_array((n, n), 10 + n))
        for pos in (0, 1):
            back = raise_lower_roundtrip(t, pos).components
            rep.add(compare(f"n={n} raise/lower round trip = -id (slot {pos})", back, -t.components))
        d = delta(n, (LO, UP))
        up_low = adjust_index(adjust_index(d, 0, "raise"), 1, "lower").components
        rep.add(
            compare(
                f"n={n} delta^d_a = -delta_a^d",
                up_low,
                -exact.qeye(n),
                "index-position swap of the Kronecker delta",
                required=False,
            )
        )
    return rep


# ---------------------------------------------------------------- 2


def criterion_2(samples: int = 20, n: int = N) -> Report:
    rep = Report("nabla0 pipeline")
    for seed in range(samples):
        D = ri.random_torsion_free(n, 2, seed)
        dec = cl.decompose_DJ(D)
        nab = cl.build_nabla0(D)
        rep.add(zero_check(f"seed {seed:02d} nabla0 J = 0", cl.nabla_J(nab)))
        tr = cl.torsion_traces(cl.torsion_of(nab), n)
        for k, v in tr.items():
            rep.add(zero_check(f"seed {seed:02d} torsion trace {k} = 0", v))
        sym = cl.check_dj_symmetries(n, dec)
        rep.add(_flag(f"seed {seed:02d} DJ component symmetries", all(sym.values()), str(sym)))
        U = ri.poly_array(n, (n,), 2, 1000 + seed)
        bar = cl.decompose_DJ(cl.transform_connection(D, "projective", upsilon=U))
        rep.add(compare(f"seed {seed:02d} alpha' = alpha + U/n", bar.alpha, dec.alpha + U * fmpq(1, n)))
        rep.add(compare(f"seed {seed:02d} beta' = beta + U", bar.beta, dec.beta + U))
    return rep


# ---------------------------------------------------------------- 3


def random_components(n: int, kind: str, seed) -> cv.CurvatureComponents:
    """Random rational components in every block of a decomposition kind."""
    rng = random.Random(seed)
    dec = cv.decomposer(n, kind)
    parts = {}
    for name, shape, basis in dec.blocks:
        c = fmpq_mat(basis.ncols(), 1, [ri.rational(rng) for _ in range(basis.ncols())])
        v = exact.from_mat(basis * c).reshape(-1)
        parts[name] = v[0] if shape == () else v.reshape(shape)
    return cv.CurvatureComponents(kind, n, parts)


def pipeline_data(n: int, seed, cf: bool = False, degree: int = 1):
    """(D, nabla0, H, S, R0) from a seeded torsion-free connection."""
    D = ri.random_cf(n, degree, seed) if cf else ri.random_torsion_free(n, degree, seed)
    dec = cl.decompose_DJ(D)
    nab = cl.build_nabla0(D)
    R0 = cv.lower_curvature(cv.curvature_of(nab), n)
    return D, nab, dec.H, dec.S, R0


def criterion_3(samples: int = 20, pipelines: int = 2, n: int = N) -> Report:
    rep = Report("curvature decompositions")
    for kind in ("projective", "acs"):
        for seed in range(samples):
            comp = random_components(n, kind, seed)
            back = cv.decompose_curvature(cv.synthesize(comp), kind)
            rep.add(_flag(f"{kind} round trip seed {seed:02d}", back.equals(comp)))
    for seed in range(pipelines):
        for cf in (False, True):
            _, nab, H, S, R0 = pipeline_data(n, 50 + seed, cf)
            tag = f"{'cf' if cf else 'genuine'} seed {seed}"
            for c in cv.verify_escur(R0, H, S, nab).checks:
                rep.add(Check(f"{tag}: {c.name}", c.passed, c.residual, c.note, c.required))
    return rep


# ---------------------------------------------------------------- 4


def _hodge_checks(rep: Report, i: int, module: str, flavor: str, n: int) -> None:
    h = B.hodge_decompose(i, module, flavor, n)
    dim = h.space.dim
    a, b, c = h.dims
    allb = B._hcat([h.im_codiff, h.harmonic, h.im_diff], dim)
    P = h.projection
    tag = f"{flavor} n={n} k={i}"
    rep.add(_flag(f"{tag} hodge dims add up", a + b + c == dim and B._rank(allb) == dim, f"{a}+{b}+{c} vs {dim}"))
    rep.add(_mat_check(f"{tag} pi^2 = pi", P * P - P))
    rep.add(_mat_check(f"{tag} pi = id on harmonic", P * h.harmonic - h.harmonic))
    rep.add(_mat_check(f"{tag} pi = 0 on Im d* + Im d", P * B._hcat([h.im_codiff, h.im_diff], dim)))


def criterion_4(ns: tuple[int, ...] = (6, 8), top: int = 4) -> Report:
    rep = Report("algebraic (co)differentials")
    for n in ns:
        for flavor in ("L_V", "L_V2"):
            for i in range(top + 1):
                d1 = B.build_differential(i, "tractor", flavor, n).on_L()
                d2 = B.build_differential(i + 1, "tractor", flavor, n).on_L()
                rep.add(_mat_check(f"{flavor} n={n} d d = 0 on degree {i}", d2 * d1))
                s1 = B.build_codifferential(i + 1, "tractor", flavor, n).on_L()
                s2 = B.build_codifferential(i + 2, "tractor", flavor, n).on_L()
                rep.add(_mat_check(f"{flavor} n={n} d* d* = 0 on degree {i + 2}", s1 * s2))
    for module in ("tractor", "adjoint"):
        for i in range(4):
            lhs = B.codifferential_zero(i + 1, module, N).matrix * B.codifferential_zero(i + 2, module, N).matrix
            rep.add(_mat_check(f"{module}: (d*_0)^2 = dtau(-(i+1)(i+2) corner) trace, i={i}", lhs - B.codiff0_squared_formula(i, module, N)))
    for k in (2, 3):
        sec = T.random_section(N, k, 1, 200 + k, in_L=False)
        rep.add(
            _section_check(
                f"tractor columns: (d*_0)^2 = -k(k+1) trace triple, k={k}",
                T.engine_codiff0(T.engine_codiff0(sec)),
                T.codiff0_squared_display(sec),
                "printed coefficient; the generic formula gives -k(k-1) in the source degree",
            )
        )
    for flavor in ("L_V", "L_V2"):
        for i in range(N + 1):
            _hodge_checks(rep, i, "tractor", flavor, N)
    return rep


# ---------------------------------------------------------------- 5


def criterion_5(n: int = N, samples: int = 2) -> Report:
    rep = Report("eigenvalues and splitting coefficients")
    for k in range(n):
        ev = B.slot_eigenvalues(k, "tractor", "L_V", n)
        want = [fmpq(-(k + 1) * (n - k))]
        rep.add(_flag(f"top slot eigenvalue k={k} = -(k+1)(n-k)", ev.get("r") == want, f"got {ev.get('r')}, want {want}"))
    for k in range(n // 2):
        ev = B.slot_eigenvalues(k, "tractor", "L_V", n)
        want = [fmpq(-(k + 1))]
        rep.add(_flag(f"middle slot eigenvalue k={k} = -(k+1)", ev.get("s") == want, f"got {ev.get('s')}, want {want}"))
    if n != 6:
        return rep
    conns = [("flat", cl.flat(n))] + [(f"curved seed {s}", pipeline_data(n, 70 + s)[1]) for s in range(samples)]
    for label, nab in conns:
        rng = random.Random(label)
        t = ri.poly(n, 3, rng, terms=4)
        L = T.TractorSection.from_engine(T.tractor_splitting(nab, 0)(T.harmonic_t(n, t).to_engine()))
        disp = T.L0_display(nab, t)
        rep.add(_section_check(f"{label}: L0 = (-1/6 lap t, -nabla t, t)", L, disp))
        rep.add(
            _flag(
                f"{label}: L0 top slot observable",
                not fields.is_zero(disp.r),
                "J^ig nabla_i nabla_g t = 0 for totally trace-free torsion",
                "informational: the -1/6 multiplies an identically vanishing term",
                required=False,
            )
        )
        s = ri.random_sym(n, rng.randint(0, 10**6), degree=2)
        L1 = T.TractorSection.from_engine(T.tractor_splitting(nab, 1)(T.harmonic_s(n, s).to_engine()))
        d1 = T.L1_display(nab, s)
        rep.add(_section_check(f"{label}: L1 = (-1/10 div(s + s^T), s, 0)", L1, d1))
        rep.add(_flag(f"{label}: L1 top slot observable", not fields.is_zero(d1.r), "divergence vanished", required=False))
    return rep


# ---------------------------------------------------------------- 6


def criterion_6(samples: int = 20, n: int = N) -> Report:
    rep = Report("BGG operators on the flat structure")
    flat = cl.flat(n)
    x = fields.coords(n)
    B0 = T.tractor_bgg(flat, 0)
    B1 = T.tractor_bgg(flat, 1)
    b = T.TractorSection.from_engine(B0(T.harmonic_t(n, x[0] * x[1]).to_engine()))
    want = fields.zeros(n, (n, n))
    want[0, 1] = want[1, 0] = fields.const(n, -1)
    rep.add(compare("B0(x1 x2) = -d_(a d_d) x1 x2", b.s, want))
    rep.add(_flag("B0(x1 x2): r and t slots vanish", fields.is_zero(b.r) and fields.is_zero(b.t)))
    rep.add(_flag("B0(const) = 0", T.TractorSection.from_engine(B0(T.harmonic_t(n, fields.const(n, 3)).to_engine())).is_zero()))
    rng = random.Random(6)
    for deg in (1, 2, 3, 4):
        t = ri.poly(n, deg, rng, terms=4)
        out = T.TractorSection.from_engine(B0(T.harmonic_t(n, t).to_engine()))
        rep.add(_section_check(f"B0 = -nabla_(a nabla_d) t, degree {deg}", out, T.B0_display(flat, t)))
    for seed in range(3):
        s = ri.random_sym(n, 600 + seed, degree=3)
        l1 = T.TractorSection.from_engine(T.tractor_splitting(flat, 1)(T.harmonic_s(n, s).to_engine()))
        mid = T.apply_engine(T.engine_dT(flat, 1), l1).s
        disp = T.B1_display(flat, s)
        rep.add(compare(f"B1 four-term display = middle of d^T L1 s, seed {seed}", mid, disp))
        h = T.harmonic_s(n, s).to_engine()
        full = T.TractorSection(n, 2, fields.zeros(n, (n, n)), disp, fields.zeros(n, (n, n)))
        rep.add(
            compare(
                f"B1 = pi(four-term display), seed {seed}",
                B1(h).coeffs,
                B.harmonic_projection(full.to_engine()).coeffs,
            )
        )
    for seed in range(samples):
        t = ri.poly(n, 1 + seed % 4, random.Random(700 + seed), terms=3)
        out = B1(B0(T.harmonic_t(n, t).to_engine()))
        rep.add(zero_check(f"B1 B0 = 0, seed {seed:02d}", out.coeffs))
        k = seed % 3
        sec = T.random_section(n, k, 2, 800 + seed)
        rep.add(_flag(f"(d^T)^2 = 0 flat, k={k}, seed {seed:02d}", T.tractor_dT(flat, T.tractor_dT(flat, sec)).is_zero()))
    for k in (3, 4):
        sec = T.random_section(n, k, 2, 850 + k)
        out = T.apply_engine(T.engine_dT(flat, k + 1), T.apply_engine(T.engine_dT(flat, k), sec))
        rep.add(_flag(f"(d^V)^2 = 0 flat, k={k}", out.is_zero()))
    return rep


# ---------------------------------------------------------------- 7


def criterion_7(samples: int = 10, n: int = N) -> Report:
    rep = Report("curvature obstruction")
    module = "tractor"
    zero_P = cl.zero_rho(n)
    for seed in range(samples):
        _, nab, H, S, R0 = pipeline_data(n, 900 + seed)
        Rt = cv.build_Rtilde(nab, H, S, R0, zero_P)
        w = B.weyl_data(nab, zero_P)
        csp = B.csp_curvature_coords(nab)
        for j in (0, 1):
            sp = B.build_form_space(j, module, "full_W", n)
            phi = ri.poly_array(n, (sp.ambient_dim,), 1, 950 + 10 * seed + j, terms=1)
            d2 = B.dW_full(w, module, j + 1, B.dW_full(w, module, j, phi))
            rhs = B.curvature_action(w, module, j, Rt.coords, phi, csp)
            rep.add(compare(f"seed {seed:02d} (d^W)^2 = Alt2(d^omega(-R~)), degree {j}", d2, rhs))
    for seed in range(max(1, samples // 5)):
        _, nab, H, S, R0 = pipeline_data(n, 990 + seed, cf=True)
        for k in (0, 1):
            sec = T.random_section(n, k, 1, 40 + k + 10 * seed)
            a = T.apply_engine(T.engine_dT(nab, k + 1), T.apply_engine(T.engine_dT(nab, k), sec))
            b = T.dT_squared_display(R0, sec)
            rep.add(_section_check(f"cf seed {seed} (d^T)^2 = (0, sum (-1)^(i+j+1) R s, 0), k={k}", a, b))
            rep.add(
                _flag(
                    f"cf seed {seed} (d^T)^2 is minus the display, k={k}",
                    fields.is_zero(a.s + b.s) and fields.is_zero(a.r) and fields.is_zero(a.t),
                    required=False,
                    note="informational: sign relation between engine and display",
                )
            )
    return rep


# ---------------------------------------------------------------- 8


def criterion_8(samples: int = 10, n: int = N) -> Report:
    rep = Report("normal Rho")
    seen_S = False
    for seed in range(samples):
        _, nab, H, S, R0 = pipeline_data(n, 1100 + seed, cf=True)
        seen_S = seen_S or not fields.is_zero(S)
        rep.add(zero_check(f"seed {seed:02d} H = 0", H))
        P = cv.normal_rho(R0, S, nab, H)
        rep.add(zero_check(f"seed {seed:02d} (1/2)(d* R~)_a = 0 for normal Rho", cv.half_codiff_display(R0, H, nab, P)))
    rep.add(
        _flag(
            "inputs with H = 0 and S != 0 exist",
            seen_S,
            "S vanishes identically for constant J on a flat chart",
            "the ACF class with S != 0 is empty in this setting",
        )
    )
    for seed in range(3):
        _, nab, H, S, R0 = pipeline_data(n, 1200 + seed)
        try:
            cv.normal_rho(R0, S, nab, H)
            rep.add(_flag(f"seed {seed} H != 0 obstruction reported", False, "no obstruction raised"))
        except cv.NormalizationObstruction as exc:
            rep.add(_flag(f"seed {seed} H != 0 obstruction reported", not fields.is_zero(exc.value)))
    return rep


# ---------------------------------------------------------------- 9


def criterion_9(samples: int = 20, n: int = N, degrees: tuple[int, ...] = (0, 1, 2, 3, 4)) -> Report:
    rep = Report("Ricci-type cancellation")
    for seed in range(samples):
        Theta = ri.random_sym(n, 1300 + seed)
        for j in degrees:
            for module in ("tractor",):
                rep.add(_mat_check(f"seed {seed:02d} degree {j}: Alt2(dtau(-2J Theta)) + 2J^ dtau + dtau 2J^ = 0", B.ricci_cancellation(n, module, j, Theta)))
    return rep


# ---------------------------------------------------------------- 10


def criterion_10(n: int = N) -> Report:
    rep = Report("cohomology diagram")
    diagram = []
    for i in range(n + 1):
        blocks = B.cohomology_blocks(i, "tractor", "L_V", n)
        diagram.append([b.name for b in blocks])
        for blk in blocks:
            rep.add(_flag(f"k={i} block {blk.name}: dim = Weyl dimension", blk.dim == blk.weyl_dim, f"{blk.dim} vs {blk.weyl_dim}"))
    counts = tuple(len(c) for c in diagram)
    rep.add(_flag("block counts = (1,1,2,3,2,1,1)", counts == (1, 1, 2, 3, 2, 1, 1), str(counts)))
    if n == 6:
        same = all(sorted(a) == sorted(b) for a, b in zip(diagram, T.PRINTED_DIAGRAM))
        rep.add(_flag("block labels per column match the printed weights", same, str(diagram)))
    ranks = [B._rank(B.build_codifferential(i, "tractor", "L_V", n).on_L()) if i > 0 else 0 for i in range(n + 1)] + [0]
    dims = [B.build_form_space(i, "tractor", "L_V", n).dim for i in range(n + 1)]
    harm = [dims[i] - ranks[i] - ranks[i + 1] for i in range(n + 1)]
    chi = sum((-1) ** i * h for i, h in enumerate(harm))
    forms, hodge = B.euler_characteristic("tractor", "L_V", n)
    rep.add(_flag("Euler characteristic from ranks = from forms = from Hodge", chi == forms == hodge, f"{chi}, {forms}, {hodge}"))
    rep.data["diagram"] = diagram
    rep.data["harmonic_dims"] = harm
    return rep


# ---------------------------------------------------------------- 11


def criterion_11(n: int = N, top: int = 3) -> Report:
    rep = Report("hand transcription against the engine")
    _, nab, _, _, _ = pipeline_data(n, 1400)
    for k in range(top + 1):
        sec = T.random_section(n, k, 2, 1500 + k)
        rep.add(_section_check(f"d^T = d^V, k={k}", T.tractor_dT(nab, sec), T.apply_engine(T.engine_dT(nab, k), sec)))
        if k >= 1:
            rep.add(_section_check(f"d*_0 = (-1)^k k triple, k={k}", T.codiff0_display(sec), T.engine_codiff0(sec)))
        if k < top:
            rep.add(
                _section_check(
                    f"d* d^T composite, k={k}",
                    T.composite_display(nab, sec),
                    T.engine_codiff(T.apply_engine(T.engine_dT(nab, k), sec)),
                )
            )
    sec0 = T.random_section(n, 0, 2, 1600)
    conn = T.tractor_connection(nab, sec0)
    rep.add(_section_check("nabla^T = d^T on degree 0", conn, T.tractor_dT(nab, sec0)))
    rng = random.Random(11)
    t = ri.poly(n, 3, rng, terms=4)
    rep.add(
        _section_check(
            "B0 display = engine B0",
            T.TractorSection.from_engine(T.tractor_bgg(nab, 0)(T.harmonic_t(n, t).to_engine())),
            T.B0_display(nab, t),
        )
    )
    return rep


CRITERIA: dict[int, tuple[str, Callable[[], Report]]] = {
    1: ("sign/weight suite", criterion_1),
    2: ("nabla0 pipeline", criterion_2),
    3: ("curvature decompositions", criterion_3),
    4: ("algebraic (co)differentials", criterion_4),
    5: ("eigenvalues and splitting coefficients", criterion_5),
    6: ("BGG formulas, flat", criterion_6),
    7: ("curvature obstruction", criterion_7),
    8: ("normal Rho", criterion_8),
    9: ("Ricci-type cancellation", criterion_9),
    10: ("cohomology diagram", criterion_10),
    11: ("double-entry check", criterion_11),
}


def run(which=None) -> dict[int, Report]:
    keys = sorted(CRITERIA) if which is None else sorted(which)
    return {k: CRITERIA[k][1]() for k in keys}
