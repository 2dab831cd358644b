"""Command-line front end: load a problem, run one verification pipeline, emit a report.

Problem documents are YAML. Recognized keys::

    n: 6                 # even; >= 6 for curvature and BGG verbs
    degree: 4            # max polynomial degree of random test sections
    seed: 0
    mode: exact          # or float (eigenvalues only)
    gamma:               # Gamma_ab^d, sparse; omit for a seeded random connection
      - [[0, 1, 2], [[[1, 0, 0, 0, 0, 0], "1/2"], [[0, 0, 0, 0, 0, 0], 3]]]
    rho_ab: [...]        # optional, same sparse form with 2-index keys
    rho_a: [...]         # optional, 1-index keys
    theta: [...]         # optional symmetric Theta_ab (rational entries)
    H: [...]             # optional, compared against the values derived from gamma
    S: [...]

A polynomial is a list of [exponent vector, coefficient] pairs or a bare
rational; rationals are integers or "p/q" strings. ``gamma: []`` is the flat
connection.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml
from flint import fmpq

from . import acceptance
from . import bgg_engine as B
from . import connection_lab as cl
from . import curvature_lab as cv
from . import exact, fields
from . import random_inputs as ri
from . import tractor_standard as T
from .report import Check, Report, compare, zero_check
from .tensor_core import TensorError

SCHEMA_VERSION = 1
VERBS = ("decompose-conn", "nabla0", "curvature", "bgg-verify", "cohomology", "eigenvalues", "selftest")
FLOAT_TOL = 1e-9

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    """Malformed or invalid problem input; maps to exit status 2."""

    def __init__(self, message: str, field_name: str | None = None, line: int | None = None):
        where = []
        if field_name:
            where.append(f"field {field_name!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.field = field_name
        self.line = line


# ------------------------------------------------------------------ problems

_SPARSE = {"gamma": 3, "rho_ab": 2, "rho_a": 1, "theta": 2, "H": 3, "S": 3}
_KNOWN = {"n", "degree", "seed", "mode", "pipelines"} | set(_SPARSE)


@dataclass(frozen=True)
class ProblemSpec:
    n: int = 6
    degree: int = 4
    seed: int = 0
    mode: str = "exact"
    pipelines: tuple[str, ...] = ()
    sparse: dict = field(default_factory=dict)  # name -> {index tuple: {exponents: fmpq}}

    def has(self, name: str) -> bool:
        return name in self.sparse

    def dense(self, name: str) -> np.ndarray:
        """Dense polynomial array of a sparse input (zeros where unspecified)."""
        n = self.n
        out = fields.zeros(n, (n,) * _SPARSE[name])
        for idx, terms in self.sparse.get(name, {}).items():
            out[idx] = fields.from_terms(n, terms)
        return out

    def connection(self) -> cl.PolyConnection:
        """The input connection, or a seeded random torsion-free one when gamma is absent."""
        if not self.has("gamma"):
            return ri.random_torsion_free(self.n, min(self.degree, 2), self.seed)
        G = self.dense("gamma")
        return cl.PolyConnection(self.n, G, fields.is_zero(G - G.transpose(1, 0, 2)))

    def as_dict(self) -> dict:
        return {"n": self.n, "degree": self.degree, "seed": self.seed, "mode": self.mode, "inputs": sorted(self.sparse)}


def _rational(x, name: str) -> fmpq:
    try:
        if isinstance(x, bool) or isinstance(x, float):
            raise ValueError("floats are not exact")
        return exact.q(x)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise InputError(f"{x!r} is not an integer or p/q rational ({exc})", name) from None


def _poly(x, n: int, name: str) -> dict:
    if not isinstance(x, list):
        return {(0,) * n: _rational(x, name)}
    terms: dict = {}
    for pair in x:
        if not (isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], list)):
            raise InputError(f"polynomial term {pair!r} is not [exponents, coefficient]", name)
        exps, c = pair
        if len(exps) != n or not all(isinstance(e, int) and not isinstance(e, bool) for e in exps):
            raise InputError(f"exponent vector {exps!r} needs {n} integers", name)
        if any(e < 0 for e in exps):
            raise InputError(f"negative exponent in {exps!r}", name)
        key = tuple(exps)
        terms[key] = terms.get(key, fmpq(0)) + _rational(c, name)
    return {k: v for k, v in terms.items() if v != 0}


def _sparse(entries, n: int, name: str) -> dict:
    rank = _SPARSE[name]
    if entries is None:
        entries = []
    if not isinstance(entries, list):
        raise InputError("expected a list of [index, polynomial] pairs", name)
    out: dict = {}
    for e in entries:
        if not (isinstance(e, list) and len(e) == 2 and isinstance(e[0], list)):
            raise InputError(f"entry {e!r} is not [index, polynomial]", name)
        idx = e[0]
        if len(idx) != rank or not all(isinstance(i, int) and 0 <= i < n for i in idx):
            raise InputError(f"index {idx!r} needs {rank} integers in 0..{n - 1}", name)
        idx = tuple(idx)
        if idx in out:
            raise InputError(f"index {list(idx)} given twice", name)
        out[idx] = _poly(e[1], n, name)
    return out


def _check_n(n, minimum: int = 4) -> int:
    if isinstance(n, bool) or not isinstance(n, int) or n % 2 or n < minimum:
        raise InputError(f"n must be an even integer >= {minimum}, got {n!r}", "n")
    return n


def _line_of(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        if line.split("#")[0].strip().startswith(f"{key}:"):
            return i
    return None


def parse_problem(text: str) -> ProblemSpec:
    """Validate a problem document and fill in defaults."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise InputError(f"parse error: {getattr(exc, 'problem', exc)}", line=mark.line + 1 if mark else None) from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise InputError("the document must be a key/value mapping", line=1)
    unknown = sorted(set(doc) - _KNOWN)
    if unknown:
        raise InputError(f"unknown key(s) {unknown}", unknown[0], _line_of(text, unknown[0]))
    try:
        n = _check_n(doc.get("n", 6))
        degree = doc.get("degree", 4)
        if isinstance(degree, bool) or not isinstance(degree, int) or degree < 0:
            raise InputError(f"degree must be a non-negative integer, got {degree!r}", "degree")
        seed = doc.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise InputError(f"seed must be an integer, got {seed!r}", "seed")
        mode = doc.get("mode", "exact")
        if mode not in ("exact", "float"):
            raise InputError(f"mode must be exact or float, got {mode!r}", "mode")
        pipes = doc.get("pipelines", [])
        if not isinstance(pipes, list) or any(p not in VERBS for p in pipes):
            raise InputError(f"pipelines must list verbs from {list(VERBS)}", "pipelines")
        sparse = {k: _sparse(doc[k], n, k) for k in _SPARSE if k in doc}
    except InputError as exc:
        if exc.line is None and exc.field:
            exc = InputError(str(exc).split(": ", 1)[-1], exc.field, _line_of(text, exc.field))
        raise exc from None
    if "theta" in sparse:
        th = sparse["theta"]
        for (a, b), v in th.items():
            if th.get((b, a)) != v:
                raise InputError(f"theta is not symmetric at {[a, b]}", "theta", _line_of(text, "theta"))
            if any(sum(e) for e in v):
                raise InputError("theta entries must be constants", "theta", _line_of(text, "theta"))
    return ProblemSpec(n, degree, seed, mode, tuple(pipes), sparse)


def load_problem(source: str | os.PathLike) -> ProblemSpec:
    """Load from a file path or from inline document text."""
    if isinstance(source, os.PathLike) or (isinstance(source, str) and "\n" not in source and os.path.isfile(source)):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise InputError(f"cannot read {source}: {exc.strerror}") from None
    else:
        text = str(source)
    return parse_problem(text)


# ------------------------------------------------------------ serialization


def poly_terms(p) -> list:
    return [[list(e), exact.fmt(c)] for e, c in sorted(fields.terms(p).items())]


def sparse_tensor(arr: np.ndarray) -> list:
    out = []
    for idx in np.ndindex(arr.shape):
        v = arr[idx]
        if v != 0:
            out.append([list(idx), poly_terms(v) if isinstance(v, fields.PolyScalar) else exact.fmt(v)])
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return sparse_tensor(x)
    if isinstance(x, fmpq):
        return exact.fmt(x)
    if isinstance(x, fields.PolyScalar):
        return poly_terms(x)
    if isinstance(x, (bool, str)) or x is None:
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    return str(x)


def report_dict(rep: Report, verb: str = "", spec: ProblemSpec | None = None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "verb": verb,
        "problem": spec.as_dict() if spec else {},
        "title": rep.title,
        "passed": rep.passed,
        "checks": [
            {
                "name": c.name,
                "status": "pass" if c.passed else "fail",
                "required": c.required,
                "residual": c.residual,
                "note": c.note,
            }
            for c in sorted(rep.checks, key=lambda c: c.name)
        ],
        "data": _jsonable(rep.data),
    }


def emit_report(rep: Report, fmt: str = "text", verb: str = "", spec: ProblemSpec | None = None, elapsed: float | None = None) -> str:
    d = report_dict(rep, verb, spec)
    if fmt == "json":
        return json.dumps(d, indent=2, sort_keys=True) + "\n"
    lines = [f"{rep.title or verb}: {'PASS' if rep.passed else 'FAIL'}"]
    if elapsed is not None:
        lines[0] += f"  ({elapsed:.1f}s)"
    if d["checks"]:
        w = max(len(c["name"]) for c in d["checks"])
        for c in d["checks"]:
            flag = c["status"].upper() + ("" if c["required"] else " (info)")
            row = f"  {c['name']:<{w}}  {flag:<11}"
            if c["status"] == "fail":
                row += f"  {c['residual']}"
            lines.append(row.rstrip())
    for k, v in sorted(d["data"].items()):
        if isinstance(v, (str, int, bool)) or v is None:
            lines.append(f"  {k}: {v}")
        elif k == "table":
            lines.extend(f"  {r}" for r in v)
        elif isinstance(v, (list, dict)) and len(str(v)) < 200:
            lines.append(f"  {k}: {v}")
    return "\n".join(lines) + "\n"


def load_report(text: str) -> Report:
    """Parse a JSON report back (checks and data; data stays in serialized form)."""
    d = json.loads(text)
    if d.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"unsupported schema_version {d.get('schema_version')!r}", "schema_version")
    rep = Report(d.get("title", ""), data=d.get("data", {}))
    for c in d.get("checks", []):
        rep.add(Check(c["name"], c["status"] == "pass", c["residual"], c.get("note", ""), c.get("required", True)))
    return rep


# -------------------------------------------------------------------- verbs


def _needs(spec: ProblemSpec, minimum: int, verb: str) -> None:
    if spec.n < minimum:
        raise InputError(f"{verb} needs n >= {minimum}, got {spec.n}", "n")


def _torsion_free(spec: ProblemSpec) -> cl.PolyConnection:
    D = spec.connection()
    if not D.torsion_free:
        raise InputError("the connection must be torsion-free (Gamma_ab^d = Gamma_ba^d)", "gamma")
    return D


def _input_matches(rep: Report, spec: ProblemSpec, name: str, derived: np.ndarray) -> None:
    if spec.has(name):
        rep.add(compare(f"input {name} = derived {name}", spec.dense(name), derived))


def verb_decompose_conn(spec: ProblemSpec) -> Report:
    D = _torsion_free(spec)
    n = spec.n
    rep = Report("decompose-conn")
    dec = cl.decompose_DJ(D)
    DJ = cl.nabla_J(D)
    rep.add(compare("DJ = alpha, beta, H, S reassembled", DJ, dec.reconstruct(n)))
    for k, ok in cl.check_dj_symmetries(n, dec).items():
        rep.add(Check(k, ok, "0" if ok else "violated"))
    _input_matches(rep, spec, "H", dec.H)
    _input_matches(rep, spec, "S", dec.S)
    rep.data = {"alpha": dec.alpha, "beta": dec.beta, "H": dec.H, "S": dec.S}
    return rep


def verb_nabla0(spec: ProblemSpec) -> Report:
    D = _torsion_free(spec)
    n = spec.n
    rep = Report("nabla0")
    nab = cl.build_nabla0(D)
    rep.add(zero_check("nabla0 J = 0", cl.nabla_J(nab)))
    for k, v in cl.torsion_traces(cl.torsion_of(nab), n).items():
        rep.add(zero_check(f"torsion trace {k} = 0", v))
    rep.data = {"equals_input": nab.equals(D), "gamma": nab.gamma, "torsion_zero": fields.is_zero(cl.torsion_of(nab))}
    return rep


def verb_curvature(spec: ProblemSpec) -> Report:
    _needs(spec, 6, "curvature")
    D = _torsion_free(spec)
    n = spec.n
    dec = cl.decompose_DJ(D)
    nab = cl.build_nabla0(D)
    R0 = cv.lower_curvature(cv.curvature_of(nab), n)
    rep = cv.verify_escur(R0, dec.H, dec.S, nab)
    rep.title = "curvature"
    _input_matches(rep, spec, "H", dec.H)
    _input_matches(rep, spec, "S", dec.S)
    data = {"flat": fields.is_zero(R0), "H_zero": fields.is_zero(dec.H), "S_zero": fields.is_zero(dec.S)}
    if fields.is_zero(dec.H):
        P = cv.normal_rho(R0, dec.S, nab, dec.H)
        rep.add(zero_check("(1/2)(d* R~)_a = 0 for normal Rho", cv.half_codiff_display(R0, dec.H, nab, P)))
    else:
        try:
            cv.normal_rho(R0, dec.S, nab, dec.H)
            rep.add(Check("H != 0 obstruction reported", False, "no obstruction raised"))
        except cv.NormalizationObstruction as exc:
            rep.add(Check("H != 0 obstruction reported", not fields.is_zero(exc.value)))
    if spec.has("rho_ab") or spec.has("rho_a"):
        P = cl.RhoTensor(spec.dense("rho_ab"), spec.dense("rho_a"))
        val = cv.half_codiff_display(R0, dec.H, nab, P)
        rep.add(zero_check("(1/2)(d* R~)_a = 0 for the input Rho", val, "informational", required=False))
    if spec.has("theta"):
        Th = np.vectorize(lambda p: fields.terms(p).get((0,) * n, fmpq(0)), otypes=[object])(spec.dense("theta"))
        for j in range(3):
            M = B.ricci_cancellation(n, "tractor", j, Th)
            rep.add(acceptance._mat_check(f"Ricci-type cancellation on degree {j}", M))
    rep.data = data
    return rep


def verb_bgg_verify(spec: ProblemSpec, samples: int = 4) -> Report:
    _needs(spec, 6, "bgg-verify")
    D = _torsion_free(spec)
    n = spec.n
    nab = cl.build_nabla0(D)
    R0 = cv.curvature_of(nab)
    flat = fields.is_zero(R0) and fields.is_zero(cl.torsion_of(nab))
    rep = Report("bgg-verify")
    for k in (0, 1):
        res = B.check_compressable(T.engine_dT(nab, k), k)
        rep.add(Check(f"d^V compressable on degree {k}", res.compressable, "0" if res.compressable else res.reason))
    B0, B1 = T.tractor_bgg(nab, 0), T.tractor_bgg(nab, 1)
    rng = random.Random(spec.seed)
    note = "" if flat else "informational: curved structure"
    for i in range(samples):
        t = ri.poly(n, max(1, min(spec.degree, 1 + i)), rng, terms=3)
        out = B1(B0(T.harmonic_t(n, t).to_engine()))
        rep.add(zero_check(f"B1 B0 = 0, sample {i}", out.coeffs, note, required=flat))
    for k in (0, 1):
        sec = T.random_section(n, k, min(spec.degree, 2), spec.seed * 100 + k)
        hand = T.tractor_dT(nab, sec)
        rep.add(acceptance._section_check(f"hand d^T = engine d^V on degree {k}", hand, T.apply_engine(T.engine_dT(nab, k), sec)))
        sq = T.tractor_dT(nab, hand) if k + 2 <= 4 else None
        if sq is not None:
            rep.add(Check(f"(d^T)^2 = 0 on degree {k}", sq.is_zero(), "0" if sq.is_zero() else "nonzero", note, flat))
    if n == 6:
        t = ri.poly(n, max(1, spec.degree), rng, terms=4)
        h = T.harmonic_t(n, t).to_engine()
        rep.add(acceptance._section_check("L0 = (-1/6 lap t, -nabla t, t)", T.TractorSection.from_engine(T.tractor_splitting(nab, 0)(h)), T.L0_display(nab, t)))
        rep.add(acceptance._section_check("B0 = -nabla_(a nabla_d) t", T.TractorSection.from_engine(B0(h)), T.B0_display(nab, t)))
        s = ri.random_sym(n, spec.seed, degree=max(1, min(spec.degree, 3)))
        hs = T.harmonic_s(n, s).to_engine()
        L1 = T.TractorSection.from_engine(T.tractor_splitting(nab, 1)(hs))
        rep.add(acceptance._section_check("L1 = (-1/10 div(s + s^T), s, 0)", L1, T.L1_display(nab, s)))
        disp = T.B1_display(nab, s)
        rep.add(compare("B1 four-term display = middle of d^T L1 s", T.apply_engine(T.engine_dT(nab, 1), L1).s, disp))
    rep.data = {"flat": flat, "samples": samples}
    return rep


def verb_cohomology(spec: ProblemSpec) -> Report:
    _needs(spec, 6, "cohomology")
    rep = acceptance.criterion_10(spec.n)
    rep.title = "cohomology"
    return rep


def verb_eigenvalues(spec: ProblemSpec) -> Report:
    _needs(spec, 6, "eigenvalues")
    n = spec.n
    rep = Report("eigenvalues")
    table = []
    for k in range(n):
        if spec.mode == "float":
            M = B._np(B.laplacian_on_image(k, "tractor", "L_V", n)).astype(float)
            vals = sorted({round(float(v.real), 6) for v in np.linalg.eigvals(M)}) if M.size else []
            top_ok = any(abs(v + (k + 1) * (n - k)) < FLOAT_TOL for v in vals)
            rep.add(Check(f"top slot eigenvalue k={k} = -(k+1)(n-k)", top_ok, "0" if top_ok else str(vals)))
            if k < n // 2:
                mid_ok = any(abs(v + (k + 1)) < FLOAT_TOL for v in vals)
                rep.add(Check(f"middle slot eigenvalue k={k} = -(k+1)", mid_ok, "0" if mid_ok else str(vals)))
            table.append(f"k={k} eigenvalues {vals}")
            continue
        ev = B.slot_eigenvalues(k, "tractor", "L_V", n)
        for slot in sorted(ev):
            table.append(f"k={k} slot {slot}: " + ", ".join(exact.fmt(v) for v in ev[slot]))
        want = [fmpq(-(k + 1) * (n - k))]
        rep.add(Check(f"top slot eigenvalue k={k} = -(k+1)(n-k)", ev.get("r") == want, "0" if ev.get("r") == want else f"got {ev.get('r')}"))
        if k < n // 2:
            want = [fmpq(-(k + 1))]
            got = ev.get("s")
            rep.add(Check(f"middle slot eigenvalue k={k} = -(k+1)", got == want, "0" if got == want else f"got {[exact.fmt(v) for v in got or []]}"))
    rep.data = {"table": table}
    return rep


def verb_selftest(spec: ProblemSpec, only: list[int] | None = None) -> Report:
    rep = Report("selftest")
    summary = {}
    for k, sub in acceptance.run(only).items():
        name = acceptance.CRITERIA[k][0]
        summary[f"{k:02d}"] = "PASS" if sub.passed else "FAIL"
        for c in sub.checks:
            rep.add(Check(f"criterion {k:02d} ({name}): {c.name}", c.passed, c.residual, c.note, c.required))
    rep.data = {"criteria": summary}
    return rep


def run_command(verb: str, spec: ProblemSpec, **kw) -> Report:
    """Dispatch a verb. Structural errors inside a pipeline become a failed check."""
    table = {
        "decompose-conn": verb_decompose_conn,
        "nabla0": verb_nabla0,
        "curvature": verb_curvature,
        "bgg-verify": verb_bgg_verify,
        "cohomology": verb_cohomology,
        "eigenvalues": verb_eigenvalues,
        "selftest": verb_selftest,
    }
    if verb not in table:
        raise InputError(f"unknown verb {verb!r}; choose from {list(VERBS)}")
    if spec.mode == "float" and verb != "eigenvalues":
        raise InputError("float mode is only available for the eigenvalues verb", "mode")
    try:
        return table[verb](spec, **kw)
    except InputError:
        raise
    except (TensorError, ArithmeticError, ValueError) as exc:
        rep = Report(verb)
        rep.add(Check(f"{verb} completed", False, f"{type(exc).__name__}: {exc}"))
        return rep


# ---------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acaf", description="Exact verification pipelines for ACAF structures.")
    p.add_argument("verb", choices=VERBS)
    p.add_argument("problem", nargs="?", help="problem document (YAML); defaults apply when omitted")
    p.add_argument("--n", type=int)
    p.add_argument("--degree", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("exact", "float"))
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--flat", action="store_true", help="use the flat connection instead of a random one")
    p.add_argument("--criteria", help="selftest only: comma-separated criterion numbers")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_problem(args.problem) if args.problem else ProblemSpec()
        over = {k: getattr(args, k) for k in ("n", "degree", "seed", "mode") if getattr(args, k) is not None}
        if over:
            base = {"n": spec.n, "degree": spec.degree, "seed": spec.seed, "mode": spec.mode, "pipelines": list(spec.pipelines)}
            spec = parse_problem(yaml.safe_dump({**base, **over, **_sparse_doc(spec)}))
        if args.flat:
            spec = replace(spec, sparse={**spec.sparse, "gamma": {}})
        kw = {}
        if args.criteria:
            if args.verb != "selftest":
                raise InputError("--criteria applies to selftest only")
            try:
                kw["only"] = [int(c) for c in args.criteria.split(",")]
            except ValueError:
                raise InputError(f"bad criterion list {args.criteria!r}") from None
            if any(c not in acceptance.CRITERIA for c in kw["only"]):
                raise InputError(f"criteria are numbered 1..{len(acceptance.CRITERIA)}")
        t0 = time.perf_counter()
        rep = run_command(args.verb, spec, **kw)
        elapsed = time.perf_counter() - t0
    except InputError as exc:
        print(f"acaf: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = emit_report(rep, args.format, args.verb, spec, None if args.format == "json" else elapsed)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _sparse_doc(spec: ProblemSpec) -> dict:
    """Sparse inputs back in document form (for re-validation after flag overrides)."""
    out = {}
    for name, entries in spec.sparse.items():
        out[name] = [[list(idx), [[list(e), exact.fmt(c)] for e, c in sorted(terms.items())]] for idx, terms in sorted(entries.items())]
    return out


if __name__ == "__main__":
    sys.exit(main())
