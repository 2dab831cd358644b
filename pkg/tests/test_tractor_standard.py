import random

import numpy as np
import pytest

from acaf import fields
from acaf import tractor_standard as T
from acaf.acceptance import pipeline_data
from acaf.connection_lab import flat
from acaf.random_inputs import poly, random_sym
from acaf.tensor_core import TensorError, standard_J_matrix

N = 6


@pytest.fixture(scope="module")
def nab():
    return pipeline_data(N, 1400)[1]


def scalar(p):
    return fields.pack([p], ())


def test_connection_on_r_slot():
    x = fields.coords(N)
    sec = T.TractorSection(N, 0, scalar(x[0]), fields.zeros(N, (N,)), scalar(fields.const(N, 0)))
    out = T.tractor_connection(flat(N), sec)
    J = standard_J_matrix(N)
    assert [out.r[a] for a in range(N)] == [1, 0, 0, 0, 0, 0]
    for a in range(N):
        for d in range(N):
            assert out.s[a, d] == x[0] * J[a, d]
    assert fields.is_zero(out.t)


def test_connection_on_s_and_t_slots():
    x = fields.coords(N)
    s = fields.zeros(N, (N,))
    s[2] = fields.const(N, 5)
    sec = T.TractorSection(N, 0, scalar(fields.const(N, 0)), s, scalar(x[1]))
    out = T.tractor_connection(flat(N), sec)
    assert fields.is_zero(out.r) and fields.is_zero(out.s)
    assert [out.t[a] for a in range(N)] == [0, 1, 5, 0, 0, 0]


def test_connection_needs_degree_zero():
    with pytest.raises(TensorError):
        T.tractor_connection(flat(N), T.TractorSection.zero(N, 1))


def test_section_shape_and_antisymmetry_checked():
    with pytest.raises(TensorError):
        T.TractorSection(N, 1, fields.zeros(N, (N, N)), fields.zeros(N, (N, N)), fields.zeros(N, (N,)))
    s = fields.lift(N, np.arange(N**3).reshape(N, N, N))
    with pytest.raises(TensorError):
        T.TractorSection(N, 2, fields.zeros(N, (N, N)), s, fields.zeros(N, (N, N)))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_engine_roundtrip(k):
    sec = T.random_section(N, k, 1, 30 + k)
    back = T.TractorSection.from_engine(sec.to_engine())
    assert (back - sec).is_zero()
    assert sec.in_L()


def test_connection_is_dT_in_degree_zero(nab):
    sec = T.random_section(N, 0, 2, 31)
    assert (T.tractor_connection(nab, sec) - T.tractor_dT(nab, sec)).is_zero()


@pytest.mark.parametrize("k", [0, 1, 2])
def test_hand_dT_matches_engine(nab, k):
    sec = T.random_section(N, k, 2, 40 + k)
    assert (T.tractor_dT(nab, sec) - T.apply_engine(T.engine_dT(nab, k), sec)).is_zero()


@pytest.mark.parametrize("k", [1, 2, 3])
def test_codiff0_display(k):
    sec = T.random_section(N, k, 1, 50 + k)
    assert (T.codiff0_display(sec) - T.engine_codiff0(sec)).is_zero()


@pytest.mark.parametrize("k", [0, 1])
def test_composite_display(nab, k):
    sec = T.random_section(N, k, 2, 60 + k)
    lhs = T.composite_display(nab, sec)
    rhs = T.engine_codiff(T.apply_engine(T.engine_dT(nab, k), sec))
    assert (lhs - rhs).is_zero()


def test_L0_and_B0_displays(nab):
    t = poly(N, 3, random.Random(1), terms=4)
    h = T.harmonic_t(N, t).to_engine()
    L = T.TractorSection.from_engine(T.tractor_splitting(nab, 0)(h))
    assert (L - T.L0_display(nab, t)).is_zero()
    b = T.TractorSection.from_engine(T.tractor_bgg(nab, 0)(h))
    assert (b - T.B0_display(nab, t)).is_zero()


def test_L1_display_flat():
    s = random_sym(N, 2, degree=2)
    L = T.TractorSection.from_engine(T.tractor_splitting(flat(N), 1)(T.harmonic_s(N, s).to_engine()))
    assert (L - T.L1_display(flat(N), s)).is_zero()


def test_B1_display_flat():
    s = random_sym(N, 3, degree=3)
    l1 = T.TractorSection.from_engine(T.tractor_splitting(flat(N), 1)(T.harmonic_s(N, s).to_engine()))
    mid = T.apply_engine(T.engine_dT(flat(N), 1), l1).s
    assert fields.is_zero(mid - T.B1_display(flat(N), s))


def test_B0_on_quadratic_example():
    x = fields.coords(N)
    b = T.B0_display(flat(N), x[0] * x[1])
    assert b.s[0, 1] == -1 and b.s[1, 0] == -1
    assert sum(1 for v in b.s.ravel() if v != 0) == 2


@pytest.mark.parametrize("k", [0, 1, 2])
def test_dT_squared_flat(k):
    sec = T.random_section(N, k, 2, 70 + k)
    assert T.tractor_dT(flat(N), T.tractor_dT(flat(N), sec)).is_zero()


def test_dT_squared_curved_only_middle_slot():
    _, nab, _, _, R0 = pipeline_data(N, 990, cf=True)
    sec = T.random_section(N, 0, 1, 40)
    out = T.apply_engine(T.engine_dT(nab, 1), T.apply_engine(T.engine_dT(nab, 0), sec))
    assert fields.is_zero(out.r) and fields.is_zero(out.t)
    assert not fields.is_zero(out.s)
    disp = T.dT_squared_display(R0, sec)
    assert fields.is_zero(disp.r) and fields.is_zero(disp.t)


def test_trace_free_limit():
    with pytest.raises(TensorError):
        T.trace_free(fields.zeros(N, (N,) * 5), 5, N)


def test_printed_diagram_shape():
    assert [len(c) for c in T.PRINTED_DIAGRAM] == [1, 1, 2, 3, 2, 1, 1]
    assert T.PRINTED_DIAGRAM[0] == T.PRINTED_DIAGRAM[-1] == ["000"]
