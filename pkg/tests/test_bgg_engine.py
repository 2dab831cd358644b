import random

import pytest
from flint import fmpq, fmpq_mat
from hypothesis import given
from hypothesis import strategies as st

from acaf import bgg_engine as B
from acaf import fields
from acaf import tractor_standard as T
from acaf.connection_lab import build_nabla0, flat
from acaf.random_inputs import poly, random_sym, random_torsion_free

N = 6


def zero(M: fmpq_mat) -> bool:
    return all(M[r, c] == 0 for r in range(M.nrows()) for c in range(M.ncols()))


def test_subsets_and_sort_sign():
    assert len(B.subsets(7, 3)) == 35
    assert B.sort_sign((2, 0, 1)) == (1, (0, 1, 2))
    assert B.sort_sign((1, 0)) == (-1, (0, 1))


def test_form_space_dimensions():
    dims = [B.build_form_space(i, "tractor", "L_V", N).dim for i in range(N + 1)]
    assert dims == [8, 48, 119, 154, 105, 42, 7]


@pytest.mark.parametrize("flavor", ["L_V", "L_V2"])
@pytest.mark.parametrize("i", [0, 1, 2])
def test_complexes(flavor, i):
    d1 = B.build_differential(i, "tractor", flavor, N).on_L()
    d2 = B.build_differential(i + 1, "tractor", flavor, N).on_L()
    assert zero(d2 * d1)
    s1 = B.build_codifferential(i + 1, "tractor", flavor, N).on_L()
    s2 = B.build_codifferential(i + 2, "tractor", flavor, N).on_L()
    assert zero(s1 * s2)


def test_differential_raises_homogeneity_by_zero():
    assert B.build_differential(1, "tractor", "L_V", N).check_shift()


@pytest.mark.parametrize("module", ["tractor", "adjoint"])
@pytest.mark.parametrize("i", [0, 1])
def test_codiff0_squared(module, i):
    lhs = B.codifferential_zero(i + 1, module, N).matrix * B.codifferential_zero(i + 2, module, N).matrix
    assert zero(lhs - B.codiff0_squared_formula(i, module, N))


@pytest.mark.parametrize("i", [0, 1, 2, 3])
def test_hodge(i):
    h = B.hodge_decompose(i, "tractor", "L_V", N)
    a, b, c = h.dims
    assert a + b + c == h.space.dim
    P = h.projection
    assert zero(P * P - P)
    assert zero(P * h.harmonic - h.harmonic)
    assert zero(P * h.im_codiff) and zero(P * h.im_diff)


@pytest.mark.parametrize("k", range(N))
def test_top_slot_eigenvalues(k):
    assert B.slot_eigenvalues(k, "tractor", "L_V", N)["r"] == [fmpq(-(k + 1) * (N - k))]


def test_degree_zero_middle_eigenvalue():
    assert B.slot_eigenvalues(0, "tractor", "L_V", N)["s"] == [fmpq(-1)]


def test_laplacian_negative_definite_spectrum():
    for i in range(3):
        assert all(lam < 0 for lam in B.hodge_decompose(i, "tractor", "L_V", N).eigenvalues)


@pytest.mark.parametrize("k", [0, 1])
def test_dV_compressable(k):
    nab = build_nabla0(random_torsion_free(N, 1, 5))
    assert B.check_compressable(T.engine_dT(nab, k), k).compressable


def test_codifferential_not_compressable():
    op = B.algebraic_operator(B.build_codifferential(1, "tractor", "L_V", N))
    res = B.check_compressable(op, 1)
    assert not res.compressable and res.reason


def test_flat_B0_on_quadratic():
    x = fields.coords(N)
    b = T.TractorSection.from_engine(T.tractor_bgg(flat(N), 0)(T.harmonic_t(N, x[0] * x[1]).to_engine()))
    for a in range(N):
        for d in range(N):
            want = -1 if {a, d} == {0, 1} else 0
            assert b.s[a, d] == want
    assert fields.is_zero(b.r) and fields.is_zero(b.t)


@given(st.integers(min_value=0, max_value=10**6))
def test_flat_B1_B0_vanishes(seed):
    t = poly(N, 3, random.Random(seed), terms=3)
    B0, B1 = T.tractor_bgg(flat(N), 0), T.tractor_bgg(flat(N), 1)
    assert B1(B0(T.harmonic_t(N, t).to_engine())).is_zero()


def test_splitting_lands_in_kernel_of_codifferential():
    t = poly(N, 2, random.Random(3), terms=3)
    L = T.tractor_splitting(flat(N), 0)(T.harmonic_t(N, t).to_engine())
    assert T.engine_codiff(T.apply_engine(T.engine_dT(flat(N), 0), T.TractorSection.from_engine(L))).is_zero()


@pytest.mark.parametrize("j", [0, 1, 2])
def test_ricci_cancellation(j):
    assert zero(B.ricci_cancellation(N, "tractor", j, random_sym(N, 40 + j)))


@pytest.mark.parametrize(
    "labels,dim", [((1, 0, 0), 6), ((2, 0, 0), 21), ((0, 1, 0), 14), ((0, 0, 1), 14), ((1, 1, 0), 64), ((0, 0, 0), 1)]
)
def test_weyl_dimension(labels, dim):
    assert B.weyl_dimension(labels) == dim


def test_cohomology_blocks():
    counts = []
    for i in range(N + 1):
        blocks = B.cohomology_blocks(i, "tractor", "L_V", N)
        counts.append(len(blocks))
        assert all(b.dim == b.weyl_dim for b in blocks)
    assert counts == [1, 1, 2, 3, 2, 1, 1]
    forms, hodge = B.euler_characteristic("tractor", "L_V", N)
    assert forms == hodge
