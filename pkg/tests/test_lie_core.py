import numpy as np
import pytest
from flint import fmpq
from hypothesis import given
from hypothesis import strategies as st

from acaf import exact
from acaf.lie_core import (
    adjoint_rep,
    ambient_form,
    build_algebra,
    check_homomorphism,
    commutator,
    density_action,
    density_rep,
    dual_pairing,
    in_sp,
    killing_form,
    normalized_pairing,
    p1_identification,
    rep_action,
    tractor_rep,
)


@pytest.fixture(scope="module")
def alg():
    return build_algebra(6)


def sp_dim(N):
    m = N // 2
    return m * (2 * m + 1)


@pytest.mark.parametrize("n", [6, 8])
def test_dimensions(n):
    a = build_algebra(n)
    assert a.dim == sp_dim(n + 2)
    dims = [len(a.indices(g)) for g in (-2, -1, 0, 1, 2)]
    assert dims == [1, n, sp_dim(n) + 1, n, 1]


@pytest.mark.parametrize("n", [4, 5, 2])
def test_rejects_small_or_odd(n):
    with pytest.raises(Exception):
        build_algebra(n)


def test_basis_in_algebra(alg):
    om = ambient_form(6)
    assert all(in_sp(b, om) for b in alg.basis)
    assert exact.rank(alg._flat_basis) == alg.dim


def test_coords_rejects_outside(alg):
    with pytest.raises(Exception):
        alg.coords(exact.qeye(8))


idx = st.integers(min_value=0, max_value=35)


@given(idx, idx, idx)
def test_jacobi(alg, i, j, k):
    B = alg.basis
    s = (
        commutator(B[i], commutator(B[j], B[k]))
        + commutator(B[j], commutator(B[k], B[i]))
        + commutator(B[k], commutator(B[i], B[j]))
    )
    assert exact.is_zero(s)


@given(idx, idx)
def test_grading_additive(alg, i, j):
    c = alg.coords(commutator(alg.basis[i], alg.basis[j]))
    g = alg.grading[i] + alg.grading[j]
    for k, ck in enumerate(c):
        if ck != 0:
            assert alg.grading[k] == g


def test_p1_brackets_into_p2(alg):
    C = alg.structure_constants
    for a in alg.idx_Z:
        for b in alg.idx_Z:
            nz = [k for k in range(alg.dim) if C[a, b, k] != 0]
            assert set(nz) <= {alg.idx_z}


@given(st.lists(st.tuples(idx, idx), min_size=1, max_size=5))
def test_representations_are_homomorphisms(alg, pairs):
    assert check_homomorphism(tractor_rep(alg), pairs)
    assert check_homomorphism(adjoint_rep(alg), pairs)


def test_rep_action_matches_matrix(alg):
    rep = tractor_rep(alg)
    X = alg.basis[5]
    v = exact.qarray([1, 2, 3, 4, 5, 6, 7, 8])
    assert (rep_action(rep, X, v) == rep.act(alg.coords(X), v)).all()


def test_density_weights(alg):
    # identity of csp(n) acts on R[w] by -w
    assert density_action(alg, exact.qeye(6), 1) == -1
    assert density_action(alg, exact.qeye(6) * 2, 3) == -6
    assert density_rep(alg, -2).matrices[alg.idx_E][0, 0] == -2


@given(idx, idx, idx)
def test_killing_invariant(alg, i, j, k):
    B = killing_form(6)
    C = alg.structure_constants
    lhs = sum(C[i, j, m] * B[m, k] for m in range(alg.dim))
    rhs = sum(C[j, k, m] * B[i, m] for m in range(alg.dim))
    assert lhs == rhs


def test_killing_trace_oracle(alg):
    # Killing form equals tr(ad X ad Y)
    B = killing_form(6)
    for i, j in [(0, 35), (3, 20), (7, 7), (alg.idx_x, alg.idx_z)]:
        tr = exact.matmul(alg.ad[i], alg.ad[j]).trace()
        assert B[i, j] == tr


def test_normalized_pairing_identity():
    assert (p1_identification(6) == exact.qeye(6)).all()
    assert normalized_pairing(6).shape == (36, 36)


def test_bracket_dual_proportional():
    bd = dual_pairing(6, "bracket_dual")
    assert bd.ratio != 0
    assert exact.is_zero(bd.g_minus - bd.killing_dual * bd.ratio)
