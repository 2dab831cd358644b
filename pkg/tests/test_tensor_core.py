import numpy as np
import pytest
from flint import fmpq
from hypothesis import given
from hypothesis import strategies as st

from acaf import exact
from acaf.tensor_core import (
    LO,
    UP,
    TensorError,
    WeightedTensor,
    adjust_index,
    contract_trace,
    delta,
    make_standard_J,
    raise_lower_roundtrip,
    standard_J_matrix,
    symmetrize_project,
    tensor_product,
)

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=6).map(lambda f: fmpq(f.numerator, f.denominator))


def qarr(shape, data):
    return np.array([data.draw(rationals) for _ in range(int(np.prod(shape)))], dtype=object).reshape(shape)


def test_n2_block():
    assert standard_J_matrix(2).tolist() == [[0, 1], [-1, 0]]


def test_n6_entries():
    J = make_standard_J(6).J_lower.components
    assert J[0, 3] == 1 and J[3, 0] == -1
    assert all(J[i, i] == 0 for i in range(6))


@pytest.mark.parametrize("n", [4, 6, 8])
def test_skew_and_inverse(n):
    Jd = make_standard_J(n)
    J = Jd.J_lower.components
    assert exact.is_zero(J + J.T)
    assert exact.rank(J) == n
    prod = np.einsum("ab,bd->ad", J, Jd.J_upper.components)
    assert (prod == -exact.qeye(n)).all()
    assert Jd.J_lower.weight == -2 and Jd.J_upper.weight == 2


@pytest.mark.parametrize("n", [3, 5, 2, 0])
def test_rejects_bad_dimension(n):
    with pytest.raises(TensorError):
        make_standard_J(n)


def test_lower_e1():
    xi = WeightedTensor(6, (UP,), 0, exact.qarray([1, 0, 0, 0, 0, 0]))
    low = adjust_index(xi, 0, "lower")
    # direct matrix product: xi_b = xi^a J_ab
    oracle = exact.matmul(xi.components.reshape(1, 6), standard_J_matrix(6)).reshape(6)
    assert (low.components == oracle).all()
    assert [b for b in range(6) if low.components[b] != 0] == [3]
    assert low.weight == -2 and low.variance == (LO,)


def test_zero_tensor_weight_still_shifts():
    z = WeightedTensor(4, (LO,), 1, exact.qzeros(4))
    up = adjust_index(z, 0, "raise")
    assert up.is_zero() and up.weight == 3


def test_roundtrip_is_plus_identity():
    # with the literal contraction order the round trip returns the tensor itself
    t = WeightedTensor(6, (UP, LO), 0, exact.qarray(np.arange(36).reshape(6, 6)))
    assert raise_lower_roundtrip(t, 0).equals(t)
    assert raise_lower_roundtrip(t, 1).equals(t)


def test_delta_index_swap_sign():
    d = delta(6, (LO, UP))
    swapped = adjust_index(adjust_index(d, 0, "raise"), 1, "lower").components
    assert (swapped == -exact.qeye(6)).all()


def test_contract_delta():
    tr = contract_trace(delta(6, (UP, LO)), 0, 1)
    assert tr.components[()] == 6


@given(st.data())
def test_contract_product(data):
    xi = WeightedTensor(4, (UP,), 0, qarr((4,), data))
    ups = WeightedTensor(4, (LO,), 0, qarr((4,), data))
    c = contract_trace(tensor_product(xi, ups), 0, 1).components[()]
    assert c == sum(xi.components[i] * ups.components[i] for i in range(4))


@given(st.data())
def test_contract_rank3_loop(data):
    t = WeightedTensor(4, (UP, LO, LO), 0, qarr((4, 4, 4), data))
    out = contract_trace(t, 0, 2).components
    for b in range(4):
        assert out[b] == sum(t.components[i, b, i] for i in range(4))


def test_declared_symmetry_checked():
    with pytest.raises(TensorError):
        WeightedTensor(4, (LO, LO), 0, exact.qarray(np.arange(16).reshape(4, 4)), (((0, 1), "sym"),))


def test_antisymmetrize_symmetric_is_zero():
    a = exact.qarray(np.arange(16).reshape(4, 4))
    s = WeightedTensor(4, (LO, LO), 0, a + a.T)
    assert symmetrize_project(s, (0, 1), "antisym").is_zero()


@given(st.data(), st.sampled_from(["sym", "antisym"]))
def test_projector_idempotent(data, mode):
    t = WeightedTensor(4, (LO, LO, LO), 0, qarr((4, 4, 4), data))
    once = symmetrize_project(t, (0, 1, 2), mode)
    assert symmetrize_project(once, (0, 1, 2), mode).equals(once)


@given(st.data(), st.sampled_from(["sym", "antisym"]))
def test_trace_free(data, sym):
    t = WeightedTensor(4, (LO, LO, LO), 0, qarr((4, 4, 4), data))
    t = symmetrize_project(t, (0, 1, 2), sym)
    tf = symmetrize_project(t, (0, 1, 2), "trace_free", sym)
    J = standard_J_matrix(4)
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        assert exact.is_zero(np.einsum(np.moveaxis(tf.components, (i, j), (0, 1)), [0, 1, 2], J, [0, 1], [2]))
    assert symmetrize_project(tf, (0, 1, 2), "trace_free", sym).equals(tf)


def test_trace_free_needs_symmetry():
    t = WeightedTensor(4, (LO, LO), 0, exact.qzeros((4, 4)))
    with pytest.raises(TensorError):
        symmetrize_project(t, (0, 1), "trace_free")
