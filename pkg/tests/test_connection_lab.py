import numpy as np
from flint import fmpq
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acaf import fields
from acaf.connection_lab import (
    PolyConnection,
    RhoTensor,
    WeightedTensor,
    build_nabla0,
    check_dj_symmetries,
    class_member,
    covariant_derivative,
    decompose_DJ,
    flat,
    nabla_J,
    rho_transform,
    torsion_display,
    torsion_of,
    torsion_traces,
    transform_connection,
    zero_rho,
)
from acaf.random_inputs import random_symplectic_connection, random_torsion_free, rational_array
from acaf.tensor_core import LO, UP, TensorError, standard_J_matrix

N = 6
seeds = st.integers(min_value=0, max_value=10**6)


def test_flat_gradient_of_coordinate():
    x = fields.coords(N)
    f = WeightedTensor(N, (), 0, fields.pack([x[1]], ()))
    d = covariant_derivative(flat(N), f).components
    assert [fields.is_zero(d[a] - (1 if a == 1 else 0)) for a in range(N)] == [True] * N


def test_upper_lower_contraction_is_scalar_derivative():
    D = random_torsion_free(N, 1, 3)
    v = fields.lift(N, rational_array((N,), 1))
    w = fields.lift(N, rational_array((N,), 2))
    x = fields.coords(N)
    v = fields.scale(v, x[0])
    Dv = covariant_derivative(D, WeightedTensor(N, (UP,), 0, v)).components
    Dw = covariant_derivative(D, WeightedTensor(N, (LO,), 0, w)).components
    pair = sum(v[i] * w[i] for i in range(N))
    lhs = fields.grad(fields.pack([pair], ()), N)
    rhs = np.einsum("ai,i->a", Dv, w) + np.einsum("i,ai->a", v, Dw)
    assert fields.is_zero(lhs - rhs)


def test_declared_torsion_free_is_checked():
    g = fields.lift(N, rational_array((N, N, N), 5))
    with pytest.raises(TensorError):
        PolyConnection(N, g, True)


def test_flat_connection_preserves_J():
    assert fields.is_zero(nabla_J(flat(N)))


@given(seeds)
def test_symplectic_connection_has_zero_components(seed):
    dec = decompose_DJ(random_symplectic_connection(N, 1, seed))
    for part in (dec.alpha, dec.beta, dec.H, dec.S):
        assert fields.is_zero(part)


@given(seeds)
def test_decomposition_reconstructs(seed):
    D = random_torsion_free(N, 1, seed)
    dec = decompose_DJ(D)
    assert fields.is_zero(dec.reconstruct(N) - nabla_J(D))
    assert all(check_dj_symmetries(N, dec).values())


@given(seeds)
def test_projective_change_shifts_traces(seed):
    D = random_torsion_free(N, 1, seed)
    U = fields.lift(N, rational_array((N,), seed + 1))
    a, b = decompose_DJ(D), decompose_DJ(transform_connection(D, "projective", upsilon=U))
    assert fields.is_zero(b.beta - a.beta - U)
    # J has weight -2, so the density term adds 2(n+1)/n U_a J_bc to the -2 U_a J_bc
    assert fields.is_zero(b.alpha - a.alpha - U * fmpq(1, N))
    assert fields.is_zero(b.H - a.H) and fields.is_zero(b.S - a.S)


@given(seeds)
def test_class_member_has_requested_beta(seed):
    D = random_torsion_free(N, 1, seed)
    beta = fields.lift(N, rational_array((N,), seed + 2))
    assert fields.is_zero(decompose_DJ(class_member(D, beta)).beta - beta)


def test_weyl_changes_compose():
    D = random_torsion_free(N, 1, 4)
    b1, b2 = rational_array((N,), 7), rational_array((N,), 8)
    two = transform_connection(transform_connection(D, "weyl", beta=b1), "weyl", beta=b2)
    assert two.equals(transform_connection(D, "weyl", beta=b1 + b2))


@given(seeds)
def test_nabla0_properties(seed):
    D = random_torsion_free(N, 1, seed)
    nab = build_nabla0(D)
    assert fields.is_zero(nabla_J(nab))
    tr = torsion_traces(torsion_of(nab), N)
    assert all(fields.is_zero(v) for v in tr.values())
    U = fields.lift(N, rational_array((N,), seed + 3))
    assert build_nabla0(transform_connection(D, "projective", upsilon=U)).equals(nab)


def test_nabla0_of_symplectic_is_itself():
    D = random_symplectic_connection(N, 1, 11)
    assert build_nabla0(D).equals(D)


def test_nabla0_needs_torsion_free():
    D = flat(N) + rational_array((N, N, N), 9)
    with pytest.raises(TensorError):
        build_nabla0(D)


@given(seeds)
def test_torsion_display(seed):
    D = random_torsion_free(N, 1, seed)
    dec = decompose_DJ(D)
    s = rational_array((N,), seed + 4)
    beta = rational_array((N,), seed + 5)
    nb = transform_connection(D, "nabla_beta_s", s=s, beta=beta, decomposition=dec)
    assert fields.is_zero(torsion_of(nb) - torsion_display(N, s, beta, dec.H, dec.S))


def test_rho_transform_identity_and_density():
    P = zero_rho(N)
    zero = np.zeros(N, dtype=object)
    assert rho_transform(P, zero, 0, flat(N)).equals(P)
    x = fields.coords(N)
    y = x[2] * 3
    out = rho_transform(P, zero, y, flat(N))
    J = fields.lift(N, standard_J_matrix(N))
    assert fields.is_zero(out.P_ab - fields.scale(J, y))
    expect = fields.pack([fields.const(N, 3 if a == 2 else 0) for a in range(N)], (N,))
    assert fields.is_zero(out.P_a - expect)


def test_rho_transform_constant_U():
    U = rational_array((N,), 12)
    P = RhoTensor(fields.zeros(N, (N, N)), fields.zeros(N, (N,)))
    out = rho_transform(P, U, 0, flat(N))
    assert fields.is_zero(out.P_ab + fields.lift(N, np.multiply.outer(U, U)))
    assert fields.is_zero(out.P_a)
