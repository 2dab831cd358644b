import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acaf import fields
from acaf.acceptance import pipeline_data, random_components
from acaf.connection_lab import WeightedTensor, covariant_derivative, flat, zero_rho
from acaf.curvature_lab import (
    K_tensor,
    NormalizationObstruction,
    bianchi_defect,
    component_symmetries,
    curvature_of,
    decompose_curvature,
    lower_curvature,
    normal_rho,
    raise_curvature,
    ricci_type_R,
    synthesize,
    verify_escur,
)
from acaf.random_inputs import random_symplectic_connection, random_torsion_free, rational_array, symmetric
from acaf.tensor_core import LO, UP, TensorError

N = 6
seeds = st.integers(min_value=0, max_value=10**6)


def test_flat_curvature_vanishes():
    assert fields.is_zero(curvature_of(flat(N)))


@settings(max_examples=5)
@given(seeds)
def test_commutator_of_derivatives(seed):
    D = random_torsion_free(N, 1, seed)
    v = fields.lift(N, rational_array((N,), seed + 1))
    v = fields.pack([v[i] + fields.coords(N)[i] for i in range(N)], (N,))
    dv = covariant_derivative(D, WeightedTensor(N, (UP,), 0, v))
    ddv = covariant_derivative(D, dv).components
    comm = ddv - ddv.transpose(1, 0, 2)
    R = curvature_of(D)
    assert fields.is_zero(comm - np.einsum("abcd,c->abd", R, v))


@settings(max_examples=5)
@given(seeds)
def test_torsion_free_bianchi(seed):
    R = curvature_of(random_torsion_free(N, 1, seed))
    assert fields.is_zero(bianchi_defect(R))
    assert fields.is_zero(R + R.transpose(1, 0, 2, 3))


def test_lower_raise_roundtrip():
    R = curvature_of(random_torsion_free(N, 1, 2))
    assert fields.is_zero(raise_curvature(lower_curvature(R, N), N) - R)


@pytest.mark.parametrize("kind", ["projective", "acs"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_component_roundtrip(kind, seed):
    comp = random_components(N, kind, seed)
    back = decompose_curvature(synthesize(comp), kind)
    assert back.equals(comp)
    sym = component_symmetries(back)
    # the pair conditions listed for Z force Z = 0, so a nonzero Z violates them
    listed_z = {"Z_ab(cd)=0", "Z_abcd=-Z_cdab"}
    assert all(v for k, v in sym.items() if k not in listed_z)
    if kind == "projective":
        assert not fields.is_zero(back["Z"])
        assert not any(sym[k] for k in listed_z)


def test_symplectic_curvature_in_both_spaces():
    R = lower_curvature(curvature_of(random_symplectic_connection(N, 1, 4)), N)
    for kind in ("projective", "acs"):
        comp = decompose_curvature(R, kind)
        assert fields.is_zero(fields.normalize(N, synthesize(comp)) - R)


def test_generic_curvature_rejected_by_acs():
    R = lower_curvature(curvature_of(random_torsion_free(N, 1, 5)), N)
    with pytest.raises(TensorError):
        decompose_curvature(R, "acs")


def test_ricci_type():
    Theta = symmetric(rational_array((N, N), 3))
    R = ricci_type_R(Theta)
    assert R.shape == (N,) * 4
    assert fields.is_zero(R + R.transpose(1, 0, 2, 3))
    assert fields.is_zero(R - R.transpose(0, 1, 3, 2))
    comp = decompose_curvature(R, "acs")
    assert fields.is_zero(comp["U"]) and fields.is_zero(comp["V"])


def test_ricci_type_needs_symmetric():
    with pytest.raises(TensorError):
        ricci_type_R(rational_array((N, N), 3))


def test_K_vanishes_without_torsion():
    nab = random_symplectic_connection(N, 1, 6)
    z = fields.zeros(N, (N, N, N))
    assert fields.is_zero(K_tensor(z, z, nab))


@pytest.mark.parametrize("cf", [False, True])
def test_escur_required_checks(cf):
    _, nab, H, S, R0 = pipeline_data(N, 70, cf)
    rep = verify_escur(R0, H, S, nab)
    bad = [c.name for c in rep.checks if c.required and not c.passed]
    assert bad == []
    assert fields.is_zero(rep.data["kappa0"] + rep.data["K"] - R0)


def test_normal_rho_flat_is_zero():
    z = fields.zeros(N, (N, N, N))
    P = normal_rho(fields.zeros(N, (N,) * 4), z, flat(N))
    assert P.equals(zero_rho(N))


def test_normal_rho_obstruction():
    _, nab, H, S, R0 = pipeline_data(N, 71)
    assert not fields.is_zero(H)
    with pytest.raises(NormalizationObstruction) as err:
        normal_rho(R0, S, nab, H)
    assert not fields.is_zero(err.value.value)
