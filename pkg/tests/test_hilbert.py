import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jcberry.errors import DimensionMismatch, NonPhysicalState, TruncationError, UnknownLabel
from jcberry.hilbert import (
    AtomSpace,
    FockSpace,
    System,
    annihilation,
    atomic_operator,
    basis_ket,
    check_density_matrix,
    coherent_overlap,
    coherent_state,
    coherent_tail_norm,
    creation,
    density,
    displaced_number_state,
    displacement,
    fock_dim_for,
    fock_state,
    number,
    operator_from_csv,
    operator_to_csv,
    state_from_csv,
    state_to_csv,
    tensor,
)

from conftest import random_density

small_complex = st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False)


def test_annihilation_dim3():
    a = annihilation(FockSpace(3))
    expected = np.zeros((3, 3))
    expected[0, 1] = 1
    expected[1, 2] = math.sqrt(2)
    assert np.array_equal(a, expected)


@given(st.integers(2, 40))
def test_ladder_algebra_exact(dim):
    a = annihilation(FockSpace(dim))
    for n in range(1, dim):
        assert a[n - 1, n] == math.sqrt(n)
    assert np.count_nonzero(a) == dim - 1
    comm = a @ a.conj().T - a.conj().T @ a
    assert np.allclose(comm[: dim - 1, : dim - 1], np.eye(dim - 1), atol=1e-12)


def test_vacuum_annihilated(fock16):
    assert np.all(annihilation(fock16) @ fock_state(0, fock16) == 0)


def test_number_is_adag_a(fock16):
    a = annihilation(fock16)
    assert np.allclose(creation(fock16) @ a, number(fock16))


def test_fock_space_minimum_dim():
    with pytest.raises(ValueError):
        FockSpace(1)


def test_coherent_vacuum(fock16):
    assert np.allclose(coherent_state(0, fock16), fock_state(0, fock16))


@settings(max_examples=30)
@given(small_complex, small_complex)
def test_coherent_overlap_matches_analytic(a, b):
    f = FockSpace(32)
    num = np.vdot(coherent_state(b, f), coherent_state(a, f))
    assert abs(num - coherent_overlap(b, a)) < 1e-8


def test_coherent_mean_photon_number(fock32):
    psi = coherent_state(1 / math.sqrt(2), fock32)
    assert abs(np.vdot(psi, number(fock32) @ psi).real - 0.5) < 1e-8


@settings(max_examples=30)
@given(small_complex)
def test_coherent_is_annihilation_eigenstate(a):
    f = FockSpace(40)
    psi, tail = coherent_state(a, f, return_tail=True)
    assert tail < 1e-10
    assert abs(np.vdot(psi, annihilation(f) @ psi) - a) < 1e-8


def test_truncation_error_and_override():
    f = FockSpace(6)
    with pytest.raises(TruncationError):
        coherent_state(2.0, f)
    psi, tail = coherent_state(2.0, f, tail_budget=1.0, return_tail=True)
    assert tail > 1e-8 and abs(np.linalg.norm(psi) - 1) < 1e-12


def test_default_truncation_rule_meets_budget():
    for a in (0.1, 1 / math.sqrt(2), 1.0, 2.0, 4.0):
        assert coherent_tail_norm(a, fock_dim_for(a)) < 1e-8
    assert fock_dim_for(1 / math.sqrt(2)) == 15
    assert fock_dim_for(1.0, n_max=2) == fock_dim_for(1.0) + 2


def test_displacement_identity_and_inverse(fock32):
    assert np.allclose(displacement(0, fock32), np.eye(32))
    D = displacement(0.7 - 0.4j, fock32) @ displacement(-0.7 + 0.4j, fock32)
    assert np.max(np.abs(D - np.eye(32))[:16, :16]) < 1e-8


def test_displacement_vacuum(fock32):
    a = 0.6 + 0.3j
    assert abs(displacement(a, fock32)[0, 0] - math.exp(-abs(a) ** 2 / 2)) < 1e-8
    assert np.allclose(displacement(a, fock32)[:, 0], coherent_state(a, fock32), atol=1e-8)


@settings(max_examples=25)
@given(small_complex, small_complex)
def test_displacement_composition(a, b):
    f = FockSpace(40)
    lhs = displacement(a, f) @ displacement(b, f)
    rhs = np.exp(1j * (a * np.conj(b)).imag) * displacement(a + b, f)
    assert np.max(np.abs(lhs - rhs)[:20, :20]) < 1e-7


def test_displaced_number_state_normalized(fock32):
    psi = displaced_number_state(-0.7, 2, fock32)
    assert abs(np.linalg.norm(psi) - 1) < 1e-10
    assert abs(np.vdot(psi, number(fock32) @ psi).real - (0.49 + 2)) < 1e-8


def test_atomic_operator_definitions():
    atom = AtomSpace()
    g, e, f = (basis_ket(atom, l) for l in "gef")
    sm = atomic_operator("sigma_minus", atom)
    assert np.allclose(sm @ e, g)
    assert np.allclose(sm @ f, 0)
    assert np.allclose(atomic_operator("sigma_plus", atom), sm.T)
    sz = atomic_operator("sigma_z", atom)
    assert np.allclose(sz @ f, 0)
    assert np.allclose(sz @ e, e) and np.allclose(sz @ g, -g)
    K = atomic_operator("jump", atom, "g", "f")
    out = K @ np.outer(g, g) @ K.conj().T
    assert np.allclose(out, np.outer(f, f))
    assert np.allclose(atomic_operator("projector", atom, "e"), np.outer(e, e))


def test_unknown_label():
    with pytest.raises(UnknownLabel):
        atomic_operator("projector", AtomSpace(), "j")
    with pytest.raises(ValueError):
        AtomSpace(("g", "g", "e"))


def test_tensor_products():
    assert np.array_equal(tensor(np.eye(3), np.eye(4)), np.eye(12))
    s = System.single(16)
    v = tensor(basis_ket(s.atoms[0], "g"), fock_state(0, s.fock))
    assert v.shape == (48,)
    idx = np.flatnonzero(v)
    assert list(idx) == [s.atoms[0].index("g") * 16] and v[idx[0]] == 1


def test_atom_major_ordering():
    s = System.register(2, 4)
    assert s.dim == 36
    labels, n = s.labels_of(1 * 3 * 4 + 2 * 4 + 3)
    assert labels == ("g", "e") and n == 3


def test_product_dimension_mismatch():
    s = System.single(4)
    with pytest.raises(DimensionMismatch):
        s.product(np.ones(2), np.ones(4))


def test_reduced_states_consistent(rng):
    s = System.single(5)
    psi = rng.normal(size=s.dim) + 1j * rng.normal(size=s.dim)
    psi /= np.linalg.norm(psi)
    assert np.allclose(s.reduced_atom(psi), s.reduced_atom(density(psi)))
    assert np.allclose(s.reduced_field(psi), s.reduced_field(density(psi)))
    assert abs(np.trace(s.reduced_field(psi)) - 1) < 1e-12


@settings(max_examples=20)
@given(st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_random_density_matrices_pass_invariants(d, seed):
    rho = random_density(np.random.default_rng(seed), d)
    check_density_matrix(rho)


def test_density_invariant_violations():
    with pytest.raises(NonPhysicalState):
        check_density_matrix(np.diag([0.5, 0.6]))
    with pytest.raises(NonPhysicalState):
        check_density_matrix(np.diag([1.1, -0.1]))
    with pytest.raises(NonPhysicalState):
        check_density_matrix(np.array([[0.5, 0.1], [0.2, 0.5]]))


def test_csv_round_trip(rng):
    op = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    assert np.array_equal(operator_from_csv(operator_to_csv(op), 6), op)
    v = rng.normal(size=6) + 1j * rng.normal(size=6)
    assert np.array_equal(state_from_csv(state_to_csv(v)), v)
    assert operator_to_csv(op).splitlines()[0] == "row,col,re,im"
