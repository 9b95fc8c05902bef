import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jcberry.errors import DimensionMismatch, NonFinite, NonPhysicalState
from jcberry.geometry import wrapped_distance
from jcberry.hilbert import (
    AtomSpace,
    System,
    annihilation,
    basis_ket,
    coherent_state,
    creation,
    density,
    displaced_number_state,
    fock_state,
)
from jcberry.model import ModelParams, PumpParams, circle_sweep, dark_state, static_schedule, system_hamiltonian
from jcberry.propagator import (
    DissipationRates,
    LindbladStepper,
    Propagator,
    apply_kick,
    choi_matrix,
    evolve_lindblad,
    evolve_unitary,
    expm,
    expm_hermitian,
    field_damping_superop,
    sweep_propagator,
)

from conftest import R_HALF, T_ADIABATIC, random_density

M1 = ModelParams(1.0)


def test_expm_zero_is_identity():
    assert np.array_equal(expm(np.zeros((4, 4))), np.eye(4))


def test_expm_sigma_z_doublet():
    sz = np.diag([1.0, -1.0])  # (e, g)
    assert np.allclose(expm(1j * math.pi / 2 * sz), np.diag([1j, -1j]))


def test_expm_displacement_generates_coherent(fock32):
    a = annihilation(fock32)
    alpha = 0.5 - 0.3j
    D = expm(alpha * creation(fock32) - np.conj(alpha) * a)
    assert np.allclose(D[:, 0], coherent_state(alpha, fock32), atol=1e-8)


def test_expm_rejects_non_finite():
    with pytest.raises(NonFinite):
        expm(np.array([[np.nan]]))
    with pytest.raises(NonFinite):
        expm_hermitian(np.array([[np.inf]]), 1.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 1.5), st.floats(0, 2 * math.pi), st.floats(0.01, 2.0))
def test_step_unitarity(Omega, phi, dt):
    s = System.single(10)
    U = Propagator(s, M1).step_unitary(Omega, phi, dt)
    assert np.max(np.abs(U.conj().T @ U - np.eye(s.dim))) < 1e-10
    H = system_hamiltonian(s, M1, PumpParams(Omega, phi))
    assert np.max(np.abs(U - expm(H, -1j * dt))) < 1e-10


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        evolve_unitary(circle_sweep(0.5, 1.0, steps=10), M1, np.ones(10), System.single(4))


def test_dark_sweep_phase_adiabatic():
    s = System.single(15)
    psi0 = dark_state(M1, PumpParams(R_HALF, 0.0), s.fock)
    res = evolve_unitary(circle_sweep(R_HALF, T_ADIABATIC), M1, psi0, s)
    assert len(res.alpha) == res.times.size == circle_sweep(R_HALF, T_ADIABATIC).steps + 1
    assert abs(res.accumulated_phase + math.pi) < 0.01
    assert abs(abs(np.vdot(psi0, res.final)) - 1) < 0.01
    assert res.diagnostics["norm_drift"] < 1e-8


def test_undriven_f_states_stationary(fock16):
    s = System.single(16)
    for n in (0, 3, 7):
        psi = s.product(basis_ket(s.atoms[0], "f"), fock_state(n, s.fock))
        res = evolve_unitary(static_schedule(0.0, 0.0, 5.0, steps=20), M1, psi, s)
        assert np.allclose(res.final, psi)


def test_nonadiabatic_leakage_falls_with_sweep_time():
    s = System.single(15)
    psi0 = dark_state(M1, PumpParams(R_HALF, 0.0), s.fock)
    # leakage oscillates with T on top of its decay, so compare well separated times
    leak = [evolve_unitary(circle_sweep(R_HALF, T), M1, psi0, s).leakage[-1] for T in (20.0, 160.0, 400.0)]
    assert leak[0] > 10 * leak[1] > 10 * leak[2]
    assert leak[2] < 1e-3


def test_lindblad_zero_rates_matches_unitary():
    s = System.single(6)
    rng = np.random.default_rng(7)
    psi = rng.normal(size=s.dim) + 1j * rng.normal(size=s.dim)
    psi /= np.linalg.norm(psi)
    sch = circle_sweep(0.4, 5.0, steps=200, kicks="midpoint")
    pure = evolve_unitary(sch, M1, psi, s).final
    mixed = evolve_lindblad(sch, M1, density(psi), DissipationRates(), s)
    assert np.max(np.abs(mixed.final - density(pure))) < 1e-8


def test_pure_field_decay_keeps_coherent_state():
    s = System.single(20)
    alpha, gamma, t = 1.2, 0.3, 2.0
    psi = s.product(basis_ket(s.atoms[0], "f"), coherent_state(alpha, s.fock))
    res = evolve_lindblad(static_schedule(0.0, 0.0, t, steps=50), M1, density(psi), DissipationRates(gamma), s)
    expect = s.product(basis_ket(s.atoms[0], "f"), coherent_state(alpha * math.exp(-gamma * t / 2), s.fock))
    assert np.max(np.abs(res.final - density(expect))) < 1e-8


def test_field_damping_superop_matches_liouvillian():
    from jcberry.propagator import lindblad_dissipator

    dim, gamma, dt = 6, 0.7, 0.3
    L = lindblad_dissipator([math.sqrt(gamma) * annihilation(type("F", (), {"dim": dim})())], dim)
    assert np.max(np.abs(field_damping_superop(dim, gamma, dt) - expm(L, dt))) < 1e-10


def _small_system_and_rates():
    s = System.single(4, ("f", "g", "e"))
    rates = DissipationRates(0.4, {("g", "f"): 0.2, ("f", "g"): 0.1, ("e", "g"): 0.3})
    return s, rates


@pytest.mark.parametrize("method", ["factored", "dense"])
def test_lindblad_step_is_cptp(method):
    s, rates = _small_system_and_rates()
    assert s.dim == 12
    U = Propagator(s, M1).step_unitary(0.6, 0.9, 0.5)
    S = LindbladStepper(s, rates, method).step_superop(U, 0.5)
    C = choi_matrix(S, s.dim)
    assert np.max(np.abs(C - C.conj().T)) < 1e-10
    assert np.linalg.eigvalsh(C)[0] > -1e-10
    # trace preservation: partial trace over the output factor is the identity
    ptr = np.einsum("iaja->ij", C.reshape(s.dim, s.dim, s.dim, s.dim))
    assert np.max(np.abs(ptr - np.eye(s.dim))) < 1e-10


def test_factored_and_dense_agree():
    s, rates = _small_system_and_rates()
    rho = random_density(np.random.default_rng(3), s.dim)
    a = LindbladStepper(s, rates, "factored").apply(rho, 0.37)
    b = LindbladStepper(s, rates, "dense").apply(rho, 0.37)
    assert np.max(np.abs(a - b)) < 1e-10


def test_lindblad_invariants_along_run():
    s = System.single(8)
    rho0 = density(dark_state(M1, PumpParams(0.5, 0.0), s.fock))
    res = evolve_lindblad(circle_sweep(0.5, 10.0, steps=400), M1, rho0, DissipationRates(0.05, {("g", "f"): 0.02}), s)
    assert res.diagnostics["trace_drift"] < 1e-8
    assert res.diagnostics["min_eigenvalue"] > -1e-8
    assert np.all(np.abs(res.trace - 1) < 1e-8)


def test_invalid_density_rejected():
    s = System.single(4)
    with pytest.raises(NonPhysicalState):
        evolve_lindblad(static_schedule(0.0, 0.0, 1.0), M1, np.eye(s.dim), DissipationRates(), s)


def test_kick_inverts_bright_doublet(fock16):
    s = System.single(16)
    atom = s.atoms[0]
    for n in range(3):
        gn1 = s.product(basis_ket(atom, "g"), fock_state(n + 1, s.fock))
        en = s.product(basis_ket(atom, "e"), fock_state(n, s.fock))
        out = apply_kick((gn1 + en) / math.sqrt(2), s)
        assert abs(abs(np.vdot((gn1 - en) / math.sqrt(2), out)) - 1) < 1e-12
    f3 = s.product(basis_ket(atom, "f"), fock_state(3, s.fock))
    assert np.array_equal(apply_kick(f3, s), f3)
    rng = np.random.default_rng(0)
    psi = rng.normal(size=s.dim) + 0j
    assert np.array_equal(apply_kick(apply_kick(psi, s), s), psi)
    rho = density(psi)
    assert np.allclose(apply_kick(rho, s, density=True), density(apply_kick(psi, s)))


def test_kick_reverses_hamiltonian():
    s = System.single(8)
    H = system_hamiltonian(s, M1, PumpParams(0.7, 0.3))
    K = np.diag(apply_kick(np.ones(s.dim), s))
    assert np.allclose(K @ H @ K, -H)


@pytest.mark.parametrize("n", [1, 2])
def test_echo_phase_independent_of_field_state(n):
    """A displaced number state is not dark, yet the midpoint kick leaves only the loop phase."""
    s = System.single(24)
    atom = s.atoms[0]
    U = sweep_propagator(circle_sweep(R_HALF, T_ADIABATIC, kicks="midpoint"), M1, s)
    psi_n = s.product(basis_ket(atom, "g"), displaced_number_state(-R_HALF, n, s.fock))
    psi_0 = s.product(basis_ket(atom, "g"), coherent_state(-R_HALF, s.fock))
    ph_n = np.angle(np.vdot(psi_n, U @ psi_n))
    ph_0 = np.angle(np.vdot(psi_0, U @ psi_0))
    # the kick acts as +1 on g, so the overlap phase is the loop phase itself
    assert wrapped_distance(ph_n, -math.pi) < 0.02
    assert wrapped_distance(ph_n, ph_0) < 0.02


def test_sweep_propagator_matches_step_product():
    s = System.single(6)
    sch = circle_sweep(0.5, 6.0, steps=300, kicks="uniform", M=3)
    U_fast = sweep_propagator(sch, M1, s)
    U_slow = evolve_unitary(sch, M1, np.eye(s.dim, dtype=complex), s, record=False).final
    assert np.max(np.abs(U_fast - U_slow)) < 1e-10


def test_step_halving_second_order():
    s = System.single(12)
    psi0 = dark_state(M1, PumpParams(R_HALF, 0.0), s.fock)
    final = {k: evolve_unitary(circle_sweep(R_HALF, 20.0, steps=k), M1, psi0, s, record=False).final
             for k in (50, 100, 200, 3200)}
    err = [np.linalg.norm(final[k] - final[3200]) for k in (50, 100, 200)]
    assert err[0] / err[1] >= 3.9 and err[1] / err[2] >= 3.9


def test_kick_inside_step_splits_it():
    s = System.single(6)
    sch = circle_sweep(0.5, 3.0, steps=7, kicks="midpoint")
    fine = circle_sweep(0.5, 3.0, steps=14, kicks="midpoint")
    U7 = evolve_unitary(sch, M1, np.eye(s.dim, dtype=complex), s, record=False).final
    K = np.diag(apply_kick(np.ones(s.dim), s))
    # with the kick in the middle of step 4, the run has the kick sandwiched between two half steps
    assert np.max(np.abs(U7.conj().T @ U7 - np.eye(s.dim))) < 1e-10
    U14 = evolve_unitary(fine, M1, np.eye(s.dim, dtype=complex), s, record=False).final
    assert np.max(np.abs(U7 - U14)) < 0.05
    assert np.max(np.abs(U7 - U14)) > 0  # distinct grids


def test_trajectory_csv_header():
    s = System.single(6)
    res = evolve_unitary(circle_sweep(0.3, 2.0, steps=10), M1, dark_state(M1, PumpParams(0.3, 0), s.fock), s)
    lines = res.trajectory_csv().splitlines()
    assert lines[0] == "t,re_alpha,im_alpha,trace,leakage" and len(lines) == 12


def test_rates_derived_sums():
    r = DissipationRates.from_products(100.0, 0.02, 0.01, 0.03, g_to_f_fraction=0.25, kappa_e_T=0.5)
    assert r.kappa_g == pytest.approx(1e-4)
    assert r.rate("g", "f") == pytest.approx(0.25e-4) and r.rate("g", "j") == pytest.approx(0.75e-4)
    assert r.kappa_f == pytest.approx(3e-4) and r.kappa_e == pytest.approx(5e-3)
    with pytest.raises(ValueError):
        DissipationRates(-1.0)
