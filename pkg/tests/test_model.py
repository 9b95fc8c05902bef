import math

import numpy as np
import pytest

from jcberry.errors import DimensionMismatch, RatioMismatch
from jcberry.hilbert import AtomSpace, FockSpace, System, coherent_state, fock_state, tensor, basis_ket
from jcberry.model import (
    ModelParams,
    PumpParams,
    bright_state,
    build_hamiltonian,
    build_multiqubit_hamiltonian,
    circle_sweep,
    dark_alpha,
    dark_state,
    default_steps,
    effective_field,
    eigensystem,
    kick_times_for,
    register_dark_state,
    system_hamiltonian,
)
from jcberry.geometry import circle_path, signed_area

from conftest import R_HALF

M1 = ModelParams(1.0)


def test_hamiltonian_hermitian_and_f_decoupled(fock16):
    atom = AtomSpace()
    H = build_hamiltonian(ModelParams(1.0, delta=0.3), PumpParams(0.7, 1.1), fock16, atom)
    assert np.max(np.abs(H - H.conj().T)) < 1e-12
    fi = atom.index("f")
    block = H.reshape(3, 16, 3, 16)
    assert np.all(block[fi] == 0) and np.all(block[:, :, fi] == 0)


def test_undriven_doublets(fock16):
    atom = AtomSpace()
    H = build_hamiltonian(M1, PumpParams(0.0), fock16, atom)
    for n in range(10):
        ig = atom.index("g") * 16 + n + 1
        ie = atom.index("e") * 16 + n
        sub = H[np.ix_([ig, ie], [ig, ie])]
        assert np.allclose(np.linalg.eigvalsh(sub), [-math.sqrt(n + 1), math.sqrt(n + 1)])


def test_dark_state_zero_residual(fock32):
    p = PumpParams(R_HALF, 0.4)
    H = build_hamiltonian(M1, p, fock32)
    d = dark_state(M1, p, fock32)
    assert np.linalg.norm(H @ d) < 1e-8
    assert abs(np.vdot(d, H @ d)) < 1e-8


def test_dark_residual_decreases_with_dim():
    p = PumpParams(1.0, 0.0)
    res = []
    for dim in (8, 12, 16, 24):
        f = FockSpace(dim)
        d = np.kron(basis_ket(AtomSpace(), "g"), coherent_state(dark_alpha(M1, p), f, tail_budget=1.0))
        res.append(np.linalg.norm(build_hamiltonian(M1, p, f) @ d))
    assert all(b < a for a, b in zip(res, res[1:]))


def test_f_states_stationary(fock16):
    H = build_hamiltonian(M1, PumpParams(0.9, 2.0), fock16)
    for n in range(16):
        v = np.kron(basis_ket(AtomSpace(), "f"), fock_state(n, fock16))
        assert np.all(H @ v == 0)


def test_detuning_leaves_dark_state(fock32):
    p = PumpParams(R_HALF, 0.0)
    d = dark_state(M1, p, fock32)
    for delta in (0.1, 0.2, 0.3):
        H = build_hamiltonian(ModelParams(1.0, delta=delta), p, fock32)
        assert np.linalg.norm(H @ d) < 1e-8
        assert np.max(np.abs(H - build_hamiltonian(M1, p, fock32))) > 0


def test_dark_state_examples(fock32):
    assert np.allclose(dark_state(M1, PumpParams(0.0), fock32),
                       np.kron(basis_ket(AtomSpace(), "g"), fock_state(0, fock32)))
    d = dark_state(M1, PumpParams(R_HALF, 0.0), fock32)
    assert abs(dark_alpha(M1, PumpParams(R_HALF, 0.0)) + R_HALF) < 1e-15
    s = System.single(32)
    nbar = np.trace(s.reduced_field(d) @ np.diag(np.arange(32))).real
    assert abs(nbar - 0.5) < 1e-8


def test_bright_states(fock32):
    b = bright_state(0, +1, M1, PumpParams(0.0), fock32)
    atom = AtomSpace()
    expect = (np.kron(basis_ket(atom, "g"), fock_state(1, fock32))
              + np.kron(basis_ket(atom, "e"), fock_state(0, fock32))) / math.sqrt(2)
    assert np.allclose(b, expect)
    p = PumpParams(R_HALF, 0.3)
    H = build_hamiltonian(M1, p, fock32)
    bp = bright_state(0, +1, M1, p, fock32)
    bm = bright_state(0, -1, M1, p, fock32)
    assert abs(np.vdot(bp, bm)) < 1e-10
    assert np.linalg.norm(H @ bp - bp) < 1e-6
    for n in range(3):
        for s in (+1, -1):
            v = bright_state(n, s, M1, p, fock32)
            assert np.linalg.norm(H @ v - s * math.sqrt(n + 1) * v) < 1e-6


def test_bright_state_matches_dense_diagonalization(fock32):
    p = PumpParams(R_HALF, 0.0)
    s = System.single(32)
    H = system_hamiltonian(s, M1, p)
    w, V = eigensystem(H, s)
    bp = bright_state(0, +1, M1, p, fock32)
    k = np.argmin(np.abs(w - 1.0))
    assert abs(w[k] - 1.0) < 1e-6
    assert abs(abs(np.vdot(V[:, k], bp)) - 1) < 1e-6


def test_spectrum_invariance_low_window():
    s = System.single(40)
    w0 = np.sort(np.linalg.eigvalsh(system_hamiltonian(s, M1, PumpParams(0.0))))
    w1 = np.sort(np.linalg.eigvalsh(system_hamiltonian(s, M1, PumpParams(R_HALF, 1.3))))
    window = np.abs(w0) <= 3.0
    assert np.max(np.abs(w0[window] - w1[window])) < 1e-6


def test_eigensystem_ordering(single15):
    w, _ = eigensystem(system_hamiltonian(single15, M1, PumpParams(0.5)), single15)
    assert np.all(np.diff(w) >= -1e-8)


def test_multiqubit_reduces_to_single(fock16):
    atom = AtomSpace()
    p = PumpParams(0.6, 0.8)
    H1 = build_hamiltonian(M1, p, fock16, atom)
    Hn = build_multiqubit_hamiltonian(ModelParams(1.0, lambdas=(1.0,)), p.phi, fock16, [atom], p.Omega)
    assert np.array_equal(H1, Hn)


def test_multiqubit_dark_degeneracy():
    m = ModelParams(1.0, lambdas=(1.0, 1.3), deltas=(0.1, 0.2))
    s = System.register(2, 20)
    phi = 0.7
    H = build_multiqubit_hamiltonian(m, phi, s.fock, s.atoms, Omega=R_HALF, require_dark=True)
    assert np.max(np.abs(H - H.conj().T)) < 1e-12
    alpha = -R_HALF * np.exp(1j * phi)
    zero = 0
    for labels in ("gg", "gf", "fg"):
        zero += np.linalg.norm(H @ register_dark_state(s, labels, alpha)) < 1e-8
    assert zero == 3
    rng = np.random.default_rng(0)
    field = rng.normal(size=20) + 1j * rng.normal(size=20)
    assert np.linalg.norm(H @ s.product(s.atom_ket("ff"), field)) == 0


def test_ratio_mismatch():
    m = ModelParams(1.0, lambdas=(1.0, 1.3), omega_weights=(1.0, 1.0))
    s = System.register(2, 8)
    with pytest.raises(RatioMismatch):
        build_multiqubit_hamiltonian(m, 0.0, s.fock, s.atoms, Omega=0.5, require_dark=True)


def test_per_qubit_lengths_checked():
    with pytest.raises(DimensionMismatch):
        ModelParams(1.0, lambdas=(1.0, 1.0), deltas=(0.1,))


def test_effective_field():
    b = effective_field(M1, PumpParams(1.0, 0.0))
    assert (b.Bx, b.By, b.Bz) == pytest.approx((1, 0, 0))
    b = effective_field(M1, PumpParams(1.0, math.pi / 2))
    assert (b.Bx, b.By, b.Bz) == pytest.approx((0, 1, 0), abs=1e-15)
    pts = [complex(effective_field(M1, PumpParams(0.8, ph)).Bx, effective_field(M1, PumpParams(0.8, ph)).By)
           for ph in np.linspace(0, 2 * math.pi, 2001)]
    pts[-1] = pts[0]
    from jcberry.geometry import PhaseSpacePath
    assert abs(signed_area(PhaseSpacePath(pts)) - math.pi * 0.64) < 1e-5


def test_circle_sweep_schedule():
    s = circle_sweep(R_HALF, 20.0, kicks="midpoint")
    assert s.kick_times == (10.0,)
    assert s.steps == 2000 == default_steps(20.0, 1.0)
    s = circle_sweep(R_HALF, 20.0, steps=1000)
    assert np.allclose([s.phi(t) for t in s.times()], 2 * math.pi * np.arange(1001) / 1000)
    assert s.pump(3.0).Omega == R_HALF
    s = circle_sweep(R_HALF, 20.0, kicks="uniform", M=50)
    k = np.array(s.kick_times)
    assert len(k) == 50 and np.allclose(np.diff(k), 20.0 / 50) and abs(k[0] - 0.2) < 1e-12
    with pytest.raises(ValueError):
        kick_times_for("uniform", 1.0, 0)


def test_schedule_csv_marks_kicks():
    s = circle_sweep(0.5, 4.0, steps=4, kicks="midpoint")
    lines = s.to_csv().strip().splitlines()
    assert lines[0] == "t,Omega,phi,kick"
    assert len(lines) == 6
    assert [l.split(",")[-1] for l in lines[1:]] == ["0", "0", "1", "0", "0"]
