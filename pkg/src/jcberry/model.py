"""Driven Jaynes-Cummings Hamiltonians, their eigenstructure, and pump sweep schedules.

Everything is in the interaction picture with hbar = 1; frequencies are in
rad/s and the coupling ``lam`` sets the natural time unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, RatioMismatch, TruncationError
from .hilbert import (
    AtomSpace,
    FockSpace,
    System,
    annihilation,
    basis_ket,
    coherent_state,
    displacement,
    fock_state,
    projector,
    sigma_minus,
    tensor,
)


@dataclass(frozen=True)
class PumpParams:
    Omega: float
    phi: float = 0.0

    def __post_init__(self):
        if self.Omega < 0:
            raise ValueError("Rabi frequency must be non-negative")


@dataclass(frozen=True)
class ModelParams:
    """Couplings of one or more qubits to the mode.

    ``lam`` is the reference coupling that sweep schedules refer to: a
    schedule's ``Omega(t)`` drives qubit ``j`` with ``Omega(t) * omega_weights[j]``.
    By default ``omega_weights[j] = lambdas[j] / lam``, which keeps the ratio
    ``Omega_j / lambda_j`` common to every qubit.
    """

    lam: float = 1.0
    delta: float = 0.0
    lambdas: tuple[float, ...] | None = None
    deltas: tuple[float, ...] | None = None
    omega_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("coupling lambda must be positive")
        n = None
        for name in ("lambdas", "deltas", "omega_weights"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, tuple(float(x) for x in val))
                if n is not None and len(getattr(self, name)) != n:
                    raise DimensionMismatch("per-qubit parameter lists differ in length")
                n = len(getattr(self, name))
        if self.lambdas is not None and any(l <= 0 for l in self.lambdas):
            raise ValueError("all lambda_j must be positive")

    @property
    def n_qubits(self) -> int:
        for val in (self.lambdas, self.deltas, self.omega_weights):
            if val is not None:
                return len(val)
        return 1

    def lambda_list(self) -> tuple[float, ...]:
        return self.lambdas if self.lambdas is not None else (self.lam,) * self.n_qubits

    def delta_list(self) -> tuple[float, ...]:
        return self.deltas if self.deltas is not None else (self.delta,) * self.n_qubits

    def weight_list(self) -> tuple[float, ...]:
        if self.omega_weights is not None:
            return self.omega_weights
        return tuple(l / self.lam for l in self.lambda_list())


@dataclass(frozen=True)
class EffectiveField:
    Bx: float
    By: float
    Bz: float = 0.0


# --- Hamiltonians --------------------------------------------------------------

def _register_hamiltonian(system: System, m: ModelParams, Omega: float, phi: float) -> np.ndarray:
    lams, deltas, weights = m.lambda_list(), m.delta_list(), m.weight_list()
    if len(lams) != system.n_atoms:
        raise DimensionMismatch(f"model has {len(lams)} qubits, system has {system.n_atoms} atoms")
    a = annihilation(system.fock)
    ad = a.conj().T
    eye_f = np.eye(system.fock.dim)
    H = np.zeros((system.dim, system.dim), dtype=complex)
    for j, atom in enumerate(system.atoms):
        sm = system.atom_register_op(sigma_minus(atom), j)
        sp = sm.conj().T
        H += lams[j] * (tensor(sm, ad) + tensor(sp, a))
        Om = Omega * weights[j]
        if Om:
            H += Om * tensor(np.exp(-1j * phi) * sm + np.exp(1j * phi) * sp, eye_f)
        if deltas[j]:
            # delta * sigma_z referenced to g: 2 delta |e><e|, leaving g degenerate with f
            pe = system.atom_register_op(projector(atom, "e"), j)
            H += 2.0 * deltas[j] * tensor(pe, eye_f)
    return H


def build_hamiltonian(m: ModelParams, p: PumpParams, fock: FockSpace, atom: AtomSpace | None = None) -> np.ndarray:
    """Single-qubit driven JC Hamiltonian ``lam(a^+ s- + a s+) + Omega(s- e^-i phi + h.c.)``."""
    atom = atom or AtomSpace()
    if m.n_qubits != 1:
        raise DimensionMismatch("build_hamiltonian is for one qubit; use build_multiqubit_hamiltonian")
    return _register_hamiltonian(System((atom,), fock), m, p.Omega, p.phi)


def build_multiqubit_hamiltonian(
    m: ModelParams,
    phi: float,
    fock: FockSpace,
    atoms: Sequence[AtomSpace],
    Omega: float,
    require_dark: bool = False,
) -> np.ndarray:
    """Sum of per-qubit driven JC terms sharing the pump phase ``phi``.

    Qubit ``j`` is driven with ``Omega * omega_weights[j]``.  With
    ``require_dark`` the ratios ``Omega_j / lambda_j`` must agree to 1e-12.
    """
    if require_dark:
        common_ratio(m, Omega)
    return _register_hamiltonian(System(tuple(atoms), fock), m, Omega, phi)


def common_ratio(m: ModelParams, Omega: float) -> float:
    ratios = [Omega * w / l for w, l in zip(m.weight_list(), m.lambda_list())]
    if max(ratios) - min(ratios) > 1e-12 * max(1.0, max(abs(x) for x in ratios)):
        raise RatioMismatch(f"Omega_j/lambda_j differ across qubits: {ratios}")
    return ratios[0]


def system_hamiltonian(system: System, m: ModelParams, p: PumpParams) -> np.ndarray:
    return _register_hamiltonian(system, m, p.Omega, p.phi)


def kick_diagonal(system: System) -> np.ndarray:
    """Diagonal of the simultaneous ``-sigma_z`` kick on every atom (identity off the g/e doublet)."""
    diag = np.ones(system.atom_dim)
    for j, atom in enumerate(system.atoms):
        d = np.ones(atom.dim)
        d[atom.index("e")] = -1.0
        diag = diag * np.real(np.diag(system.atom_register_op(np.diag(d).astype(complex), j)))
    return np.repeat(diag, system.fock.dim)


# --- eigenstructure --------------------------------------------------------------

def dark_alpha(m: ModelParams, p: PumpParams) -> complex:
    return -p.Omega * np.exp(1j * p.phi) / m.lam


def dark_state(m: ModelParams, p: PumpParams, fock: FockSpace, atom: AtomSpace | None = None) -> np.ndarray:
    """``|g> (x) |alpha>`` with ``alpha = -Omega e^{i phi} / lam``."""
    atom = atom or AtomSpace()
    return tensor(basis_ket(atom, "g"), coherent_state(dark_alpha(m, p), fock))


def register_dark_state(system: System, labels: str | Sequence[str], alpha: complex) -> np.ndarray:
    return system.product(system.atom_ket(labels), coherent_state(alpha, system.fock))


def bright_state(
    n: int, sign: int, m: ModelParams, p: PumpParams, fock: FockSpace, atom: AtomSpace | None = None
) -> np.ndarray:
    """``D(alpha)(|g,n+1> + sign |e,n>)/sqrt 2``, eigenvalue ``sign * lam * sqrt(n+1)``."""
    atom = atom or AtomSpace()
    if n + 1 >= fock.dim:
        raise TruncationError(f"|n+1={n + 1}> outside Fock dim {fock.dim}")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    doublet = (
        tensor(basis_ket(atom, "g"), fock_state(n + 1, fock))
        + sign * tensor(basis_ket(atom, "e"), fock_state(n, fock))
    ) / math.sqrt(2)
    D = displacement(dark_alpha(m, p), fock)
    return tensor(np.eye(atom.dim), D) @ doublet


def eigensystem(H: np.ndarray, system: System) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs sorted by energy, ties broken by ascending photon number expectation."""
    w, v = np.linalg.eigh(H)
    n_op = np.real(np.diag(system.field(np.diag(np.arange(system.fock.dim)))))
    photons = np.einsum("ik,i,ik->k", v.conj(), n_op, v).real
    order = np.lexsort((np.round(photons, 9), np.round(w, 9)))
    return w[order], v[:, order]


def effective_field(m: ModelParams, p: PumpParams) -> EffectiveField:
    return EffectiveField(p.Omega * math.cos(p.phi) / m.lam, p.Omega * math.sin(p.phi) / m.lam, 0.0)


# --- schedules -----------------------------------------------------------------

def default_steps(T: float, lam: float) -> int:
    return max(2000, int(math.ceil(100 * T * lam)))


@dataclass(frozen=True)
class SweepSchedule:
    """Pump controls ``t -> (Omega(t), phi(t))`` on ``[0, T]`` split into ``steps`` equal steps.

    ``constant_omega``/``phi_rate`` are set for constant-speed circular sweeps
    and let the propagator reuse a single step exponential.
    """

    T: float
    steps: int
    omega: Callable[[float], float]
    phi: Callable[[float], float]
    kick_times: tuple[float, ...] = ()
    constant_omega: float | None = None
    phi_rate: float | None = None
    label: str = "custom"

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("duration must be positive")
        if self.steps < 1:
            raise ValueError("need at least one step")
        kicks = tuple(sorted(float(t) for t in self.kick_times))
        if any(t < 0 or t > self.T * (1 + 1e-12) for t in kicks):
            raise ValueError("kick times must lie in [0, T]")
        object.__setattr__(self, "kick_times", kicks)

    @property
    def dt(self) -> float:
        return self.T / self.steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.steps + 1)

    def pump(self, t: float) -> PumpParams:
        return PumpParams(float(self.omega(t)), float(self.phi(t)))

    def with_kicks(self, kick_times: Sequence[float]) -> "SweepSchedule":
        return SweepSchedule(self.T, self.steps, self.omega, self.phi, tuple(kick_times),
                             self.constant_omega, self.phi_rate, self.label)

    def with_steps(self, steps: int) -> "SweepSchedule":
        return SweepSchedule(self.T, steps, self.omega, self.phi, self.kick_times,
                             self.constant_omega, self.phi_rate, self.label)

    def to_csv(self) -> str:
        lines = ["t,Omega,phi,kick"]
        grid = list(self.times())
        kicks = list(self.kick_times)
        tol = 1e-12 * self.T
        rows = [(t, 0) for t in grid]
        for tk in kicks:
            hit = [i for i, (t, _) in enumerate(rows) if abs(t - tk) <= tol]
            if hit:
                rows[hit[0]] = (rows[hit[0]][0], 1)
            else:
                rows.append((tk, 1))
        rows.sort(key=lambda r: r[0])
        for t, k in rows:
            p = self.pump(t)
            lines.append(f"{float(t)!r},{p.Omega!r},{p.phi!r},{k}")
        return "\n".join(lines) + "\n"


def kick_times_for(kicks: str, T: float, M: int | None = None) -> tuple[float, ...]:
    if kicks == "none":
        return ()
    if kicks == "midpoint":
        return (T / 2,)
    if kicks == "uniform":
        if not M or M < 1:
            raise ValueError("uniform kicks need M >= 1")
        return tuple((2 * k + 1) * T / (2 * M) for k in range(M))
    raise ValueError(f"unknown kick option {kicks!r}")


def circle_sweep(
    r: float,
    T: float,
    steps: int | None = None,
    kicks: str = "none",
    M: int | None = None,
    lam: float = 1.0,
    turns: float = 1.0,
) -> SweepSchedule:
    """Constant ``Omega = r lam`` with ``phi = 2 pi turns t / T``.

    ``kicks`` is ``"none"``, ``"midpoint"`` or ``"uniform"`` (M echo kicks at
    ``T/2M, 3T/2M, ...``).
    """
    if T <= 0:
        raise ValueError("duration must be positive")
    Omega = r * lam
    rate = 2 * math.pi * turns / T
    return SweepSchedule(
        T=T,
        steps=steps if steps is not None else default_steps(T, lam),
        omega=lambda t: Omega,
        phi=lambda t: rate * t,
        kick_times=kick_times_for(kicks, T, M),
        constant_omega=Omega,
        phi_rate=rate,
        label=f"circle(r={r:g})",
    )


def static_schedule(Omega: float, phi: float, T: float, steps: int = 1) -> SweepSchedule:
    return SweepSchedule(T, steps, lambda t: Omega, lambda t: phi, (), Omega, 0.0, "static")
