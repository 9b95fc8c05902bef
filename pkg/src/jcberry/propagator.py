"""Closed- and open-system time evolution through pump sweeps.

Each step uses the schedule sampled at the step midpoint.  Pump phase enters
only through the diagonal rotation ``V(phi) = exp(i phi N)`` with
``N = a^dag a + sum_j |e_j><e_j|``, since ``H(Omega, phi) = V H(Omega, 0) V^dag``;
the step exponential ``exp(-i H dt)`` is therefore computed once per distinct
``(Omega, dt)`` and rotated, which is exactly the midpoint step, not an
approximation of it.

Open-system steps follow ``rho -> e^{L_kappa dt} e^{L_gamma dt} U rho U^dag``
with each dissipator applied as its exact exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import geometry
from .errors import DimensionMismatch, NonPhysicalState, UnknownLabel
from .hilbert import (
    System,
    annihilation,
    check_density_matrix,
    coherent_state,
    jump,
)
from .linalg import expm, expm_hermitian
from .model import ModelParams, PumpParams, SweepSchedule, kick_diagonal, system_hamiltonian

# re-exported kernels
__all__ = [
    "expm",
    "expm_hermitian",
    "DissipationRates",
    "EvolutionResult",
    "Propagator",
    "evolve_unitary",
    "evolve_lindblad",
    "apply_kick",
    "sweep_propagator",
]

TRACE_TOL = 1e-8
POS_TOL = 1e-8


@dataclass(frozen=True)
class DissipationRates:
    """Field decay ``gamma`` and atomic emission rates ``kappa[(upper, lower)]`` (1/s)."""

    gamma: float = 0.0
    kappa: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kappa", dict(self.kappa))
        if self.gamma < 0 or any(v < 0 for v in self.kappa.values()):
            raise ValueError("rates must be non-negative")

    def total_from(self, level: str) -> float:
        """``kappa_level = sum_k kappa[(level, k)]``."""
        return sum(v for (u, _), v in self.kappa.items() if u == level)

    @property
    def kappa_g(self) -> float:
        return self.total_from("g")

    @property
    def kappa_f(self) -> float:
        return self.total_from("f")

    @property
    def kappa_e(self) -> float:
        return self.total_from("e")

    def rate(self, upper: str, lower: str) -> float:
        return self.kappa.get((upper, lower), 0.0)

    @property
    def is_zero(self) -> bool:
        return self.gamma == 0 and not any(self.kappa.values())

    @classmethod
    def from_products(
        cls, T: float, gamma_T: float = 0.0, kappa_g_T: float = 0.0, kappa_f_T: float = 0.0,
        g_to_f_fraction: float = 1.0, kappa_e_T: float = 0.0,
    ) -> "DissipationRates":
        """Rates from dimensionless products with ``T``.

        Emission from ``g`` is split between ``g -> f`` (``g_to_f_fraction``)
        and ``g -> j``; ``f`` decays to ``k``; ``e`` decays to ``g``.
        """
        kg, kf, ke = kappa_g_T / T, kappa_f_T / T, kappa_e_T / T
        table = {}
        if kg:
            if g_to_f_fraction:
                table[("g", "f")] = kg * g_to_f_fraction
            if g_to_f_fraction != 1.0:
                table[("g", "j")] = kg * (1 - g_to_f_fraction)
        if kf:
            table[("f", "k")] = kf
        if ke:
            table[("e", "g")] = ke
        return cls(gamma_T / T, table)

    def levels_needed(self) -> set[str]:
        return {l for pair in self.kappa for l in pair if self.kappa[pair]}


@dataclass
class EvolutionResult:
    final: np.ndarray
    times: np.ndarray
    alpha: np.ndarray
    trace: np.ndarray
    leakage: np.ndarray
    overlaps: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_pure(self) -> bool:
        return self.final.ndim == 1

    @property
    def total_phase(self) -> float:
        """Principal ``arg <psi(0)|psi(T)>``."""
        if self.overlaps is None:
            raise ValueError("no overlap record (mixed-state run)")
        return geometry.principal(np.angle(self.overlaps[-1]))

    @property
    def accumulated_phase(self) -> float:
        """Unwrapped phase of ``<psi(0)|psi(t)>`` accumulated along the run."""
        if self.overlaps is None:
            raise ValueError("no overlap record (mixed-state run)")
        return geometry.unwrap_accumulated_phase(self.overlaps)

    def path(self) -> geometry.PhaseSpacePath:
        return geometry.PhaseSpacePath(self.alpha, closed=False)

    def trajectory_csv(self) -> str:
        lines = ["t,re_alpha,im_alpha,trace,leakage"]
        for t, a, tr, lk in zip(self.times, self.alpha, self.trace, self.leakage):
            lines.append(f"{float(t)!r},{float(a.real)!r},{float(a.imag)!r},{float(tr)!r},{float(lk)!r}")
        return "\n".join(lines) + "\n"


def _default_system(dim: int, m: ModelParams) -> System:
    A = 3 ** m.n_qubits
    if dim % A:
        raise DimensionMismatch(f"state dim {dim} is not a multiple of atom dim {A}")
    return System.register(m.n_qubits, dim // A)


def _step_intervals(schedule: SweepSchedule):
    """``(t0, t1, kick_after, grid_index)`` sub-steps; kicks split steps where they fall inside."""
    T, S = schedule.T, schedule.steps
    dt = schedule.dt
    tol = 1e-9 * dt
    kicks = list(schedule.kick_times)
    ki = 0
    out = []
    lead_kicks = 0
    while ki < len(kicks) and kicks[ki] <= tol:
        lead_kicks += 1
        ki += 1
    for k in range(S):
        t0, t1 = k * dt, (k + 1) * dt if k < S - 1 else T
        cur = t0
        while ki < len(kicks) and kicks[ki] < t1 - tol:
            out.append((cur, kicks[ki], 1, None))
            cur = kicks[ki]
            ki += 1
        n_end = 0
        while ki < len(kicks) and kicks[ki] <= t1 + tol:
            n_end += 1
            ki += 1
        out.append((cur, t1, n_end, k + 1))
    return lead_kicks, out


class Propagator:
    """Step machinery for one ``(system, model)`` pair with cached exponentials."""

    def __init__(self, system: System, m: ModelParams):
        self.system = system
        self.model = m
        self.N = system.excitation_number()
        self.kick = kick_diagonal(system)
        self._u0: dict[tuple[float, float], np.ndarray] = {}
        self._a = annihilation(system.fock)

    def rotation(self, phi: float) -> np.ndarray:
        return np.exp(1j * phi * self.N)

    def base_step(self, Omega: float, dt: float) -> np.ndarray:
        key = (float(Omega), float(dt))
        U = self._u0.get(key)
        if U is None:
            H0 = system_hamiltonian(self.system, self.model, PumpParams(Omega, 0.0))
            U = expm_hermitian(H0, dt)
            if len(self._u0) < 64:
                self._u0[key] = U
        return U

    def step_unitary(self, Omega: float, phi: float, dt: float) -> np.ndarray:
        v = self.rotation(phi)
        return (v[:, None] * self.base_step(Omega, dt)) * v.conj()[None, :]

    def step_vector(self, psi: np.ndarray, Omega: float, phi: float, dt: float) -> np.ndarray:
        v = self.rotation(phi)
        if psi.ndim == 1:
            return v * (self.base_step(Omega, dt) @ (v.conj() * psi))
        return v[:, None] * (self.base_step(Omega, dt) @ (v.conj()[:, None] * psi))

    # observables --------------------------------------------------------

    def mean_alpha(self, state: np.ndarray) -> complex:
        rho_f = self.system.reduced_field(state)
        return complex(np.trace(self._a @ rho_f))

    def dark_weight(self, state: np.ndarray, alpha: complex) -> float:
        """Population of the zero-energy subspace spanned by (register g/f states except all-f)
        (x) ``|alpha>`` plus all-f (x) any field state."""
        sys = self.system
        A, N = sys.atom_dim, sys.fock.dim
        comp, ff = _computational_indices(sys)
        coh = coherent_state(alpha, sys.fock, tail_budget=1.0)
        if state.ndim == 1:
            m = state.reshape(A, N)
            w = np.sum(np.abs(m[comp] @ coh.conj()) ** 2)
            w += np.sum(np.abs(m[ff]) ** 2)
        else:
            r = state.reshape(A, N, A, N)
            w = sum(np.real(coh.conj() @ r[c, :, c, :] @ coh) for c in comp)
            w += np.real(np.trace(r[ff, :, ff, :]))
        return float(w)

    def dark_alpha_at(self, p: PumpParams) -> complex:
        return -p.Omega * np.exp(1j * p.phi) / self.model.lam


def _computational_indices(system: System) -> tuple[list[int], int]:
    """Register indices of g/f product states except all-f, and the all-f index."""
    comp = []
    ff = None
    A = system.atom_dim
    for idx in range(A):
        labels, _ = system.labels_of(idx * system.fock.dim)
        if all(l in ("g", "f") for l in labels):
            if all(l == "f" for l in labels):
                ff = idx
            else:
                comp.append(idx)
    return comp, ff


def apply_kick(state: np.ndarray, system: System, density: bool = False) -> np.ndarray:
    """``-sigma_z`` on the g/e doublet of every atom, identity on all other levels.

    ``state`` is a vector, a column batch, or (``density=True``) a density matrix.
    """
    k = kick_diagonal(system)
    if state.ndim == 1:
        return k * state
    if density:
        return k[:, None] * state * k[None, :]
    return k[:, None] * state


def evolve_unitary(
    schedule: SweepSchedule,
    m: ModelParams,
    psi0: np.ndarray,
    system: System | None = None,
    record: bool = True,
) -> EvolutionResult:
    """Piecewise-constant midpoint propagation of a pure state (or a column batch).

    Kicks are applied as instantaneous unitaries at ``schedule.kick_times``.
    With ``record`` the field centroid, dark-subspace leakage and the overlap
    ``<psi0|psi(t)>`` are stored at every grid time.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    system = system or _default_system(psi0.shape[0], m)
    if psi0.shape[0] != system.dim:
        raise DimensionMismatch(f"state dim {psi0.shape[0]} != system dim {system.dim}")
    prop = Propagator(system, m)
    batch = psi0.ndim == 2
    record = record and not batch
    lead, intervals = _step_intervals(schedule)

    psi = psi0.copy()
    for _ in range(lead):
        psi = prop.kick[:, None] * psi if batch else prop.kick * psi

    S = schedule.steps
    alpha = np.zeros(S + 1, dtype=complex)
    leak = np.zeros(S + 1)
    trace = np.ones(S + 1)
    overlaps = np.zeros(S + 1, dtype=complex)

    def _record(i, t):
        p = schedule.pump(t)
        alpha[i] = prop.mean_alpha(psi)
        leak[i] = 1.0 - prop.dark_weight(psi, prop.dark_alpha_at(p))
        trace[i] = np.vdot(psi, psi).real
        overlaps[i] = np.vdot(psi0, psi)

    if record:
        _record(0, 0.0)
    for t0, t1, n_kicks, grid_i in intervals:
        tm = 0.5 * (t0 + t1)
        psi = prop.step_vector(psi, float(schedule.omega(tm)), float(schedule.phi(tm)), t1 - t0)
        for _ in range(n_kicks):
            psi = prop.kick[:, None] * psi if batch else prop.kick * psi
        if record and grid_i is not None:
            _record(grid_i, t1)

    norm_dev = float(np.max(np.abs(np.linalg.norm(psi, axis=0) - np.linalg.norm(psi0, axis=0))))
    diag = {"norm_drift": norm_dev}
    if not record:
        return EvolutionResult(psi, schedule.times(), alpha, trace, leak, None, diag)
    diag["final_leakage"] = float(leak[-1])
    return EvolutionResult(psi, schedule.times(), alpha, trace, leak, overlaps, diag)


def sweep_propagator(schedule: SweepSchedule, m: ModelParams, system: System) -> np.ndarray:
    """Full unitary of a sweep.

    Uniform circular sweeps with kicks on step boundaries collapse to matrix
    powers: with ``V_k`` the midpoint rotation of step ``k`` and
    ``V_{k+1}^dag V_k = V(-dphi)``, a run of steps ``a..b-1`` equals
    ``V_{b-1} U0 [V(-dphi) U0]^{b-1-a} V_a^dag``.  Everything else falls back
    to the step product.
    """
    prop = Propagator(system, m)
    lead, intervals = _step_intervals(schedule)
    uniform = (
        schedule.constant_omega is not None
        and schedule.phi_rate is not None
        and all(g is not None for *_, g in intervals)
    )
    if not uniform:
        res = evolve_unitary(schedule, m, np.eye(system.dim, dtype=complex), system, record=False)
        return res.final

    dt = schedule.dt
    U0 = prop.base_step(schedule.constant_omega, dt)
    dphi = schedule.phi_rate * dt
    phi_mid = lambda k: float(schedule.phi((k + 0.5) * dt))
    M = prop.rotation(-dphi)[:, None] * U0  # V(-dphi) U0

    # segment boundaries at kicks
    bounds = [0]
    kicks_at = []
    for t0, t1, n_k, g in intervals:
        if n_k:
            bounds.append(g)
            kicks_at.append(n_k)
    if bounds[-1] != schedule.steps:
        bounds.append(schedule.steps)
        kicks_at.append(0)

    total = np.eye(system.dim, dtype=complex)
    if lead % 2:
        total = prop.kick[:, None] * total
    for (a, b), nk in zip(zip(bounds[:-1], bounds[1:]), kicks_at):
        if b <= a:
            seg = np.eye(system.dim, dtype=complex)
        else:
            core = U0 @ np.linalg.matrix_power(M, b - 1 - a)
            seg = prop.rotation(phi_mid(b - 1))[:, None] * core * prop.rotation(phi_mid(a)).conj()[None, :]
        total = seg @ total
        if nk % 2:
            total = prop.kick[:, None] * total
    return total


# --- open systems ----------------------------------------------------------------

def field_damping_kraus(dim: int, eta: float) -> list[np.ndarray]:
    """Exact Kraus operators of amplitude damping with intensity transmission ``eta``.

    ``E_k = sum_n sqrt(C(n,k)) eta^{(n-k)/2} (1-eta)^{k/2} |n-k><n|``, trace
    preserving on the truncated space because it only lowers photon number.
    """
    ops = []
    for k in range(dim):
        E = np.zeros((dim, dim), dtype=complex)
        for n in range(k, dim):
            E[n - k, n] = math.sqrt(math.comb(n, k)) * eta ** ((n - k) / 2) * (1 - eta) ** (k / 2)
        ops.append(E)
    return ops


def field_damping_superop(dim: int, gamma: float, dt: float) -> np.ndarray:
    """Row-major superoperator of ``exp(L_gamma dt)`` for ``L_gamma = (gamma/2)(2 a r a^+ - {a^+ a, r})``."""
    eta = math.exp(-gamma * dt)
    S = np.zeros((dim * dim, dim * dim), dtype=complex)
    for E in field_damping_kraus(dim, eta):
        S += np.kron(E, E.conj())
    return S


def lindblad_dissipator(c_ops: list[np.ndarray], dim: int) -> np.ndarray:
    """Row-major superoperator ``sum_c (C r C^+ - {C^+ C, r}/2)`` for already rate-weighted ``c_ops``."""
    I = np.eye(dim)
    L = np.zeros((dim * dim, dim * dim), dtype=complex)
    for C in c_ops:
        CdC = C.conj().T @ C
        L += np.kron(C, C.conj()) - 0.5 * np.kron(CdC, I) - 0.5 * np.kron(I, CdC.T)
    return L


def hamiltonian_superop(H: np.ndarray) -> np.ndarray:
    I = np.eye(H.shape[0])
    return -1j * (np.kron(H, I) - np.kron(I, H.T))


def atomic_jump_ops(system: System, rates: DissipationRates) -> list[np.ndarray]:
    """Rate-weighted jumps ``sqrt(kappa) |lower><upper|`` on the atom register, every atom."""
    ops = []
    for (upper, lower), k in rates.kappa.items():
        if not k:
            continue
        for j, atom in enumerate(system.atoms):
            if not (atom.has(upper) and atom.has(lower)):
                raise UnknownLabel(f"emission {upper}->{lower} needs levels {upper!r}, {lower!r} in {atom.levels}")
            ops.append(math.sqrt(k) * system.atom_register_op(jump(atom, upper, lower), j))
    return ops


class LindbladStepper:
    """Structured exact dissipator maps acting on the (atom, field) factors of ``rho``."""

    def __init__(self, system: System, rates: DissipationRates, method: str = "factored"):
        self.system = system
        self.rates = rates
        self.method = method
        self._maps: dict[tuple[str, float], np.ndarray] = {}
        A, N = system.atom_dim, system.fock.dim
        self._atom_L = lindblad_dissipator(atomic_jump_ops(system, rates), A)
        if method == "dense":
            if system.dim > 12:
                raise ValueError("dense superoperator fallback is limited to dim <= 12")
            D = system.dim
            self._dense_Lg = lindblad_dissipator([math.sqrt(rates.gamma) * system.a], D) if rates.gamma else None
            c_full = [np.kron(c, np.eye(N)) for c in atomic_jump_ops(system, rates)]
            self._dense_Lk = lindblad_dissipator(c_full, D) if c_full else None

    def field_map(self, dt: float) -> np.ndarray | None:
        if not self.rates.gamma:
            return None
        key = ("f", dt)
        if key not in self._maps:
            if self.method == "dense":
                self._maps[key] = expm(self._dense_Lg, dt) if self._dense_Lg is not None else None
            else:
                self._maps[key] = field_damping_superop(self.system.fock.dim, self.rates.gamma, dt)
        return self._maps[key]

    def atom_map(self, dt: float) -> np.ndarray | None:
        if not any(self.rates.kappa.values()):
            return None
        key = ("a", dt)
        if key not in self._maps:
            if self.method == "dense":
                self._maps[key] = expm(self._dense_Lk, dt)
            else:
                self._maps[key] = expm(self._atom_L, dt)
        return self._maps[key]

    def apply(self, rho: np.ndarray, dt: float) -> np.ndarray:
        A, N = self.system.atom_dim, self.system.fock.dim
        D = A * N
        Sg = self.field_map(dt)
        Sk = self.atom_map(dt)
        if self.method == "dense":
            v = rho.reshape(D * D)
            if Sg is not None:
                v = Sg @ v
            if Sk is not None:
                v = Sk @ v
            return v.reshape(D, D)
        # (a, n, b, m) -> (a, b, n, m)
        r = rho.reshape(A, N, A, N).transpose(0, 2, 1, 3).reshape(A * A, N * N)
        if Sg is not None:
            r = r @ Sg.T
        if Sk is not None:
            r = Sk @ r
        return r.reshape(A, A, N, N).transpose(0, 2, 1, 3).reshape(D, D)

    def step_superop(self, U: np.ndarray, dt: float) -> np.ndarray:
        """Full row-major superoperator of one split step (for small-dimension checks)."""
        D = self.system.dim
        cols = []
        for idx in range(D * D):
            E = np.zeros(D * D, dtype=complex)
            E[idx] = 1.0
            E = E.reshape(D, D)
            cols.append(self.apply(U @ E @ U.conj().T, dt).reshape(D * D))
        return np.array(cols).T


def choi_matrix(superop: np.ndarray, dim: int) -> np.ndarray:
    """Choi matrix ``sum_ij |i><j| (x) S(|i><j|)`` of a row-major superoperator."""
    C = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            E = np.zeros(dim * dim, dtype=complex)
            E[i * dim + j] = 1.0
            out = (superop @ E).reshape(dim, dim)
            Eij = np.zeros((dim, dim))
            Eij[i, j] = 1.0
            C += np.kron(Eij, out)
    return C


def evolve_lindblad(
    schedule: SweepSchedule,
    m: ModelParams,
    rho0: np.ndarray,
    rates: DissipationRates,
    system: System | None = None,
    method: str = "factored",
    check_every: int = 200,
    record: bool = True,
) -> EvolutionResult:
    """Split-step master-equation evolution: unitary, then field decay, then atomic decay.

    ``method="dense"`` exponentiates each full dissipator superoperator instead
    of using the factored maps (only for ``dim <= 12``).
    """
    rho0 = np.asarray(rho0, dtype=complex)
    system = system or _default_system(rho0.shape[0], m)
    if rho0.shape != (system.dim, system.dim):
        raise DimensionMismatch(f"density matrix shape {rho0.shape} != system dim {system.dim}")
    check_density_matrix(rho0)
    prop = Propagator(system, m)
    stepper = LindbladStepper(system, rates, method)
    lead, intervals = _step_intervals(schedule)
    k = prop.kick
    kk = np.outer(k, k)

    rho = rho0.copy()
    for _ in range(lead):
        rho = kk * rho

    S = schedule.steps
    alpha = np.zeros(S + 1, dtype=complex)
    leak = np.zeros(S + 1)
    trace = np.ones(S + 1)

    def _record(i, t):
        p = schedule.pump(t)
        alpha[i] = prop.mean_alpha(rho)
        leak[i] = 1.0 - prop.dark_weight(rho, prop.dark_alpha_at(p))
        trace[i] = np.trace(rho).real

    if record:
        _record(0, 0.0)
    min_eig = 0.0
    for n_step, (t0, t1, n_kicks, grid_i) in enumerate(intervals):
        tm = 0.5 * (t0 + t1)
        dt = t1 - t0
        U = prop.step_unitary(float(schedule.omega(tm)), float(schedule.phi(tm)), dt)
        rho = U @ rho @ U.conj().T
        rho = stepper.apply(rho, dt)
        rho = 0.5 * (rho + rho.conj().T)
        for _ in range(n_kicks):
            rho = kk * rho
        if record and grid_i is not None:
            _record(grid_i, t1)
        if check_every and (n_step % check_every == 0):
            min_eig = min(min_eig, _check_state(rho))
    min_eig = min(min_eig, _check_state(rho))
    diag = {"trace_drift": float(abs(np.trace(rho).real - 1)), "min_eigenvalue": float(min_eig)}
    if record:
        diag["final_leakage"] = float(leak[-1])
    return EvolutionResult(rho, schedule.times(), alpha, trace, leak, None, diag)


def _check_state(rho: np.ndarray) -> float:
    tr = np.trace(rho).real
    if abs(tr - 1) > TRACE_TOL:
        raise NonPhysicalState(f"trace drifted to {tr:.12g}")
    lo = float(np.linalg.eigvalsh(rho)[0])
    if lo < -POS_TOL:
        raise NonPhysicalState(f"negative eigenvalue {lo:.3g}")
    return lo
