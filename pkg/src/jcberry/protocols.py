"""Ramsey interferometry on the g/f qubit and dark-state geometric phase gates.

Both beam-splitter pulses act on the ``(g, f)`` amplitudes as
``g -> (g - f)/sqrt2``, ``f -> (f + g)/sqrt2``; the first prepares
``(g + f)/sqrt2`` from ``f``.  With a phase ``beta`` on the g branch this
gives ``P_g = (1 + cos beta)/2``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import noise as noise_mod
from .errors import BudgetExceeded, DimensionMismatch, NormalizationError
from .geometry import principal
from .hilbert import (
    AtomSpace,
    FockSpace,
    System,
    coherent_state,
    displaced_number_state,
    fock_dim_for,
)
from .model import ModelParams, SweepSchedule, common_ratio, register_dark_state
from .propagator import DissipationRates, Propagator, evolve_lindblad, sweep_propagator

SQRT_HALF = 1 / math.sqrt(2)
# rows/cols ordered (g, f)
BEAM_SPLITTER = SQRT_HALF * np.array([[1.0, 1.0], [-1.0, 1.0]])


# --- initial fields -----------------------------------------------------------

@dataclass(frozen=True)
class InitialField:
    """``kind`` is ``dark``, ``coherent``, ``displaced-number`` or ``thermal``.

    ``alpha=None`` means the dark value at the start of the schedule.
    """

    kind: str = "dark"
    alpha: complex | None = None
    n: int = 0
    nbar: float = 0.0
    max_components: int = 8
    cutoff: float = 1e-4

    def __post_init__(self):
        if self.kind not in ("dark", "coherent", "displaced-number", "thermal"):
            raise ValueError(f"unknown initial field {self.kind!r}")
        if self.nbar < 0 or self.n < 0:
            raise ValueError("photon numbers must be non-negative")

    def components(self, alpha0: complex) -> list[tuple[float, complex, int]]:
        """Mixture ``[(weight, alpha, n)]`` of displaced number states."""
        a = alpha0 if self.alpha is None else complex(self.alpha)
        if self.kind in ("dark", "coherent"):
            return [(1.0, a, 0)]
        if self.kind == "displaced-number":
            return [(1.0, a, self.n)]
        if self.nbar == 0:
            return [(1.0, a, 0)]
        q = self.nbar / (1 + self.nbar)
        p = [(1 - q) * q**k for k in range(self.max_components)]
        keep = [(w, a, k) for k, w in enumerate(p) if w >= self.cutoff]
        tot = sum(w for w, _, _ in keep)
        return [(w / tot, a, k) for w, a, k in keep]

    def n_max(self) -> int:
        return max(k for _, _, k in self.components(0j))


@dataclass
class RamseyConfig:
    schedule: SweepSchedule
    model: ModelParams = field(default_factory=ModelParams)
    initial_field: InitialField = field(default_factory=InitialField)
    rates: DissipationRates | None = None
    fock_dim: int | None = None
    offsets: int = 16
    reference: float | None = None
    method: str = "factored"


@dataclass
class RamseyResult:
    Pg: float
    Pf: float
    beta: float
    visibility: float
    fit_residual: float
    coherence: complex
    populations: dict
    leakage: float
    offsets: np.ndarray
    Pg_scan: np.ndarray

    def summary(self) -> dict:
        return {"Pg": self.Pg, "Pf": self.Pf, "beta": self.beta, "visibility": self.visibility,
                "fit_residual": self.fit_residual, "leakage": self.leakage}


def _atom_levels(rates: DissipationRates | None) -> tuple[str, ...]:
    levels = ["f", "g", "e"]
    if rates is not None:
        for l in sorted(rates.levels_needed()):
            if l not in levels:
                levels.append(l)
    return tuple(levels)


def _fock_dim(cfg: RamseyConfig, alpha0: complex) -> int:
    if cfg.fock_dim:
        return cfg.fock_dim
    r = max(abs(cfg.schedule.omega(0.0)) / cfg.model.lam, abs(alpha0),
            abs(cfg.initial_field.alpha) if cfg.initial_field.alpha is not None else 0.0)
    return fock_dim_for(r, cfg.initial_field.n_max())


def final_pulse_populations(rho_atom: np.ndarray, atom: AtomSpace, chi: float = 0.0) -> dict[str, float]:
    """Populations after an offset phase ``chi`` on ``g`` and the closing pulse."""
    ig, i_f = atom.index("g"), atom.index("f")
    B = np.eye(atom.dim, dtype=complex)
    B[np.ix_([ig, i_f], [ig, i_f])] = BEAM_SPLITTER
    Z = np.ones(atom.dim, dtype=complex)
    Z[ig] = np.exp(1j * chi)
    W = B * Z[None, :]
    out = W @ rho_atom @ W.conj().T
    return {l: float(out[i, i].real) for i, l in enumerate(atom.levels)}


def fit_fringe(offsets: np.ndarray, Pg: np.ndarray) -> tuple[float, float, float]:
    """Least-squares ``Pg = A + V/2 cos(chi + beta)``; returns ``(beta, V, rms residual)``."""
    X = np.column_stack([np.ones_like(offsets), np.cos(offsets), np.sin(offsets)])
    coef, *_ = np.linalg.lstsq(X, Pg, rcond=None)
    _, C, S = coef
    res = float(np.sqrt(np.mean((X @ coef - Pg) ** 2)))
    return math.atan2(-S, C), 2 * math.hypot(C, S), res


def _near(beta: float, ref: float) -> float:
    return ref + principal(beta - ref)


def _ramsey_from_atom(rho_atom, atom, cfg, leakage, ref):
    chis = np.linspace(0, 2 * math.pi, cfg.offsets, endpoint=False)
    scan = np.array([final_pulse_populations(rho_atom, atom, c)["g"] for c in chis])
    beta, vis, res = fit_fringe(chis, scan)
    pops = final_pulse_populations(rho_atom, atom, 0.0)
    ig, i_f = atom.index("g"), atom.index("f")
    return RamseyResult(
        Pg=pops["g"], Pf=pops["f"], beta=_near(beta, ref), visibility=vis, fit_residual=res,
        coherence=complex(rho_atom[ig, i_f]), populations=pops, leakage=leakage,
        offsets=chis, Pg_scan=scan,
    )


def run_ramsey(cfg: RamseyConfig) -> RamseyResult:
    """Prepare ``(g + f)/sqrt2`` with the chosen field, sweep, close the interferometer.

    ``beta`` is the fitted fringe shift, reported on the branch nearest
    ``cfg.reference`` (default ``-2 pi r^2``).
    """
    m, sch = cfg.model, cfg.schedule
    if m.n_qubits != 1:
        raise DimensionMismatch("Ramsey protocol uses one qubit")
    Omega0 = float(sch.omega(0.0))
    alpha0 = -Omega0 * np.exp(1j * float(sch.phi(0.0))) / m.lam
    r = Omega0 / m.lam
    ref = cfg.reference if cfg.reference is not None else -2 * math.pi * r * r
    levels = _atom_levels(cfg.rates)
    system = System.single(_fock_dim(cfg, alpha0), levels)
    atom = system.atoms[0]
    fock = system.fock
    a_init = np.zeros(atom.dim, dtype=complex)
    a_init[atom.index("g")] = a_init[atom.index("f")] = SQRT_HALF
    comps = cfg.initial_field.components(alpha0)

    def field_state(a, n):
        if n == 0:
            return coherent_state(a, fock)
        return displaced_number_state(a, n, fock)

    prop = Propagator(system, m)
    alpha_end = prop.dark_alpha_at(sch.pump(sch.T))
    if cfg.rates is None or cfg.rates.is_zero:
        U = sweep_propagator(sch, m, system)
        rho_atom = np.zeros((atom.dim, atom.dim), dtype=complex)
        leak = 0.0
        for w, a, n in comps:
            psi = U @ system.product(a_init, field_state(a, n))
            rho_atom += w * system.reduced_atom(psi)
            if n == 0:
                leak += w * (1 - prop.dark_weight(psi, alpha_end))
        return _ramsey_from_atom(rho_atom, atom, cfg, leak, ref)

    rho0 = np.zeros((system.dim, system.dim), dtype=complex)
    for w, a, n in comps:
        psi = system.product(a_init, field_state(a, n))
        rho0 += w * np.outer(psi, psi.conj())
    res = evolve_lindblad(sch, m, rho0, cfg.rates, system, method=cfg.method, record=False)
    leak = 1 - prop.dark_weight(res.final, alpha_end)
    return _ramsey_from_atom(system.reduced_atom(res.final), atom, cfg, leak, ref)


def run_ramsey_echo(cfg: RamseyConfig) -> RamseyResult:
    if not cfg.schedule.kick_times:
        raise ValueError("echo protocol needs at least one kick time in the schedule")
    return run_ramsey(cfg)


def fringe_scan(r_values, make_cfg) -> list[tuple[float, RamseyResult]]:
    """Run ``make_cfg(r)`` for every control value."""
    return [(float(r), run_ramsey(make_cfg(float(r)))) for r in r_values]


def fringe_scan_csv(rows: list[tuple[float, RamseyResult]]) -> str:
    lines = ["control,Pg,Pf,beta_fit,visibility"]
    for c, res in rows:
        lines.append(f"{c!r},{res.Pg!r},{res.Pf!r},{res.beta!r},{res.visibility!r}")
    return "\n".join(lines) + "\n"


# --- gates ---------------------------------------------------------------------

@dataclass
class GateSpec:
    """``n``-qubit gate from one dark-state circular sweep with ``Omega_j = r lambda_j``."""

    schedule: SweepSchedule
    lambdas: tuple[float, ...] = (1.0, 1.0)
    deltas: tuple[float, ...] | None = None
    fock_dim: int | None = None
    max_dim: int = 2000

    @property
    def n_qubits(self) -> int:
        return len(self.lambdas)

    def model(self) -> ModelParams:
        return ModelParams(lam=self.lambdas[0], lambdas=tuple(self.lambdas), deltas=self.deltas)

    @property
    def r(self) -> float:
        return common_ratio(self.model(), float(self.schedule.omega(0.0)))


@dataclass
class GateResult:
    U: np.ndarray
    common_phase: float
    raw: np.ndarray
    basis: list[str]
    leakage: float

    @property
    def conditional_phase(self) -> float:
        """``arg U[ff, ff]`` relative to the other diagonal entries."""
        return float(np.angle(self.U[-1, -1]))

    def to_json(self, U_ideal: np.ndarray | None = None) -> str:
        d = {
            "basis": self.basis,
            "re": self.U.real.tolist(),
            "im": self.U.imag.tolist(),
            "common_phase": self.common_phase,
            "conditional_phase": self.conditional_phase,
            "leakage": self.leakage,
        }
        if U_ideal is not None:
            d["fidelity"] = gate_fidelity(self.U, U_ideal)
        return json.dumps(d, indent=2)


def computational_basis(n: int) -> list[str]:
    """Label strings ordered with ``g`` before ``f`` per qubit, ``f...f`` last."""
    return ["".join(t) for t in itertools.product("gf", repeat=n)]


def ideal_gate(n: int, beta: float) -> np.ndarray:
    """``exp(-i beta |f..f><f..f|)`` in :func:`computational_basis` order."""
    d = np.ones(2**n, dtype=complex)
    d[-1] = np.exp(-1j * beta)
    return np.diag(d)


def simulate_gate(spec: GateSpec) -> GateResult:
    """Effective operator on the computational subspace, common phase factored out.

    ``raw[i, j] = <phi_i, alpha_0| U |phi_j, alpha_0>``; the common phase is
    the circular mean of the non-``f..f`` diagonal phases.
    """
    n = spec.n_qubits
    if n > 3:
        raise BudgetExceeded("dense gate simulation is limited to n <= 3 qubits")
    m = spec.model()
    sch = spec.schedule
    r = spec.r
    alpha0 = -r * np.exp(1j * float(sch.phi(0.0)))
    N = spec.fock_dim or fock_dim_for(r)
    if 3**n * N > spec.max_dim:
        raise BudgetExceeded(f"state dimension {3**n * N} exceeds budget {spec.max_dim}")
    system = System.register(n, N)
    U = sweep_propagator(sch, m, system)
    basis = computational_basis(n)
    kets = np.column_stack([register_dark_state(system, b, alpha0) for b in basis])
    out = U @ kets
    raw = kets.conj().T @ out
    leak = float(np.max(1 - np.sum(np.abs(raw) ** 2, axis=0)))
    diag = np.diag(raw)[:-1]
    common = float(np.angle(np.sum(diag / np.abs(diag))))
    return GateResult(raw * np.exp(-1j * common), common, raw, basis, leak)


def gate_fidelity(U_sim: np.ndarray, U_ideal: np.ndarray) -> float:
    """``|tr(U_ideal^dag U_sim)| / d``."""
    U_sim, U_ideal = np.asarray(U_sim), np.asarray(U_ideal)
    if U_sim.shape != U_ideal.shape:
        raise DimensionMismatch(f"{U_sim.shape} vs {U_ideal.shape}")
    return float(abs(np.trace(U_ideal.conj().T @ U_sim)) / U_sim.shape[0])


def entangled_fidelity(U_sim: np.ndarray, U_ideal: np.ndarray) -> float:
    """Overlap fidelity of ``(U (x) I)|Phi+>`` against the ideal output."""
    d = U_sim.shape[0]
    phi = np.eye(d).reshape(d * d) / math.sqrt(d)
    out = np.kron(U_sim, np.eye(d)) @ phi
    ideal = np.kron(U_ideal, np.eye(d)) @ phi
    return float(abs(np.vdot(ideal, out)) ** 2)


@dataclass
class NoisyGateResult:
    fidelity: float
    infidelity: float
    infidelity_se: float
    epsilon: float
    F: float
    var_beta: float
    n_trajectories: int
    rng_seed: int


def gate_with_noise(
    c1: complex,
    c2: complex,
    r: float,
    T: float,
    lam: float,
    noise_Omega: noise_mod.NoiseProcessParams,
    noise_phi: noise_mod.NoiseProcessParams,
    n_traj: int,
    seed: int,
    steps: int = 2000,
    workers: int = 1,
) -> NoisyGateResult:
    """Monte Carlo gate infidelity from the adiabatic noisy-sweep map.

    Each trajectory leaves ``c1 e^{i theta}|psi_a>|alpha_T> + c2|f..f>|alpha_0>``;
    the reported fidelity is ``sqrt(<psi_ideal| rho |psi_ideal>)`` of the qubit
    state, whose deficit is what ``|c1 c2|^2 (1 - F)`` estimates.
    """
    norm = abs(c1) ** 2 + abs(c2) ** 2
    if abs(norm - 1) > 1e-9:
        raise NormalizationError(f"|c1|^2 + |c2|^2 = {norm!r}")
    beta0 = -2 * math.pi * r * r
    z, betas = noise_mod.coherence_samples(noise_Omega, noise_phi, r, T, lam, steps, n_traj, seed, workers)
    w = np.real(z * np.exp(-1j * beta0))
    a, b = abs(c1) ** 2, abs(c2) ** 2
    p = a * a + b * b + 2 * a * b * w
    fid2 = float(np.mean(p))
    fid = math.sqrt(fid2)
    se = float(np.std(p, ddof=1) / math.sqrt(n_traj)) / (2 * fid)
    var_beta = float(np.var(betas, ddof=1))
    F = noise_mod.coherence_factor(var_beta, noise_Omega.sigma_sq, noise_phi.sigma_sq, lam, beta0)
    eps = noise_mod.gate_infidelity(c1, c2, F)
    return NoisyGateResult(fid, 1 - fid, se, eps, F, var_beta, n_traj, seed)
