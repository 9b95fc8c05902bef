"""Ornstein-Uhlenbeck pump fluctuations and the statistics of the noisy geometric phase.

Random numbers come from a Philox generator keyed by ``(seed, trajectory,
stream)``, so every trajectory is reproducible on its own and Monte Carlo
results do not depend on how trajectories are split across workers.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, signal

from .errors import NormalizationError  # noqa: F401  (re-exported)

STREAM_OMEGA, STREAM_PHI = 0, 1


@dataclass(frozen=True)
class NoiseProcessParams:
    """Bandwidth ``Gamma`` and stationary variance ``sigma_sq`` of one OU control fluctuation."""

    Gamma: float
    sigma_sq: float = 0.0

    def __post_init__(self):
        if not self.Gamma > 0:
            raise ValueError("bandwidth Gamma must be positive")
        if self.sigma_sq < 0:
            raise ValueError("intensity sigma_sq must be non-negative")

    def check_adiabatic(self, lam: float) -> bool:
        ok = self.Gamma <= lam / 10
        if not ok:
            warnings.warn(f"noise bandwidth {self.Gamma:g} exceeds lambda/10; adiabatic formulas may fail",
                          stacklevel=2)
        return ok


@dataclass
class NoiseRealization:
    dt: float
    delta_Omega: np.ndarray
    delta_phi: np.ndarray

    def __post_init__(self):
        if len(self.delta_Omega) != len(self.delta_phi):
            raise ValueError("series lengths differ")

    @property
    def steps(self) -> int:
        return len(self.delta_Omega) - 1

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)


def rng_for(seed: int, traj: int = 0, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for one ``(seed, trajectory, stream)`` key."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(traj), int(stream)])))


def sample_ou(
    params: NoiseProcessParams,
    dt: float,
    steps: int,
    seed: int,
    traj: int = 0,
    stream: int = 0,
    stationary: bool = False,
) -> np.ndarray:
    """Exact OU samples ``x_0 .. x_steps``.

    ``x_{k+1} = x_k e^{-Gamma dt} + sigma sqrt(1 - e^{-2 Gamma dt}) xi_k``.
    ``x_0 = 0`` unless ``stationary``, which draws ``x_0 ~ N(0, sigma^2)``
    from the same stream.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if params.sigma_sq == 0:
        return np.zeros(steps + 1)
    rng = rng_for(seed, traj, stream)
    sigma = math.sqrt(params.sigma_sq)
    x0 = sigma * rng.standard_normal() if stationary else 0.0
    xi = rng.standard_normal(steps)
    a = math.exp(-params.Gamma * dt)
    s = sigma * math.sqrt(-math.expm1(-2 * params.Gamma * dt))
    y, _ = signal.lfilter([s], [1.0, -a], xi, zi=[a * x0])
    return np.concatenate(([x0], y))


def sample_realization(
    p_Omega: NoiseProcessParams, p_phi: NoiseProcessParams, T: float, steps: int, seed: int,
    traj: int = 0, stationary: bool = False,
) -> NoiseRealization:
    dt = T / steps
    return NoiseRealization(
        dt,
        sample_ou(p_Omega, dt, steps, seed, traj, STREAM_OMEGA, stationary),
        sample_ou(p_phi, dt, steps, seed, traj, STREAM_PHI, stationary),
    )


def ou_autocovariance(params: NoiseProcessParams, t: float, tau: float, x0_var: float = 0.0) -> float:
    """``Cov(x_t, x_{t+tau})`` for an OU process started with variance ``x0_var``."""
    G, s2 = params.Gamma, params.sigma_sq
    var_t = s2 + (x0_var - s2) * math.exp(-2 * G * t)
    return var_t * math.exp(-G * tau)


# --- phase functionals ---------------------------------------------------------

def noisy_berry_phase(real: NoiseRealization, r0: float, T: float, lam: float = 1.0, full: bool = False) -> float:
    """Linear-response phase of the noisy circular sweep.

    Reduced form ``beta0 - (4 pi / T) r0 int dr dt`` (trapezoid); ``full`` adds
    ``-r0^2 (dphi(T) - dphi(0)) + r0^2 sin(dphi(T) - dphi(0))``.
    """
    beta0 = -2 * math.pi * r0 * r0
    dr = np.asarray(real.delta_Omega) / lam
    beta = beta0 - (4 * math.pi / T) * r0 * float(integrate.trapezoid(dr, dx=real.dt))
    if full:
        dphi = float(real.delta_phi[-1] - real.delta_phi[0])
        beta += -r0 * r0 * dphi + r0 * r0 * math.sin(dphi)
    return beta


def variance_analytic(beta0: float, sigma_Omega_sq: float, Gamma_Omega: float, lam: float, T: float) -> float:
    """Phase variance for stationary Rabi-frequency noise."""
    x = Gamma_Omega * T
    return 16 * math.pi * abs(beta0) * sigma_Omega_sq / (lam * x) ** 2 * (x - 1 + math.exp(-x))


def variance_pinned(beta0: float, sigma_Omega_sq: float, Gamma_Omega: float, lam: float, T: float) -> float:
    """Same variance when the fluctuation starts at exactly zero."""
    x = Gamma_Omega * T
    e = math.exp(-x)
    return 8 * math.pi * abs(beta0) * sigma_Omega_sq / (lam * x) ** 2 * (2 * (x - 1 + e) - (1 - e) ** 2)


def variance_limits(beta0: float, sigma_Omega_sq: float, Gamma_Omega: float, lam: float, T: float) -> tuple[float, float]:
    """``(Gamma T >> 1, Gamma T << 1)`` asymptotes of :func:`variance_analytic`."""
    return (16 * math.pi * abs(beta0) * sigma_Omega_sq / (lam * lam * Gamma_Omega * T),
            8 * math.pi * abs(beta0) * sigma_Omega_sq / lam**2)


def coherence_factor(var_beta: float, sigma_Omega_sq: float, sigma_phi_sq: float, lam: float, beta0: float) -> float:
    if min(var_beta, sigma_Omega_sq, sigma_phi_sq) < 0:
        raise ValueError("variances must be non-negative")
    return math.exp(-var_beta / 2 - sigma_Omega_sq / (2 * lam * lam) - abs(beta0) * sigma_phi_sq / (4 * math.pi))


def gate_infidelity(c1: complex, c2: complex, F: float) -> float:
    norm = abs(c1) ** 2 + abs(c2) ** 2
    if abs(norm - 1) > 1e-9:
        raise NormalizationError(f"|c1|^2 + |c2|^2 = {norm!r}")
    return abs(c1 * c2) ** 2 * (1 - F)


# --- mergeable moments ---------------------------------------------------------

@dataclass
class RunningStats:
    """Count, mean and central moments 2 and 3; ``merge`` combines disjoint samples."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0

    @classmethod
    def of(cls, x) -> "RunningStats":
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return cls()
        mu = float(np.mean(x))
        d = x - mu
        return cls(int(x.size), mu, float(np.sum(d * d)), float(np.sum(d**3)))

    def merge(self, other: "RunningStats") -> "RunningStats":
        if other.n == 0:
            return RunningStats(self.n, self.mean, self.m2, self.m3)
        if self.n == 0:
            return RunningStats(other.n, other.mean, other.m2, other.m3)
        n = self.n + other.n
        d = other.mean - self.mean
        mean = self.mean + d * other.n / n
        m2 = self.m2 + other.m2 + d * d * self.n * other.n / n
        m3 = (self.m3 + other.m3 + d**3 * self.n * other.n * (self.n - other.n) / n**2
              + 3 * d * (self.n * other.m2 - other.n * self.m2) / n)
        return RunningStats(n, mean, m2, m3)

    @property
    def variance(self) -> float:
        return self.m2 / (self.n - 1)

    @property
    def skewness(self) -> float:
        if self.m2 == 0:
            return 0.0
        return math.sqrt(self.n) * self.m3 / self.m2**1.5

    @property
    def se_mean(self) -> float:
        return math.sqrt(self.variance / self.n)

    @property
    def se_variance(self) -> float:
        """Gaussian-sample standard error of the variance."""
        return self.variance * math.sqrt(2.0 / (self.n - 1))


@dataclass
class NoiseStatistics:
    mean_beta: float
    var_beta: float
    analytic_var: float
    F: float
    epsilon: float
    n_trajectories: int
    rng_seed: int
    se_mean: float = float("nan")
    se_var: float = float("nan")
    skewness: float = float("nan")
    beta0: float = float("nan")
    analytic_var_pinned: float = float("nan")
    stationary_start: bool = True

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


# --- Monte Carlo ---------------------------------------------------------------

def _chunks(n_traj: int, chunk: int) -> list[tuple[int, int]]:
    return [(s, min(s + chunk, n_traj)) for s in range(0, n_traj, chunk)]


def _phase_chunk(args) -> np.ndarray:
    pO, pP, r0, T, lam, steps, seed, lo, hi, stationary, full = args
    out = np.empty(hi - lo)
    for i, k in enumerate(range(lo, hi)):
        real = sample_realization(pO, pP, T, steps, seed, k, stationary)
        out[i] = noisy_berry_phase(real, r0, T, lam, full)
    return out


def _map_chunks(fn, jobs, workers: int):
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))  # map preserves job order


def phase_samples(
    params_Omega: NoiseProcessParams, params_phi: NoiseProcessParams, r0: float, T: float,
    lam: float = 1.0, steps: int = 2000, n_traj: int = 10000, seed: int = 0,
    stationary: bool = True, full: bool = False, workers: int = 1, chunk: int = 1000,
) -> np.ndarray:
    jobs = [(params_Omega, params_phi, r0, T, lam, steps, seed, lo, hi, stationary, full)
            for lo, hi in _chunks(n_traj, chunk)]
    return np.concatenate(_map_chunks(_phase_chunk, jobs, workers))


def mc_phase_statistics(
    params_Omega: NoiseProcessParams,
    params_phi: NoiseProcessParams,
    r0: float,
    T: float,
    steps: int = 2000,
    n_traj: int = 10000,
    seed: int = 0,
    lam: float = 1.0,
    stationary: bool = True,
    full: bool = False,
    workers: int = 1,
    chunk: int = 1000,
    c1: complex = 1 / math.sqrt(2),
    c2: complex = 1 / math.sqrt(2),
    return_samples: bool = False,
):
    """Sample mean/variance of the noisy phase against the analytic variance.

    ``stationary`` starts each fluctuation from its stationary distribution,
    the statistics under which the analytic variance holds; the pinned-start
    value is reported alongside in ``analytic_var_pinned``.
    """
    if n_traj < 100:
        raise ValueError("need at least 100 trajectories")
    params_Omega.check_adiabatic(lam)
    jobs = [(params_Omega, params_phi, r0, T, lam, steps, seed, lo, hi, stationary, full)
            for lo, hi in _chunks(n_traj, chunk)]
    parts = _map_chunks(_phase_chunk, jobs, workers)
    stats = RunningStats()
    for p in parts:
        stats = stats.merge(RunningStats.of(p))
    beta0 = -2 * math.pi * r0 * r0
    F = coherence_factor(stats.variance, params_Omega.sigma_sq, params_phi.sigma_sq, lam, beta0)
    res = NoiseStatistics(
        mean_beta=stats.mean,
        var_beta=stats.variance,
        analytic_var=variance_analytic(beta0, params_Omega.sigma_sq, params_Omega.Gamma, lam, T),
        F=F,
        epsilon=gate_infidelity(c1, c2, F),
        n_trajectories=stats.n,
        rng_seed=seed,
        se_mean=stats.se_mean,
        se_var=stats.se_variance,
        skewness=stats.skewness,
        beta0=beta0,
        analytic_var_pinned=variance_pinned(beta0, params_Omega.sigma_sq, params_Omega.Gamma, lam, T),
        stationary_start=stationary,
    )
    if return_samples:
        return res, np.concatenate(parts)
    return res


def samples_csv(betas) -> str:
    lines = ["traj,beta"] + [f"{k},{float(b)!r}" for k, b in enumerate(betas)]
    return "\n".join(lines) + "\n"


# --- coherence of the noisy Ramsey state -----------------------------------------

def sweep_coherence(real: NoiseRealization, r0: float, T: float, lam: float = 1.0) -> complex:
    """``e^{i theta(T)} <alpha(0)|alpha(T)>`` for one realization of the adiabatic map.

    ``theta = -int r^2 dphi`` along ``alpha(t) = -(r0 + dr) e^{i phi}`` with
    ``phi = 2 pi t/T + dphi``, summed with segment-midpoint radii.
    """
    t = real.times()
    rad = r0 + np.asarray(real.delta_Omega) / lam
    phi = 2 * math.pi * t / T + np.asarray(real.delta_phi)
    rm = 0.5 * (rad[1:] + rad[:-1])
    theta = -float(np.sum(rm * rm * np.diff(phi)))
    a0 = -rad[0] * np.exp(1j * phi[0])
    aT = -rad[-1] * np.exp(1j * phi[-1])
    ov = np.exp(np.conj(a0) * aT - 0.5 * abs(a0) ** 2 - 0.5 * abs(aT) ** 2)
    return complex(np.exp(1j * theta) * ov)


def _coherence_chunk(args):
    pO, pP, r0, T, lam, steps, seed, lo, hi = args
    z = np.empty(hi - lo, dtype=complex)
    for i, k in enumerate(range(lo, hi)):
        z[i] = sweep_coherence(sample_realization(pO, pP, T, steps, seed, k, stationary=False), r0, T, lam)
    return z


def coherence_samples(
    params_Omega: NoiseProcessParams, params_phi: NoiseProcessParams, r0: float, T: float,
    lam: float = 1.0, steps: int = 2000, n_traj: int = 10000, seed: int = 0,
    workers: int = 1, chunk: int = 1000,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-trajectory coherences ``z`` and phases ``arg z`` (fluctuations start at zero)."""
    jobs = [(params_Omega, params_phi, r0, T, lam, steps, seed, lo, hi) for lo, hi in _chunks(n_traj, chunk)]
    z = np.concatenate(_map_chunks(_coherence_chunk, jobs, workers))
    beta0 = -2 * math.pi * r0 * r0
    betas = beta0 + np.angle(z * np.exp(-1j * beta0))
    return z, betas


@dataclass
class CoherenceCheck:
    F_mc: float
    se: float
    F_formula: float
    var_beta: float
    n_trajectories: int


def mc_coherence(
    params_Omega: NoiseProcessParams, params_phi: NoiseProcessParams, r0: float, T: float,
    lam: float = 1.0, steps: int = 2000, n_traj: int = 10000, seed: int = 0, workers: int = 1,
) -> CoherenceCheck:
    """Shrinkage ``|E z|`` of the averaged off-diagonal element versus the closed-form factor.

    The closed form is fed the sample phase variance of the same trajectories.
    """
    z, betas = coherence_samples(params_Omega, params_phi, r0, T, lam, steps, n_traj, seed, workers)
    mz = np.mean(z)
    proj = np.real(z * np.exp(-1j * np.angle(mz)))
    var_beta = float(np.var(betas, ddof=1))
    beta0 = -2 * math.pi * r0 * r0
    return CoherenceCheck(
        F_mc=float(abs(mz)),
        se=float(np.std(proj, ddof=1) / math.sqrt(len(z))),
        F_formula=coherence_factor(var_beta, params_Omega.sigma_sq, params_phi.sigma_sq, lam, beta0),
        var_beta=var_beta,
        n_trajectories=len(z),
    )


def noisy_schedule(real: NoiseRealization, r0: float, T: float, lam: float = 1.0):
    """Sweep schedule whose controls follow a realization (linear interpolation)."""
    from .model import SweepSchedule

    t = real.times()
    Om = lam * r0 + np.asarray(real.delta_Omega)
    ph = 2 * math.pi * t / T + np.asarray(real.delta_phi)
    return SweepSchedule(
        T=T,
        steps=real.steps,
        omega=lambda s: float(np.interp(s, t, Om)),
        phi=lambda s: float(np.interp(s, t, ph)),
        label="noisy-circle",
    )
