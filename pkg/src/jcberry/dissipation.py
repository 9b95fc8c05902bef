"""Closed-form Ramsey state, visibility and phase under field decay and atomic emission.

Conventions: the g-branch field follows the dark value ``alpha_0(t) = -r e^{i w t}``
while the f-branch field only decays.  The closed-form amplitudes drop that
common minus sign (overlaps are unchanged by ``alpha -> -alpha`` on both sides).
The closed forms let coherent amplitudes decay at rate ``gamma``; the exact
per-step map (``exact=True``) uses the amplitude rate ``gamma/2`` of the
master equation.  Both agree to first order in ``gamma T``.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .propagator import DissipationRates


def log_overlap(alpha2: complex, alpha1: complex) -> complex:
    """Analytic exponent of ``<alpha2|alpha1>``."""
    return alpha2.conjugate() * alpha1 - 0.5 * abs(alpha1) ** 2 - 0.5 * abs(alpha2) ** 2


def coherent_decay_map(
    alpha1: complex, alpha2: complex, gamma: float, dt: float, exact: bool = True
) -> tuple[complex, complex, complex]:
    """Image of ``|alpha1><alpha2|`` under field damping for a time ``dt``.

    Returns ``(scalar, alpha1', alpha2')``.  ``exact=True`` is the semigroup
    ``exp((1 - e^{-gamma dt}) X)`` with amplitudes scaled by ``e^{-gamma dt/2}``;
    ``exact=False`` is the short-time form ``exp(gamma dt X)`` with amplitudes
    scaled by ``e^{-gamma dt}``, the convention behind the closed forms.
    Here ``X`` is the log-overlap exponent, never a principal-value power.
    """
    if gamma * dt < 0:
        raise ValueError("gamma*dt must be non-negative")
    alpha1, alpha2 = complex(alpha1), complex(alpha2)
    X = log_overlap(alpha2, alpha1)
    if exact:
        eta = math.exp(-gamma * dt)
        return cmath.exp((1 - eta) * X), alpha1 * math.sqrt(eta), alpha2 * math.sqrt(eta)
    s = math.exp(-gamma * dt)
    return cmath.exp(gamma * dt * X), alpha1 * s, alpha2 * s


def atomic_decay_map(
    element: tuple[str, str], rates: DissipationRates, dt: float
) -> list[tuple[float, tuple[str, str]]]:
    """Image of the dyad ``|a><b|`` under atomic emission (first-order channels only).

    Diagonal dyads keep ``e^{-kappa_a dt}`` and feed each lower level ``j`` with
    ``(kappa_{a,j}/kappa_a)(1 - e^{-kappa_a dt})``; off-diagonal dyads scale by
    ``e^{-(kappa_a + kappa_b) dt/2}``.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    a, b = element
    ka, kb = rates.total_from(a), rates.total_from(b)
    if a != b:
        return [(math.exp(-0.5 * (ka + kb) * dt), (a, b))]
    out = [(math.exp(-ka * dt), (a, a))]
    if ka:
        lost = -math.expm1(-ka * dt)
        for (u, low), k in rates.kappa.items():
            if u == a and k:
                out.append((k / ka * lost, (low, low)))
    return out


def off_diagonal_phase_step(alpha1: complex, dalpha0: complex) -> tuple[float, complex]:
    """Adiabatic dark-branch step: phase ``-Im(conj(alpha1) dalpha0)`` and the shifted amplitude."""
    return -float((complex(alpha1).conjugate() * dalpha0).imag), alpha1 + dalpha0


@dataclass
class ClosedFormResult:
    r: float
    omega: float
    T: float
    gamma: float
    kappa_g: float
    kappa_f: float
    kappa_gf: float
    alpha_g: complex
    alpha_f: complex
    Gamma: float
    theta: float
    nu: float
    beta: float
    Pg: float
    Pf: float
    leaked: dict = field(default_factory=dict)
    leaked_alpha: dict = field(default_factory=dict)

    @property
    def population_total(self) -> float:
        return self.Pg + self.Pf + sum(self.leaked.values())

    def to_json(self) -> str:
        d = asdict(self)
        for key in ("alpha_g", "alpha_f"):
            d[key] = [d[key].real, d[key].imag]
        d["leaked_alpha"] = {k: [v.real, v.imag] for k, v in self.leaked_alpha.items()}
        d["population_total"] = self.population_total
        return json.dumps(d, indent=2)


def _gamma_theta(r, w, T, g, kg, kf) -> tuple[float, float]:
    d = g * g + w * w
    Gam = (kg + kf) * T / 2 + r * r * w * w / d * (0.5 * g * T + 0.25 * (-math.expm1(-2 * g * T)))
    theta = -r * r * (
        2 * math.pi
        - w * g * g * T / d
        - w * g * (w * w - 2 * g * g) / d**2 * (-math.expm1(-2 * g * T))
    )
    return Gam, theta


def _nu_beta(r, w, T, g, Gam, theta) -> tuple[float, float]:
    d = g * g + w * w
    nu = math.exp(-Gam + r * r * w * w / d * (math.exp(-g * T) - 0.5 * math.exp(-2 * g * T) - 0.5))
    beta = theta - r * r * w * g / d * math.exp(-g * T)
    return nu, beta


def alpha_g_leaked(r: float, omega: float, T: float, gamma: float, t: float) -> complex:
    """Field amplitude at ``T`` of the branch that emitted from ``g`` at time ``t``.

    Uses the remaining-time decay ``e^{-gamma (T - t)}``.
    """
    return r / (gamma + 1j * omega) * (1j * omega * cmath.exp(1j * omega * t) + gamma * math.exp(-gamma * t)) * math.exp(
        -gamma * (T - t)
    )


def closed_form_rho_T(r: float, omega: float, T: float, rates: DissipationRates) -> ClosedFormResult:
    """All closed-form quantities for the constant-``Omega`` circular Ramsey sweep."""
    g, kg, kf = rates.gamma, rates.kappa_g, rates.kappa_f
    kgf = rates.rate("g", "f")
    alpha_g = r / (g + 1j * omega) * (1j * omega + g * math.exp(-g * T))
    alpha_f = r * math.exp(-g * T)
    Gam, theta = _gamma_theta(r, omega, T, g, kg, kf)
    nu, beta = _nu_beta(r, omega, T, g, Gam, theta)
    feed = (kgf / kg) * -math.expm1(-kg * T) if kg else 0.0
    Pg = 0.25 * (math.exp(-kg * T) + math.exp(-kf * T) + feed + 2 * nu * math.cos(beta))
    Pf = 0.25 * (math.exp(-kg * T) + math.exp(-kf * T) + feed - 2 * nu * math.cos(beta))

    leaked, leaked_alpha = {}, {}
    for (u, low), k in rates.kappa.items():
        if not k or (u, low) == ("g", "f") or u not in ("g", "f"):
            continue
        if u == "g":
            w, _ = integrate.quad(lambda t: k * math.exp(-kg * t), 0, T, epsabs=1e-12)
            re, _ = integrate.quad(
                lambda t: k * math.exp(-kg * t) * alpha_g_leaked(r, omega, T, g, t).real, 0, T, epsabs=1e-10, limit=200
            )
            im, _ = integrate.quad(
                lambda t: k * math.exp(-kg * t) * alpha_g_leaked(r, omega, T, g, t).imag, 0, T, epsabs=1e-10, limit=200
            )
            leaked[low] = leaked.get(low, 0.0) + 0.5 * w
            leaked_alpha[low] = complex(re, im) / w if w else 0j
        else:
            leaked[low] = leaked.get(low, 0.0) + 0.5 * (k / kf) * -math.expm1(-kf * T)
            leaked_alpha[low] = complex(alpha_f)
    return ClosedFormResult(
        r, omega, T, g, kg, kf, kgf, complex(alpha_g), complex(alpha_f), Gam, theta, nu, beta, Pg, Pf, leaked, leaked_alpha
    )


def visibility_and_phase(r: float, omega: float, T: float, rates: DissipationRates) -> tuple[float, float, float, float]:
    c = closed_form_rho_T(r, omega, T, rates)
    return c.nu, c.beta, c.Pg, c.Pf


def first_order(r: float, omega: float, T: float, rates: DissipationRates) -> tuple[float, float]:
    """Small-rate forms ``nu ~ 1 - r^2 gamma T - kappa T/2`` and ``beta ~ -r^2 (2 pi + gamma/omega)``.

    ``kappa`` is the summed coherence loss rate ``kappa_g + kappa_f``.
    """
    nu = 1 - r * r * rates.gamma * T - (rates.kappa_g + rates.kappa_f) * T / 2
    beta = -r * r * (2 * math.pi + rates.gamma / omega)
    return nu, beta


def integrate_coherence(
    r: float, omega: float, T: float, rates: DissipationRates, steps: int = 20000, exact: bool = True
) -> tuple[float, float]:
    """``(nu, beta)`` from stepping the per-step maps along the sweep.

    Each step applies the adiabatic phase step to the g branch, then field
    damping to both branches, then the coherence loss of atomic emission.
    """
    dt = T / steps
    a1 = a2 = complex(-r)
    logc = 0j
    for k in range(steps):
        da0 = -r * (cmath.exp(1j * omega * (k + 1) * dt) - cmath.exp(1j * omega * k * dt))
        ph, a1 = off_diagonal_phase_step(a1, da0)
        logc += 1j * ph
        X = log_overlap(a2, a1)
        if exact:
            eta = math.exp(-rates.gamma * dt)
            logc += (1 - eta) * X
            a1, a2 = a1 * math.sqrt(eta), a2 * math.sqrt(eta)
        else:
            s = math.exp(-rates.gamma * dt)
            logc += rates.gamma * dt * X
            a1, a2 = a1 * s, a2 * s
        logc -= 0.5 * (rates.kappa_g + rates.kappa_f) * dt
    z = logc + log_overlap(a2, a1)
    return math.exp(z.real), z.imag


def report_json(r: float, omega: float, T: float, rates: DissipationRates) -> str:
    c = closed_form_rho_T(r, omega, T, rates)
    d = json.loads(c.to_json())
    d["inputs"] = {"r": r, "omega": omega, "T": T, "gamma": rates.gamma,
                   "kappa": {f"{u}->{l}": v for (u, l), v in rates.kappa.items()}}
    nu1, b1 = first_order(r, omega, T, rates)
    d["first_order"] = {"nu": nu1, "beta": b1}
    return json.dumps(d, indent=2)
