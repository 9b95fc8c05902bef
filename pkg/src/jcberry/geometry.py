"""Berry and geometric phases of phase-space loops, by independent routes.

Phases are unwrapped (accumulated) when a trajectory is available and
principal values in (-pi, pi] otherwise; ``PhaseReport.convention`` says which.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import OpenPath, OrthogonalStates, StepTooLarge


def principal(x: float) -> float:
    """Map an angle into (-pi, pi]."""
    y = math.remainder(float(x), 2 * math.pi)
    return math.pi if y == -math.pi else y


def wrapped_distance(a: float, b: float) -> float:
    return abs(math.remainder(a - b, 2 * math.pi))


@dataclass(frozen=True)
class PhaseSpacePath:
    samples: np.ndarray
    closed: bool = True

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex).ravel()
        object.__setattr__(self, "samples", s)
        if s.size < 2:
            raise ValueError("a path needs at least two samples")
        if self.closed:
            if s.size < 3:
                raise ValueError("a closed path needs at least three samples")
            scale = max(np.max(np.abs(s)), 1e-300)
            if abs(s[-1] - s[0]) > 1e-6 * scale and np.max(np.abs(s)) > 0:
                raise OpenPath(f"path ends {abs(s[-1] - s[0]):.3g} away from its start")

    def closed_by_chord(self) -> "PhaseSpacePath":
        """Close the path with the straight segment from the last sample back to the first."""
        s = self.samples
        if s.size >= 3 and abs(s[-1] - s[0]) <= 1e-6 * max(np.max(np.abs(s)), 1e-300):
            return PhaseSpacePath(s, closed=True)
        return PhaseSpacePath(np.append(s, s[0]), closed=True)

    def reversed(self) -> "PhaseSpacePath":
        return PhaseSpacePath(self.samples[::-1], self.closed)


def circle_path(radius: float, samples: int, phi_end: float = 2 * math.pi, sign: float = -1.0) -> PhaseSpacePath:
    """``alpha = sign * radius * e^{i phi}``, phi from 0 to ``phi_end`` (``samples`` intervals)."""
    phi = np.linspace(0.0, phi_end, samples + 1)
    pts = sign * radius * np.exp(1j * phi)
    closed = math.isclose(phi_end % (2 * math.pi), 0.0, abs_tol=1e-12)
    if closed:
        pts[-1] = pts[0]
    return PhaseSpacePath(pts, closed=closed)


def _require_closed(path: PhaseSpacePath):
    if not path.closed:
        raise OpenPath("operation needs a closed path; use closed_by_chord()")


def berry_line_integral(path: PhaseSpacePath) -> float:
    """``(i/2) sum (a*_mid da - a_mid da*)`` over the polygon, midpoint values per segment."""
    _require_closed(path)
    s = path.samples
    mid = 0.5 * (s[1:] + s[:-1])
    d = np.diff(s)
    val = 0.5j * np.sum(np.conj(mid) * d - mid * np.conj(d))
    return float(val.real)


def signed_area(path: PhaseSpacePath) -> float:
    """Shoelace area in the (Re a, Im a) plane, counterclockwise positive."""
    _require_closed(path)
    x, y = path.samples.real, path.samples.imag
    return float(0.5 * np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))


def noncyclic_geometric_phase(path: PhaseSpacePath) -> float:
    """Minus twice the area enclosed by the path and its closing chord."""
    return -2.0 * signed_area(path.closed_by_chord())


def pancharatnam_phase(psi0: np.ndarray, psiT: np.ndarray) -> float:
    ov = np.vdot(psi0, psiT)
    if abs(ov) <= 1e-6:
        raise OrthogonalStates(f"|<psi0|psiT>| = {abs(ov):.3g}")
    return principal(np.angle(ov))


def unwrap_accumulated_phase(overlaps, max_step: float = 0.5 * math.pi) -> float:
    """Sum of principal-value phase increments between consecutive overlaps.

    Raises StepTooLarge if an increment exceeds ``max_step`` or an overlap
    vanishes, since the branch is then ambiguous.
    """
    z = np.asarray(overlaps, dtype=complex)
    if z.size == 0:
        return 0.0
    if np.any(np.abs(z) < 1e-12):
        raise StepTooLarge("overlap series passes through zero")
    inc = np.angle(z[1:] * np.conj(z[:-1]))
    if inc.size and np.max(np.abs(inc)) > max_step:
        raise StepTooLarge(f"phase increment {np.max(np.abs(inc)):.3f} rad exceeds {max_step:.3f}")
    return float(np.angle(z[0]) + np.sum(inc))


@dataclass
class PhaseReport:
    berry_line_integral: float
    signed_area: float
    pancharatnam: float
    fringe_fit: float | None = None
    analytic_reference: float | None = None
    convention: str = "unwrapped"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def phase_report(
    path: PhaseSpacePath,
    overlaps=None,
    psi0=None,
    psiT=None,
    fringe_fit: float | None = None,
    analytic_reference: float | None = None,
) -> PhaseReport:
    """Collect all available phase estimates for one trajectory."""
    closed = path if path.closed else path.closed_by_chord()
    if overlaps is not None:
        panch, conv = unwrap_accumulated_phase(overlaps), "unwrapped"
    elif psi0 is not None and psiT is not None:
        panch, conv = pancharatnam_phase(psi0, psiT), "principal"
    else:
        panch, conv = float("nan"), "unwrapped"
    return PhaseReport(
        berry_line_integral=berry_line_integral(closed),
        signed_area=signed_area(closed),
        pancharatnam=panch,
        fringe_fit=fringe_fit,
        analytic_reference=analytic_reference,
        convention=conv,
    )
