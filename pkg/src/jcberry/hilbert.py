"""Truncated Fock space tensored with multilevel atoms.

Composite states use atom-major ordering: the first atom's level index varies
slowest and the photon number fastest, so for one atom the basis index of
``|level, n>`` is ``level_index * fock.dim + n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammainc

from .errors import DimensionMismatch, NonPhysicalState, TruncationError, UnknownLabel
from .linalg import expm

TAIL_BUDGET = 1e-8


@dataclass(frozen=True)
class FockSpace:
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"Fock dimension must be an integer >= 2, got {self.dim}")


@dataclass(frozen=True)
class AtomSpace:
    """Ordered atomic level labels.

    The canonical three-level atom is ``("f", "g", "e")``: ``g <-> e`` couples
    to the pump and the cavity, ``f`` is the decoupled Ramsey partner.  Extra
    levels (``j``, ``k``, ...) receive spontaneous emission from ``g``/``f``.
    """

    levels: tuple[str, ...] = ("f", "g", "e")

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if len(set(self.levels)) != len(self.levels):
            raise ValueError(f"duplicate level labels in {self.levels}")

    @property
    def dim(self) -> int:
        return len(self.levels)

    def index(self, label: str) -> int:
        try:
            return self.levels.index(label)
        except ValueError:
            raise UnknownLabel(f"level {label!r} not in {self.levels}") from None

    def has(self, label: str) -> bool:
        return label in self.levels


def fock_dim_for(alpha_max: float, n_max: int = 0) -> int:
    """Default truncation ``ceil(|a|^2 + 6|a| + 10)``, plus ``n_max`` for displaced number states."""
    a = abs(alpha_max)
    return max(2, math.ceil(a * a + 6 * a + 10) + int(n_max))


def coherent_tail_norm(alpha: complex, dim: int) -> float:
    """Probability weight of ``|alpha>`` on photon numbers ``>= dim``."""
    x = abs(alpha) ** 2
    if x == 0.0:
        return 0.0
    return float(gammainc(dim, x))


# --- field operators ---------------------------------------------------------

def annihilation(space: FockSpace) -> np.ndarray:
    n = np.arange(1, space.dim)
    return np.diag(np.sqrt(n).astype(complex), k=1)


def creation(space: FockSpace) -> np.ndarray:
    return annihilation(space).conj().T


def number(space: FockSpace) -> np.ndarray:
    return np.diag(np.arange(space.dim).astype(complex))


def fock_state(n: int, space: FockSpace) -> np.ndarray:
    if not 0 <= n < space.dim:
        raise TruncationError(f"|{n}> outside Fock space of dim {space.dim}")
    v = np.zeros(space.dim, dtype=complex)
    v[n] = 1.0
    return v


def coherent_state(
    alpha: complex,
    space: FockSpace,
    tail_budget: float = TAIL_BUDGET,
    return_tail: bool = False,
):
    """Truncated, renormalized coherent state ``|alpha>``.

    Raises TruncationError when the discarded weight exceeds ``tail_budget``.
    With ``return_tail=True`` returns ``(state, tail_norm)``.
    """
    tail = coherent_tail_norm(alpha, space.dim)
    if tail > tail_budget:
        raise TruncationError(
            f"coherent state alpha={alpha:.4g} loses {tail:.3g} > {tail_budget:.1g} "
            f"at dim {space.dim}; need dim >= {fock_dim_for(abs(alpha))}"
        )
    c = np.empty(space.dim, dtype=complex)
    c[0] = math.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, space.dim):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    c /= np.linalg.norm(c)
    return (c, tail) if return_tail else c


def displacement(alpha: complex, space: FockSpace, tail_budget: float = TAIL_BUDGET) -> np.ndarray:
    """``D(alpha) = exp(alpha a^dag - alpha^* a)`` by dense exponentiation."""
    tail = coherent_tail_norm(alpha, space.dim)
    if tail > tail_budget:
        raise TruncationError(f"displacement alpha={alpha:.4g} too large for dim {space.dim}")
    a = annihilation(space)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def displaced_number_state(alpha: complex, n: int, space: FockSpace) -> np.ndarray:
    return displacement(alpha, space) @ fock_state(n, space)


def coherent_overlap(beta: complex, alpha: complex) -> complex:
    """Analytic ``<beta|alpha>``."""
    return complex(np.exp(-abs(alpha) ** 2 / 2 - abs(beta) ** 2 / 2 + np.conj(beta) * alpha))


# --- atomic operators --------------------------------------------------------

def projector(atom: AtomSpace, label: str) -> np.ndarray:
    i = atom.index(label)
    p = np.zeros((atom.dim, atom.dim), dtype=complex)
    p[i, i] = 1.0
    return p


def jump(atom: AtomSpace, upper: str, lower: str) -> np.ndarray:
    """Lowering dyad ``|lower><upper|`` for emission ``upper -> lower``."""
    op = np.zeros((atom.dim, atom.dim), dtype=complex)
    op[atom.index(lower), atom.index(upper)] = 1.0
    return op


def sigma_minus(atom: AtomSpace) -> np.ndarray:
    return jump(atom, "e", "g")


def sigma_plus(atom: AtomSpace) -> np.ndarray:
    return sigma_minus(atom).conj().T


def sigma_z(atom: AtomSpace) -> np.ndarray:
    """``|e><e| - |g><g|``; zero on ``f`` and any extra level."""
    return projector(atom, "e") - projector(atom, "g")


def atomic_operator(kind: str, atom: AtomSpace, *labels: str) -> np.ndarray:
    """Dispatch by name: sigma_minus, sigma_plus, sigma_z, projector(label), jump(upper, lower)."""
    builders = {
        "sigma_minus": sigma_minus,
        "sigma_plus": sigma_plus,
        "sigma_z": sigma_z,
        "projector": projector,
        "jump": jump,
    }
    if kind not in builders:
        raise ValueError(f"unknown atomic operator kind {kind!r}")
    return builders[kind](atom, *labels)


def basis_ket(atom: AtomSpace, label: str) -> np.ndarray:
    v = np.zeros(atom.dim, dtype=complex)
    v[atom.index(label)] = 1.0
    return v


def tensor(*factors: np.ndarray) -> np.ndarray:
    """Kronecker product, left factor slowest."""
    out = np.asarray(factors[0], dtype=complex)
    for f in factors[1:]:
        f = np.asarray(f, dtype=complex)
        if out.ndim != f.ndim:
            raise DimensionMismatch("cannot tensor a state with an operator")
        out = np.kron(out, f)
    return out


# --- composite system --------------------------------------------------------

@dataclass(frozen=True)
class System:
    """A register of atoms coupled to one truncated bosonic mode."""

    atoms: tuple[AtomSpace, ...]
    fock: FockSpace

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if not self.atoms:
            raise ValueError("need at least one atom")

    @classmethod
    def single(cls, fock_dim: int, levels: Sequence[str] = ("f", "g", "e")) -> "System":
        return cls((AtomSpace(tuple(levels)),), FockSpace(fock_dim))

    @classmethod
    def register(cls, n_atoms: int, fock_dim: int, levels: Sequence[str] = ("f", "g", "e")) -> "System":
        return cls(tuple(AtomSpace(tuple(levels)) for _ in range(n_atoms)), FockSpace(fock_dim))

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @cached_property
    def atom_dim(self) -> int:
        return int(np.prod([a.dim for a in self.atoms]))

    @property
    def dim(self) -> int:
        return self.atom_dim * self.fock.dim

    def embed_atom(self, op: np.ndarray, j: int) -> np.ndarray:
        """Single-atom operator acting on atom ``j`` of the register, identity on the field."""
        return tensor(self.atom_register_op(op, j), np.eye(self.fock.dim))

    def atom_register_op(self, op: np.ndarray, j: int) -> np.ndarray:
        """Single-atom operator lifted to the atom register only (no field factor)."""
        factors = [np.eye(a.dim) for a in self.atoms]
        factors[j] = op
        return tensor(*factors)

    def field(self, op: np.ndarray) -> np.ndarray:
        return tensor(np.eye(self.atom_dim), op)

    @cached_property
    def a(self) -> np.ndarray:
        return self.field(annihilation(self.fock))

    def atom_ket(self, labels: str | Iterable[str]) -> np.ndarray:
        """Register ket from one label per atom, e.g. ``"gf"`` or ``("g", "f")``."""
        labels = tuple(labels)
        if len(labels) != self.n_atoms:
            raise DimensionMismatch(f"need {self.n_atoms} labels, got {labels}")
        return tensor(*(basis_ket(a, l) for a, l in zip(self.atoms, labels)))

    def product(self, atom_state: np.ndarray, field_state: np.ndarray) -> np.ndarray:
        if atom_state.shape[0] != self.atom_dim or field_state.shape[0] != self.fock.dim:
            raise DimensionMismatch("factor dimensions do not match the system")
        return tensor(atom_state, field_state)

    def excitation_number(self) -> np.ndarray:
        """Diagonal of ``a^dag a + sum_j |e_j><e_j|`` (the sweep-rotation generator)."""
        n_field = np.arange(self.fock.dim, dtype=float)
        n_atom = np.zeros(self.atom_dim)
        for j, atom in enumerate(self.atoms):
            n_atom += np.real(np.diag(self.atom_register_op(projector(atom, "e"), j)))
        return (n_atom[:, None] + n_field[None, :]).ravel()

    def reduced_atom(self, state: np.ndarray) -> np.ndarray:
        """Atomic density matrix after tracing out the field (pure vector or density matrix)."""
        A, N = self.atom_dim, self.fock.dim
        if state.ndim == 1:
            m = state.reshape(A, N)
            return m @ m.conj().T
        r = state.reshape(A, N, A, N)
        return np.einsum("anbn->ab", r)

    def reduced_field(self, state: np.ndarray) -> np.ndarray:
        A, N = self.atom_dim, self.fock.dim
        if state.ndim == 1:
            m = state.reshape(A, N)
            return m.T @ m.conj()
        r = state.reshape(A, N, A, N)
        return np.einsum("anam->nm", r)

    def labels_of(self, index: int) -> tuple[tuple[str, ...], int]:
        """Inverse of the composite index: per-atom labels and photon number."""
        n = index % self.fock.dim
        rest = index // self.fock.dim
        labels = []
        for atom in reversed(self.atoms):
            labels.append(atom.levels[rest % atom.dim])
            rest //= atom.dim
        return tuple(reversed(labels)), n


# --- invariants ----------------------------------------------------------------

def normalize(psi: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValueError("zero vector cannot be normalized")
    return psi / nrm


def density(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def check_density_matrix(
    rho: np.ndarray, herm_tol: float = 1e-10, trace_tol: float = 1e-8, pos_tol: float = 1e-8
) -> None:
    """Raise NonPhysicalState unless ``rho`` is Hermitian, unit-trace and positive."""
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise NonPhysicalState(f"density matrix not Hermitian (max dev {herm:.3g})")
    tr = np.trace(rho).real
    if abs(tr - 1) > trace_tol:
        raise NonPhysicalState(f"trace drifted to {tr:.12g}")
    lo = np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]
    if lo < -pos_tol:
        raise NonPhysicalState(f"negative eigenvalue {lo:.3g}")


# --- CSV serialization -----------------------------------------------------------

def operator_to_csv(op: np.ndarray, tol: float = 0.0) -> str:
    """``row,col,re,im`` lines for entries with magnitude above ``tol``."""
    lines = ["row,col,re,im"]
    rows, cols = np.nonzero(np.abs(op) > tol)
    for r, c in zip(rows, cols):
        z = op[r, c]
        lines.append(f"{r},{c},{float(z.real)!r},{float(z.imag)!r}")
    return "\n".join(lines) + "\n"


def state_to_csv(psi: np.ndarray) -> str:
    lines = ["index,re,im"]
    for i, z in enumerate(psi):
        lines.append(f"{i},{float(z.real)!r},{float(z.imag)!r}")
    return "\n".join(lines) + "\n"


def operator_from_csv(text: str, dim: int) -> np.ndarray:
    op = np.zeros((dim, dim), dtype=complex)
    for line in text.strip().splitlines()[1:]:
        r, c, re, im = line.split(",")
        op[int(r), int(c)] = complex(float(re), float(im))
    return op


def state_from_csv(text: str) -> np.ndarray:
    rows = [line.split(",") for line in text.strip().splitlines()[1:]]
    psi = np.zeros(len(rows), dtype=complex)
    for i, re, im in rows:
        psi[int(i)] = complex(float(re), float(im))
    return psi
