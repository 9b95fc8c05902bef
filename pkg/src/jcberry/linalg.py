"""Matrix-exponential kernels shared by operator builders and propagators."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NonFinite


def expm(op: np.ndarray, scale: complex = 1.0) -> np.ndarray:
    """Return ``exp(scale * op)``.

    Scaling-and-squaring with a degree-13 Pade approximant (scipy's
    Al-Mohy/Higham implementation).
    """
    m = np.asarray(op, dtype=complex) * scale
    if not np.all(np.isfinite(m)):
        raise NonFinite("expm argument has non-finite entries")
    return scipy.linalg.expm(m)


def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """Return ``exp(-1j * h * t)`` for Hermitian ``h`` via eigendecomposition.

    Exactly unitary up to rounding, which the Pade route is not.
    """
    h = np.asarray(h, dtype=complex)
    if not np.all(np.isfinite(h)):
        raise NonFinite("Hamiltonian has non-finite entries")
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T
