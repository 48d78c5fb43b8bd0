"""Classical normal-mode analysis, used as the reference for every shear result.

The mass-scaled matrix ``D_ij = V_ij / sqrt(m_i m_j)`` is diagonalized with
cyclic Jacobi rotations; its eigenvalues are the squared normal frequencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnstablePotentialError, ValidationError
from .model import QuadHamiltonian, to_kpform

SYMMETRY_RTOL = 1e-12
MAX_JACOBI_SWEEPS = 100


@dataclass(frozen=True, eq=False)
class NormalModes:
    """Squared frequencies (ascending) and orthonormal eigenvectors (columns)."""

    omega_sq: np.ndarray
    eigvecs: np.ndarray

    @property
    def n(self) -> int:
        return self.omega_sq.size

    def frequencies(self) -> np.ndarray:
        """Angular frequencies; raises for unstable modes."""
        _require_stable(self.omega_sq)
        return np.sqrt(np.clip(self.omega_sq, 0.0, None))

    def collective_map(self, masses) -> np.ndarray:
        """Matrix taking displacements ``u`` to normal coordinates ``q = E^T diag(sqrt m) u``."""
        return self.eigvecs.T * np.sqrt(np.asarray(masses, dtype=float))[None, :]


def mass_scaled_matrix(h: QuadHamiltonian) -> np.ndarray:
    V = to_kpform(h).V
    s = 1.0 / np.sqrt(h.masses)
    D = V * np.outer(s, s)
    return 0.5 * (D + D.T)


def _jacobi_rotate(a: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    apq = a[p, q]
    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
    c = 1.0 / math.sqrt(t * t + 1.0)
    s = t * c
    ap = a[:, p].copy()
    aq = a[:, q].copy()
    a[:, p] = c * ap - s * aq
    a[:, q] = s * ap + c * aq
    ap = a[p, :].copy()
    aq = a[q, :].copy()
    a[p, :] = c * ap - s * aq
    a[q, :] = s * ap + c * aq
    a[p, q] = a[q, p] = 0.0
    vp = v[:, p].copy()
    vq = v[:, q].copy()
    v[:, p] = c * vp - s * vq
    v[:, q] = s * vp + c * vq


def jacobi_eigh(D, max_sweeps: int = MAX_JACOBI_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for a symmetric matrix (unsorted output)."""
    a = np.array(D, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    if n < 2:
        return np.diag(a).copy(), v
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    eps = np.finfo(float).eps
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= eps * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                # skip entries that no longer affect the diagonal in working precision
                if abs(a[p, q]) <= 0.5 * eps * min(abs(a[p, p]) + abs(a[q, q]), scale) or a[p, q] == 0.0:
                    a[p, q] = a[q, p] = 0.0
                    continue
                _jacobi_rotate(a, v, p, q)
    else:
        raise RuntimeError("Jacobi eigensolver did not converge")
    return np.diag(a).copy(), v


def _canonical_signs(vecs: np.ndarray) -> np.ndarray:
    vecs = vecs.copy()
    for s in range(vecs.shape[1]):
        col = vecs[:, s]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))
        if nz.size and col[nz[0]] < 0:
            vecs[:, s] = -col
    return vecs


def eigendecompose(D) -> NormalModes:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValidationError(f"D must be square, got shape {D.shape}")
    if not np.all(np.isfinite(D)):
        raise ValidationError("D contains non-finite entries")
    scale = max(float(np.max(np.abs(D))), np.finfo(float).tiny) if D.size else 1.0
    if D.size and np.max(np.abs(D - D.T)) > SYMMETRY_RTOL * scale:
        raise ValidationError("D is not symmetric")
    w, v = jacobi_eigh(0.5 * (D + D.T))
    order = np.argsort(w, kind="stable")
    return NormalModes(w[order], _canonical_signs(v[:, order]))


def normal_modes(h: QuadHamiltonian) -> NormalModes:
    return eigendecompose(mass_scaled_matrix(h))


def toeplitz_frequencies(n: int, phi11: float, phi12: float, m: float) -> np.ndarray:
    """Squared frequencies of the uniform open chain, ``phi11/m + 2 phi12/m cos(s pi/(n+1))``."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if m <= 0:
        raise ValidationError(f"mass must be positive, got {m}")
    s = np.arange(1, n + 1)
    return np.sort(phi11 / m + 2.0 * (phi12 / m) * np.cos(s * np.pi / (n + 1)))


def _require_stable(omega_sq) -> None:
    omega_sq = np.asarray(omega_sq, dtype=float)
    bad = omega_sq[omega_sq < 0]
    if bad.size:
        raise UnstablePotentialError(
            f"unstable potential: negative squared frequencies {bad.tolist()}", bad
        )


def zero_point_energy(omega_sq, hbar: float = 1.0) -> float:
    omega_sq = np.asarray(omega_sq, dtype=float)
    _require_stable(omega_sq)
    return float(0.5 * hbar * np.sum(np.sqrt(omega_sq)))
