"""Hamiltonian data model.

A quadratic Hamiltonian is stored through its symmetrized parameters::

    H = sum_i p_i^2 / (2 m_i) + sum_i d_i u_i^2 + sum_{i<j} d_ij u_i u_j

and can be converted to the matrix representation ``H = 1/2 p^T K p + 1/2 u^T V u``
(:class:`KPForm`), which is the form the shear transformations act on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

SYMMETRY_RTOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_square(name: str, a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite entries")
    return a


def symmetrize(phi) -> tuple[np.ndarray, np.ndarray]:
    """Split a force-constant matrix into on-site and pair parameters.

    Returns ``(d_diag, d_off)`` with ``d_i = phi_ii / 2`` and
    ``d_ij = (phi_ij + phi_ji) / 2``. ``d_off`` is returned as a full symmetric
    matrix with a zero diagonal.
    """
    phi = _check_square("phi", phi)
    d_diag = 0.5 * np.diag(phi).copy()
    d_off = 0.5 * (phi + phi.T)
    np.fill_diagonal(d_off, 0.0)
    return d_diag, d_off


@dataclass(frozen=True, eq=False)
class QuadHamiltonian:
    """Masses, on-site constants ``d_i`` and pair couplings ``d_ij``.

    ``d_off`` is kept as a symmetric matrix with zero diagonal; use
    :meth:`coupling` for checked access.
    """

    masses: np.ndarray
    d_diag: np.ndarray
    d_off: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        d_diag = np.asarray(self.d_diag, dtype=float)
        if masses.ndim != 1 or masses.size == 0:
            raise ValidationError("masses must be a non-empty vector")
        n = masses.size
        if d_diag.shape != (n,):
            raise ValidationError(f"d_diag must have length {n}, got shape {d_diag.shape}")
        d_off = _check_square("d_off", self.d_off)
        if d_off.shape != (n, n):
            raise ValidationError(f"d_off must be {n}x{n}, got shape {d_off.shape}")
        if not np.all(np.isfinite(masses)) or np.any(masses <= 0):
            raise ValidationError(f"masses must be positive and finite, got {masses.tolist()}")
        if not np.all(np.isfinite(d_diag)):
            raise ValidationError("d_diag contains non-finite entries")
        scale = max(float(np.max(np.abs(d_off))), 1.0)
        if np.max(np.abs(d_off - d_off.T)) > SYMMETRY_RTOL * scale:
            raise ValidationError("d_off must be symmetric")
        if np.any(np.diag(d_off) != 0):
            raise ValidationError("d_off must have a zero diagonal (self-pairs are not couplings)")
        hbar = float(self.hbar)
        if not np.isfinite(hbar) or hbar <= 0:
            raise ValidationError(f"hbar must be positive, got {self.hbar}")
        object.__setattr__(self, "masses", _frozen(masses))
        object.__setattr__(self, "d_diag", _frozen(d_diag))
        object.__setattr__(self, "d_off", _frozen(0.5 * (d_off + d_off.T)))
        object.__setattr__(self, "hbar", hbar)

    @classmethod
    def from_phi(cls, masses, phi, hbar: float = 1.0) -> "QuadHamiltonian":
        d_diag, d_off = symmetrize(phi)
        return cls(masses, d_diag, d_off, hbar)

    @property
    def n(self) -> int:
        return self.masses.size

    def coupling(self, i: int, j: int) -> float:
        if i == j:
            raise ValidationError(f"no self-coupling d_{i}{i}; use d_diag[{i}]")
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(f"pair ({i}, {j}) out of range for n={self.n}")
        return float(self.d_off[i, j])

    def phi(self) -> np.ndarray:
        """Symmetric force-constant matrix (``2 d_i`` on the diagonal)."""
        return to_kpform(self).V.copy()

    def potential(self, u) -> float:
        """``sum_i d_i u_i^2 + sum_{i<j} d_ij u_i u_j`` evaluated term by term."""
        u = np.asarray(u, dtype=float)
        total = float(np.dot(self.d_diag, u * u))
        iu, ju = np.triu_indices(self.n, k=1)
        total += float(np.sum(self.d_off[iu, ju] * u[iu] * u[ju]))
        return total

    def is_decoupled(self) -> bool:
        return not np.any(self.d_off)


@dataclass(frozen=True, eq=False)
class KPForm:
    """Quadratic form ``1/2 p^T K p + 1/2 u^T V u``.

    Off-diagonal entries of ``K`` are cross-kinetic terms, which appear once
    a shear has been applied with a non-matching ``beta``.
    """

    K: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        K = _check_square("K", self.K)
        V = _check_square("V", self.V)
        if K.shape != V.shape:
            raise ValidationError(f"K and V shapes differ: {K.shape} vs {V.shape}")
        for name, a in (("K", K), ("V", V)):
            scale = max(float(np.max(np.abs(a))), np.finfo(float).tiny)
            if np.max(np.abs(a - a.T)) > SYMMETRY_RTOL * scale:
                raise ValidationError(f"{name} is not symmetric")
        K = 0.5 * (K + K.T)
        V = 0.5 * (V + V.T)
        try:
            np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            raise ValidationError("K must be positive definite") from None
        object.__setattr__(self, "K", _frozen(K))
        object.__setattr__(self, "V", _frozen(V))

    @property
    def n(self) -> int:
        return self.K.shape[0]

    def spectrum(self) -> np.ndarray:
        """Sorted eigenvalues of ``K V`` (squared frequencies)."""
        # K V is similar to the symmetric L^T V L with K = L L^T
        L = np.linalg.cholesky(self.K)
        return np.linalg.eigvalsh(L.T @ self.V @ L)


def to_kpform(h: QuadHamiltonian) -> KPForm:
    V = h.d_off.copy()
    V[np.diag_indices(h.n)] = 2.0 * h.d_diag
    return KPForm(np.diag(1.0 / h.masses), V)


def from_kpform(form: KPForm, hbar: float = 1.0) -> QuadHamiltonian:
    """Read parameters back from a form whose kinetic matrix is diagonal."""
    K = form.K
    off = K - np.diag(np.diag(K))
    if np.any(off):
        raise ValidationError("kinetic matrix has cross terms; no mass vector to read back")
    d_off = form.V.copy()
    np.fill_diagonal(d_off, 0.0)
    return QuadHamiltonian(1.0 / np.diag(K), 0.5 * np.diag(form.V), d_off, hbar)


def build_nn_chain(n: int, masses, d_diag, d_nn, hbar: float = 1.0) -> QuadHamiltonian:
    """Open chain with nearest-neighbour couplings ``d_nn[i] = d_{i,i+1}``."""
    masses = np.asarray(masses, dtype=float)
    d_diag = np.asarray(d_diag, dtype=float)
    d_nn = np.asarray(d_nn, dtype=float)
    if n < 1:
        raise ValidationError(f"chain needs at least one particle, got n={n}")
    if masses.shape != (n,) or d_diag.shape != (n,):
        raise ValidationError(
            f"masses and d_diag must have length n={n}, got {masses.size} and {d_diag.size}"
        )
    if d_nn.shape != (n - 1,):
        raise ValidationError(f"d_nn must have length n-1={n - 1}, got {d_nn.size}")
    d_off = np.zeros((n, n))
    idx = np.arange(n - 1)
    d_off[idx, idx + 1] = d_nn
    d_off[idx + 1, idx] = d_nn
    return QuadHamiltonian(masses, d_diag, d_off, hbar)


def build_bravais_chain(n: int, m: float, d1: float, d12: float, hbar: float = 1.0) -> QuadHamiltonian:
    if n < 2 or n % 2:
        raise ValidationError(
            f"Bravais chain requires an even number of particles (pairwise construction), got n={n}"
        )
    return build_nn_chain(n, np.full(n, float(m)), np.full(n, float(d1)), np.full(n - 1, float(d12)), hbar)


def bravais_parameters(h: QuadHamiltonian) -> tuple[float, float, float] | None:
    """Return ``(m, d1, d12)`` if ``h`` is a uniform nearest-neighbour chain, else None."""
    n = h.n
    if n < 2:
        return None
    m = float(h.masses[0])
    d1 = float(h.d_diag[0])
    d12 = float(h.d_off[0, 1])
    expected = build_nn_chain(n, np.full(n, m), np.full(n, d1), np.full(n - 1, d12), h.hbar)
    if (
        np.array_equal(h.masses, expected.masses)
        and np.array_equal(h.d_diag, expected.d_diag)
        and np.array_equal(h.d_off, expected.d_off)
    ):
        return m, d1, d12
    return None


def random_hamiltonian(
    rng: np.random.Generator,
    n: int,
    mass_range: Sequence[float] = (0.1, 10.0),
    d_range: Sequence[float] = (0.1, 10.0),
    coupling_scale: float = 1.0,
    stable: bool = True,
    max_tries: int = 1000,
) -> QuadHamiltonian:
    """Draw a random instance; with ``stable=True`` the potential is positive definite.

    Couplings are drawn as ``coupling_scale * U(-1, 1) * sqrt(d_i d_j)`` and the
    draw is rejected until ``V`` passes a Cholesky test.
    """
    for _ in range(max_tries):
        masses = rng.uniform(*mass_range, size=n)
        d_diag = rng.uniform(*d_range, size=n)
        raw = rng.uniform(-1.0, 1.0, size=(n, n))
        d_off = np.triu(raw, 1)
        d_off = d_off + d_off.T
        d_off *= coupling_scale * np.sqrt(np.outer(d_diag, d_diag))
        h = QuadHamiltonian(masses, d_diag, d_off)
        if not stable:
            return h
        try:
            np.linalg.cholesky(to_kpform(h).V)
        except np.linalg.LinAlgError:
            continue
        return h
    raise RuntimeError(f"no stable instance found in {max_tries} draws")
