"""Gaussian ground states, ladder operators and zero-point energy comparisons."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .diagonalizer import (
    DiagonalResult,
    bravais_closed_form,
    diagonalize_disjoint_pairs_chain,
    diagonalize_general_sweep,
    diagonalize_three_body,
    diagonalize_two_body,
)
from .errors import ConvergenceError, UnstablePotentialError, ValidationError
from .model import KPForm, QuadHamiltonian, bravais_parameters
from .normal_modes import normal_modes, toeplitz_frequencies, zero_point_energy
from .shear import ShearSequence

PRODUCT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GaussianState:
    """``psi(u) = exp(log_norm) exp(-u^T B u / 2)``, normalized in L2."""

    B: np.ndarray
    log_norm: float

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ValidationError(f"B must be square, got shape {B.shape}")
        B = 0.5 * (B + B.T)
        try:
            np.linalg.cholesky(B)
        except np.linalg.LinAlgError:
            raise ValidationError("exponent matrix B must be positive definite") from None
        B.setflags(write=False)
        object.__setattr__(self, "B", B)

    @classmethod
    def from_exponent(cls, B) -> "GaussianState":
        B = np.asarray(B, dtype=float)
        sign, logdet = np.linalg.slogdet(B / math.pi)
        if sign <= 0:
            raise ValidationError("exponent matrix B must be positive definite")
        return cls(B, 0.25 * logdet)

    @property
    def n(self) -> int:
        return self.B.shape[0]

    def __call__(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return float(np.exp(self.log_norm - 0.5 * u @ self.B @ u))

    def is_product(self, tol: float = PRODUCT_TOL) -> bool:
        """True when the state factorizes over the coordinates (``B`` diagonal)."""
        off = self.B - np.diag(np.diag(self.B))
        return bool(np.max(np.abs(off), initial=0.0) <= tol * max(float(np.max(np.abs(self.B))), 1.0))


def ground_state_from_diagonal(result: DiagonalResult, hbar: float = 1.0) -> GaussianState:
    """Product ground state of the diagonal form, ``B = diag(m_eff omega / hbar)``."""
    omega_sq = np.asarray(result.omega_sq)
    if np.any(omega_sq <= 0):
        raise UnstablePotentialError(
            f"no normalizable ground state: squared frequencies {omega_sq[omega_sq <= 0].tolist()}",
            omega_sq[omega_sq <= 0],
        )
    return GaussianState.from_exponent(np.diag(result.m_eff * np.sqrt(omega_sq) / hbar))


def entangled_ground_state(state: GaussianState, seq: ShearSequence) -> GaussianState:
    """Carry a diagonal-frame state back to the original coordinates.

    With ``u -> M u`` the composed substitution, the original-frame state is
    ``chi(M^{-1} u)``, so ``B' = W^T B W`` with ``W = M^{-1}``. For a single
    pair this is ``u1' = u1 + alpha u2``, ``u2' = u2 + beta u1'``.
    """
    W = seq.inverse_map
    # det W = 1, so the normalization constant carries over unchanged
    return GaussianState(W.T @ state.B @ W, state.log_norm)


def ground_state_residual(state: GaussianState, form: KPForm, hbar: float = 1.0) -> tuple[float, float]:
    """Relative mismatch of ``hbar^2 B K B = V`` and the energy ``hbar^2 tr(K B) / 2``."""
    B = state.B
    lhs = hbar * hbar * B @ form.K @ B
    vnorm = np.linalg.norm(form.V)
    residual = float(np.linalg.norm(lhs - form.V) / vnorm) if vnorm > 0 else float(np.linalg.norm(lhs))
    energy = 0.5 * hbar * hbar * float(np.trace(form.K @ B))
    return residual, energy


@dataclass(frozen=True, eq=False)
class LadderOp:
    """Linear operator ``sum_k cu[k] u_k + cp[k] p_k``."""

    cu: np.ndarray
    cp: np.ndarray

    def __post_init__(self):
        cu = np.asarray(self.cu, dtype=complex)
        cp = np.asarray(self.cp, dtype=complex)
        if cu.shape != cp.shape or cu.ndim != 1:
            raise ValidationError(f"coefficient vectors must be 1-D of equal length, got {cu.shape}, {cp.shape}")
        if not (np.all(np.isfinite(cu)) and np.all(np.isfinite(cp))):
            raise ValidationError("ladder coefficients must be finite")
        if not (np.any(cu) or np.any(cp)):
            raise ValidationError("ladder operator has no nonzero coefficient")
        cu.setflags(write=False)
        cp.setflags(write=False)
        object.__setattr__(self, "cu", cu)
        object.__setattr__(self, "cp", cp)

    @property
    def n(self) -> int:
        return self.cu.size

    def dagger(self) -> "LadderOp":
        return LadderOp(self.cu.conj(), self.cp.conj())


def ladder_pair(i: int, n: int, m_eff: float, omega: float, hbar: float = 1.0) -> tuple[LadderOp, LadderOp]:
    """``(a_i, a_i^dagger)`` for an oscillator of mass ``m_eff`` and frequency ``omega``."""
    if not omega > 0:
        raise ValidationError(f"ladder operators need omega > 0, got {omega}")
    if not 0 <= i < n:
        raise IndexError(f"index {i} out of range for n={n}")
    s = math.sqrt(2.0 * m_eff * hbar * omega)
    cu = np.zeros(n, dtype=complex)
    cp = np.zeros(n, dtype=complex)
    cu[i] = m_eff * omega / s
    cp[i] = -1j / s
    a_dag = LadderOp(cu, cp)
    return a_dag.dagger(), a_dag


def commutator(x: LadderOp, y: LadderOp, hbar: float = 1.0) -> complex:
    """``[x, y]``, a c-number since both operators are linear in ``u`` and ``p``."""
    if x.n != y.n:
        raise ValidationError(f"dimension mismatch: {x.n} vs {y.n}")
    return complex(1j * hbar * (np.dot(x.cu, y.cp) - np.dot(x.cp, y.cu)))


def ladder_operators(result: DiagonalResult, hbar: float = 1.0) -> list[tuple[LadderOp, LadderOp]]:
    """Ladder pairs of the diagonal form, in the original observables ``u_i, p_i``."""
    omega = np.sqrt(np.asarray(result.omega_sq))
    return [ladder_pair(i, result.n, float(result.m_eff[i]), float(omega[i]), hbar) for i in range(result.n)]


def original_frame_ladder(op: LadderOp, seq: ShearSequence) -> LadderOp:
    """Transport ``a -> U a U^dagger``: the ladder operator of the undiagonalized Hamiltonian.

    Inverting the substitution gives ``cu -> M^{-T} cu`` and ``cp -> M cp``.
    """
    return LadderOp(seq.inverse_map.T @ op.cu, seq.composed_map @ op.cp)


# -- zero-point energy comparison ----------------------------------------------

ZPE_METHODS = ("oracle", "sweep", "bravais", "toeplitz")
_EXACT = {
    "two_body": lambda h, root: diagonalize_two_body(h, root=root),
    "pairs_chain": lambda h, root: diagonalize_disjoint_pairs_chain(h, root=root),
    "three_body": lambda h, root: diagonalize_three_body(h, root=root),
}


@dataclass(frozen=True)
class ZPEEntry:
    method: str
    omega_sq: tuple[float, ...] | None
    zpe: float | None
    error: str | None = None
    converged: bool | None = None


@dataclass(frozen=True)
class ZPEReport:
    entries: tuple[ZPEEntry, ...]
    zpe_diffs: tuple[tuple[str, str, float], ...]
    spectrum_diffs: tuple[tuple[str, str, float], ...]

    def entry(self, method: str) -> ZPEEntry:
        for e in self.entries:
            if e.method == method:
                return e
        raise KeyError(method)

    def zpe_diff(self, a: str, b: str) -> float:
        for x, y, v in self.zpe_diffs:
            if {x, y} == {a, b}:
                return v
        raise KeyError((a, b))

    def spectrum_diff(self, a: str, b: str) -> float:
        for x, y, v in self.spectrum_diffs:
            if {x, y} == {a, b}:
                return v
        raise KeyError((a, b))


def _spectrum_for(method: str, h: QuadHamiltonian, tol: float, max_sweeps, root: str):
    if method == "oracle":
        return normal_modes(h).omega_sq, None
    if method == "sweep":
        res = diagonalize_general_sweep(h, tol=tol, max_sweeps=max_sweeps, root=root)
        return res.sorted_omega_sq(), res.converged
    if method in _EXACT:
        res = _EXACT[method](h, root)
        return res.sorted_omega_sq(), res.converged
    chain = bravais_parameters(h)
    if chain is None:
        raise ValidationError("not a uniform nearest-neighbour chain")
    m, d1, d12 = chain
    if method == "bravais":
        res = bravais_closed_form(h.n, m, d1, d12, h.hbar)
        return res.sorted_omega_sq(), res.converged
    if method == "toeplitz":
        return toeplitz_frequencies(h.n, 2.0 * d1, d12, m), None
    raise ValidationError(f"unknown comparison method {method!r}")


def zpe_compare(
    h: QuadHamiltonian,
    methods=ZPE_METHODS,
    tol: float = 1e-12,
    max_sweeps: int | None = None,
    root: str = "smaller",
) -> ZPEReport:
    """Zero-point energy and sorted spectrum per method, plus pairwise differences.

    Nothing is asserted here; failures are recorded per method.
    """
    entries = []
    for method in methods:
        try:
            w, conv = _spectrum_for(method, h, tol, max_sweeps, root)
        except (ValidationError, UnstablePotentialError, ConvergenceError) as exc:
            entries.append(ZPEEntry(method, None, None, str(exc)))
            continue
        w = tuple(float(x) for x in np.sort(w))
        try:
            zpe = zero_point_energy(w, h.hbar)
        except UnstablePotentialError as exc:
            entries.append(ZPEEntry(method, w, None, str(exc), conv))
            continue
        entries.append(ZPEEntry(method, w, zpe, None, conv))
    zpe_diffs = []
    spec_diffs = []
    for a, b in itertools.combinations(entries, 2):
        if a.zpe is not None and b.zpe is not None:
            zpe_diffs.append((a.method, b.method, abs(a.zpe - b.zpe)))
        if a.omega_sq is not None and b.omega_sq is not None:
            spec_diffs.append((a.method, b.method, float(np.max(np.abs(np.subtract(a.omega_sq, b.omega_sq))))))
    return ZPEReport(tuple(entries), tuple(zpe_diffs), tuple(spec_diffs))
