"""Pair shear transformations and their action on quadratic forms.

A step on the ordered pair ``(i, j)`` is the unitary
``U = exp(alpha u_j d/du_i) exp(beta u_i d/du_j)``. Conjugating with it
substitutes, in the Hamiltonian,

    u_i -> (1 + alpha beta) u_i - alpha u_j        p_i -> p_i + beta p_j
    u_j -> u_j - beta u_i                          p_j -> alpha p_i + (1 + alpha beta) p_j

so ``V -> M^T V M`` and ``K -> N^T K N`` with ``N = M^{-T}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ValidationError
from .model import KPForm

ROOT_POLICIES = ("smaller", "plus", "minus")


@dataclass(frozen=True)
class ShearStep:
    i: int
    j: int
    alpha: float
    beta: float

    def __post_init__(self):
        if self.i == self.j:
            raise ValidationError(f"shear needs two distinct indices, got ({self.i}, {self.j})")
        if self.i < 0 or self.j < 0:
            raise ValidationError(f"negative index in ({self.i}, {self.j})")
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValidationError(f"non-finite shear parameters alpha={self.alpha}, beta={self.beta}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))

    def _check_range(self, n: int) -> None:
        if self.i >= n or self.j >= n:
            raise IndexError(f"pair ({self.i}, {self.j}) out of range for n={n}")

    def as_dict(self) -> dict:
        return {"i": self.i, "j": self.j, "alpha": self.alpha, "beta": self.beta}


def step_coordinate_map(step: ShearStep, n: int) -> np.ndarray:
    step._check_range(n)
    a, b = step.alpha, step.beta
    M = np.eye(n)
    M[step.i, step.i] = 1.0 + a * b
    M[step.i, step.j] = -a
    M[step.j, step.i] = -b
    return M


def step_momentum_map(step: ShearStep, n: int) -> np.ndarray:
    step._check_range(n)
    a, b = step.alpha, step.beta
    N = np.eye(n)
    N[step.i, step.j] = b
    N[step.j, step.i] = a
    N[step.j, step.j] = 1.0 + a * b
    return N


def _step_inverse_map(step: ShearStep, n: int) -> np.ndarray:
    # M^{-1} = N^T, exact because det M = 1
    return step_momentum_map(step, n).T


@dataclass(frozen=True, eq=False)
class ShearSequence:
    """Ordered shear steps; ``composed_map`` is ``M_1 M_2 ... M_k``.

    Applying the steps in order to a form is the same as one substitution
    ``u -> composed_map @ u``.
    """

    n: int
    steps: tuple[ShearStep, ...] = ()
    composed_map: np.ndarray = field(init=False, repr=False)
    inverse_map: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        steps = tuple(self.steps)
        M = np.eye(self.n)
        Minv = np.eye(self.n)
        for s in steps:
            M = M @ step_coordinate_map(s, self.n)
            Minv = _step_inverse_map(s, self.n) @ Minv
        M.setflags(write=False)
        Minv.setflags(write=False)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "composed_map", M)
        object.__setattr__(self, "inverse_map", Minv)

    def __len__(self) -> int:
        return len(self.steps)

    def append(self, step: ShearStep) -> "ShearSequence":
        return ShearSequence(self.n, self.steps + (step,))

    def momentum_map(self) -> np.ndarray:
        return self.inverse_map.T

    def apply(self, form: KPForm) -> KPForm:
        for s in self.steps:
            form = conjugate(form, s)
        return form

    def as_list(self) -> list[dict]:
        return [s.as_dict() for s in self.steps]


def conjugate(form: KPForm, step: ShearStep) -> KPForm:
    M = step_coordinate_map(step, form.n)
    N = step_momentum_map(step, form.n)
    V = M.T @ form.V @ M
    K = N.T @ form.K @ N
    return KPForm(0.5 * (K + K.T), 0.5 * (V + V.T))


def beta_for_alpha(alpha: float, m_i: float, m_j: float) -> float:
    """Second shear parameter that keeps the kinetic energy free of ``p_i p_j``."""
    if m_i <= 0 or m_j <= 0:
        raise ValidationError(f"masses must be positive, got {m_i}, {m_j}")
    return -alpha / (alpha * alpha + m_j / m_i)


class AlphaRoots(NamedTuple):
    """The two roots of the off-diagonal condition, labelled by the sign branch."""

    plus: float
    minus: float

    def select(self, policy: str = "smaller") -> float:
        if policy == "plus":
            return self.plus
        if policy == "minus":
            return self.minus
        if policy == "smaller":
            # ties (e.g. symmetric pairs) resolve to the plus branch
            return self.minus if abs(self.minus) < abs(self.plus) else self.plus
        raise ValidationError(f"unknown root policy {policy!r}; expected one of {ROOT_POLICIES}")


class _NoCoupling:
    """Marker: the pair is already uncoupled, the canonical shear is the identity."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NO_COUPLING"

    def select(self, policy: str = "smaller") -> float:
        if policy not in ROOT_POLICIES:
            raise ValidationError(f"unknown root policy {policy!r}; expected one of {ROOT_POLICIES}")
        return 0.0


NO_COUPLING = _NoCoupling()


def alpha_roots(d_i: float, d_j: float, d_ij: float, k_ji: float) -> AlphaRoots | _NoCoupling:
    """Roots of ``-d_ij a^2 - 2 (d_i k_ji - d_j) a + d_ij k_ji = 0``.

    ``k_ji = m_j / m_i``. Branches follow ``a = -(b ± sqrt(b^2 + d_ij^2 k_ji)) / d_ij``
    with ``b = d_i k_ji - d_j``; the branch that would cancel is obtained from
    the root product ``-k_ji`` instead.
    """
    if k_ji <= 0:
        raise ValidationError(f"mass ratio must be positive, got {k_ji}")
    if d_ij == 0:
        return NO_COUPLING
    b = d_i * k_ji - d_j
    disc = math.hypot(b, d_ij * math.sqrt(k_ji))
    if b >= 0:
        plus = -(b + disc) / d_ij
        minus = -k_ji / plus
    else:
        minus = -(b - disc) / d_ij
        plus = -k_ji / minus
    return AlphaRoots(plus, minus)


def annihilating_step(form: KPForm, i: int, j: int, root: str = "smaller") -> ShearStep:
    """Step on ``(i, j)`` that zeroes ``V_ij`` using the form's current masses.

    Assumes the kinetic matrix is diagonal on rows ``i`` and ``j``.
    """
    K, V = form.K, form.V
    m_i, m_j = 1.0 / K[i, i], 1.0 / K[j, j]
    roots = alpha_roots(0.5 * V[i, i], 0.5 * V[j, j], V[i, j], m_j / m_i)
    alpha = roots.select(root)
    return ShearStep(i, j, alpha, beta_for_alpha(alpha, m_i, m_j))
