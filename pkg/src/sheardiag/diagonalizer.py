"""Full diagonalizations assembled from pair shears.

Every routine returns a :class:`DiagonalResult` holding the effective masses
and force constants in the original coordinates together with the shear
sequence that produced them, so the result can be replayed against the
original form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, NotPairDecoupledError, ValidationError
from .model import KPForm, QuadHamiltonian, build_bravais_chain, to_kpform
from .shear import (
    NO_COUPLING,
    ROOT_POLICIES,
    ShearSequence,
    ShearStep,
    alpha_roots,
    annihilating_step,
    beta_for_alpha,
    conjugate,
)

DEFAULT_TOL = 1e-12
EXACT_TOL = 1e-12
PIVOTS = ("largest", "cyclic")


@dataclass(frozen=True, eq=False)
class DiagonalResult:
    m_eff: np.ndarray
    d_eff: np.ndarray
    omega_sq: np.ndarray
    sequence: ShearSequence
    k_residual: float
    v_residual: float
    converged: bool
    method: str = ""
    tol: float = DEFAULT_TOL
    residual_trace: tuple[float, ...] = ()
    k_residual_max: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.m_eff.size

    def sorted_omega_sq(self) -> np.ndarray:
        return np.sort(self.omega_sq)


def residual_offdiag(form: KPForm) -> tuple[float, float]:
    """Largest absolute off-diagonal entry of ``K`` and of ``V``."""
    n = form.n
    if n < 2:
        return 0.0, 0.0
    mask = ~np.eye(n, dtype=bool)
    return float(np.max(np.abs(form.K[mask]))), float(np.max(np.abs(form.V[mask])))


def _relative_v_residual(form: KPForm) -> float:
    _, v = residual_offdiag(form)
    scale = float(np.max(np.abs(form.V)))
    return v / scale if scale > 0 else 0.0


def _make_result(
    m_eff,
    d_eff,
    sequence: ShearSequence,
    final: KPForm,
    method: str,
    tol: float,
    converged: bool | None = None,
    **kw,
) -> DiagonalResult:
    m_eff = np.asarray(m_eff, dtype=float)
    d_eff = np.asarray(d_eff, dtype=float)
    omega_sq = 2.0 * d_eff / m_eff
    k_res, v_res = residual_offdiag(final)
    if converged is None:
        converged = _relative_v_residual(final) <= tol and k_res <= EXACT_TOL * float(np.max(np.abs(final.K)))
    for a in (m_eff, d_eff, omega_sq):
        a.setflags(write=False)
    return DiagonalResult(
        m_eff, d_eff, omega_sq, sequence, k_res, v_res, bool(converged), method, tol, **kw
    )


def _result_from_form(final: KPForm, sequence: ShearSequence, method: str, tol: float, **kw) -> DiagonalResult:
    return _make_result(1.0 / np.diag(final.K), 0.5 * np.diag(final.V), sequence, final, method, tol, **kw)


def _two_body_closed_form(m1, m2, d1, d2, d12, alpha):
    """Effective parameters of a coupled pair after the shear with slaved beta."""
    k12 = m1 / m2
    denom = 1.0 + k12 * alpha * alpha
    m1_eff = m1 * m2 / (m2 + m1 * alpha * alpha)
    m2_eff = m2 + m1 * alpha * alpha
    d1_eff = (d1 + d12 * k12 * alpha + d2 * k12 * k12 * alpha * alpha) / (denom * denom)
    d2_eff = d1 * alpha * alpha + d2 - d12 * alpha
    return m1_eff, m2_eff, d1_eff, d2_eff


def _pair_alpha(m_i, m_j, d_i, d_j, d_ij, root):
    return alpha_roots(d_i, d_j, d_ij, m_j / m_i).select(root)


def diagonalize_two_body(h: QuadHamiltonian, root: str = "smaller") -> DiagonalResult:
    if h.n != 2:
        raise ValidationError(f"two-body diagonalization needs n=2, got n={h.n}")
    return diagonalize_disjoint_pairs_chain(h, [(0, 1)], root=root, method="two_body")


def diagonalize_disjoint_pairs_chain(
    h: QuadHamiltonian,
    pairing=None,
    root: str = "smaller",
    method: str = "pairs_chain",
) -> DiagonalResult:
    """Diagonalize a Hamiltonian whose only couplings sit inside disjoint pairs.

    The default pairing is ``(0, 1), (2, 3), ...`` and needs even ``n``.
    Each pair is handled by the closed two-body formulas.
    """
    n = h.n
    if pairing is None:
        if n % 2:
            raise ValidationError(f"default pairing needs an even number of particles, got n={n}")
        pairing = [(k, k + 1) for k in range(0, n, 2)]
    pairing = [(int(i), int(j)) for i, j in pairing]
    seen: set[int] = set()
    for i, j in pairing:
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ValidationError(f"invalid pair ({i}, {j}) for n={n}")
        if i in seen or j in seen:
            raise ValidationError(f"pairs are not disjoint: index reused in ({i}, {j})")
        seen.update((i, j))
    allowed = np.zeros((n, n), dtype=bool)
    for i, j in pairing:
        allowed[i, j] = allowed[j, i] = True
    for i, j in zip(*np.nonzero(np.triu(h.d_off, 1))):
        if not allowed[i, j]:
            raise NotPairDecoupledError(int(i), int(j), float(h.d_off[i, j]))

    m_eff = h.masses.copy()
    d_eff = h.d_diag.copy()
    steps = []
    for i, j in pairing:
        d_ij = float(h.d_off[i, j])
        if d_ij == 0.0:
            continue
        m_i, m_j, d_i, d_j = h.masses[i], h.masses[j], h.d_diag[i], h.d_diag[j]
        alpha = _pair_alpha(m_i, m_j, d_i, d_j, d_ij, root)
        m_eff[i], m_eff[j], d_eff[i], d_eff[j] = _two_body_closed_form(m_i, m_j, d_i, d_j, d_ij, alpha)
        steps.append(ShearStep(i, j, alpha, beta_for_alpha(alpha, m_i, m_j)))
    sequence = ShearSequence(n, tuple(steps))
    final = sequence.apply(to_kpform(h))
    return _make_result(m_eff, d_eff, sequence, final, method, EXACT_TOL)


def bravais_closed_form(n: int, m: float, d1: float, d12: float, hbar: float = 1.0) -> DiagonalResult:
    """Pairwise closed form for the uniform chain with ``alpha = -1`` on every pair.

    Masses come out as ``(m/2, 2m)`` per pair and the squared frequencies as
    ``(phi11 - phi12)/m`` and ``(phi11 + phi12)/m`` (``phi11 = 2 d1``,
    ``phi12 = d12``). The couplings between neighbouring pairs are not
    touched, so for ``n > 2`` with ``d12 != 0`` the replayed residual is
    nonzero and ``converged`` is False.
    """
    h = build_bravais_chain(n, m, d1, d12, hbar)
    alpha = -1.0
    beta = beta_for_alpha(alpha, m, m)
    m_eff = np.tile([m / 2.0, 2.0 * m], n // 2)
    d_eff = np.tile([(2.0 * d1 - d12) / 4.0, 2.0 * d1 + d12], n // 2)
    sequence = ShearSequence(n, tuple(ShearStep(k, k + 1, alpha, beta) for k in range(0, n, 2)))
    final = sequence.apply(to_kpform(h))
    return _make_result(m_eff, d_eff, sequence, final, "bravais", EXACT_TOL)


# -- three-body staged solution -------------------------------------------------

# (i, j) of the three stages; the third index of each stage is the remaining one
THREE_BODY_STAGES = ((0, 1), (1, 2), (2, 0))


@dataclass(frozen=True)
class ThreeBodyParams:
    """Masses, on-site constants and the three couplings ``(d01, d02, d12)``."""

    m: tuple[float, float, float]
    d: tuple[float, float, float]
    c: tuple[float, float, float]

    _PAIR_INDEX = {(0, 1): 0, (1, 0): 0, (0, 2): 1, (2, 0): 1, (1, 2): 2, (2, 1): 2}

    def coupling(self, i: int, j: int) -> float:
        return self.c[self._PAIR_INDEX[(i, j)]]

    @classmethod
    def from_hamiltonian(cls, h: QuadHamiltonian) -> "ThreeBodyParams":
        return cls(
            tuple(map(float, h.masses)),
            tuple(map(float, h.d_diag)),
            (float(h.d_off[0, 1]), float(h.d_off[0, 2]), float(h.d_off[1, 2])),
        )

    @classmethod
    def from_form(cls, form: KPForm) -> "ThreeBodyParams":
        V = form.V
        return cls(
            tuple(1.0 / np.diag(form.K)),
            tuple(0.5 * np.diag(V)),
            (float(V[0, 1]), float(V[0, 2]), float(V[1, 2])),
        )

    def as_array(self) -> np.ndarray:
        return np.array(self.m + self.d + self.c)


def stage_update(p: ThreeBodyParams, i: int, j: int, alpha: float) -> ThreeBodyParams:
    """Parameters after one stage on pair ``(i, j)`` with beta slaved to the current masses.

    With ``k = m_i/m_j``, ``D = 1 + k alpha^2`` and ``t`` the spectator::

        m_i' = m_i m_j / (m_j + m_i alpha^2)       m_j' = m_j D
        d_i' = (d_i + d_ij k alpha + d_j k^2 alpha^2) / D^2
        d_j' = d_i alpha^2 + d_j - d_ij alpha
        d_ij' = (d_ij (1 - k alpha^2) - 2 d_i alpha + 2 d_j k alpha) / D
        d_it' = (d_it + d_jt k alpha) / D
        d_jt' = d_jt - d_it alpha
    """
    (t,) = {0, 1, 2} - {i, j}
    m, d = list(p.m), list(p.d)
    d_ij, d_it, d_jt = p.coupling(i, j), p.coupling(i, t), p.coupling(j, t)
    m_i, m_j, d_i, d_j = m[i], m[j], d[i], d[j]
    k = m_i / m_j
    a2 = alpha * alpha
    denom = 1.0 + k * a2
    m[i] = m_i * m_j / (m_j + m_i * a2)
    m[j] = m_j * denom
    d[i] = (d_i + d_ij * k * alpha + d_j * k * k * a2) / (denom * denom)
    d[j] = d_i * a2 + d_j - d_ij * alpha
    new = {
        (i, j): (d_ij * (1.0 - k * a2) - 2.0 * d_i * alpha + 2.0 * d_j * k * alpha) / denom,
        (i, t): (d_it + d_jt * k * alpha) / denom,
        (j, t): d_jt - d_it * alpha,
    }
    c = [0.0, 0.0, 0.0]
    for (a, b), v in new.items():
        c[ThreeBodyParams._PAIR_INDEX[(a, b)]] = v
    return ThreeBodyParams(tuple(m), tuple(d), tuple(c))


def three_body_stages(p: ThreeBodyParams, alphas) -> list[ThreeBodyParams]:
    """Primed, double-primed and final parameters for the given stage alphas."""
    out = []
    for (i, j), a in zip(THREE_BODY_STAGES, alphas):
        p = stage_update(p, i, j, float(a))
        out.append(p)
    return out


def three_body_residual(p: ThreeBodyParams, alphas) -> np.ndarray:
    """Final couplings ``(d01, d02, d12)``; all vanish at a solution."""
    return np.array(three_body_stages(p, alphas)[-1].c)


def _three_body_sequence(p: ThreeBodyParams, alphas) -> ShearSequence:
    steps = []
    for (i, j), a in zip(THREE_BODY_STAGES, alphas):
        steps.append(ShearStep(i, j, float(a), beta_for_alpha(float(a), p.m[i], p.m[j])))
        p = stage_update(p, i, j, float(a))
    return ShearSequence(3, tuple(steps))


def _fd_jacobian(f, x, fx, rel_step=1e-7):
    J = np.empty((fx.size, x.size))
    for col in range(x.size):
        h = rel_step * max(1.0, abs(x[col]))
        xp = x.copy()
        xp[col] += h
        J[:, col] = (f(xp) - fx) / h
    return J


def damped_newton(
    f, x0, tol: float, max_iter: int = 100, stall_tol: float = 0.0, min_damping: float = 2.0**-30
):
    """Damped Newton iteration with a forward-difference Jacobian.

    The step length is halved until the residual max-norm decreases. If no
    decrease is possible (round-off floor) the iterate is still accepted when
    its residual is within ``stall_tol``.
    Returns ``(x, residual_norm, iterations)``; raises ConvergenceError.
    """
    x = np.array(x0, dtype=float)
    fx = f(x)
    r = float(np.max(np.abs(fx)))
    for it in range(max_iter):
        if r <= tol:
            return x, r, it
        J = _fd_jacobian(f, x, fx)
        try:
            dx = np.linalg.solve(J, -fx)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(J, -fx, rcond=None)[0]
        lam = 1.0
        while True:
            x_new = x + lam * dx
            f_new = f(x_new)
            r_new = float(np.max(np.abs(f_new)))
            if np.isfinite(r_new) and r_new < r:
                break
            lam *= 0.5
            if lam < min_damping:
                if r <= stall_tol:
                    return x, r, it
                raise ConvergenceError(f"damped Newton stalled at residual {r:.3e}", r)
        x, fx, r = x_new, f_new, r_new
    if r <= max(tol, stall_tol):
        return x, r, max_iter
    raise ConvergenceError(f"damped Newton did not converge in {max_iter} iterations (residual {r:.3e})", r)


def _three_body_guesses(p: ThreeBodyParams, root: str):
    """Independent two-body alphas per stage pair, the preferred branch first."""
    branches = []
    for i, j in THREE_BODY_STAGES:
        roots = alpha_roots(p.d[i], p.d[j], p.coupling(i, j), p.m[j] / p.m[i])
        if roots is NO_COUPLING:
            branches.append((0.0,))
        else:
            first = roots.select(root)
            other = roots.minus if first == roots.plus else roots.plus
            branches.append((first, other))
    return list(itertools.product(*branches))


def _sequential_guess(p: ThreeBodyParams, root: str) -> tuple[float, float, float]:
    """Each stage zeroes its own pair using the parameters left by the previous stage."""
    alphas = []
    for i, j in THREE_BODY_STAGES:
        roots = alpha_roots(p.d[i], p.d[j], p.coupling(i, j), p.m[j] / p.m[i])
        a = roots.select(root)
        alphas.append(a)
        p = stage_update(p, i, j, a)
    return tuple(alphas)


def _scaled_couplings(p: ThreeBodyParams, t: float) -> ThreeBodyParams:
    return ThreeBodyParams(p.m, p.d, tuple(t * c for c in p.c))


def _continuation(p0: ThreeBodyParams, tol: float, stall_tol: float, max_iter: int, min_step: float = 2.0**-12):
    """Follow the alpha = 0 solution of the decoupled problem as couplings grow to full size.

    Needs ``d_i / m_i != d_j / m_j`` on each stage pair; otherwise the weak-coupling
    roots sit at ``alpha = +-sqrt(m_j/m_i)`` and there is no branch through zero.
    """
    x = np.zeros(3)
    t, dt = 0.0, 0.125
    while t < 1.0:
        t_next = min(1.0, t + dt)
        pt = _scaled_couplings(p0, t_next)
        try:
            x_new, r, _ = damped_newton(
                lambda a: three_body_residual(pt, a), x, tol * t_next, max_iter=max_iter, stall_tol=stall_tol * t_next
            )
        except ConvergenceError:
            dt *= 0.5
            if dt < min_step:
                raise
            continue
        x, t = x_new, t_next
        dt = min(2.0 * dt, 0.25)
    return x


def diagonalize_three_body(
    h: QuadHamiltonian,
    solver: str = "staged-newton",
    tol: float = DEFAULT_TOL,
    root: str = "smaller",
    max_iter: int = 100,
) -> DiagonalResult:
    """Three stages on pairs (0,1), (1,2), (2,0) with alphas solved jointly.

    ``solver="sweep"`` delegates to :func:`diagonalize_general_sweep`.
    """
    if h.n != 3:
        raise ValidationError(f"three-body diagonalization needs n=3, got n={h.n}")
    if solver == "sweep":
        return diagonalize_general_sweep(h, tol=tol, root=root)
    if solver != "staged-newton":
        raise ValidationError(f"unknown three-body solver {solver!r}")
    p0 = ThreeBodyParams.from_hamiltonian(h)
    form0 = to_kpform(h)
    if h.is_decoupled():
        seq = ShearSequence(3)
        return _make_result(h.masses, h.d_diag, seq, form0, "three_body", tol)

    scale = float(np.max(np.abs(form0.V)))
    newton_tol = 0.01 * tol * scale
    f = lambda a: three_body_residual(p0, a)
    starts = _three_body_guesses(p0, root) + [_sequential_guess(p0, root)]
    solution = None
    last = None
    for attempt, guess in enumerate(starts):
        try:
            solution = damped_newton(f, np.array(guess), newton_tol, max_iter=max_iter, stall_tol=tol * scale)
        except ConvergenceError as exc:
            last = exc
            continue
        break
    if solution is None:
        # rare: no starting point lies in a Newton basin, so track the root from zero coupling
        attempt = "continuation"
        try:
            x = _continuation(p0, newton_tol, tol * scale, max_iter)
            solution = damped_newton(f, x, newton_tol, max_iter=max_iter, stall_tol=tol * scale)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"staged Newton failed from every starting point and under continuation "
                f"(last residual {exc.residual:.3e}); retry with solver='sweep'",
                exc.residual if last is None else min(exc.residual, last.residual),
            ) from None
    alphas, r, iters = solution
    final_p = three_body_stages(p0, alphas)[-1]
    sequence = _three_body_sequence(p0, alphas)
    final_form = sequence.apply(form0)
    return _make_result(
        final_p.m,
        final_p.d,
        sequence,
        final_form,
        "three_body",
        tol,
        info={"alphas": [float(a) for a in alphas], "newton_iterations": iters, "start": attempt},
    )


# -- general sweep ----------------------------------------------------------------


def _largest_pivot(form: KPForm) -> tuple[int, int, float]:
    # classical Jacobi pivot on the mass-scaled matrix V_ij sqrt(K_ii K_jj)
    s = np.sqrt(np.diag(form.K))
    D = np.abs(np.triu(form.V, 1)) * np.outer(s, s)
    i, j = np.unravel_index(int(np.argmax(D)), D.shape)
    return int(i), int(j), float(D[i, j])


def diagonalize_general_sweep(
    h: QuadHamiltonian,
    tol: float = DEFAULT_TOL,
    max_sweeps: int | None = None,
    pivot: str = "largest",
    root: str = "smaller",
) -> DiagonalResult:
    """Repeatedly zero one coupling at a time until ``V`` is diagonal.

    Each step uses the current effective parameters of the chosen pair. A
    sweep is ``n(n-1)/2`` steps. ``converged`` is False (not an exception)
    when the budget runs out; ``residual_trace`` holds the relative
    off-diagonal size of ``V`` after every sweep.
    """
    n = h.n
    if n < 2:
        raise ValidationError("sweep needs at least two particles")
    if tol <= 0:
        raise ValidationError(f"tolerance must be positive, got {tol}")
    if pivot not in PIVOTS:
        raise ValidationError(f"unknown pivot {pivot!r}; expected one of {PIVOTS}")
    if root not in ROOT_POLICIES:
        raise ValidationError(f"unknown root policy {root!r}; expected one of {ROOT_POLICIES}")
    if max_sweeps is None:
        max_sweeps = 50 * n
    form = to_kpform(h)
    steps: list[ShearStep] = []
    pairs = [(i, j) for i in range(n - 1) for j in range(i + 1, n)]
    trace = [_relative_v_residual(form)]
    k_max = 0.0
    converged = trace[0] <= tol
    sweeps = 0
    while not converged and sweeps < max_sweeps:
        if pivot == "largest":
            for _ in pairs:
                i, j, size = _largest_pivot(form)
                if size == 0.0:
                    break
                form, k_max = _sweep_step(form, i, j, root, steps, k_max)
        else:
            for i, j in pairs:
                if form.V[i, j] != 0.0:
                    form, k_max = _sweep_step(form, i, j, root, steps, k_max)
        sweeps += 1
        trace.append(_relative_v_residual(form))
        converged = trace[-1] <= tol
    sequence = ShearSequence(n, tuple(steps))
    return _result_from_form(
        form,
        sequence,
        "sweep",
        tol,
        converged=converged,
        residual_trace=tuple(trace),
        k_residual_max=k_max,
        info={"sweeps": sweeps, "pivot": pivot},
    )


def _sweep_step(form, i, j, root, steps, k_max):
    step = annihilating_step(form, i, j, root)
    form = conjugate(form, step)
    steps.append(step)
    k_res, _ = residual_offdiag(form)
    k_scale = float(np.max(np.abs(np.diag(form.K))))
    if k_res > 1e-10 * k_scale:
        raise AssertionError(f"kinetic matrix lost diagonality at step {len(steps)}: {k_res:.3e}")
    return form, max(k_max, k_res)


METHODS = ("two_body", "pairs_chain", "bravais", "three_body", "sweep")
