import json

import numpy as np
import pytest
from hypothesis import given, settings

from sheardiag import specfile
from sheardiag.errors import ValidationError
from sheardiag.model import (
    KPForm,
    QuadHamiltonian,
    bravais_parameters,
    build_bravais_chain,
    build_nn_chain,
    from_kpform,
    random_hamiltonian,
    symmetrize,
    to_kpform,
)

from conftest import seeds


@pytest.mark.parametrize(
    "phi, d, d12",
    [
        ([[2, 1], [1, 2]], [1, 1], 1),
        ([[2, 0], [2, 2]], [1, 1], 1),
    ],
)
def test_symmetrize_examples(phi, d, d12):
    d_diag, d_off = symmetrize(phi)
    np.testing.assert_array_equal(d_diag, d)
    assert d_off[0, 1] == d_off[1, 0] == d12
    assert d_off[0, 0] == d_off[1, 1] == 0


def test_symmetrize_zero():
    d_diag, d_off = symmetrize(np.zeros((3, 3)))
    assert not d_diag.any() and not d_off.any()


@pytest.mark.parametrize("bad", [np.ones((2, 3)), [[1.0, np.nan], [0.0, 1.0]], [1.0, 2.0]])
def test_symmetrize_rejects(bad):
    with pytest.raises(ValidationError):
        symmetrize(bad)


@given(seeds)
def test_symmetrize_idempotent_on_symmetric(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(4, 4))
    phi = A + A.T
    d_diag, d_off = symmetrize(phi)
    rebuilt = d_off + np.diag(2 * d_diag)
    np.testing.assert_array_equal(rebuilt, phi)
    d2, off2 = symmetrize(rebuilt)
    np.testing.assert_array_equal(d2, d_diag)
    np.testing.assert_array_equal(off2, d_off)


def test_to_kpform_examples(worked_two_body):
    f = to_kpform(QuadHamiltonian([2.0], [3.0], [[0.0]]))
    np.testing.assert_array_equal(f.K, [[0.5]])
    np.testing.assert_array_equal(f.V, [[6.0]])
    f = to_kpform(worked_two_body)
    np.testing.assert_array_equal(f.K, np.eye(2))
    np.testing.assert_array_equal(f.V, [[2, 1], [1, 2]])


def test_round_trip(rng):
    h = random_hamiltonian(rng, 5, stable=False)
    back = from_kpform(to_kpform(h), h.hbar)
    np.testing.assert_array_equal(back.masses, h.masses)
    np.testing.assert_array_equal(back.d_diag, h.d_diag)
    np.testing.assert_array_equal(back.d_off, h.d_off)


@settings(max_examples=50)
@given(seeds)
def test_quadratic_form_matches_term_sum(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    h = random_hamiltonian(rng, n, stable=False)
    u = rng.normal(size=n)
    V = to_kpform(h).V
    expected = sum(h.d_diag[i] * u[i] ** 2 for i in range(n)) + sum(
        h.d_off[i, j] * u[i] * u[j] for i in range(n) for j in range(i + 1, n)
    )
    assert 0.5 * u @ V @ u == pytest.approx(expected, rel=1e-12, abs=1e-12)
    assert h.potential(u) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_v_spectrum_is_symmetrized_phi_spectrum(rng):
    phi = rng.normal(size=(4, 4))
    h = QuadHamiltonian.from_phi(np.ones(4), phi)
    sym = 0.5 * (phi + phi.T)
    np.testing.assert_allclose(np.linalg.eigvalsh(to_kpform(h).V), np.linalg.eigvalsh(sym), atol=1e-12)


def test_hamiltonian_validation():
    with pytest.raises(ValidationError):
        QuadHamiltonian([1.0, -1.0], [1, 1], np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        QuadHamiltonian([1.0, np.inf], [1, 1], np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        QuadHamiltonian([1.0, 1.0], [1, 1], [[0, 1], [2, 0]])
    with pytest.raises(ValidationError):
        QuadHamiltonian([1.0, 1.0], [1, 1], [[1, 0], [0, 0]])
    with pytest.raises(ValidationError):
        QuadHamiltonian([1.0], [1.0], [[0.0]], hbar=0.0)


def test_coupling_access_symmetric(worked_two_body):
    assert worked_two_body.coupling(0, 1) == worked_two_body.coupling(1, 0) == 1.0
    with pytest.raises(ValidationError):
        worked_two_body.coupling(1, 1)


def test_immutable(worked_two_body):
    with pytest.raises(ValueError):
        worked_two_body.masses[0] = 3.0
    f = to_kpform(worked_two_body)
    with pytest.raises(ValueError):
        f.V[0, 0] = 1.0


def test_kpform_validation():
    with pytest.raises(ValidationError):
        KPForm([[1, 0.5], [0, 1]], np.eye(2))
    with pytest.raises(ValidationError):
        KPForm(np.diag([1.0, -1.0]), np.eye(2))
    # tiny asymmetry is tolerated and removed
    f = KPForm(np.eye(2), [[1.0, 0.5], [0.5 + 1e-14, 1.0]])
    assert f.V[0, 1] == f.V[1, 0]


def test_nn_chain():
    h = build_nn_chain(3, [1, 1, 1], [1, 1, 1], [1, 1])
    np.testing.assert_array_equal(to_kpform(h).V, [[2, 1, 0], [1, 2, 1], [0, 1, 2]])
    h4 = build_nn_chain(4, np.ones(4), np.ones(4), np.zeros(3))
    assert h4.is_decoupled()
    h2 = build_nn_chain(2, [1, 2], [3, 4], [5])
    assert h2.coupling(0, 1) == 5
    with pytest.raises(ValidationError):
        build_nn_chain(3, [1, 1], [1, 1, 1], [1, 1])
    with pytest.raises(ValidationError):
        build_nn_chain(3, [1, 1, 1], [1, 1, 1], [1])


def test_nn_chain_has_no_long_range():
    h = build_nn_chain(6, np.ones(6), np.ones(6), np.arange(1, 6))
    for i in range(6):
        for j in range(6):
            if abs(i - j) > 1:
                assert h.d_off[i, j] == 0


def test_bravais_chain():
    h = build_bravais_chain(2, 1.0, 1.0, 1.0)
    np.testing.assert_array_equal(to_kpform(h).V, [[2, 1], [1, 2]])
    h4 = build_bravais_chain(4, 2.0, 0.5, -0.3)
    assert bravais_parameters(h4) == (2.0, 0.5, -0.3)
    assert build_bravais_chain(6, 1.0, 1.0, 0.0).is_decoupled()
    with pytest.raises(ValidationError, match="even"):
        build_bravais_chain(5, 1.0, 1.0, 1.0)


def test_bravais_parameters_detects_non_uniform():
    assert bravais_parameters(build_nn_chain(3, [1, 1, 2], [1, 1, 1], [1, 1])) is None
    assert bravais_parameters(QuadHamiltonian.from_phi(np.ones(3), np.ones((3, 3)))) is None


def test_random_stable(rng):
    for n in (2, 3, 6):
        h = random_hamiltonian(rng, n)
        assert np.all(np.linalg.eigvalsh(to_kpform(h).V) > 0)


# -- input files ---------------------------------------------------------------


def test_specfile_matrix_layout():
    h = specfile.loads('{"n": 2, "hbar": 0.5, "masses": [1, 2], "phi": [[2, 0], [2, 2]]}')
    assert h.hbar == 0.5
    np.testing.assert_array_equal(h.masses, [1, 2])
    assert h.coupling(0, 1) == 1.0


def test_specfile_chain_layout():
    h = specfile.loads('{"chain": {"n": 4, "m": 1, "d1": 1, "d12": 0.5}}')
    assert bravais_parameters(h) == (1.0, 1.0, 0.5)
    assert h.hbar == 1.0


def test_specfile_round_trip(rng):
    h = random_hamiltonian(rng, 4)
    back = specfile.loads(specfile.dumps(h))
    np.testing.assert_array_equal(back.d_off, h.d_off)
    np.testing.assert_array_equal(back.masses, h.masses)


@pytest.mark.parametrize(
    "text, match",
    [
        ('{"n": 1, "masses": [1], "phi": [[1]], "extra": 1}', "unknown"),
        ('{"chain": {"n": 2, "m": 1, "d1": 1, "d12": 1, "k": 2}}', "unknown"),
        ('{"chain": {"n": 2, "m": 1, "d1": 1}}', "missing"),
        ('{"n": 2, "masses": [1], "phi": [[1, 0], [0, 1]]}', "masses"),
        ('{"n": 2, "masses": [1, 1], "phi": [[1, 0], [0]]}', r"phi\[1\]"),
        ('{"n": 2, "masses": [1, "a"], "phi": [[1, 0], [0, 1]]}', r"masses\[1\]"),
        ('{"n": 2, "masses": [1, 1],\n "phi": [[1, 0] [0, 1]]}', "line 2"),
        ('{"n": 2, "masses": [1, -1], "phi": [[1, 0], [0, 1]]}', "positive"),
        ("[1, 2]", "object"),
    ],
)
def test_specfile_rejects(text, match):
    with pytest.raises(ValidationError, match=match):
        specfile.loads(text)


def test_specfile_load(tmp_path):
    p = tmp_path / "h.json"
    p.write_text(json.dumps({"n": 1, "masses": [2.0], "phi": [[4.0]]}))
    h = specfile.load(p)
    assert h.d_diag[0] == 2.0
