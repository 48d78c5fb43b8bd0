import numpy as np
import pytest
from hypothesis import strategies as st

from sheardiag.model import KPForm, random_hamiltonian, to_kpform


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def worked_two_body():
    from sheardiag.model import QuadHamiltonian

    return QuadHamiltonian.from_phi([1.0, 1.0], [[2.0, 1.0], [1.0, 2.0]])


def random_form(rng, n, stable=True):
    h = random_hamiltonian(rng, n, stable=stable)
    return to_kpform(h)


def random_dense_form(rng, n):
    """A form with cross-kinetic terms: K = A A^T + n I, V symmetric."""
    A = rng.normal(size=(n, n))
    K = A @ A.T / n + np.eye(n)
    W = rng.normal(size=(n, n))
    return KPForm(K, W + W.T)


def sorted_eigs_kv(form):
    # independent of KPForm.spectrum: generalized symmetric problem via numpy eig
    w = np.linalg.eigvals(form.K @ form.V)
    return np.sort(w.real)


seeds = st.integers(min_value=0, max_value=2**32 - 1)
