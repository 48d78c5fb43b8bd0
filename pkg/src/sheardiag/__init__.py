"""Diagonalization of quadratic Hamiltonians by pair shear transformations.

The transformed Hamiltonian stays in the original position and momentum
observables, with effective masses and force constants; every result can be
checked against classical normal-mode analysis.
"""

__version__ = "0.1.0"

from .diagonalizer import (
    DiagonalResult,
    bravais_closed_form,
    diagonalize_disjoint_pairs_chain,
    diagonalize_general_sweep,
    diagonalize_three_body,
    diagonalize_two_body,
    residual_offdiag,
)
from .errors import ConvergenceError, NotPairDecoupledError, UnstablePotentialError, ValidationError
from .model import (
    KPForm,
    QuadHamiltonian,
    build_bravais_chain,
    build_nn_chain,
    symmetrize,
    to_kpform,
)
from .normal_modes import (
    NormalModes,
    eigendecompose,
    mass_scaled_matrix,
    normal_modes,
    toeplitz_frequencies,
    zero_point_energy,
)
from .shear import ShearSequence, ShearStep, alpha_roots, beta_for_alpha, conjugate
from .states import (
    GaussianState,
    LadderOp,
    commutator,
    entangled_ground_state,
    ground_state_from_diagonal,
    ground_state_residual,
    ladder_pair,
    zpe_compare,
)
