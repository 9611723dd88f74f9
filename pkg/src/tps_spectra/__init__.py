"""Numerical toolkit for deciding whether a local Hamiltonian is determined by its spectrum."""

from .errors import (
    DefectivePointError,
    DegenerateSpectrumError,
    DimensionOverflowError,
    NonHermitianError,
    NotInClassError,
    SolverError,
    TpsSpectraError,
)
from .pauli_algebra import (
    BasisElement,
    LocalityClass,
    OperatorExpr,
    PauliString,
    TICoefficients,
    build_boundary_class,
    build_class,
    build_ising,
    build_ising_dual,
    build_uniform_chain_class,
    dim_local_space,
    expr_to_boundary_coeffs,
    expr_to_ti,
    boundary_coeffs_to_expr,
    ti_to_expr,
)
from .spectra import (
    EigenSystem,
    Spectrum,
    degeneracy_profile,
    eig_general,
    eigh,
    spectral_distance,
    spectrum_of,
)
from .kernel_check import (
    CertificateReport,
    brute_force_ker_fH,
    build_M,
    certify_finite_duals,
    commutant_1local_dim,
    numerical_rank,
    verify_locality_lemma,
)

__version__ = "0.1.0"
