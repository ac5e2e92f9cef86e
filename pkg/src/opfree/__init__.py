"""Operator-valued free probability over finite-dimensional algebras.

Noncommutative polynomials with coefficients in a multi-matrix algebra B,
B-valued semicircular families on a truncated Fock space, B-valued
cumulants, and numerical checks of conjugate systems and of the calculus of
the eta-derivative.
"""
from .bpoly import BPolynomial, DerivTensor, LinearPencil, eta_derivative, linearize
from .covmap import CovarianceMatrix, block_diagonal, symmetrize, validate_covariance
from .cumulant import (FockMoments, MatrixMoments, MomentCumulants, SemicircularCumulants,
                       check_amalgamated_freeness, check_conjugate_cumulants,
                       cumulants_to_moments, moments_to_cumulants, semicircular_moment_oracle)
from .errors import ConfigError, ExactnessError, OpfreeError, SizeLimitError, ValidationError
from .fock import FockModel, build_bimodule, build_fock, fock_expectation
from .matalg import AlgebraContext, Tolerances, validate_subalgebra
from .ncpart import NCPartition, catalan, enumerate_nc, nc_pairings
from .report import VerificationReport

__version__ = "0.1.0"

__all__ = [
    "AlgebraContext", "BPolynomial", "ConfigError", "CovarianceMatrix", "DerivTensor",
    "ExactnessError", "FockModel", "FockMoments", "LinearPencil", "MatrixMoments",
    "MomentCumulants", "NCPartition", "OpfreeError", "SemicircularCumulants", "SizeLimitError",
    "Tolerances", "ValidationError", "VerificationReport", "block_diagonal", "build_bimodule",
    "build_fock", "catalan", "check_amalgamated_freeness", "check_conjugate_cumulants",
    "cumulants_to_moments", "enumerate_nc", "eta_derivative", "fock_expectation", "linearize",
    "moments_to_cumulants", "nc_pairings", "semicircular_moment_oracle", "symmetrize",
    "validate_covariance", "validate_subalgebra",
]
