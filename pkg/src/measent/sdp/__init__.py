"""SDP modeling, compilation and the embedded interior-point solver."""
from .compile import ConeBlock, StandardForm, compile_model
from .model import Affine, Model, Variable, as_affine, bmat, hermitian_basis, hermitian_coords, inner, kron, trace
from .solver import (
    DUAL_INFEASIBLE,
    NEAR_OPTIMAL,
    NUMERICAL_FAILURE,
    OPTIMAL,
    PRIMAL_INFEASIBLE,
    Solution,
    Tolerances,
    solve,
    solve_or_raise,
)

__all__ = [
    "Affine", "ConeBlock", "Model", "Solution", "StandardForm", "Tolerances", "Variable",
    "as_affine", "bmat", "compile_model", "hermitian_basis", "hermitian_coords", "inner", "kron",
    "solve", "solve_or_raise", "trace",
    "OPTIMAL", "PRIMAL_INFEASIBLE", "DUAL_INFEASIBLE", "NUMERICAL_FAILURE", "NEAR_OPTIMAL",
]
