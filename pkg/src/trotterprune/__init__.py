"""Sensitivity-guided truncation of Trotter-Suzuki product formulas.

The pipeline builds a random Hermitian term ensemble, estimates first-order
Sobol sensitivity indices of the Frobenius norm of randomly weighted term
sums, drops terms whose indices fall far below the mean, and quantifies the
decomposition error and gate-count savings of the truncated product formula
against exact evolution.
"""

__version__ = "0.1.0"
