"""Near-optimal fully digital precoding.

The candidate family follows the regularized analytical structure
u_u ~ (I + (1/sigma2) sum_i lambda_i h_i h_i^H)^-1 h_u with per-user
powers p_u; near-optimality is obtained by enumerating every non-empty
user subset with p_u = lambda_u = 1/|S| on the subset. Evaluated
candidates are normalized to unit power per served user (the operative
power constraint throughout the toolkit).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .linalg import SingularMatrixError, reciprocal_condition, unit_columns
from .rates import _as_channel, sum_rate_fdp

ENUMERATION_LIMIT = 12


class EnumerationLimitError(ValueError):
    """Too many users for exhaustive subset enumeration."""


@dataclass(frozen=True)
class FdpCandidateParams:
    """Per-user multipliers and powers; both sum to one over served users."""

    lambdas: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        pwr = np.asarray(self.powers, dtype=float)
        if lam.shape != pwr.shape or lam.ndim != 1:
            raise ValueError("lambdas and powers must be 1-D arrays of equal length")
        if np.any(lam < 0) or np.any(pwr < 0):
            raise ValueError("lambdas and powers must be non-negative")
        if abs(pwr.sum() - 1.0) > 1e-12:
            raise ValueError("powers must sum to 1")
        # single-user case: the interference multipliers are vacuous
        if abs(lam.sum() - 1.0) > 1e-12 and not (lam.size == 1 and lam.sum() == 0.0):
            raise ValueError("lambdas must sum to 1")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "powers", pwr)

    @classmethod
    def uniform_subset(cls, n_u: int, subset) -> "FdpCandidateParams":
        lam = np.zeros(n_u)
        lam[list(subset)] = 1.0 / len(subset)
        return cls(lambdas=lam, powers=lam.copy())


def fdp_from_params(h, params: FdpCandidateParams, sigma2: float) -> np.ndarray:
    """Build the analytical-structure precoder; column u has ||u_u||^2 = p_u."""
    h = _as_channel(h)
    n_t, n_u = h.shape
    if params.lambdas.size != n_u:
        raise ValueError("params length does not match user count")
    m = np.eye(n_t, dtype=np.complex128)
    m += (h * params.lambdas) @ h.conj().T / sigma2
    directions = np.linalg.solve(m, h)
    norms = np.linalg.norm(directions, axis=0)
    u_mat = directions * (np.sqrt(params.powers) / norms)
    return u_mat


def fdp_enumerate(h, sigma2: float) -> tuple[np.ndarray, float]:
    """Best subset candidate: evaluate all 2^N_U - 1 even-power subsets.

    Served columns are normalized to unit power before evaluation; ties
    break toward the smallest subset, then lexicographic user order.
    Returns (precoder, achieved sum-rate).
    """
    h = _as_channel(h)
    n_u = h.shape[1]
    if n_u > ENUMERATION_LIMIT:
        raise EnumerationLimitError(
            f"{n_u} users exceeds the enumeration guard ({ENUMERATION_LIMIT}); "
            "sample subsets instead")
    best_u, best_rate = None, -np.inf
    for size in range(1, n_u + 1):
        for subset in combinations(range(n_u), size):
            params = FdpCandidateParams.uniform_subset(n_u, subset)
            u_mat = fdp_from_params(h, params, sigma2)
            u_mat = unit_columns(u_mat, skip_zero=True)
            rate = sum_rate_fdp(h, u_mat, sigma2)
            if rate > best_rate:
                best_u, best_rate = u_mat, rate
    return best_u, float(best_rate)


def zf_precoder(h, sigma2: float) -> np.ndarray:
    """Zero-forcing baseline h (h^H h)^-1 with unit-power columns."""
    h = _as_channel(h)
    if reciprocal_condition(h) < 1e-12:
        raise SingularMatrixError("channel is rank deficient; ZF undefined")
    u_mat = h @ np.linalg.inv(h.conj().T @ h)
    return unit_columns(u_mat)
