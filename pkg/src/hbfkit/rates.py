"""SINR, sum-rate, virtual effective channel, and waterfilling capacity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import AnalogPrecoder


class NoCapacityError(ValueError):
    """All channel eigenvalues are zero; the waterfill level is undefined."""


def _as_matrix(a) -> np.ndarray:
    return a.matrix if isinstance(a, AnalogPrecoder) else np.asarray(a, dtype=np.complex128)


def _as_channel(h) -> np.ndarray:
    h = getattr(h, "h", h)
    return np.asarray(h, dtype=np.complex128)


def sinr_fdp(h, u_mat: np.ndarray, sigma2: float, user: int) -> float:
    """SINR of one user under a fully digital precoder U:
    |h_u^H u_u|^2 / (sum_{j != u} |h_u^H u_j|^2 + sigma2)."""
    h = _as_channel(h)
    cross = np.abs(h[:, user].conj() @ np.asarray(u_mat)) ** 2
    signal = cross[user]
    interference = float(np.sum(cross)) - signal
    return float(signal / (interference + sigma2))


def sum_rate_fdp(h, u_mat: np.ndarray, sigma2: float) -> float:
    h = _as_channel(h)
    cross = np.abs(h.conj().T @ np.asarray(u_mat)) ** 2
    signal = np.diagonal(cross)
    interference = cross.sum(axis=1) - signal
    return float(np.sum(np.log2(1.0 + signal / (interference + sigma2))))


def sinr_hybrid(h, a, w: np.ndarray, sigma2: float, user: int) -> float:
    """SINR of one user under the hybrid pair (A, W)."""
    return sinr_fdp(h, _as_matrix(a) @ np.asarray(w), sigma2, user)


def sum_rate_hybrid(h, a, w: np.ndarray, sigma2: float) -> float:
    return sum_rate_fdp(h, _as_matrix(a) @ np.asarray(w), sigma2)


def effective_channel(h, a) -> np.ndarray:
    """Virtual channel A^H h seen by the digital stage (N_RF virtual antennas)."""
    return _as_matrix(a).conj().T @ _as_channel(h)


@dataclass(frozen=True)
class WaterfillResult:
    mu: float
    capacity: float
    allocations: np.ndarray
    rho: float
    eigenvalues: np.ndarray


def waterfill_capacity(eigenvalues, rho: float) -> WaterfillResult:
    """Exact waterfilling over channel eigenvalues at SNR budget rho.

    Solves rho = sum_i max(mu - 1/beta_i, 0) in closed form by scanning
    active sets in 1/beta order, then evaluates the capacity
    sum_i max(log2(mu beta_i), 0).
    """
    beta = np.asarray(eigenvalues, dtype=float)
    if beta.ndim != 1 or beta.size == 0:
        raise ValueError("eigenvalues must be a non-empty 1-D sequence")
    if np.any(beta < 0):
        raise ValueError("eigenvalues must be non-negative")
    if rho <= 0:
        raise ValueError("rho must be positive")
    positive = beta[beta > 0]
    if positive.size == 0:
        raise NoCapacityError("all eigenvalues are zero")

    inv = np.sort(1.0 / positive)
    mu = 0.0
    for m in range(inv.size, 0, -1):
        # largest active set first: levels only rise as weak modes drop out
        mu = (rho + inv[:m].sum()) / m
        if mu >= inv[m - 1]:
            break
    allocations = np.maximum(mu - 1.0 / np.where(beta > 0, beta, np.inf), 0.0)
    capacity = float(np.sum(np.maximum(np.log2(np.where(beta > 0, mu * beta, 1.0)), 0.0)))
    return WaterfillResult(mu=float(mu), capacity=capacity, allocations=allocations,
                           rho=float(rho), eigenvalues=beta)


def waterfill_capacity_many(eigenvalues: np.ndarray, rho: float) -> np.ndarray:
    """Vectorized capacities for stacked eigenvalue rows (batch, n_modes)."""
    beta = np.asarray(eigenvalues, dtype=float)
    if beta.ndim != 2:
        raise ValueError("expected a (batch, modes) array")
    if rho <= 0:
        raise ValueError("rho must be positive")
    if np.any(np.nanmax(beta, axis=1) <= 0):
        raise NoCapacityError("a batch row has no positive eigenvalue")
    beta = np.maximum(beta, 0.0)
    with np.errstate(divide="ignore"):
        inv = np.where(beta > 0, 1.0 / beta, np.inf)
    inv.sort(axis=1)
    counts = np.arange(1, beta.shape[1] + 1, dtype=float)
    finite = np.isfinite(inv)
    prefix = np.cumsum(np.where(finite, inv, 0.0), axis=1)
    mu_candidates = (rho + prefix) / counts
    valid = finite & (mu_candidates >= inv)
    # the largest valid active set yields the true level
    m_star = valid.shape[1] - 1 - np.argmax(valid[:, ::-1], axis=1)
    mu = mu_candidates[np.arange(beta.shape[0]), m_star]
    gain = mu[:, None] * beta
    return np.sum(np.maximum(np.log2(np.where(gain > 0, gain, 1.0)), 0.0), axis=1)


def gram_eigenvalues(h: np.ndarray) -> np.ndarray:
    """Nonzero spectrum of h h^H via the smaller Gram matrix h^H h."""
    h = _as_channel(h)
    gram = h.conj().T @ h
    return np.maximum(np.linalg.eigvalsh(gram), 0.0)
