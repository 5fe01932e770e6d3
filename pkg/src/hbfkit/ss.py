"""Synchronization-signal bursts, RSSI measurement/quantization, and the
mutual-information burst design.

RSSI is the averaged, noise-floored beam power |h^H a_k|^2 + sigma2 (no
noise sample is drawn). Values are rescaled into [0, 1] by a global beta
recorded with the burst, linearly quantized on a (2^N_b - 1) grid, and the
burst is chosen to maximize the plug-in mutual information between grid
positions and quantized RSSI tuples.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import FULL_PRECISION, GaParams
from .ga import ga_optimize
from .linalg import QUATERNARY_ALPHABET

logger = logging.getLogger(__name__)


class ScalingViolationError(ValueError):
    """RSSI values left the [0, 1] range expected by the quantizer."""


@dataclass(frozen=True)
class SsBurst:
    """K analog SS beams (2-bit codes, one row per burst) plus the recorded
    scaling factor beta once calibrated."""

    codes: np.ndarray
    beta: float | None = None

    def __post_init__(self):
        codes = np.ascontiguousarray(np.asarray(self.codes, dtype=np.uint8))
        if codes.ndim != 2 or codes.shape[0] < 1:
            raise ValueError("burst codes must be a (K, N_T) array with K >= 1")
        if codes.size and codes.max() > 3:
            raise ValueError("quaternary codes must lie in 0..3")
        object.__setattr__(self, "codes", codes)

    @property
    def k(self) -> int:
        return self.codes.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """Beams as columns: (N_T, K)."""
        return QUATERNARY_ALPHABET[self.codes].T


@dataclass(frozen=True)
class RssiVector:
    values: np.ndarray
    beta: float
    n_b: int | str


@dataclass(frozen=True)
class InfoEstimate:
    position_entropy_bits: float
    rssi_entropy_bits: float
    joint_entropy_bits: float
    mutual_information_bits: float
    position_support: int
    rssi_support: int


def measure_rssi(h_col: np.ndarray, burst: SsBurst, sigma2: float) -> np.ndarray:
    """Raw per-beam RSSI |h^H a_k|^2 + sigma2 for one user channel."""
    h_col = np.asarray(h_col, dtype=np.complex128)
    return np.abs(h_col.conj() @ burst.matrix) ** 2 + sigma2


def measure_rssi_many(channels: np.ndarray, burst: SsBurst, sigma2: float) -> np.ndarray:
    """Stacked RSSI rows for (n, N_T) channel rows -> (n, K)."""
    channels = np.asarray(channels, dtype=np.complex128)
    return np.abs(channels.conj() @ burst.matrix) ** 2 + sigma2


def scale_factor(samples) -> float:
    """Global beta: the maximum RSSI over the calibration set."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("cannot calibrate beta from an empty sample")
    return float(samples.max())


def scale_rssi(values: np.ndarray, beta: float) -> tuple[np.ndarray, int]:
    """Rescale raw RSSIs by beta; post-calibration overshoots clamp to 1.

    Returns (scaled values, clamp count).
    """
    scaled = np.asarray(values, dtype=float) / beta
    clamped = int(np.count_nonzero(scaled > 1.0))
    if clamped:
        logger.warning("clamped %d RSSI value(s) exceeding the calibrated beta", clamped)
        scaled = np.minimum(scaled, 1.0)
    return scaled, clamped


def quantize_rssi(values: np.ndarray, n_b) -> np.ndarray:
    """Linear quantization round(v * (2^N_b - 1)) / (2^N_b - 1) on [0, 1].

    Rounds half away from zero; ``n_b == "full"`` passes values through.
    """
    values = np.asarray(values, dtype=float)
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise ScalingViolationError("quantizer input must lie in [0, 1]")
    if n_b == FULL_PRECISION:
        return values.copy()
    levels = (1 << int(n_b)) - 1
    return np.floor(values * levels + 0.5) / levels


def rssi_grid_indices(values: np.ndarray, n_b: int) -> np.ndarray:
    """Integer grid index of each quantized value (for entropy tuples)."""
    levels = (1 << int(n_b)) - 1
    return np.floor(np.asarray(values, dtype=float) * levels + 0.5).astype(np.int64)


def empirical_entropy(samples: np.ndarray) -> float:
    """Plug-in entropy (bits) of observed rows (1-D samples or tuple rows)."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("entropy of an empty sample is undefined")
    if samples.ndim == 1:
        samples = samples[:, None]
    _, counts = np.unique(samples, axis=0, return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def _tuple_rows(burst: SsBurst, channels: np.ndarray, sigma2: float, n_b):
    raw = measure_rssi_many(channels, burst, sigma2)
    beta = scale_factor(raw)
    scaled = raw / beta
    if n_b == FULL_PRECISION:
        return scaled, beta
    return rssi_grid_indices(scaled, n_b), beta


def mutual_information_position_rssi(burst: SsBurst, channels: np.ndarray,
                                     labels: np.ndarray, sigma2: float,
                                     n_b) -> InfoEstimate:
    """Plug-in I(position; quantized RSSI) over a single-user sample.

    ``channels`` holds one channel row per sample, ``labels`` the position
    index of each sample; beta is recomputed from this sample.
    """
    labels = np.asarray(labels).reshape(-1, 1)
    rows, _ = _tuple_rows(burst, channels, sigma2, n_b)
    h_pos = empirical_entropy(labels)
    h_rssi = empirical_entropy(rows)
    h_joint = empirical_entropy(np.concatenate([labels.astype(rows.dtype), rows], axis=1))
    mi = h_pos + h_rssi - h_joint
    if mi < -1e-9:
        raise AssertionError(f"plug-in MI went negative: {mi}")
    mi = max(mi, 0.0)
    return InfoEstimate(
        position_entropy_bits=h_pos,
        rssi_entropy_bits=h_rssi,
        joint_entropy_bits=h_joint,
        mutual_information_bits=mi,
        position_support=int(np.unique(labels).size),
        rssi_support=int(np.unique(rows, axis=0).shape[0]),
    )


def mi_fitness(channels: np.ndarray, labels: np.ndarray, sigma2: float, n_b, k: int):
    """Vectorized GA fitness: MI of each candidate burst on the fixed sample."""
    channels = np.asarray(channels, dtype=np.complex128)
    labels = np.asarray(labels)
    h_pos = empirical_entropy(labels)
    label_col = labels.reshape(-1, 1)

    chunk = max(1, (1 << 23) // max(1, channels.shape[0] * k))

    def fitness(codes: np.ndarray) -> np.ndarray:
        out = np.empty(codes.shape[0])
        for start in range(0, codes.shape[0], chunk):
            block = codes[start:start + chunk]
            beams = QUATERNARY_ALPHABET[block].reshape(block.shape[0], k, -1)
            raw = np.abs(np.einsum("nt,pkt->pnk", channels.conj(), beams)) ** 2 + sigma2
            betas = raw.max(axis=(1, 2), keepdims=True)
            scaled = raw / betas
            if n_b == FULL_PRECISION:
                rows_all = scaled
            else:
                levels = (1 << int(n_b)) - 1
                rows_all = np.floor(scaled * levels + 0.5).astype(np.int64)
            for i in range(rows_all.shape[0]):
                rows = rows_all[i]
                h_rssi = empirical_entropy(rows)
                joint = np.concatenate([label_col.astype(rows.dtype), rows], axis=1)
                out[start + i] = h_pos + h_rssi - empirical_entropy(joint)
        return out

    return fitness


def design_ss_bursts(k: int, n_t: int, channels: np.ndarray, labels: np.ndarray,
                     sigma2: float, n_b, params: GaParams,
                     rng: np.random.Generator) -> tuple[SsBurst, InfoEstimate]:
    """GA search for the burst maximizing position/RSSI mutual information.

    The calibration sample (channels, labels) is fixed for the whole
    search; beta is recomputed per candidate and the winning burst is
    returned with its beta attached.
    """
    if k < 1:
        raise ValueError("burst count K must be >= 1")
    fitness = mi_fitness(channels, labels, sigma2, n_b, k)
    best, _, _ = ga_optimize(fitness, k * n_t, params, rng, vectorized=True)
    burst = SsBurst(codes=best.reshape(k, n_t))
    raw = measure_rssi_many(channels, burst, sigma2)
    burst = SsBurst(codes=burst.codes, beta=scale_factor(raw))
    info = mutual_information_position_rssi(burst, channels, labels, sigma2, n_b)
    return burst, info
