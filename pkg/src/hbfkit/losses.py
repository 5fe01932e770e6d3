"""Unsupervised sum-rate losses.

Complex quantities inside the training graph are carried as (re, im)
Tensor pairs; channel constants enter pre-conjugated. Per-codeword terms
are evaluated stacked over the codebook axis, so one graph covers all L
codewords of a batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .linalg import Codebook

Pair = tuple[Tensor, Tensor]


def cpair(arr: np.ndarray) -> Pair:
    arr = np.asarray(arr, dtype=np.complex128)
    return ad.constant(arr.real.copy()), ad.constant(arr.imag.copy())


def cmatmul(a: Pair, b: Pair) -> Pair:
    ar, ai = a
    br, bi = b
    return ar @ br - ai @ bi, ar @ bi + ai @ br


def cabs2(a: Pair) -> Tensor:
    ar, ai = a
    return ar * ar + ai * ai


def col_power(a: Pair) -> Tensor:
    """Squared column norms, kept-dims over the antenna axis."""
    return ad.tsum(cabs2(a), axis=-2, keepdims=True)


def unit_columns_graph(a: Pair, eps: float = 1e-30) -> Pair:
    # eps is invisible at fp64 for healthy columns but keeps a collapsed
    # column from turning the whole backward pass into NaNs
    inv = 1.0 / ad.sqrt(col_power(a) + ad.constant(np.full((), eps)))
    return a[0] * inv, a[1] * inv


@dataclass(frozen=True)
class CodebookTensors:
    """Constant per-codeword matrices staged for stacked loss graphs."""

    matrices: Pair        # (L, 1, n_t, n_rf)
    pinvs: Pair           # (L, 1, n_rf, n_t)
    size: int

    @classmethod
    def from_codebook(cls, cb: Codebook) -> "CodebookTensors":
        mats = cb.matrices[:, None]
        pinvs = cb.pinvs()[:, None]
        return cls(matrices=cpair(mats), pinvs=cpair(pinvs), size=len(cb))


def channel_const(h_batch: np.ndarray) -> Pair:
    """Pre-conjugated, transposed channel constant: (1, B, n_u, n_t)."""
    h = np.asarray(h_batch, dtype=np.complex128)
    return cpair(np.swapaxes(h.conj(), -1, -2)[None])


def rate_graph(hct: Pair, precoder: Pair, sigma2: float) -> Tensor:
    """Sum-rate of a stacked precoder (.., n_t, n_u) against the channel
    constant from :func:`channel_const`; returns one rate per batch entry."""
    cross = cabs2(cmatmul(hct, precoder))            # (.., n_u, n_u)
    n_u = cross.shape[-1]
    eye = ad.constant(np.eye(n_u))
    signal = ad.tsum(cross * eye, axis=-1)
    interference = ad.tsum(cross, axis=-1) - signal
    sinr = signal / (interference + sigma2)
    one = ad.constant(np.ones(()))
    return ad.tsum(ad.log2(one + sinr), axis=-1)


def expected_codeword_rate(p: Tensor, rates: Tensor) -> Tensor:
    """Mean over the batch of sum_l p_l * R_l given rates stacked (L, B)."""
    weighted = ad.swapaxes(p, 0, 1) * rates
    return ad.tmean(ad.tsum(weighted, axis=0))


def loss_hbf(p: Tensor, w_pair: Pair, h_batch: np.ndarray,
             cb_tensors: CodebookTensors, sigma2: float) -> Tensor:
    """HBF-Net loss: negative expected sum-rate of the regression DP paired
    with every codeword; the DP is re-normalized per codeword pairing."""
    hct = channel_const(h_batch)
    w = (ad.reshape(w_pair[0], (1,) + w_pair[0].shape),
         ad.reshape(w_pair[1], (1,) + w_pair[1].shape))
    effective = cmatmul(cb_tensors.matrices, w)      # (L, B, n_t, n_u)
    effective = unit_columns_graph(effective)
    rates = rate_graph(hct, effective, sigma2)       # (L, B)
    return -expected_codeword_rate(p, rates)


def loss_fdp(u_pair: Pair, h_batch: np.ndarray, sigma2: float) -> Tensor:
    """AFP-Net regression loss: negative mean sum-rate of the unit-column
    fully digital output."""
    hct = channel_const(h_batch)
    u = (ad.reshape(u_pair[0], (1,) + u_pair[0].shape),
         ad.reshape(u_pair[1], (1,) + u_pair[1].shape))
    rates = rate_graph(hct, u, sigma2)               # (1, B)
    return -ad.tmean(rates)


def loss_ap(p: Tensor, u_pair: Pair, h_batch: np.ndarray,
            cb_tensors: CodebookTensors, sigma2: float) -> Tensor:
    """AFP-Net classification loss: expected rate of W_l = A_l^+ U over the
    softmax, with gradients flowing through both p and U."""
    hct = channel_const(h_batch)
    u = (ad.reshape(u_pair[0], (1,) + u_pair[0].shape),
         ad.reshape(u_pair[1], (1,) + u_pair[1].shape))
    w_tilde = cmatmul(cb_tensors.pinvs, u)           # (L, B, n_rf, n_u)
    effective = cmatmul(cb_tensors.matrices, w_tilde)
    rates = rate_graph(hct, effective, sigma2)
    return -expected_codeword_rate(p, rates)


def loss_afp(p: Tensor, u_pair: Pair, h_batch: np.ndarray,
             cb_tensors: CodebookTensors, sigma2: float):
    """Total AFP-Net loss and its two addends.

    The fully digital output is unit-normalized once and shared by both
    terms, matching the two-step training algorithm.
    """
    u_norm = unit_columns_graph(u_pair)
    l_fdp = loss_fdp(u_norm, h_batch, sigma2)
    l_ap = loss_ap(p, u_norm, h_batch, cb_tensors, sigma2)
    return l_fdp + l_ap, l_fdp, l_ap
