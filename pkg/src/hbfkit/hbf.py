"""Hybrid precoder designs: the HSHO benchmark and the classic baselines.

HSHO picks the analog precoder by maximizing the waterfilling capacity of
the virtual channel A^H h with a genetic search over the 2-bit alphabet,
then reuses the digital-side subset enumeration on the virtual channel.
"""

from __future__ import annotations

import numpy as np

from .config import GaParams
from .fdp import zf_precoder, fdp_enumerate
from .ga import ga_optimize
from .linalg import (QUATERNARY_ALPHABET, AnalogPrecoder, Codebook,
                     SingularMatrixError, normalize_hybrid, quantize_phases,
                     reciprocal_condition)
from .rates import _as_channel, sum_rate_hybrid, waterfill_capacity_many

EXHAUSTIVE_LIMIT = 2 ** 20


def capacity_fitness(h: np.ndarray, n_rf: int, sigma2: float):
    """Vectorized GA fitness: waterfill capacity of A^H h at rho = 1/sigma2.

    The returned callable maps a (population, n_t*n_rf) code array to a
    capacity per candidate.
    """
    h = _as_channel(h)
    n_t = h.shape[0]
    rho = 1.0 / sigma2

    def fitness(codes: np.ndarray) -> np.ndarray:
        a = QUATERNARY_ALPHABET[codes].reshape(codes.shape[0], n_t, n_rf)
        virtual = np.einsum("ptr,tu->pru", a.conj(), h)
        gram = np.einsum("pru,prv->puv", virtual.conj(), virtual)
        evals = np.maximum(np.linalg.eigvalsh(gram), 0.0)
        return waterfill_capacity_many(evals, rho)

    return fitness


def hybrid_digital_stage(h, ap: AnalogPrecoder, sigma2: float):
    """Enumerated digital precoder on the virtual channel, hybrid-normalized."""
    h = _as_channel(h)
    virtual = ap.matrix.conj().T @ h
    w_raw, _ = fdp_enumerate(virtual, sigma2)
    w = normalize_hybrid(ap, w_raw, skip_zero=True)
    return w, sum_rate_hybrid(h, ap, w, sigma2)


def hsho_design(h, n_rf: int, sigma2: float, params: GaParams,
                rng: np.random.Generator) -> tuple[AnalogPrecoder, np.ndarray, float]:
    """GA analog precoder + enumerated digital precoder on the virtual channel.

    Returns (analog precoder, normalized digital precoder, sum-rate).
    Raises NoCapacityError for an all-zero channel.
    """
    h = _as_channel(h)
    n_t = h.shape[0]
    fitness = capacity_fitness(h, n_rf, sigma2)
    # probe once so a degenerate channel fails before the search starts
    fitness(np.zeros((1, n_t * n_rf), dtype=np.uint8))
    best, _, _ = ga_optimize(fitness, n_t * n_rf, params, rng, vectorized=True)
    ap = AnalogPrecoder(best.reshape(n_t, n_rf))
    w, rate = hybrid_digital_stage(h, ap, sigma2)
    return ap, w, rate


def exhaustive_ap_search(h, n_rf: int, sigma2: float,
                         batch: int = 1 << 14) -> tuple[AnalogPrecoder, float]:
    """True argmax of the capacity objective by scanning all 4^(n_t*n_rf) codes.

    Ties break toward the lowest code index. Guarded for tiny instances only.
    """
    h = _as_channel(h)
    n_t = h.shape[0]
    genome_len = n_t * n_rf
    total = 4 ** genome_len
    if total > EXHAUSTIVE_LIMIT:
        raise ValueError(f"search space 4^{genome_len} exceeds the exhaustive guard")
    fitness = capacity_fitness(h, n_rf, sigma2)
    shifts = 2 * np.arange(genome_len, dtype=np.uint64)
    best_code, best_cap = 0, -np.inf
    for start in range(0, total, batch):
        idx = np.arange(start, min(start + batch, total), dtype=np.uint64)
        codes = ((idx[:, None] >> shifts) & 0x3).astype(np.uint8)
        caps = fitness(codes)
        top = int(np.argmax(caps))
        if caps[top] > best_cap:
            best_cap = float(caps[top])
            best_code = start + top
    codes = ((np.uint64(best_code) >> shifts) & np.uint64(0x3)).astype(np.uint8)
    return AnalogPrecoder(codes.reshape(n_t, n_rf)), best_cap


def omp_hybrid(h, u_opt: np.ndarray, cb: Codebook,
               sigma2: float) -> tuple[AnalogPrecoder, np.ndarray, float]:
    """Whole-codeword orthogonal matching: pick the codebook AP with the
    smallest projection residual ||U - A A^+ U||_F, set W = A^+ U, normalize.
    """
    h = _as_channel(h)
    u_opt = np.asarray(u_opt, dtype=np.complex128)
    mats = cb.matrices
    pinvs = cb.pinvs()
    w_all = np.einsum("lrt,tu->lru", pinvs, u_opt)
    approx = np.einsum("ltr,lru->ltu", mats, w_all)
    residuals = np.linalg.norm(approx - u_opt, axis=(1, 2))
    pick = int(np.argmin(residuals))
    ap = cb[pick]
    w = normalize_hybrid(ap, w_all[pick], skip_zero=True)
    return ap, w, sum_rate_hybrid(h, ap, w, sigma2)


def pzf_hybrid(h, n_rf: int, sigma2: float) -> tuple[AnalogPrecoder, np.ndarray, float]:
    """Phased-ZF baseline: 2-bit phase-matched analog columns + ZF digital stage.

    The first N_U columns phase-match the users in order; leftover chains
    phase-match the strongest users again. Requires n_rf >= n_u.
    """
    h = _as_channel(h)
    n_t, n_u = h.shape
    if n_u > n_rf:
        raise ValueError(f"pzf requires n_rf >= n_u (got {n_rf} < {n_u})")
    order = np.argsort(-np.linalg.norm(h, axis=0), kind="stable")
    cols = list(range(n_u)) + [int(order[i % n_u]) for i in range(n_rf - n_u)]
    codes = quantize_phases(h[:, cols].conj())
    ap = AnalogPrecoder(codes)
    virtual = ap.matrix.conj().T @ h
    if reciprocal_condition(virtual) < 1e-12:
        raise SingularMatrixError("effective channel is rank deficient")
    w = normalize_hybrid(ap, zf_precoder(virtual, sigma2))
    return ap, w, sum_rate_hybrid(h, ap, w, sigma2)
