"""Analog-precoder codebook construction in three passes over the core set:
threshold-gated append while solving per-record hybrid designs, argmax
label reassignment, and least-used pruning down to a sum-rate floor.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from .config import CodebookBuildParams, GaParams
from .hbf import hsho_design, hybrid_digital_stage
from .linalg import AnalogPrecoder, Codebook
from .rand import rng_stream

logger = logging.getLogger(__name__)


class RateCache:
    """Memoized per-(record, codeword) digital precoders and sum-rates.

    Keyed by codeword identity, so step-2/3 scans cost one enumeration per
    new pair and the argmax passes are cheap recomputations.
    """

    def __init__(self, channels, sigma2: float):
        self.channels = [np.asarray(h, dtype=np.complex128) for h in channels]
        self.sigma2 = sigma2
        self._cache: dict[tuple[int, bytes], tuple[np.ndarray, float]] = {}

    def __len__(self):
        return len(self.channels)

    def solve(self, record: int, ap: AnalogPrecoder) -> tuple[np.ndarray, float]:
        key = (record, ap.key())
        hit = self._cache.get(key)
        if hit is None:
            w, rate = hybrid_digital_stage(self.channels[record], ap, self.sigma2)
            hit = self._cache[key] = (w, rate)
        return hit

    def rate(self, record: int, ap: AnalogPrecoder) -> float:
        return self.solve(record, ap)[1]

    def best_index(self, record: int, codewords) -> tuple[int, float]:
        """argmax codeword for a record; ties break toward the lowest index."""
        best_l, best_rate = -1, -np.inf
        for l, ap in enumerate(codewords):
            rate = self.rate(record, ap)
            if rate > best_rate:
                best_l, best_rate = l, rate
        return best_l, best_rate


@dataclass
class LabeledCore:
    """Per-record codeword assignments over a shared rate cache."""

    assignments: np.ndarray
    cache: RateCache

    def average_rate(self, codewords) -> float:
        return float(np.mean([self.cache.rate(n, codewords[l])
                              for n, l in enumerate(self.assignments)]))


def build_codebook_step1(channels, n_rf: int, sigma2: float, ga: GaParams,
                         params: CodebookBuildParams, seed: int,
                         cache: RateCache | None = None
                         ) -> tuple[Codebook, LabeledCore]:
    """Append pass: solve each record, append its AP when it beats the
    codebook best by more than the threshold xi (and the cap allows).

    The per-record GA stream is keyed by the channel content, so duplicate
    records reproduce the same solution and never re-append.
    """
    channels = list(channels)
    if not channels:
        raise ValueError("core dataset is empty")
    cache = cache or RateCache(channels, sigma2)
    codewords: list[AnalogPrecoder] = []
    assignments = np.zeros(len(channels), dtype=np.int64)

    for n, h in enumerate(channels):
        digest = hashlib.sha256(np.ascontiguousarray(h).tobytes()).hexdigest()
        rng = rng_stream(seed, "codebook-step1", digest)
        ap_new, _, rate_new = hsho_design(h, n_rf, sigma2, params=ga, rng=rng)
        best_l, best_rate = (-1, 0.0) if not codewords \
            else cache.best_index(n, codewords)
        if rate_new > params.xi * best_rate and len(codewords) < params.cap:
            codewords.append(ap_new)
            assignments[n] = len(codewords) - 1
            cache.solve(n, ap_new)
        else:
            if best_l < 0:
                raise ValueError(f"record {n}: zero-rate solution on an empty codebook")
            assignments[n] = best_l
    logger.info("codebook step 1: %d codewords from %d records",
                len(codewords), len(channels))
    return Codebook(tuple(codewords)), LabeledCore(assignments, cache)


def reassign_labels(cb: Codebook, labeled: LabeledCore) -> LabeledCore:
    """Step 2: move every record to its argmax codeword."""
    cache = labeled.cache
    assignments = np.array([cache.best_index(n, cb.codewords)[0]
                            for n in range(len(cache))], dtype=np.int64)
    return LabeledCore(assignments, cache)


def prune_codebook(cb: Codebook, labeled: LabeledCore,
                   params: CodebookBuildParams) -> tuple[Codebook, LabeledCore]:
    """Step 3: repeatedly drop the least-used codeword while the post-removal
    average sum-rate stays at or above retention x the initial average.

    The stopping test looks ahead: a removal is committed only if the
    average after remapping its records still clears the floor.
    """
    cache = labeled.cache
    codewords = list(cb.codewords)
    assignments = labeled.assignments.copy()
    initial = LabeledCore(assignments, cache).average_rate(codewords)
    floor = params.retention * initial

    while len(codewords) > 1:
        sizes = np.bincount(assignments, minlength=len(codewords))
        victim = int(np.argmin(sizes))  # ties: lowest index
        survivors = [cw for l, cw in enumerate(codewords) if l != victim]
        remap = np.empty(len(codewords), dtype=np.int64)
        remap[:] = -1
        kept = [l for l in range(len(codewords)) if l != victim]
        for new_l, old_l in enumerate(kept):
            remap[old_l] = new_l
        trial = remap[assignments]
        for n in np.flatnonzero(assignments == victim):
            trial[n] = cache.best_index(n, survivors)[0]
        trial_avg = LabeledCore(trial, cache).average_rate(survivors)
        if trial_avg < floor:
            break
        codewords, assignments = survivors, trial

    pruned = Codebook(tuple(codewords))
    labeled_out = LabeledCore(assignments, cache)
    final = labeled_out.average_rate(codewords)
    assert final >= floor - 1e-12, "pruning dropped below the retention floor"
    logger.info("codebook step 3: %d -> %d codewords, avg rate %.4f -> %.4f",
                len(cb), len(pruned), initial, final)
    return pruned, labeled_out


def build_codebook(channels, n_rf: int, sigma2: float, ga: GaParams,
                   params: CodebookBuildParams, seed: int
                   ) -> tuple[Codebook, LabeledCore, dict]:
    """All three passes; returns the codebook, final labels, and a summary."""
    cb1, labeled1 = build_codebook_step1(channels, n_rf, sigma2, ga, params, seed)
    labeled2 = reassign_labels(cb1, labeled1)
    pre_prune = labeled2.average_rate(cb1.codewords)
    cb3, labeled3 = prune_codebook(cb1, labeled2, params)
    post_prune = labeled3.average_rate(cb3.codewords)
    summary = {
        "initial_size": len(cb1),
        "final_size": len(cb3),
        "avg_rate_pre_prune": pre_prune,
        "avg_rate_post_prune": post_prune,
        "retention_achieved": post_prune / pre_prune if pre_prune else 1.0,
    }
    return cb3, labeled3, summary
