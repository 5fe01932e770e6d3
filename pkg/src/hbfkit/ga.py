"""Elitist genetic algorithm over quaternary-phase genomes.

Each generation keeps the top elites unchanged, produces a crossover
fraction of the population by uniform crossover of tournament-selected
parents, and fills the remainder with mutated copies (per-symbol mutation
probability 1/genome_len, resampled among the other three symbols).
"""

from __future__ import annotations

import numpy as np

from .config import GaParams

ALPHABET_SIZE = 4


class FitnessError(RuntimeError):
    """A genome produced a non-finite fitness value."""

    def __init__(self, genome: np.ndarray, value: float):
        self.genome = np.array(genome)
        super().__init__(f"non-finite fitness {value!r} for genome {self.genome.tolist()}")


def _tournament(fit: np.ndarray, n_picks: int, rng: np.random.Generator) -> np.ndarray:
    """Size-2 tournament: indices of the fitter of two uniform draws."""
    a = rng.integers(0, fit.size, size=n_picks)
    b = rng.integers(0, fit.size, size=n_picks)
    return np.where(fit[a] >= fit[b], a, b)


def ga_optimize(fitness, genome_len: int, params: GaParams,
                rng: np.random.Generator, vectorized: bool = False):
    """Maximize ``fitness`` over {0..3}^genome_len.

    Parameters
    ----------
    fitness : callable
        Scalar genome -> float, or (population, genome_len) -> (population,)
        array when ``vectorized`` is set. Must be deterministic.
    genome_len : int
        Number of quaternary symbols.
    params : GaParams
        Population sizing and termination limits.
    rng : numpy Generator
        Owns every random draw; results are reproducible per stream.

    Returns
    -------
    (best_genome, best_fitness, history)
        ``history`` holds the best-so-far fitness per generation and is
        monotone non-decreasing.
    """
    if genome_len < 1:
        raise ValueError("genome_len must be >= 1")
    n_c, psi = params.population, params.elites
    population = rng.integers(0, ALPHABET_SIZE, size=(n_c, genome_len), dtype=np.uint8)

    def evaluate(pop: np.ndarray) -> np.ndarray:
        if vectorized:
            values = np.asarray(fitness(pop), dtype=float)
        else:
            values = np.array([fitness(g) for g in pop], dtype=float)
        bad = ~np.isfinite(values)
        if bad.any():
            i = int(np.argmax(bad))
            raise FitnessError(pop[i], values[i])
        return values

    best_genome, best_fit = None, -np.inf
    history: list[float] = []
    stall = 0
    n_cross = min(int(round(params.crossover_fraction * n_c)), n_c - psi)
    n_mut = n_c - psi - n_cross

    for _ in range(params.max_generations):
        fit = evaluate(population)
        top = int(np.argmax(fit))
        if fit[top] > best_fit:
            best_fit = float(fit[top])
            best_genome = population[top].copy()
            stall = 0
        else:
            stall += 1
        history.append(best_fit)
        if stall >= params.stall_generations:
            break

        order = np.argsort(-fit, kind="stable")
        elites = population[order[:psi]]
        p1 = population[_tournament(fit, n_cross, rng)]
        p2 = population[_tournament(fit, n_cross, rng)]
        take_first = rng.random((n_cross, genome_len)) < 0.5
        children = np.where(take_first, p1, p2)
        mutants = population[_tournament(fit, n_mut, rng)].copy()
        flip = rng.random((n_mut, genome_len)) < (1.0 / genome_len)
        shift = rng.integers(1, ALPHABET_SIZE, size=(n_mut, genome_len), dtype=np.uint8)
        mutants = np.where(flip, (mutants + shift) % ALPHABET_SIZE, mutants).astype(np.uint8)
        population = np.concatenate([elites, children, mutants], axis=0)

    return best_genome, best_fit, history
