"""Bradley-Terry-Luce likelihoods and forward sampling.

Worth vectors are numpy arrays indexed by ``id - 1``. A ranking over a
consideration set is built stage by stage: at each stage the next object is
picked with probability proportional to its worth among those not yet
ranked. Pairwise (Bradley-Terry) and full-ranking (Plackett-Luce)
probabilities are the one- and many-stage cases of the same product.
"""

from __future__ import annotations

from collections.abc import Iterable

import numpy as np

from .data import Dataset, OrdinalObservation


def check_worths(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1 or not np.all(np.isfinite(omega)) or np.any(omega <= 0):
        raise ValueError("worths must be a 1-d vector of finite positive reals")
    return omega


def pairwise_prob(omega_i: float, omega_j: float) -> float:
    """Probability that the object with worth ``omega_i`` beats ``omega_j``."""
    if not (omega_i > 0 and omega_j > 0):
        raise ValueError("worths must be positive")
    return omega_i / (omega_i + omega_j)


def stage_denominators(obs: OrdinalObservation, omega) -> np.ndarray:
    """Total worth still available at each of the ``R_i`` stages of ``obs``."""
    omega = np.asarray(omega, dtype=float)
    total = float(sum(omega[j - 1] for j in obs.considered))
    out = np.empty(obs.depth)
    for r, j in enumerate(obs.ranked):
        out[r] = total
        total -= omega[j - 1]
    return out


def log_likelihood(obs: OrdinalObservation, omega) -> float:
    omega = check_worths(omega)
    denom = stage_denominators(obs, omega)
    if np.any(denom <= 0):
        raise FloatingPointError("remaining worth underflowed to a non-positive value")
    top = omega[[j - 1 for j in obs.ranked]]
    return float(np.sum(np.log(top)) - np.sum(np.log(denom)))


def dataset_log_likelihood(d: Dataset, omega) -> float:
    """Sum of per-observation log-likelihoods, one stage at a time."""
    return float(sum(log_likelihood(obs, omega) for obs in d.observations))


def design_log_likelihood(d: Dataset, omega: np.ndarray) -> float:
    """Vectorized equivalent of :func:`dataset_log_likelihood` for hot loops."""
    design = d.design
    if design.n_stages == 0:
        return 0.0
    denom = design.remaining @ omega
    if np.any(denom <= 0):
        raise FloatingPointError("remaining worth underflowed to a non-positive value")
    return float(np.log(omega[design.chosen]).sum() - np.log(denom).sum())


def sample_ranking(
    omega, considered: Iterable[int], depth: int | None, rng: np.random.Generator
) -> OrdinalObservation:
    """Draw the top ``depth`` objects of ``considered`` sequentially by worth."""
    omega = check_worths(omega)
    pool = sorted(set(int(j) for j in considered))
    if depth is None:
        depth = len(pool)
    if not 1 <= depth <= len(pool):
        raise ValueError(f"depth {depth} not in 1..{len(pool)}")
    ranked = []
    for _ in range(depth):
        w = omega[[j - 1 for j in pool]]
        pick = rng.choice(len(pool), p=w / w.sum())
        ranked.append(pool.pop(pick))
    return OrdinalObservation(tuple(ranked), frozenset(ranked).union(pool))


def sample_dataset(omega, n_judges: int, rng: np.random.Generator, depth: int | None = None) -> Dataset:
    """``n_judges`` rankings of all objects (top ``depth`` if given)."""
    omega = check_worths(omega)
    everyone = range(1, len(omega) + 1)
    observations = [sample_ranking(omega, everyone, depth, rng) for _ in range(n_judges)]
    return Dataset(len(omega), observations)
