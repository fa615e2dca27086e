"""Partition-based spike-and-slab fusion prior.

A draw picks a set partition ``g`` of the objects with probability
proportional to ``Poisson(K_g | lam)``, gives each cluster an iid
``Gamma(a_gamma, b_gamma)`` worth, and copies the cluster worth to every
member. Objects in the same cluster are therefore exactly tied.

Partitions are stored as 0-based cluster labels in canonical form: clusters
are numbered by the order of their first (lowest-id) member, so two
partitions are equal exactly when their label tuples are.
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

MAX_EXACT_OBJECTS = 12


@dataclass(frozen=True)
class Hyperparameters:
    lam: float = 2.0
    a_gamma: float = 5.0
    b_gamma: float = 3.0
    b_birth: float = 0.5

    def __post_init__(self):
        if not (self.lam > 0 and self.a_gamma > 0 and self.b_gamma > 0):
            raise ValueError("lam, a_gamma and b_gamma must be positive")
        if not 0 < self.b_birth < 1:
            raise ValueError("b_birth must lie in (0, 1)")

    @property
    def d_death(self) -> float:
        return 1.0 - self.b_birth


def canonical_labels(labels: Sequence[int]) -> tuple[int, ...]:
    """Relabel clusters by order of first appearance (a restricted growth string)."""
    seen: dict[int, int] = {}
    return tuple(seen.setdefault(int(c), len(seen)) for c in labels)


def canonicalize(labels: np.ndarray, nu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Canonical labels for ``labels`` with ``nu`` permuted to match."""
    old_order = []
    seen = {}
    for c in labels.tolist():
        if c not in seen:
            seen[c] = len(seen)
            old_order.append(c)
    mapping = np.empty(max(seen) + 1, dtype=labels.dtype)
    mapping[old_order] = np.arange(len(old_order))
    return mapping[labels], np.asarray(nu)[old_order]


@dataclass(frozen=True)
class Partition:
    """Set partition of objects ``1..J`` as canonical 0-based cluster labels."""

    labels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", canonical_labels(self.labels))

    @classmethod
    def from_clusters(cls, clusters: Sequence[Sequence[int]], n_objects: int | None = None) -> Partition:
        """Build from clusters of 1-based object ids, e.g. ``[[2], [1, 3]]``."""
        members = [j for c in clusters for j in c]
        J = n_objects or len(members)
        if sorted(members) != list(range(1, J + 1)) or any(len(c) == 0 for c in clusters):
            raise ValueError("clusters must be nonempty and cover 1..J exactly once")
        labels = [0] * J
        for k, c in enumerate(clusters):
            for j in c:
                labels[j - 1] = k
        return cls(tuple(labels))

    @property
    def n_objects(self) -> int:
        return len(self.labels)

    @cached_property
    def K(self) -> int:
        return max(self.labels) + 1

    @cached_property
    def sizes(self) -> tuple[int, ...]:
        return tuple(np.bincount(self.labels, minlength=self.K).tolist())

    def cluster_of(self, j: int) -> int:
        """Cluster index of 1-based object ``j``."""
        return self.labels[j - 1]

    def members(self, k: int) -> tuple[int, ...]:
        """1-based ids in cluster ``k``."""
        return tuple(j + 1 for j, c in enumerate(self.labels) if c == k)

    def clusters(self) -> list[tuple[int, ...]]:
        return [self.members(k) for k in range(self.K)]

    def __str__(self) -> str:
        return "-".join(str(c + 1) for c in self.labels)

    @classmethod
    def parse(cls, text: str) -> Partition:
        return cls(tuple(int(x) - 1 for x in text.split("-")))


def omega_from(g: Partition, nu) -> np.ndarray:
    """Object worths: each object takes its cluster's worth."""
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (g.K,):
        raise ValueError(f"{nu.size} cluster worths for a partition with K={g.K}")
    return nu[list(g.labels)]


def log_poisson_ratio(k_new: int, k_old: int, lam: float) -> float:
    return (k_new - k_old) * math.log(lam) + math.lgamma(k_old + 1) - math.lgamma(k_new + 1)


def log_prior_partition_ratio(g_new: Partition, g_old: Partition, h: Hyperparameters) -> float:
    """log f_G(g_new) - log f_G(g_old); the normalizer over all partitions cancels."""
    if g_new.n_objects != g_old.n_objects:
        raise ValueError("partitions are over different object sets")
    return log_poisson_ratio(g_new.K, g_old.K, h.lam)


def log_slab(nu, h: Hyperparameters):
    """Gamma(shape=a_gamma, rate=b_gamma) log-density."""
    a, b = h.a_gamma, h.b_gamma
    return (a - 1.0) * np.log(nu) - b * np.asarray(nu) + a * math.log(b) - math.lgamma(a)


@lru_cache(maxsize=None)
def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind, exact."""
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)


def stirling_weighted_k_pmf(n_objects: int, lam: float) -> np.ndarray:
    """Prior pmf of the cluster count; entry ``k-1`` is ``P(K = k)``."""
    if not 1 <= n_objects <= MAX_EXACT_OBJECTS:
        raise ValueError(f"exact cluster-count pmf supports 1..{MAX_EXACT_OBJECTS} objects")
    if not lam > 0:
        raise ValueError("lam must be positive")
    ks = np.arange(1, n_objects + 1)
    logw = np.array([k * math.log(lam) - math.lgamma(k + 1) + math.log(stirling2(n_objects, k)) for k in ks])
    w = np.exp(logw - logw.max())
    return w / w.sum()


def enumerate_partitions(n_objects: int) -> Iterator[Partition]:
    """All set partitions of ``n_objects`` items as restricted growth strings."""

    def grow(prefix: list[int], top: int):
        if len(prefix) == n_objects:
            yield Partition(tuple(prefix))
            return
        for c in range(top + 2):
            prefix.append(c)
            yield from grow(prefix, max(top, c))
            prefix.pop()

    if n_objects >= 1:
        yield from grow([0], 0)


def sample_partition_with_k(n_objects: int, k: int, rng: np.random.Generator) -> Partition:
    """Uniform draw among partitions of ``n_objects`` items into exactly ``k`` clusters.

    Item ``m`` either opens a cluster (weight ``S(m-1, b-1)``) or joins one of
    the ``b`` clusters formed by the items before it (weight ``b S(m-1, b)``).
    The open/join choices are drawn from the last item down, then the
    partition is built from the first item up.
    """
    if not 1 <= k <= n_objects:
        raise ValueError("need 1 <= k <= n_objects")
    opens = [False] * n_objects
    blocks = k
    for m in range(n_objects, 0, -1):
        alone = stirling2(m - 1, blocks - 1)
        join = blocks * stirling2(m - 1, blocks)
        if rng.random() * (alone + join) < alone:
            opens[m - 1] = True
            blocks -= 1
    labels = []
    n_open = 0
    for m in range(n_objects):
        if opens[m]:
            labels.append(n_open)
            n_open += 1
        else:
            labels.append(int(rng.integers(n_open)))
    return Partition(tuple(labels))


def sample_prior(n_objects: int, h: Hyperparameters, rng: np.random.Generator) -> tuple[Partition, np.ndarray]:
    """One prior draw ``(g, nu)``.

    Exact for up to ``MAX_EXACT_OBJECTS`` objects. Beyond that the partition
    is the end state of a birth/death chain run on an empty dataset, which
    targets the same prior.
    """
    if n_objects < 1:
        raise ValueError("need at least one object")
    if n_objects <= MAX_EXACT_OBJECTS:
        pmf = stirling_weighted_k_pmf(n_objects, h.lam)
        k = int(rng.choice(n_objects, p=pmf)) + 1
        g = sample_partition_with_k(n_objects, k, rng)
    else:
        from .sampler import prior_chain_partition

        g = prior_chain_partition(n_objects, h, rng)
    nu = rng.gamma(h.a_gamma, 1.0 / h.b_gamma, size=g.K)
    return g, nu
