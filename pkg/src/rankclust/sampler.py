"""Reversible-jump Gibbs sampler for rank-clustered BTL models.

Each outer iteration makes one birth/death move on the partition and then
``t2`` conjugate Gibbs sweeps over the cluster worths. A sweep draws one
exponential latent variable per ranking stage (rate = the stage's remaining
worth), after which every cluster worth has a Gamma full conditional. The
state is recorded after every sweep.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .btl import design_log_likelihood
from .data import Dataset, OrdinalObservation
from .prior import Hyperparameters, Partition, canonicalize, log_poisson_ratio, log_slab

log = logging.getLogger(__name__)

U_LOW, U_HIGH = 0.5, 1.5
WORTH_FLOOR = 1e-300


@dataclass(frozen=True)
class ChainConfig:
    t1: int = 5000
    t2: int = 2
    n_chains: int = 4
    burn_in: int | None = None  # records per chain; None means half
    seed: int = 0
    h: Hyperparameters = field(default_factory=Hyperparameters)

    def __post_init__(self):
        if self.t1 < 1 or self.t2 < 1 or self.n_chains < 1:
            raise ValueError("t1, t2 and n_chains must be at least 1")
        if self.burn_in is not None and not 0 <= self.burn_in < self.n_records:
            raise ValueError(f"burn_in must be in [0, {self.n_records})")

    @property
    def n_records(self) -> int:
        return self.t1 * self.t2

    @property
    def burn_in_records(self) -> int:
        return self.n_records // 2 if self.burn_in is None else self.burn_in

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> ChainConfig:
        raw = dict(raw)
        raw["h"] = Hyperparameters(**raw.get("h", {}))
        return cls(**raw)


@dataclass
class ChainState:
    """Current partition (canonical 0-based labels) and cluster worths."""

    labels: np.ndarray
    nu: np.ndarray
    augmentation: np.ndarray | None = None  # latest per-stage exponential draws

    @property
    def K(self) -> int:
        return len(self.nu)

    @property
    def omega(self) -> np.ndarray:
        return self.nu[self.labels]

    @property
    def partition(self) -> Partition:
        return Partition(tuple(self.labels.tolist()))

    @classmethod
    def from_partition(cls, g: Partition, nu) -> ChainState:
        return cls(np.asarray(g.labels, dtype=np.intp), np.asarray(nu, dtype=float).copy())


@dataclass
class MoveStats:
    birth_proposed: int = 0
    birth_accepted: int = 0
    birth_infeasible: int = 0
    birth_nonadjacent: int = 0
    death_proposed: int = 0
    death_accepted: int = 0
    death_infeasible: int = 0
    death_out_of_range: int = 0
    clamp_events: int = 0

    def add(self, move: MoveRecord) -> None:
        if move.kind == "birth":
            self.birth_proposed += 1
            self.birth_accepted += move.accepted
            self.birth_infeasible += move.reason == "infeasible"
            self.birth_nonadjacent += move.reason == "nonadjacent"
        else:
            self.death_proposed += 1
            self.death_accepted += move.accepted
            self.death_infeasible += move.reason == "infeasible"
            self.death_out_of_range += move.reason == "out_of_range"

    def rates(self) -> dict:
        return {
            "birth": self.birth_accepted / self.birth_proposed if self.birth_proposed else None,
            "death": self.death_accepted / self.death_proposed if self.death_proposed else None,
        }


@dataclass(frozen=True)
class MoveRecord:
    kind: str  # "birth" or "death"
    accepted: bool
    reason: str = ""  # why a move was rejected without an MH test
    log_a: float | None = None


@dataclass(frozen=True)
class BirthProposal:
    k: int  # cluster being split
    child1: np.ndarray  # 0-based objects; holds the lowest id, gets u * nu_k
    child2: np.ndarray
    u: float
    nu_k: float
    new_state: ChainState
    adjacent: bool

    @property
    def nu_children(self) -> tuple[float, float]:
        return self.u * self.nu_k, self.nu_k / self.u


@dataclass(frozen=True)
class DeathProposal:
    k1: int  # cluster holding the lower object id
    k2: int
    u: float  # split value that the reverse birth would need
    merged_nu: float
    new_state: ChainState

    @property
    def reversible(self) -> bool:
        return U_LOW < self.u < U_HIGH


def splittable(labels: np.ndarray, K: int) -> np.ndarray:
    return np.flatnonzero(np.bincount(labels, minlength=K) >= 2)


def split_worth(nu_k: float, u: float) -> tuple[float, float]:
    return u * nu_k, nu_k / u


def merge_worths(nu1: float, nu2: float) -> float:
    return math.sqrt(nu1 * nu2)


def propose_birth(state: ChainState, rng: np.random.Generator) -> BirthProposal:
    K = state.K
    candidates = splittable(state.labels, K)
    if candidates.size == 0:
        raise ValueError("no cluster with two or more members to split")
    k = int(candidates[rng.integers(candidates.size)])
    members = np.flatnonzero(state.labels == k)
    while True:
        side = rng.integers(0, 2, size=members.size)
        if side.min() != side.max():
            break
    first = side == side[0]
    u = float(rng.uniform(U_LOW, U_HIGH))
    return birth_of(state, k, members[first], members[~first], u)


def birth_of(state: ChainState, k: int, child1, child2, u: float) -> BirthProposal:
    """Deterministic split of cluster ``k``; ``child1`` must hold its lowest object."""
    child1, child2 = np.asarray(child1), np.asarray(child2)
    if child1.min() > child2.min():
        raise ValueError("child1 must contain the lowest object of the cluster")
    K = state.K
    nu_k = float(state.nu[k])
    nu1, nu2 = split_worth(nu_k, u)

    others = np.delete(state.nu, k)
    lo, hi = min(nu1, nu2), max(nu1, nu2)
    adjacent = not np.any((others > lo) & (others < hi))

    labels = state.labels.copy()
    labels[child2] = K
    nu = np.append(state.nu, nu2)
    nu[k] = nu1
    labels, nu = canonicalize(labels, nu)
    return BirthProposal(k, child1, child2, u, nu_k, ChainState(labels, nu), adjacent)


def propose_death(state: ChainState, rng: np.random.Generator) -> DeathProposal:
    K = state.K
    if K < 2:
        raise ValueError("a death needs at least two clusters")
    order = np.argsort(state.nu, kind="stable")
    p = int(rng.integers(K - 1))
    return death_of(state, int(order[p]), int(order[p + 1]))


def adjacent_pairs(nu) -> list[tuple[int, int]]:
    """Cluster index pairs with no other worth strictly between them."""
    order = np.argsort(np.asarray(nu), kind="stable")
    return [tuple(sorted((int(a), int(b)))) for a, b in zip(order[:-1], order[1:])]


def death_of(state: ChainState, a: int, b: int) -> DeathProposal:
    """Deterministic merge of clusters ``a`` and ``b``."""
    # canonical labels: the smaller index holds the earlier first member
    k1, k2 = min(a, b), max(a, b)
    nu1, nu2 = float(state.nu[k1]), float(state.nu[k2])
    merged = merge_worths(nu1, nu2)
    labels = state.labels.copy()
    labels[labels == k2] = k1
    labels[labels > k2] -= 1
    nu = np.delete(state.nu, k2)
    nu[k1] = merged
    return DeathProposal(k1, k2, math.sqrt(nu1 / nu2), merged, ChainState(labels, nu))


def _log_split_count(size: int) -> float:
    # unordered two-way splits of a cluster: 2^(size-1) - 1
    return math.log(2 ** (size - 1) - 1)


def log_acceptance_A(proposal: BirthProposal, state: ChainState, d: Dataset, h: Hyperparameters) -> float:
    """Log Metropolis-Hastings ratio for a birth from ``state``."""
    new = proposal.new_state
    nu1, nu2 = proposal.nu_children
    size = proposal.child1.size + proposal.child2.size
    n_split = splittable(state.labels, state.K).size
    terms = (
        design_log_likelihood(d, new.omega) - design_log_likelihood(d, state.omega),
        float(log_slab(nu1, h) + log_slab(nu2, h) - log_slab(proposal.nu_k, h)),
        log_poisson_ratio(new.K, state.K, h.lam),
        math.log(h.d_death) + math.log(n_split) + _log_split_count(size),
        -math.log(h.b_birth) - math.log(new.K - 1),
        math.log(2.0 * proposal.nu_k / proposal.u),
    )
    log_a = math.fsum(terms)
    if not math.isfinite(log_a):
        raise FloatingPointError(f"non-finite birth acceptance ratio, terms={terms}")
    return log_a


def log_acceptance_death(proposal: DeathProposal, state: ChainState, d: Dataset, h: Hyperparameters) -> float:
    """Log MH ratio for merging two clusters; the inverse of the matching birth's."""
    new = proposal.new_state
    size = int(np.count_nonzero(new.labels == proposal.k1))
    n_split = splittable(new.labels, new.K).size
    terms = (
        design_log_likelihood(d, new.omega) - design_log_likelihood(d, state.omega),
        float(log_slab(proposal.merged_nu, h) - log_slab(state.nu[proposal.k1], h) - log_slab(state.nu[proposal.k2], h)),
        log_poisson_ratio(new.K, state.K, h.lam),
        math.log(h.b_birth) + math.log(state.K - 1),
        -math.log(h.d_death) - math.log(n_split) - _log_split_count(size),
        -math.log(2.0 * proposal.merged_nu / proposal.u),
    )
    log_a = math.fsum(terms)
    if not math.isfinite(log_a):
        raise FloatingPointError(f"non-finite death acceptance ratio, terms={terms}")
    return log_a


def step_partition(
    state: ChainState, d: Dataset, h: Hyperparameters, rng: np.random.Generator
) -> tuple[ChainState, MoveRecord]:
    if rng.random() < h.b_birth:
        if splittable(state.labels, state.K).size == 0:
            return state, MoveRecord("birth", False, "infeasible")
        prop = propose_birth(state, rng)
        if not prop.adjacent:
            return state, MoveRecord("birth", False, "nonadjacent")
        log_a = log_acceptance_A(prop, state, d, h)
        accepted = math.log(rng.random()) < log_a
        return (prop.new_state if accepted else state), MoveRecord("birth", accepted, log_a=log_a)
    if state.K < 2:
        return state, MoveRecord("death", False, "infeasible")
    prop = propose_death(state, rng)
    if not prop.reversible:
        return state, MoveRecord("death", False, "out_of_range")
    log_a = log_acceptance_death(prop, state, d, h)
    accepted = math.log(rng.random()) < log_a
    return (prop.new_state if accepted else state), MoveRecord("death", accepted, log_a=log_a)


# ---------------------------------------------------------------------------
# worth update


def augmentation_rates(d: Dataset, omega: np.ndarray) -> np.ndarray:
    """Exponential rate per ranking stage: worth not yet ranked at that stage."""
    return d.design.remaining @ omega


def ranked_cluster_counts(obs: OrdinalObservation, g: Partition) -> np.ndarray:
    """How many ranked objects of ``obs`` fall in each cluster of ``g``."""
    return np.bincount([g.cluster_of(j) for j in obs.ranked], minlength=g.K)


def remaining_cluster_counts(obs: OrdinalObservation, g: Partition) -> np.ndarray:
    """``out[r, k]``: objects of cluster ``k`` still unranked at stage ``r`` (0-based)."""
    out = np.zeros((obs.depth, g.K), dtype=int)
    left = set(obs.considered)
    for r, j in enumerate(obs.ranked):
        for m in left:
            out[r, g.cluster_of(m)] += 1
        left.discard(j)
    return out


def step_worths(
    state: ChainState, d: Dataset, h: Hyperparameters, rng: np.random.Generator
) -> ChainState:
    """One augmented Gibbs sweep over the cluster worths."""
    design = d.design
    K = state.K
    shape = h.a_gamma + np.bincount(state.labels, weights=design.chosen_counts, minlength=K)
    rate = np.full(K, h.b_gamma)
    y = None
    if design.n_stages:
        rates = design.remaining @ state.omega
        if np.any(rates <= 0) or not np.all(np.isfinite(rates)):
            raise FloatingPointError("non-positive exponential rate in worth update")
        y = rng.standard_exponential(design.n_stages) / rates
        rate += np.bincount(state.labels, weights=y @ design.remaining, minlength=K)
    nu = rng.gamma(shape, 1.0 / rate)
    small = nu < WORTH_FLOOR
    if small.any():
        log.warning("clamped %d cluster worth(s) to %g", int(small.sum()), WORTH_FLOOR)
        nu[small] = WORTH_FLOOR
    return ChainState(state.labels, nu, y)


# ---------------------------------------------------------------------------
# chains


@dataclass
class ChainSamples:
    labels: np.ndarray  # (n_records, J) canonical 0-based labels
    omega: np.ndarray  # (n_records, J) un-normalized worths
    stats: MoveStats = field(default_factory=MoveStats)

    @property
    def K(self) -> np.ndarray:
        return self.labels.max(axis=1) + 1


@dataclass
class PosteriorSamples:
    chains: list[ChainSamples]
    config: ChainConfig | None = None
    object_labels: tuple[str, ...] | None = None

    @property
    def n_objects(self) -> int:
        return self.chains[0].omega.shape[1]

    def acceptance(self) -> list[dict]:
        return [c.stats.rates() | {"clamp_events": c.stats.clamp_events} for c in self.chains]


def initial_state(n_objects: int, h: Hyperparameters, rng: np.random.Generator) -> ChainState:
    """All singletons with worths drawn from the slab."""
    return ChainState(np.arange(n_objects), rng.gamma(h.a_gamma, 1.0 / h.b_gamma, size=n_objects))


def run_chain(d: Dataset, cfg: ChainConfig, rng: np.random.Generator) -> ChainSamples:
    J = d.n_objects
    h = cfg.h
    n = cfg.n_records
    labels_out = np.empty((n, J), dtype=np.int16)
    omega_out = np.empty((n, J))
    stats = MoveStats()
    state = initial_state(J, h, rng)
    row = 0
    for _ in range(cfg.t1):
        state, move = step_partition(state, d, h, rng)
        stats.add(move)
        for _ in range(cfg.t2):
            state = step_worths(state, d, h, rng)
            stats.clamp_events += int(np.count_nonzero(state.nu == WORTH_FLOOR))
            labels_out[row] = state.labels
            omega_out[row] = state.omega
            row += 1
    return ChainSamples(labels_out, omega_out, stats)


def _chain_task(args) -> ChainSamples:
    d, cfg, seed_seq = args
    return run_chain(d, cfg, np.random.default_rng(seed_seq))


def run_chains(d: Dataset, cfg: ChainConfig, n_jobs: int = 1) -> PosteriorSamples:
    """Run ``cfg.n_chains`` independent chains seeded from ``cfg.seed``.

    Output does not depend on ``n_jobs``: every chain owns a child seed.
    """
    if d.n_objects < 2:
        raise ValueError("need at least two objects")
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    tasks = [(d, cfg, s) for s in seeds]
    if n_jobs > 1 and cfg.n_chains > 1:
        with ProcessPoolExecutor(max_workers=min(n_jobs, cfg.n_chains)) as pool:
            chains = list(pool.map(_chain_task, tasks))
    else:
        chains = [_chain_task(t) for t in tasks]
    return PosteriorSamples(chains, cfg, d.labels)


def prior_chain_partition(n_objects: int, h: Hyperparameters, rng: np.random.Generator, sweeps: int = 200) -> Partition:
    """Approximate prior partition draw: end state of a chain with no data."""
    d = Dataset(n_objects)
    state = initial_state(n_objects, h, rng)
    for _ in range(sweeps * n_objects):
        state, _ = step_partition(state, d, h, rng)
        state = step_worths(state, d, h, rng)
    return state.partition


# ---------------------------------------------------------------------------
# persistence


def samples_header(n_objects: int) -> list[str]:
    return ["iteration", "chain", "K"] + [f"omega_{j}" for j in range(1, n_objects + 1)] + ["assignment"]


def write_samples_csv(samples: PosteriorSamples, path: str | Path) -> None:
    """One row per recorded state; ``assignment`` is 1-based labels joined by ``-``."""
    J = samples.n_objects
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(samples_header(J))
        for c, chain in enumerate(samples.chains, start=1):
            K = chain.K
            for t in range(chain.omega.shape[0]):
                w.writerow(
                    [t + 1, c, int(K[t])]
                    + [repr(float(x)) for x in chain.omega[t]]
                    + ["-".join(str(int(x) + 1) for x in chain.labels[t])]
                )


def read_samples_csv(path: str | Path) -> PosteriorSamples:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        J = len(header) - 4
        rows: dict[int, tuple[list, list]] = {}
        for rec in reader:
            c = int(rec[1])
            lab, om = rows.setdefault(c, ([], []))
            om.append([float(x) for x in rec[3 : 3 + J]])
            lab.append([int(x) - 1 for x in rec[-1].split("-")])
    chains = [
        ChainSamples(np.array(rows[c][0], dtype=np.int16), np.array(rows[c][1])) for c in sorted(rows)
    ]
    return PosteriorSamples(chains)
