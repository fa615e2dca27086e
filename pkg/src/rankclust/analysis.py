"""Posterior summaries, rank-cluster reports, and convergence diagnostics."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .prior import Partition
from .sampler import PosteriorSamples


@dataclass
class PosteriorSummary:
    draws: np.ndarray  # retained worths, each row normalized to sum 1
    labels: np.ndarray  # retained canonical partitions, one row per draw
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    coclustering: np.ndarray
    map_partition: Partition
    map_frequency: float
    k_pmf: np.ndarray  # entry k-1 is P(K = k)
    k_interval: tuple[int, int]
    level: float
    burn_in: int
    n_chains: int
    object_labels: tuple[str, ...] | None = None

    @property
    def n_objects(self) -> int:
        return self.draws.shape[1]

    @property
    def n_retained(self) -> int:
        return self.draws.shape[0]

    def label(self, j: int) -> str:
        return self.object_labels[j - 1] if self.object_labels else str(j)

    @property
    def order(self) -> list[int]:
        """Object ids by descending posterior median worth (ties by id)."""
        return sorted(range(1, self.n_objects + 1), key=lambda j: (-self.median[j - 1], j))

    def median_ranks(self) -> dict[int, int]:
        """Rank 1..J of each object under the median ordering."""
        return {j: r for r, j in enumerate(self.order, start=1)}

    def map_ranks(self) -> dict[int, int]:
        """Ranks with MAP rank-clusters tied (competition style: 1, 2, 2, 4)."""
        g = self.map_partition
        clusters = g.clusters()
        score = [np.mean([self.median[j - 1] for j in c]) for c in clusters]
        ranks = {}
        position = 1
        for k in sorted(range(g.K), key=lambda k: (-score[k], clusters[k][0])):
            for j in clusters[k]:
                ranks[j] = position
            position += len(clusters[k])
        return ranks

    def to_dict(self) -> dict:
        J = self.n_objects
        return {
            "n_objects": J,
            "n_retained": self.n_retained,
            "n_chains": self.n_chains,
            "burn_in": self.burn_in,
            "level": self.level,
            "objects": [
                {
                    "id": j,
                    "label": self.label(j),
                    "median": float(self.median[j - 1]),
                    "lower": float(self.lower[j - 1]),
                    "upper": float(self.upper[j - 1]),
                }
                for j in range(1, J + 1)
            ],
            "order": self.order,
            "coclustering": self.coclustering.tolist(),
            "map_partition": {
                "assignment": str(self.map_partition),
                "clusters": [list(c) for c in self.map_partition.clusters()],
                "frequency": self.map_frequency,
                "ranks": [self.map_ranks()[j] for j in range(1, J + 1)],
            },
            "k_pmf": {str(k): float(p) for k, p in enumerate(self.k_pmf, start=1)},
            "k_interval": list(self.k_interval),
        }


def normalize(omega: np.ndarray) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    return omega / omega.sum(axis=-1, keepdims=True)


def _retained(samples: PosteriorSamples, burn_in: int | None):
    n = min(c.omega.shape[0] for c in samples.chains)
    if burn_in is None:
        burn_in = samples.config.burn_in_records if samples.config else n // 2
    if not 0 <= burn_in < n:
        raise ValueError(f"burn_in {burn_in} leaves no retained draws (chains hold {n})")
    omega = np.concatenate([c.omega[burn_in:] for c in samples.chains])
    labels = np.concatenate([c.labels[burn_in:] for c in samples.chains])
    return burn_in, omega, labels


def coclustering_matrix(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    J = labels.shape[1]
    counts = np.zeros((J, J), dtype=np.int64)
    for i in range(J):
        counts[i] = np.count_nonzero(labels == labels[:, [i]], axis=0)
    return counts / labels.shape[0]


def modal_partition(labels: np.ndarray) -> tuple[Partition, float]:
    """Most frequent partition; ties go to smaller K, then lexicographic labels."""
    rows, counts = np.unique(np.asarray(labels), axis=0, return_counts=True)
    ks = rows.max(axis=1)
    best = min(range(len(rows)), key=lambda i: (-counts[i], ks[i], tuple(rows[i])))
    return Partition(tuple(int(x) for x in rows[best])), float(counts[best] / counts.sum())


def summarize(samples: PosteriorSamples, burn_in: int | None = None, level: float = 0.8) -> PosteriorSummary:
    """Pool chains after dropping ``burn_in`` records from each."""
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    burn_in, omega, labels = _retained(samples, burn_in)
    draws = normalize(omega)
    tail = (1.0 - level) / 2.0
    median = np.median(draws, axis=0)
    lower, upper = np.quantile(draws, [tail, 1.0 - tail], axis=0)
    J = draws.shape[1]
    K = labels.max(axis=1) + 1
    k_pmf = np.bincount(K, minlength=J + 1)[1:] / K.size
    k_lo, k_hi = np.quantile(K, [tail, 1.0 - tail], method="inverted_cdf")
    g, freq = modal_partition(labels)
    return PosteriorSummary(
        draws=draws,
        labels=labels,
        median=median,
        lower=lower,
        upper=upper,
        coclustering=coclustering_matrix(labels),
        map_partition=g,
        map_frequency=freq,
        k_pmf=k_pmf,
        k_interval=(int(k_lo), int(k_hi)),
        level=level,
        burn_in=burn_in,
        n_chains=len(samples.chains),
        object_labels=samples.object_labels,
    )


def write_summary_json(summary: PosteriorSummary, path: str | Path, extra: dict | None = None) -> None:
    payload = summary.to_dict()
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def mae_against_truth(summary: PosteriorSummary, omega_true) -> float:
    """Mean over draws and objects of the absolute error in normalized worth."""
    truth = np.asarray(omega_true, dtype=float)
    if truth.shape != (summary.n_objects,):
        raise ValueError(f"truth has {truth.size} entries, posterior has {summary.n_objects} objects")
    return float(np.mean(np.abs(normalize(summary.draws) - normalize(truth))))


class RecoveryRates(NamedTuple):
    clustered: float | None  # mean co-clustering over truly tied pairs
    distinct: float | None  # mean co-clustering over truly distinct pairs


def cluster_recovery_rates(summary: PosteriorSummary, omega_true) -> RecoveryRates:
    truth = np.asarray(omega_true, dtype=float)
    if truth.shape != (summary.n_objects,):
        raise ValueError("truth and posterior disagree on the number of objects")
    iu = np.triu_indices(truth.size, k=1)
    tied = (truth[:, None] == truth[None, :])[iu]
    co = summary.coclustering[iu]
    return RecoveryRates(
        float(co[tied].mean()) if tied.any() else None,
        float(co[~tied].mean()) if (~tied).any() else None,
    )


def export_traces(samples: PosteriorSamples, path: str | Path) -> int:
    """Long-format trace CSV (iteration, chain, variable, value); returns row count."""
    J = samples.n_objects
    n_rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "chain", "variable", "value"])
        for c, chain in enumerate(samples.chains, start=1):
            K = chain.K
            for t in range(chain.omega.shape[0]):
                w.writerow([t + 1, c, "K", int(K[t])])
                for j in range(J):
                    w.writerow([t + 1, c, f"omega_{j + 1}", repr(float(chain.omega[t, j]))])
                n_rows += J + 1
    return n_rows


def split_rhat(x) -> float:
    """Split-chain potential scale reduction for ``x`` of shape (chains, draws)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 4:
        raise ValueError("need at least 2 chains with at least 4 draws each")
    half = x.shape[1] // 2
    # middle draw of an odd-length chain is dropped
    splits = np.concatenate([x[:, :half], x[:, x.shape[1] - half :]])
    n = half
    between = n * splits.mean(axis=1).var(ddof=1)
    within = splits.var(axis=1, ddof=1).mean()
    if within == 0:
        return 1.0 if between == 0 else float("inf")
    var_plus = (n - 1) / n * within + between / n
    return float(np.sqrt(var_plus / within))


def trace_matrix(samples: PosteriorSamples, variable: str | int, burn_in: int = 0) -> np.ndarray:
    """(chains, draws) array of ``"K"`` or the normalized worth of object ``j``."""
    n = min(c.omega.shape[0] for c in samples.chains)
    if variable == "K":
        return np.stack([c.K[burn_in:n] for c in samples.chains]).astype(float)
    j = int(str(variable).removeprefix("omega_"))
    if not 1 <= j <= samples.n_objects:
        raise ValueError(f"no object {j}")
    return np.stack([normalize(c.omega[burn_in:n])[:, j - 1] for c in samples.chains])


def rhat(samples: PosteriorSamples, variable: str | int = "K", burn_in: int = 0) -> float:
    return split_rhat(trace_matrix(samples, variable, burn_in))
