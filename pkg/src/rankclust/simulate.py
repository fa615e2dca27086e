"""Simulation study: fit rank-clustered models to data drawn from known worths.

Eight objects take one of four true worth ladders with 1, 2, 4 or 8 tied
groups spaced by factors of four. For each cell (true K, lam, number of
judges) we draw replicate datasets of complete rankings, fit them, and
score the fits against the truth.
"""

from __future__ import annotations

import configparser
import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .analysis import cluster_recovery_rates, mae_against_truth, summarize
from .btl import sample_dataset
from .prior import Hyperparameters
from .sampler import ChainConfig, run_chains

TRUE_K = (1, 2, 4, 8)


def tiered_truth(K: int) -> np.ndarray:
    """True worths for eight objects in ``K`` equal-sized tied groups."""
    if K not in TRUE_K:
        raise ValueError(f"true K must be one of {TRUE_K}")
    return 4.0 ** (np.arange(8) // (8 // K))


@dataclass(frozen=True)
class SimScenario:
    K: int
    lam: float
    I: int
    replicates: int = 20
    t1: int = 5000
    t2: int = 2
    n_chains: int = 2
    seed: int = 0
    a_gamma: float = 5.0
    b_gamma: float = 3.0

    def __post_init__(self):
        tiered_truth(self.K)
        if self.replicates < 1 or self.I < 1:
            raise ValueError("replicates and I must be at least 1")

    @property
    def omega_true(self) -> np.ndarray:
        return tiered_truth(self.K)

    @property
    def name(self) -> str:
        return f"K{self.K}_lam{self.lam:g}_I{self.I}"

    def chain_config(self, seed: int) -> ChainConfig:
        h = Hyperparameters(lam=self.lam, a_gamma=self.a_gamma, b_gamma=self.b_gamma)
        return ChainConfig(t1=self.t1, t2=self.t2, n_chains=self.n_chains, seed=seed, h=h)


@dataclass(frozen=True)
class ReplicateResult:
    K: int
    lam: float
    I: int
    replicate: int
    mae: float
    clustered: float | None
    distinct: float | None
    k_median: float
    k_lower: int
    k_upper: int
    map_k: int
    birth_rate: float | None
    death_rate: float | None


def _desk() -> list[SimScenario]:
    cells = [(2, 2.0, 200), (2, 2.0, 800), (8, 8.0, 800)]
    return [SimScenario(K, lam, I, replicates=5, t1=2000, t2=2) for K, lam, I in cells]


def _full() -> list[SimScenario]:
    return [
        SimScenario(K, lam, I, replicates=20, t1=5000, t2=2)
        for K, lam, I in itertools.product(TRUE_K, (0.1, 2.0, 4.0, 8.0), (50, 200, 800))
    ]


def _smoke() -> list[SimScenario]:
    return [SimScenario(2, 2.0, 50, replicates=2, t1=100, t2=2)]


PRESETS = {"desk": _desk, "full": _full, "smoke": _smoke}


def preset(name: str, seed: int | None = None) -> list[SimScenario]:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    cells = PRESETS[name]()
    return [replace(c, seed=seed) for c in cells] if seed is not None else cells


def load_scenarios(path: str | Path) -> list[SimScenario]:
    """Read a ``key = value`` scenario file.

    Keys: J (must be 8), K, lambda, I, replicates, T1, T2, chains, seed.
    K, lambda and I may be comma-separated lists, expanded to a grid.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str
    text = Path(path).read_text(encoding="utf-8")
    parser.read_string("[scenario]\n" + text)
    raw = dict(parser["scenario"])
    known = {"J", "K", "lambda", "I", "replicates", "T1", "T2", "chains", "seed"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
    if int(raw.get("J", 8)) != 8:
        raise ValueError("the simulation truths are defined for J = 8")

    def ints(key, default):
        return [int(x) for x in raw.get(key, str(default)).split(",")]

    Ks, Is = ints("K", 2), ints("I", 200)
    lams = [float(x) for x in raw.get("lambda", "2").split(",")]
    common = dict(
        replicates=int(raw.get("replicates", 20)),
        t1=int(raw.get("T1", 5000)),
        t2=int(raw.get("T2", 2)),
        n_chains=int(raw.get("chains", 2)),
        seed=int(raw.get("seed", 0)),
    )
    return [SimScenario(K, lam, I, **common) for K, lam, I in itertools.product(Ks, lams, Is)]


def run_replicate(s: SimScenario, cell: int, replicate: int) -> ReplicateResult:
    """Fit one dataset; seeded from (scenario seed, cell, replicate)."""
    seq = np.random.SeedSequence(s.seed, spawn_key=(cell, replicate))
    data_seq, chain_seq = seq.spawn(2)
    d = sample_dataset(s.omega_true, s.I, np.random.default_rng(data_seq))
    cfg = s.chain_config(int(chain_seq.generate_state(1)[0]))
    samples = run_chains(d, cfg)
    summary = summarize(samples)
    rec = cluster_recovery_rates(summary, s.omega_true)
    K = summary.labels.max(axis=1) + 1
    birth = [r["birth"] for r in samples.acceptance() if r["birth"] is not None]
    death = [r["death"] for r in samples.acceptance() if r["death"] is not None]
    return ReplicateResult(
        K=s.K,
        lam=s.lam,
        I=s.I,
        replicate=replicate,
        mae=mae_against_truth(summary, s.omega_true),
        clustered=rec.clustered,
        distinct=rec.distinct,
        k_median=float(np.median(K)),
        k_lower=summary.k_interval[0],
        k_upper=summary.k_interval[1],
        map_k=summary.map_partition.K,
        birth_rate=float(np.mean(birth)) if birth else None,
        death_rate=float(np.mean(death)) if death else None,
    )


def _task(args):
    return run_replicate(*args)


def run_scenario(s: SimScenario, cell: int = 0, n_jobs: int = 1) -> list[ReplicateResult]:
    return run_grid([s], n_jobs, cells=[cell])[0]


def run_grid(scenarios: list[SimScenario], n_jobs: int = 1, cells: list[int] | None = None) -> list[list[ReplicateResult]]:
    """All replicates of all cells as one work queue; results grouped by cell."""
    cells = list(range(len(scenarios))) if cells is None else cells
    tasks = [(s, c, r) for s, c in zip(scenarios, cells) for r in range(s.replicates)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            flat = list(pool.map(_task, tasks))
    else:
        flat = [_task(t) for t in tasks]
    out, pos = [], 0
    for s in scenarios:
        out.append(flat[pos : pos + s.replicates])
        pos += s.replicates
    return out


RESULT_FIELDS = list(ReplicateResult.__dataclass_fields__)


def write_results_csv(results: list[ReplicateResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, RESULT_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in results:
            w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in asdict(r).items()})


def cell_digest(results: list[ReplicateResult]) -> dict:
    """Median metrics over replicates for a one-line report."""

    def med(key):
        vals = [getattr(r, key) for r in results if getattr(r, key) is not None]
        return float(np.median(vals)) if vals else None

    return {"mae": med("mae"), "clustered": med("clustered"), "distinct": med("distinct"), "k_median": med("k_median")}
