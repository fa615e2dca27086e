"""Command-line interface: ``rankclust fit | simulate | elections | describe``.

Exit codes: 0 success, 1 bad input (flags or data), 2 runtime fault.
Outputs go to ``--out-dir``, defaulting to ``$RANKCLUST_OUT_DIR`` or
``./rankclust-out``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .analysis import export_traces, summarize, write_summary_json
from .data import FORMATS, DataError, Dataset, dataset_summary, parse_dataset
from .elections import fpp_ranking, irv_ranking
from .prior import Hyperparameters
from .sampler import ChainConfig, run_chains, write_samples_csv
from .simulate import PRESETS, cell_digest, load_scenarios, preset, run_grid, write_results_csv

log = logging.getLogger("rankclust")

OUT_DIR_ENV = "RANKCLUST_OUT_DIR"
STANDARD_BTL_FACTOR = 1000.0


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "rankclust-out"))


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load(path: str, fmt: str) -> Dataset:
    if not Path(path).is_file():
        raise InputError(f"data file not found: {path}")
    return parse_dataset(path, fmt)


def _manifest(command: str, started: float, config: dict, seed, inputs: dict, **extra) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config": config,
        "seed": seed,
        "input": inputs,
        "timing": {
            "started": datetime.fromtimestamp(started, timezone.utc).isoformat(),
            "elapsed_s": round(time.time() - started, 3),
        },
        **extra,
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def chain_config_from_args(args, n_objects: int) -> ChainConfig:
    lam = n_objects * STANDARD_BTL_FACTOR if args.standard_btl else args.lam
    h = Hyperparameters(lam=lam, a_gamma=args.a_gamma, b_gamma=args.b_gamma)
    if not 0 <= args.burn_in_frac < 1:
        raise InputError("--burn-in-frac must be in [0, 1)")
    burn_in = int(args.burn_in_frac * args.t1 * args.t2)
    return ChainConfig(t1=args.t1, t2=args.t2, n_chains=args.chains, burn_in=burn_in, seed=args.seed, h=h)


def fit_dataset(d: Dataset, cfg: ChainConfig, out: Path, n_jobs: int = 1, level: float = 0.8):
    samples = run_chains(d, cfg, n_jobs=n_jobs)
    summary = summarize(samples, level=level)
    out.mkdir(parents=True, exist_ok=True)
    write_samples_csv(samples, out / "samples.csv")
    export_traces(samples, out / "traces.csv")
    write_summary_json(summary, out / "summary.json", {"config": cfg.to_dict()})
    return samples, summary


def cmd_fit(args) -> int:
    started = time.time()
    if args.from_manifest:
        m = json.loads(Path(args.from_manifest).read_text(encoding="utf-8"))
        data_path, fmt = m["input"]["path"], m["input"]["format"]
        cfg = ChainConfig.from_dict(m["config"]["chain"])
        level = m["config"]["level"]
    else:
        if not args.data:
            raise InputError("--data is required (or --from-manifest)")
        data_path, fmt, level = args.data, args.format, args.level
        cfg = None
    d = _load(data_path, fmt)
    if len(d) == 0:
        raise InputError("dataset has no observations")
    if cfg is None:
        cfg = chain_config_from_args(args, d.n_objects)
    out = Path(args.out_dir) if args.out_dir else default_out_dir()
    samples, summary = fit_dataset(d, cfg, out, n_jobs=args.jobs, level=level)
    manifest = _manifest(
        "fit",
        started,
        {"chain": cfg.to_dict(), "level": level},
        cfg.seed,
        {"path": str(data_path), "format": fmt, "sha256": file_digest(data_path)},
        acceptance=samples.acceptance(),
        outputs=["samples.csv", "traces.csv", "summary.json"],
    )
    _write_json(out / "manifest.json", manifest)
    print(f"fit: {len(d)} observations, {d.n_objects} objects, {cfg.n_chains} chains x {cfg.n_records} records")
    print(f"MAP rank-clusters (freq {summary.map_frequency:.3f}):")
    ranks = summary.map_ranks()
    for j in summary.order:
        print(f"  {ranks[j]:>3}  {d.label(j):<20} median {summary.median[j - 1]:.4f}")
    print(f"K {int(level * 100)}% interval: {summary.k_interval[0]}..{summary.k_interval[1]}")
    print(f"outputs in {out}")
    return 0


def cmd_simulate(args) -> int:
    started = time.time()
    if args.scenario:
        if not Path(args.scenario).is_file():
            raise InputError(f"scenario file not found: {args.scenario}")
        cells = load_scenarios(args.scenario)
        if args.seed is not None:
            cells = [replace(c, seed=args.seed) for c in cells]
        source = {"scenario": args.scenario, "sha256": file_digest(args.scenario)}
    else:
        cells = preset(args.preset, seed=args.seed)
        source = {"preset": args.preset}
    out = Path(args.out_dir) if args.out_dir else default_out_dir()
    results = run_grid(cells, n_jobs=args.jobs)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for cell, res in zip(cells, results):
        path = out / f"cell_{cell.name}.csv"
        write_results_csv(res, path)
        files.append(path.name)
        dig = cell_digest(res)
        fmt = lambda v: "  -   " if v is None else f"{v:.4f}"
        print(f"{cell.name:<20} median MAE {fmt(dig['mae'])}  clustered {fmt(dig['clustered'])}  distinct {fmt(dig['distinct'])}")
    manifest = _manifest(
        "simulate", started, {"cells": [c.__dict__ for c in cells]}, args.seed, source, outputs=files
    )
    _write_json(out / "manifest.json", manifest)
    return 0


def _read_summary(path: str) -> dict:
    if not Path(path).is_file():
        raise InputError(f"summary file not found: {path}")
    return json.loads(Path(path).read_text(encoding="utf-8"))


def cmd_elections(args) -> int:
    started = time.time()
    d = _load(args.data, args.format)
    fpp, irv = fpp_ranking(d), irv_ranking(d)
    table = {"fpp": fpp.ranks, "irv": irv.ranks}
    out = Path(args.out_dir) if args.out_dir else default_out_dir()
    if args.summary:
        rc = _read_summary(args.summary)
        if args.btl_summary:
            btl = _read_summary(args.btl_summary)
        else:
            cfg = ChainConfig.from_dict(rc["config"])
            cfg = replace(cfg, h=replace(cfg.h, lam=d.n_objects * STANDARD_BTL_FACTOR))
            _, s = fit_dataset(d, cfg, out / "standard-btl", n_jobs=args.jobs, level=rc.get("level", 0.8))
            btl = s.to_dict()
        if rc["n_objects"] != d.n_objects or btl["n_objects"] != d.n_objects:
            raise InputError("summary and ballots disagree on the number of candidates")
        # candidates never named on a ballot are left out of the baseline rows
        table["btl"] = {j: r for r, j in enumerate(btl["order"], start=1)}
        table["rc_btl"] = {j: r for j, r in enumerate(rc["map_partition"]["ranks"], start=1)}
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "fpp": fpp.to_dict(d),
        "irv": irv.to_dict(d),
        "comparison": {m: {d.label(j): r for j, r in sorted(ranks.items())} for m, ranks in table.items()},
    }
    _write_json(out / "elections.json", payload)
    names = sorted(set().union(*table.values()), key=lambda j: (table["irv"].get(j, 10**9), j))
    print("method   " + "  ".join(f"{d.label(j)[:10]:>10}" for j in names))
    for m, ranks in table.items():
        print(f"{m:<8} " + "  ".join(f"{ranks.get(j, '-'):>10}" for j in names))
    _write_json(
        out / "manifest.json",
        _manifest(
            "elections",
            started,
            {"summary": args.summary, "btl_summary": args.btl_summary},
            None,
            {"path": args.data, "format": args.format, "sha256": file_digest(args.data)},
            outputs=["elections.json"],
        ),
    )
    return 0


def cmd_describe(args) -> int:
    d = _load(args.data, args.format)
    freq = dataset_summary(d)
    depth = freq.counts.shape[1]
    print(f"{len(d)} observations, {d.n_objects} objects")
    print(f"{'object':<20}" + "".join(f"{'r' + str(r + 1):>7}" for r in range(depth)) + f"{'unranked':>10}")
    for j in range(1, d.n_objects + 1):
        row = freq.row(j)
        print(f"{d.label(j):<20}" + "".join(f"{c:>7}" for c in row["ranks"]) + f"{row['unranked']:>10}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rankclust", description="Bayesian rank-clustered Bradley-Terry-Luce models")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(sp, required=True):
        sp.add_argument("--data", required=required, help="ranking file")
        sp.add_argument("--format", choices=FORMATS, default="rankings-csv")

    f = sub.add_parser("fit", help="fit a rank-clustered BTL model")
    data_args(f, required=False)
    f.add_argument("--lambda", dest="lam", type=float, default=2.0, help="Poisson rate on the cluster count")
    f.add_argument("--a-gamma", type=float, default=5.0)
    f.add_argument("--b-gamma", type=float, default=3.0)
    f.add_argument("--t1", type=int, default=5000, help="outer iterations")
    f.add_argument("--t2", type=int, default=2, help="worth sweeps per outer iteration")
    f.add_argument("--chains", type=int, default=4)
    f.add_argument("--burn-in-frac", type=float, default=0.5)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--level", type=float, default=0.8, help="credible interval level")
    f.add_argument("--standard-btl", action="store_true", help=f"set lambda = {STANDARD_BTL_FACTOR:g} x J")
    f.add_argument("--from-manifest", help="re-run the fit recorded in a manifest.json")
    f.add_argument("--jobs", type=int, default=1, help="parallel chains")
    f.add_argument("--out-dir")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="run the simulation study")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    g.add_argument("--scenario", help="key = value scenario file")
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("elections", help="FPP / IRV baselines and rank comparison")
    data_args(e)
    e.add_argument("--summary", help="summary.json of a rank-clustered fit")
    e.add_argument("--btl-summary", help="summary.json of a standard BTL fit (fitted if omitted)")
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--out-dir")
    e.set_defaults(func=cmd_elections)

    ds = sub.add_parser("describe", help="rank-frequency table of a dataset")
    data_args(ds)
    ds.set_defaults(func=cmd_describe)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InputError, DataError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"rankclust: error: {exc}", file=sys.stderr)
        return 1
    except (FloatingPointError, ArithmeticError, RuntimeError) as exc:
        print(f"rankclust: runtime fault: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
