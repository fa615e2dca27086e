"""Ordinal observations, datasets, and the two line-oriented file formats.

Object ids are dense integers ``1..J``. Files may use arbitrary string labels
instead; the loader assigns ids in order of first appearance and keeps the
label map on the :class:`Dataset` for reporting.

``rankings-csv`` rows look like ``3>1>2|1,2,3`` (ranked ids in order, then the
considered set). Omitting ``|...`` means every object was considered.
``rankings-json`` is JSON lines: ``{"ranked": [3, 1], "considered": [1, 2, 3]}``.
Either format may start with a header naming the objects, which fixes ``J``
and the labels: ``# objects: A,B,C`` for CSV, ``{"objects": ["A", "B", "C"]}``
for JSON lines. Unlabelled files may instead declare only the object count
(``# J: 5`` or ``{"J": 5}``).
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

FORMATS = ("rankings-csv", "rankings-json")


class DataError(ValueError):
    """Raised for malformed or inconsistent ranking data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class OrdinalObservation:
    """One judge's preference: ``ranked`` best-first, drawn from ``considered``.

    A pairwise comparison is ``considered`` of size two with only the winner
    ranked; ranking both objects is accepted and means the same thing.
    """

    ranked: tuple[int, ...]
    considered: frozenset[int]

    def __post_init__(self):
        ranked = tuple(int(j) for j in self.ranked)
        object.__setattr__(self, "ranked", ranked)
        object.__setattr__(self, "considered", frozenset(int(j) for j in self.considered))
        if not ranked:
            raise DataError("ranking is empty")
        if len(set(ranked)) != len(ranked):
            dup = next(j for j in ranked if ranked.count(j) > 1)
            raise DataError(f"duplicate id {dup} in ranking")
        missing = [j for j in ranked if j not in self.considered]
        if missing:
            raise DataError(f"ranked id {missing[0]} is not in the considered set")
        if len(self.considered) < 2:
            raise DataError("an observation must consider at least two objects")

    @property
    def depth(self) -> int:
        return len(self.ranked)

    def validate(self, n_objects: int) -> None:
        bad = [j for j in self.considered if not 1 <= j <= n_objects]
        if bad:
            raise DataError(f"id {min(bad)} outside 1..{n_objects}")


@dataclass(frozen=True)
class StageDesign:
    """Flattened ranking stages used by the likelihood and the Gibbs update.

    Row ``s`` of ``remaining`` flags (0/1) the objects still available at that
    stage; ``chosen`` is the 0-based object picked there. The final stage of a
    complete ranking is kept even though its probability factor is one.
    """

    remaining: np.ndarray  # (n_stages, J) float
    chosen: np.ndarray  # (n_stages,) int
    observation: np.ndarray  # (n_stages,) int, index into Dataset.observations
    chosen_counts: np.ndarray  # (J,) times each object was ranked

    @property
    def n_stages(self) -> int:
        return len(self.chosen)


@dataclass(frozen=True)
class Dataset:
    n_objects: int
    observations: tuple[OrdinalObservation, ...] = ()
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
            if len(self.labels) != self.n_objects:
                raise DataError(f"{len(self.labels)} labels given for {self.n_objects} objects")
        if self.n_objects < 2:
            raise DataError("a dataset needs at least two objects")
        for obs in self.observations:
            obs.validate(self.n_objects)

    def __len__(self) -> int:
        return len(self.observations)

    def label(self, j: int) -> str:
        """Display name of object id ``j`` (1-based)."""
        return self.labels[j - 1] if self.labels is not None else str(j)

    @cached_property
    def design(self) -> StageDesign:
        J = self.n_objects
        n_stages = sum(obs.depth for obs in self.observations)
        remaining = np.zeros((n_stages, J))
        chosen = np.empty(n_stages, dtype=np.intp)
        owner = np.empty(n_stages, dtype=np.intp)
        s = 0
        for i, obs in enumerate(self.observations):
            avail = np.zeros(J)
            avail[[j - 1 for j in obs.considered]] = 1.0
            for j in obs.ranked:
                remaining[s] = avail
                chosen[s] = j - 1
                owner[s] = i
                avail[j - 1] = 0.0
                s += 1
        counts = np.bincount(chosen, minlength=J).astype(float)
        return StageDesign(remaining, chosen, owner, counts)


@dataclass
class RankFrequency:
    """Per-object counts: ``counts[j-1, r-1]`` is how often id ``j`` got rank ``r``."""

    counts: np.ndarray
    unranked: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def row(self, j: int) -> dict:
        return {"ranks": self.counts[j - 1].tolist(), "unranked": int(self.unranked[j - 1])}


def dataset_summary(d: Dataset) -> RankFrequency:
    depth = max((obs.depth for obs in d.observations), default=0)
    counts = np.zeros((d.n_objects, depth), dtype=int)
    unranked = np.zeros(d.n_objects, dtype=int)
    for obs in d.observations:
        for r, j in enumerate(obs.ranked):
            counts[j - 1, r] += 1
        for j in obs.considered.difference(obs.ranked):
            unranked[j - 1] += 1
    return RankFrequency(counts, unranked)


# ---------------------------------------------------------------------------
# file formats


class _Resolver:
    """Maps raw tokens to ids, either integers directly or labels by first use."""

    def __init__(self, objects: Sequence[str] | None):
        self.fixed = objects is not None
        self.index: dict[str, int] = {}
        self.numeric: bool | None = None
        if objects is not None:
            for name in objects:
                if name in self.index:
                    raise DataError(f"object {name!r} listed twice in header", 1)
                self.index[name] = len(self.index) + 1

    def __call__(self, token, line: int) -> int:
        tok = str(token).strip()
        if not tok:
            raise DataError("empty object id", line)
        if self.fixed:
            if tok not in self.index:
                raise DataError(f"unknown object {tok!r}", line)
            return self.index[tok]
        is_int = tok.isdigit() or isinstance(token, int)
        if self.numeric is None:
            self.numeric = is_int
        elif self.numeric != is_int:
            raise DataError("mixing numeric ids and string labels", line)
        if is_int:
            j = int(tok)
            if j < 1:
                raise DataError(f"id {j} outside 1..J", line)
            return j
        return self.index.setdefault(tok, len(self.index) + 1)

    def finish(self, n_objects: int | None, max_id: int) -> tuple[int, tuple[str, ...] | None]:
        if self.fixed or self.numeric is False:
            labels = tuple(self.index)
            if n_objects is not None and n_objects != len(labels):
                raise DataError(f"{len(labels)} labelled objects but J={n_objects} requested")
            return len(labels), labels
        J = max_id if n_objects is None else n_objects
        return J, None


def _build(rows, resolver: _Resolver, n_objects: int | None) -> Dataset:
    # rows: (line, ranked ids, considered ids or None)
    if not rows:
        raise DataError("dataset contains no observations")
    max_id = max(max(r[1] + (r[2] or [])) for r in rows)
    J, labels = resolver.finish(n_objects, max_id)
    every = frozenset(range(1, J + 1))
    observations = []
    for line, ranked, considered in rows:
        if max(ranked + (considered or [])) > J:
            raise DataError(f"id {max(ranked + (considered or []))} outside 1..{J}", line)
        if considered is not None and len(set(considered)) != len(considered):
            raise DataError("duplicate id in considered set", line)
        try:
            obs = OrdinalObservation(tuple(ranked), every if considered is None else frozenset(considered))
        except DataError as exc:
            raise DataError(str(exc), line) from None
        observations.append(obs)
    try:
        return Dataset(J, observations, labels)
    except DataError as exc:
        raise DataError(str(exc)) from None


def _header_count(value, line: int) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise DataError(f"bad object count {value!r}", line) from None


def _parse_csv(lines: Iterable[str], n_objects: int | None) -> Dataset:
    resolver = None
    rows = []
    for line_no, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        if text.startswith("#"):
            key, _, value = text[1:].partition(":")
            key = key.strip()
            if key == "objects" and resolver is None and not rows:
                resolver = _Resolver([v.strip() for v in value.split(",")])
            elif key == "J" and n_objects is None:
                n_objects = _header_count(value, line_no)
            continue
        if resolver is None:
            resolver = _Resolver(None)
        ranked_part, sep, considered_part = text.partition("|")
        ranked = [resolver(tok, line_no) for tok in ranked_part.split(">")]
        considered = [resolver(tok, line_no) for tok in considered_part.split(",")] if sep else None
        rows.append((line_no, ranked, considered))
    return _build(rows, resolver or _Resolver(None), n_objects)


def _parse_json(lines: Iterable[str], n_objects: int | None) -> Dataset:
    resolver = None
    rows = []
    for line_no, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON ({exc.msg})", line_no) from None
        if not isinstance(record, dict):
            raise DataError("expected a JSON object", line_no)
        if "objects" in record and resolver is None and not rows:
            resolver = _Resolver([str(x) for x in record["objects"]])
            continue
        if set(record) == {"J"}:
            if n_objects is None:
                n_objects = _header_count(record["J"], line_no)
            continue
        if resolver is None:
            resolver = _Resolver(None)
        if not isinstance(record.get("ranked"), list):
            raise DataError("missing 'ranked' array", line_no)
        extra = set(record) - {"ranked", "considered"}
        if extra:
            raise DataError(f"unexpected keys {sorted(extra)}", line_no)
        ranked = [resolver(tok, line_no) for tok in record["ranked"]]
        considered = record.get("considered")
        if considered is not None:
            if not isinstance(considered, list):
                raise DataError("'considered' must be an array", line_no)
            considered = [resolver(tok, line_no) for tok in considered]
        rows.append((line_no, ranked, considered))
    return _build(rows, resolver or _Resolver(None), n_objects)


def parse_dataset(path: str | Path, format: str = "rankings-csv", n_objects: int | None = None) -> Dataset:
    """Load and validate a dataset.

    ``n_objects`` overrides ``J`` for integer ids (objects that never appear in
    the file still count). Raises :class:`DataError` with the offending line.
    """
    if format not in FORMATS:
        raise DataError(f"unknown format {format!r}; expected one of {', '.join(FORMATS)}")
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    return parse_lines(lines, format, n_objects)


def parse_lines(lines: Iterable[str], format: str = "rankings-csv", n_objects: int | None = None) -> Dataset:
    parser = _parse_csv if format == "rankings-csv" else _parse_json
    return parser(lines, n_objects)


def format_dataset(d: Dataset, format: str = "rankings-csv") -> str:
    """Serialize ``d``; parsing the result gives back an identical Dataset."""
    if format not in FORMATS:
        raise DataError(f"unknown format {format!r}")
    names = list(d.labels) if d.labels is not None else [str(j) for j in range(1, d.n_objects + 1)]
    tok = (lambda j: names[j - 1]) if d.labels is not None else int
    out = []
    if format == "rankings-csv":
        out.append("# objects: " + ",".join(names) if d.labels is not None else f"# J: {d.n_objects}")
        for obs in d.observations:
            ranked = ">".join(str(tok(j)) for j in obs.ranked)
            considered = ",".join(str(tok(j)) for j in sorted(obs.considered))
            out.append(f"{ranked}|{considered}")
    else:
        out.append(json.dumps({"objects": names} if d.labels is not None else {"J": d.n_objects}))
        for obs in d.observations:
            out.append(json.dumps({
                "ranked": [tok(j) for j in obs.ranked],
                "considered": [tok(j) for j in sorted(obs.considered)],
            }))
    return "\n".join(out) + "\n"


def write_dataset(d: Dataset, path: str | Path, format: str = "rankings-csv") -> None:
    Path(path).write_text(format_dataset(d, format), encoding="utf-8")
