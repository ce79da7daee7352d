"""Probability tables, multinomial data and the squared-distance loss."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .design import SequenceSet
from .qops import GateSet, clean_distribution, raw_probabilities


@dataclass(frozen=True, eq=False)
class DistributionTable:
    """One outcome distribution per sequence.

    Used both for model probabilities ``p(Id, s)`` and empirical frequencies
    ``f_N(Id)``; the latter carry the repetition count in ``shots``.
    """

    sequences: SequenceSet
    outcomes: tuple
    values: np.ndarray
    shots: Optional[int] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.sequences), len(self.outcomes)):
            raise ValueError(f"table shape {values.shape} does not match "
                             f"({len(self.sequences)}, {len(self.outcomes)})")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "outcomes", tuple(self.outcomes))

    def row(self, seq) -> dict:
        return dict(zip(self.outcomes, self.values[self.sequences.index(seq)]))

    def rows_for(self, ids: SequenceSet) -> np.ndarray:
        """Rows aligned with ``ids``; a missing sequence is a ``ValueError``."""
        try:
            idx = [self.sequences.index(q) for q in ids]
        except KeyError as exc:
            raise ValueError(f"table has no row for sequence {exc.args[0]}") from None
        return self.values[idx]

    def restrict(self, ids: SequenceSet) -> "DistributionTable":
        return DistributionTable(ids, self.outcomes, self.rows_for(ids), self.shots)

    def to_json(self) -> dict:
        out = {"outcomes": list(self.outcomes),
               "rows": [{"sequence": list(q), "p": [float(x) for x in v]}
                        for q, v in zip(self.sequences, self.values)]}
        if self.shots is not None:
            out["shots"] = self.shots
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "DistributionTable":
        seqs = SequenceSet(r["sequence"] for r in obj["rows"])
        return cls(seqs, tuple(obj["outcomes"]), [r["p"] for r in obj["rows"]], obj.get("shots"))


ProbabilityTable = DistributionTable
EmpiricalTable = DistributionTable


@dataclass(frozen=True, eq=False)
class Dataset:
    sequences: SequenceSet
    outcomes: tuple
    counts: np.ndarray
    shots: int
    seed: Optional[int] = None

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.shape != (len(self.sequences), len(self.outcomes)):
            raise ValueError("counts shape does not match sequences x outcomes")
        if self.shots < 1:
            raise ValueError("shots must be positive")
        if np.any(counts < 0) or np.any(counts.sum(axis=1) != self.shots):
            raise ValueError("every row of counts must be non-negative and sum to the shot count")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "outcomes", tuple(self.outcomes))


def probabilities(s: GateSet, ids: SequenceSet) -> DistributionTable:
    """Born-rule probabilities of ``s`` for every sequence of ``ids``."""
    ids.check_range(s.n_gates)
    p = raw_probabilities(s, list(ids))
    p = np.array([clean_distribution(row) for row in p])
    return DistributionTable(ids, s.outcomes, p)


def _row_generator(seed: int, row: int) -> np.random.Generator:
    # Philox is counter based; keying the stream by (seed, row) makes each row
    # independent of the order in which rows are drawn.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(row,))))


def sample(table: DistributionTable, n: int, seed: int) -> Dataset:
    """Draw ``n`` multinomial shots per sequence."""
    n = int(n)
    if n < 1:
        raise ValueError("number of shots must be at least 1")
    counts = np.empty(table.values.shape, dtype=np.int64)
    for k, p in enumerate(table.values):
        p = p / p.sum()
        counts[k] = _row_generator(seed, k).multinomial(n, p)
    return Dataset(table.sequences, table.outcomes, counts, n, seed)


def frequencies(ds: Dataset) -> DistributionTable:
    return DistributionTable(ds.sequences, ds.outcomes, ds.counts / ds.shots, ds.shots)


def _aligned(a: DistributionTable, b: DistributionTable, ids: SequenceSet | None):
    if a.outcomes != b.outcomes:
        raise ValueError(f"outcome labels differ: {a.outcomes} vs {b.outcomes}")
    ids = a.sequences if ids is None else ids
    return a.rows_for(ids), b.rows_for(ids), len(ids)


def loss(a: DistributionTable, b: DistributionTable, ids: SequenceSet | None = None) -> float:
    """Mean over sequences of half the squared 2-norm between distributions."""
    pa, pb, n = _aligned(a, b, ids)
    return float(0.5 * np.sum((pa - pb) ** 2) / n)


def loss_values(pa: np.ndarray, pb: np.ndarray) -> float:
    return float(0.5 * np.sum((pa - pb) ** 2) / pa.shape[0])


def format_sequence(seq) -> str:
    return "-".join(str(i) for i in seq) if seq else "-"


def parse_sequence(text: str) -> tuple:
    text = text.strip()
    if text in ("-", ""):
        return ()
    return tuple(int(x) for x in text.split("-"))


def dataset_to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sequence", "outcome", "count"])
    for q, row in zip(ds.sequences, ds.counts):
        for label, c in zip(ds.outcomes, row):
            w.writerow([format_sequence(q), label, int(c)])
    return buf.getvalue()


def dataset_from_csv(text: str) -> Dataset:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["sequence", "outcome", "count"]:
        raise ValueError("dataset CSV must have header 'sequence,outcome,count'")
    rows: dict = {}
    labels = set()
    for rec in reader:
        q = parse_sequence(rec["sequence"])
        label = rec["outcome"].strip()
        labels.add(label)
        rows.setdefault(q, {})[label] = int(rec["count"])
    if not rows:
        raise ValueError("dataset CSV has no rows")
    outcomes = tuple(sorted(labels))
    counts = [[r.get(w, 0) for w in outcomes] for r in rows.values()]
    totals = {sum(c) for c in counts}
    if len(totals) != 1:
        raise ValueError("all sequences must share a common repetition count")
    return Dataset(SequenceSet(rows), outcomes, counts, totals.pop())
