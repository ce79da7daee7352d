"""Experiment designs: gate-index sequences, fiducials and completeness checks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .qops import GateSet, evolve_effects, evolve_state

RANK_TOL = 1e-8


def _as_sequence(seq: Iterable[int]) -> tuple:
    out = tuple(int(i) for i in seq)
    if any(i < 1 for i in out):
        raise ValueError(f"gate indices are 1-based, got {out}")
    return out


class SequenceSet(Sequence):
    """Ordered, duplicate-free collection of gate-index sequences.

    Sequences are tuples of 1-based gate indices; ``()`` is the empty sequence.
    """

    def __init__(self, sequences: Iterable[Iterable[int]]):
        seqs = tuple(_as_sequence(s) for s in sequences)
        if not seqs:
            raise ValueError("a sequence set must not be empty")
        if len(set(seqs)) != len(seqs):
            seen, dup = set(), None
            for s in seqs:
                if s in seen:
                    dup = s
                    break
                seen.add(s)
            raise ValueError(f"duplicate sequence {dup} in sequence set")
        self._seqs = seqs
        self._index = {s: k for k, s in enumerate(seqs)}

    @classmethod
    def deduplicated(cls, sequences: Iterable[Iterable[int]]) -> "SequenceSet":
        """Build from an iterable that may repeat; the first occurrence wins."""
        return cls(dict.fromkeys(_as_sequence(s) for s in sequences))

    def __getitem__(self, k):
        return self._seqs[k]

    def __len__(self) -> int:
        return len(self._seqs)

    def __contains__(self, seq) -> bool:
        return tuple(seq) in self._index

    def __iter__(self):
        return iter(self._seqs)

    def __eq__(self, other) -> bool:
        return isinstance(other, SequenceSet) and self._seqs == other._seqs

    def __hash__(self):
        return hash(self._seqs)

    def __repr__(self) -> str:
        return f"SequenceSet({list(self._seqs)!r})"

    def index(self, seq) -> int:
        return self._index[tuple(seq)]

    def max_index(self) -> int:
        return max((max(s) for s in self._seqs if s), default=0)

    def check_range(self, n_gates: int) -> None:
        if self.max_index() > n_gates:
            raise ValueError(f"sequence set uses gate index {self.max_index()} but only {n_gates} gates exist")

    def subset(self, positions: Iterable[int]) -> "SequenceSet":
        return SequenceSet(self._seqs[k] for k in positions)

    def to_json(self) -> dict:
        return {"sequences": [list(s) for s in self._seqs]}

    @classmethod
    def from_json(cls, obj: dict) -> "SequenceSet":
        return cls(obj["sequences"])


@dataclass(frozen=True)
class FiducialDesign:
    prep: SequenceSet
    meas: SequenceSet
    n_gates: int

    def __post_init__(self):
        if self.n_gates < 1:
            raise ValueError("n_gates must be at least 1")
        self.prep.check_range(self.n_gates)
        self.meas.check_range(self.n_gates)

    def to_json(self) -> dict:
        return {"prep_fiducials": [list(s) for s in self.prep],
                "meas_fiducials": [list(s) for s in self.meas],
                "n_gates": self.n_gates}

    @classmethod
    def from_json(cls, obj: dict) -> "FiducialDesign":
        return cls(SequenceSet(obj["prep_fiducials"]), SequenceSet(obj["meas_fiducials"]), int(obj["n_gates"]))


def standard_fiducials(n_gates: int = 3, x: int = 2, y: int = 3) -> FiducialDesign:
    """The usual single-qubit fiducials ``{(), (X), (Y), (X, X)}`` for both roles.

    ``x`` and ``y`` are the 1-based indices of the X_{pi/2} and Y_{pi/2} gates.
    """
    fids = SequenceSet([(), (x,), (y,), (x, x)])
    return FiducialDesign(fids, fids, n_gates)


def prepared_state_vectors(s: GateSet, fids: SequenceSet) -> np.ndarray:
    """Rows are the coefficient vectors of ``G_{i_L} ... G_{i_1}(rho)`` per fiducial."""
    fids.check_range(s.n_gates)
    return np.array([evolve_state(s, f) for f in fids])


def measured_effect_vectors(s: GateSet, fids: SequenceSet) -> np.ndarray:
    """Rows are the pulled-back effects, fiducial-major then outcome order."""
    fids.check_range(s.n_gates)
    return np.concatenate([evolve_effects(s, f) for f in fids], axis=0)


@dataclass(frozen=True)
class CompletenessReport:
    complete: bool
    rank: int
    required_rank: int
    singular_values: tuple
    rank_tol: float

    @property
    def margin(self) -> float:
        """Smallest retained singular value relative to the largest one."""
        sv = self.singular_values
        if not sv or sv[0] == 0 or len(sv) < self.required_rank:
            return 0.0
        return sv[self.required_rank - 1] / sv[0]

    def to_json(self) -> dict:
        return {"complete": self.complete, "rank": self.rank, "required_rank": self.required_rank,
                "singular_values": list(self.singular_values), "margin": self.margin,
                "rank_tol": self.rank_tol}


def _rank_report(vectors: np.ndarray, required: int, rank_tol: float) -> CompletenessReport:
    sv = np.linalg.svd(vectors, compute_uv=False)
    rank = int(np.sum(sv > rank_tol * sv[0])) if sv.size and sv[0] > 0 else 0
    return CompletenessReport(rank == required, rank, required, tuple(float(x) for x in sv), rank_tol)


def is_tomographically_complete(s: GateSet, fids: SequenceSet, rank_tol: float = RANK_TOL) -> CompletenessReport:
    return _rank_report(prepared_state_vectors(s, fids), s.state.size, rank_tol)


def is_informationally_complete(s: GateSet, fids: SequenceSet, rank_tol: float = RANK_TOL) -> CompletenessReport:
    return _rank_report(measured_effect_vectors(s, fids), s.state.size, rank_tol)


def scic_sequences(fd: FiducialDesign) -> list:
    """All fiducial-pair and fiducial-gate-fiducial concatenations, with repeats."""
    out = [ps + ms for ps in fd.prep for ms in fd.meas]
    out += [ps + (g,) + ms for ps in fd.prep for g in range(1, fd.n_gates + 1) for ms in fd.meas]
    return out


def build_scic(fd: FiducialDesign) -> SequenceSet:
    return SequenceSet.deduplicated(scic_sequences(fd))


@dataclass(frozen=True)
class ScicReport:
    is_scic: bool
    missing: tuple
    prep: CompletenessReport
    meas: CompletenessReport

    def to_json(self) -> dict:
        return {"is_scic": self.is_scic, "missing": [list(m) for m in self.missing],
                "prep_fiducials": self.prep.to_json(), "meas_fiducials": self.meas.to_json()}


def is_scic(ids: SequenceSet, fd: FiducialDesign, s: GateSet, rank_tol: float = RANK_TOL) -> ScicReport:
    """Check that ``ids`` contains the full SCIC construction and the fiducials are complete.

    Completeness is judged against ``s``, normally the target set, since the
    true operations are unknown before the experiment.
    """
    missing = tuple(q for q in build_scic(fd) if q not in ids)
    prep = is_tomographically_complete(s, fd.prep, rank_tol)
    meas = is_informationally_complete(s, fd.meas, rank_tol)
    return ScicReport(not missing and prep.complete and meas.complete, missing, prep, meas)
