"""Domain types: utterances, embedding/posterior tables, trials.

All tables are immutable after construction and safe to share across
threads. Identifier discipline: utterance ids are opaque strings, unique
within a dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import EmptyTableError


class Gender(Enum):
    MALE = "male"
    FEMALE = "female"
    UNKNOWN = "unknown"


class Label(Enum):
    TARGET = "target"
    NONTARGET = "nontarget"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Utterance:
    """Metadata record for a single utterance."""

    utt_id: str
    speaker_id: str
    duration: float
    gender: Gender = Gender.UNKNOWN
    session_id: str = ""
    predicted_language: int | None = None

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(
                f"utterance {self.utt_id!r}: duration must be > 0, got {self.duration}"
            )


@dataclass(frozen=True)
class Trial:
    """An (enrollment, test) utterance pair. Self-trials are legal."""

    enroll_id: str
    test_id: str
    label: Label = Label.UNKNOWN

    @property
    def is_self_trial(self) -> bool:
        return self.enroll_id == self.test_id


@dataclass
class ScoredTrial:
    """Evolving score record for one trial.

    Filled left to right by the pipeline: raw cosine score, cohort-normalized
    score, named quality features, calibrated log-likelihood-ratio.
    """

    trial: Trial
    raw_score: float
    norm_score: float | None = None
    qmf: dict[str, float] = field(default_factory=dict)
    llr: float | None = None

    def score(self, use_norm: bool = True) -> float:
        """The score to feed downstream: normalized if requested and present."""
        if use_norm:
            if self.norm_score is None:
                raise ValueError(
                    f"trial ({self.trial.enroll_id}, {self.trial.test_id}) "
                    "has no normalized score"
                )
            return self.norm_score
        return self.raw_score


class EmbeddingTable:
    """Identifier-keyed store of fixed-dimension real vectors.

    Every vector has the same length, finite entries and nonzero norm;
    stored arrays are marked read-only.
    """

    def __init__(self):
        self._dim: int | None = None
        self._entries: dict[str, np.ndarray] = {}

    @property
    def dim(self) -> int:
        if self._dim is None:
            raise EmptyTableError("embedding table is empty; dim is undefined")
        return self._dim

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, utt_id: str) -> bool:
        return utt_id in self._entries

    def __getitem__(self, utt_id: str) -> np.ndarray:
        return self._entries[utt_id]

    def ids(self) -> list[str]:
        return list(self._entries)

    def insert(self, utt_id: str, vector) -> None:
        if utt_id in self._entries:
            raise ValueError(f"duplicate utterance id {utt_id!r}")
        vec = np.asarray(vector, dtype=np.float64)
        if vec.ndim != 1:
            raise ValueError(f"vector for {utt_id!r} must be 1-dimensional")
        if self._dim is None:
            if vec.size == 0:
                raise ValueError(f"vector for {utt_id!r} is empty")
            self._dim = int(vec.size)
        elif vec.size != self._dim:
            raise ValueError(
                f"vector for {utt_id!r} has length {vec.size}, expected {self._dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"vector for {utt_id!r} has non-finite entries")
        if not np.any(vec):
            raise ValueError(f"vector for {utt_id!r} is all zeros")
        vec.setflags(write=False)
        self._entries[utt_id] = vec

    def matrix(self, utt_ids: list[str]) -> np.ndarray:
        """Rows stacked in the order given; raises KeyError naming missing ids."""
        missing = [u for u in utt_ids if u not in self._entries]
        if missing:
            raise KeyError(f"no embedding for utterance {missing[0]!r}")
        if not utt_ids:
            return np.empty((0, self.dim if self._dim is not None else 0))
        return np.stack([self._entries[u] for u in utt_ids])


class PosteriorTable:
    """Per-utterance language class probabilities over a fixed language list.

    The unit-sum tolerance grows with the vector length: each entry may have
    been through the 9-significant-digit text format, which perturbs the sum
    by up to 5e-10 per entry.
    """

    SUM_TOL_BASE = 1e-9
    SUM_TOL_PER_ENTRY = 5e-10

    def __init__(self, languages: list[str]):
        if not languages:
            raise ValueError("language list must be non-empty")
        if len(set(languages)) != len(languages):
            raise ValueError("language codes must be unique")
        self.languages = list(languages)
        self._entries: dict[str, np.ndarray] = {}

    @property
    def n_languages(self) -> int:
        return len(self.languages)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, utt_id: str) -> bool:
        return utt_id in self._entries

    def __getitem__(self, utt_id: str) -> np.ndarray:
        return self._entries[utt_id]

    def ids(self) -> list[str]:
        return list(self._entries)

    def insert(self, utt_id: str, probs) -> None:
        if utt_id in self._entries:
            raise ValueError(f"duplicate utterance id {utt_id!r}")
        vec = np.asarray(probs, dtype=np.float64)
        if vec.size != self.n_languages:
            raise ValueError(
                f"posterior for {utt_id!r} has length {vec.size}, "
                f"expected {self.n_languages}"
            )
        if np.any(vec < 0) or np.any(vec > 1):
            raise ValueError(f"posterior for {utt_id!r} has entries outside [0, 1]")
        tol = self.SUM_TOL_BASE + self.SUM_TOL_PER_ENTRY * self.n_languages
        if not math.isclose(float(vec.sum()), 1.0, rel_tol=0.0, abs_tol=tol):
            raise ValueError(
                f"posterior for {utt_id!r} sums to {vec.sum():.12g}, expected 1"
            )
        vec.setflags(write=False)
        self._entries[utt_id] = vec

    def predicted_index(self, utt_id: str) -> int:
        """Most probable language index; ties resolve to the lowest index."""
        return int(np.argmax(self._entries[utt_id]))


def attach_predicted_languages(
    utterances: list[Utterance], posteriors: PosteriorTable
) -> list[Utterance]:
    """Return copies of the utterances with predicted_language filled from
    the posterior argmax. Raises KeyError naming any utterance without a
    posterior."""
    out = []
    for utt in utterances:
        if utt.utt_id not in posteriors:
            raise KeyError(f"no posterior for utterance {utt.utt_id!r}")
        out.append(
            Utterance(
                utt_id=utt.utt_id,
                speaker_id=utt.speaker_id,
                duration=utt.duration,
                gender=utt.gender,
                session_id=utt.session_id,
                predicted_language=posteriors.predicted_index(utt.utt_id),
            )
        )
    return out
