"""Raw cosine trial scoring and adaptive s-normalization.

The imposter cohort holds one unit vector per cohort speaker (the
renormalized mean of that speaker's unit-normalized utterance embeddings).
A trial score is normalized symmetrically with the mean and population
standard deviation of each side's top_n largest cohort scores:

    s' = ((s - mu_e) / sigma_e + (s - mu_t) / sigma_t) / 2
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import EmbeddingTable, ScoredTrial, Trial, Utterance
from .errors import DegenerateCohortError, EmptyTableError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SNormConfig:
    top_n: int = 400
    epsilon_sigma: float = 1e-12

    def __post_init__(self):
        if self.top_n < 2:
            raise ValueError(f"top_n must be >= 2, got {self.top_n}")
        if not self.epsilon_sigma > 0:
            raise ValueError("epsilon_sigma must be positive")


@dataclass(frozen=True)
class Cohort:
    """Speaker-averaged unit embeddings for score normalization."""

    vectors: np.ndarray
    speaker_ids: tuple[str, ...]

    def __post_init__(self):
        if self.vectors.ndim != 2:
            raise ValueError("cohort vectors must form a 2-d matrix")
        if self.vectors.shape[0] != len(self.speaker_ids):
            raise ValueError("one speaker id per cohort vector required")
        norms = np.linalg.norm(self.vectors, axis=1)
        if self.size and np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValueError("cohort vectors must be unit-normalized within 1e-9")

    @property
    def size(self) -> int:
        return self.vectors.shape[0]


def cosine_score(a, b) -> float:
    """Cosine similarity in [-1, 1]; symmetric and scale-invariant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"vectors must be 1-d and equal length, got {a.shape} and {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine is undefined for zero vectors")
    return float(min(1.0, max(-1.0, float(a @ b) / (na * nb))))


def build_cohort(embeddings: EmbeddingTable, metadata: list[Utterance]) -> Cohort:
    """One unit vector per speaker: renormalized mean of the speaker's
    unit-normalized utterance embeddings.

    Speakers without any usable utterance (no embedding, or a degenerate
    mean) are skipped with a warning.
    """
    by_speaker: dict[str, list[np.ndarray]] = {}
    for utt in metadata:
        if utt.utt_id not in embeddings:
            continue
        vec = embeddings[utt.utt_id]
        by_speaker.setdefault(utt.speaker_id, []).append(vec / np.linalg.norm(vec))

    vectors = []
    speaker_ids = []
    skipped = 0
    for speaker_id in sorted({u.speaker_id for u in metadata}):
        units = by_speaker.get(speaker_id)
        if not units:
            skipped += 1
            continue
        mean = np.mean(units, axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0.0:
            skipped += 1
            continue
        vectors.append(mean / norm)
        speaker_ids.append(speaker_id)
    if skipped:
        logger.warning("cohort: skipped %d speaker(s) without usable utterances", skipped)
    if not vectors:
        raise EmptyTableError("cohort has no usable speakers")
    return Cohort(np.stack(vectors), tuple(speaker_ids))


def _top_stats(scores: np.ndarray, top_n: int) -> tuple[float, float]:
    k = min(top_n, scores.size)
    top = np.sort(scores)[::-1][:k]
    return float(top.mean()), float(top.std())


def adaptive_s_norm(
    raw: float,
    enroll_cohort_scores,
    test_cohort_scores,
    cfg: SNormConfig = SNormConfig(),
) -> float:
    """Symmetric z-normalization against the top_n cohort scores of each side.

    top_n is clamped to each list's length. A side whose top scores are
    (numerically) constant raises DegenerateCohortError.
    """
    enroll = np.asarray(enroll_cohort_scores, dtype=np.float64)
    test = np.asarray(test_cohort_scores, dtype=np.float64)
    if enroll.size == 0 or test.size == 0:
        raise ValueError("cohort score lists must be non-empty")
    mu_e, sig_e = _top_stats(enroll, cfg.top_n)
    mu_t, sig_t = _top_stats(test, cfg.top_n)
    if sig_e < cfg.epsilon_sigma:
        raise DegenerateCohortError(
            f"enroll-side cohort std {sig_e:.3g} below epsilon {cfg.epsilon_sigma:.3g}"
        )
    if sig_t < cfg.epsilon_sigma:
        raise DegenerateCohortError(
            f"test-side cohort std {sig_t:.3g} below epsilon {cfg.epsilon_sigma:.3g}"
        )
    return 0.5 * ((raw - mu_e) / sig_e + (raw - mu_t) / sig_t)


def score_trials(
    trials: list[Trial],
    embeddings: EmbeddingTable,
    cohort: Cohort,
    cfg: SNormConfig = SNormConfig(),
) -> list[ScoredTrial]:
    """Raw cosine plus adaptive s-norm score for every trial, in input order.

    Embeddings are unit-normalized once, so each raw score is a dot product
    and each side's cohort statistics are computed once per distinct
    utterance.
    """
    if not trials:
        return []
    utt_ids: dict[str, int] = {}
    for t in trials:
        for u in (t.enroll_id, t.test_id):
            if u not in utt_ids:
                utt_ids[u] = len(utt_ids)
    ordered = list(utt_ids)
    matrix = embeddings.matrix(ordered)
    unit = matrix / np.linalg.norm(matrix, axis=1, keepdims=True)

    mu, sigma = kernels.cohort_stats(unit, cohort.vectors, cfg.top_n)
    bad = np.where(sigma < cfg.epsilon_sigma)[0]
    if bad.size:
        raise DegenerateCohortError(
            f"cohort std for utterance {ordered[int(bad[0])]!r} is below "
            f"epsilon {cfg.epsilon_sigma:.3g}"
        )

    ei = np.array([utt_ids[t.enroll_id] for t in trials], dtype=np.int64)
    ti = np.array([utt_ids[t.test_id] for t in trials], dtype=np.int64)
    raw = kernels.pair_scores(unit, ei, ti)
    norm = 0.5 * ((raw - mu[ei]) / sigma[ei] + (raw - mu[ti]) / sigma[ti])
    return [
        ScoredTrial(trial=t, raw_score=float(raw[i]), norm_score=float(norm[i]))
        for i, t in enumerate(trials)
    ]
