"""Cross-lingual mini-batch planning for fine-tuning loops.

One iteration visits every eligible speaker exactly once in a seeded random
order; consecutive groups of S speakers form batches. Each speaker
contributes U utterances, drawn as U/2 pairs: a pair is uniform over the
speaker's remaining cross-lingual pairs (two different predicted languages)
when any exists, otherwise uniform over all remaining pairs (counted as a
fallback). A speaker's utterances occupy consecutive batch positions with
drawn pairs adjacent, so pair structure can be audited from the plan.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Utterance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplerConfig:
    speakers_per_batch: int
    utts_per_speaker: int
    seed: int
    drop_last: bool = True

    def __post_init__(self):
        if self.speakers_per_batch < 1:
            raise ValueError("speakers_per_batch must be >= 1")
        if self.utts_per_speaker < 2 or self.utts_per_speaker % 2 != 0:
            raise ValueError(
                f"utts_per_speaker must be a positive even number, "
                f"got {self.utts_per_speaker}"
            )

    @property
    def batch_size(self) -> int:
        return self.speakers_per_batch * self.utts_per_speaker


@dataclass
class BatchPlan:
    batches: list[list[str]] = field(default_factory=list)
    crosslingual_pairs: int = 0
    fallback_pairs: int = 0
    excluded_speakers: int = 0


def _draw_pairs(
    utt_ids: list[str],
    languages: dict[str, int],
    n_pairs: int,
    rng: np.random.Generator,
) -> tuple[list[str], int, int]:
    remaining = list(utt_ids)
    drawn: list[str] = []
    n_cross = 0
    n_fallback = 0
    for _ in range(n_pairs):
        cross = [
            (a, b)
            for i, a in enumerate(remaining)
            for b in remaining[i + 1 :]
            if languages[a] != languages[b]
        ]
        if cross:
            pair = cross[int(rng.integers(len(cross)))]
            n_cross += 1
        else:
            all_pairs = [
                (a, b) for i, a in enumerate(remaining) for b in remaining[i + 1 :]
            ]
            pair = all_pairs[int(rng.integers(len(all_pairs)))]
            n_fallback += 1
        drawn.extend(pair)
        remaining.remove(pair[0])
        remaining.remove(pair[1])
    return drawn, n_cross, n_fallback


def plan_iteration(utterances: list[Utterance], cfg: SamplerConfig) -> BatchPlan:
    """One pass over all eligible speakers (those with at least U utterances
    and predicted languages on every utterance)."""
    languages: dict[str, int] = {}
    by_speaker: dict[str, list[str]] = {}
    for u in utterances:
        if u.predicted_language is None:
            raise ValueError(f"utterance {u.utt_id!r} has no predicted language")
        languages[u.utt_id] = u.predicted_language
        by_speaker.setdefault(u.speaker_id, []).append(u.utt_id)

    eligible = sorted(s for s, us in by_speaker.items() if len(us) >= cfg.utts_per_speaker)
    excluded = len(by_speaker) - len(eligible)
    if excluded:
        logger.warning(
            "sampler: excluded %d speaker(s) with fewer than %d utterances",
            excluded,
            cfg.utts_per_speaker,
        )
    total_eligible_utts = sum(len(by_speaker[s]) for s in eligible)
    if cfg.batch_size > total_eligible_utts:
        raise ValueError(
            f"batch size {cfg.batch_size} exceeds the {total_eligible_utts} "
            "utterances of eligible speakers"
        )

    rng = np.random.default_rng(cfg.seed)
    order = [eligible[i] for i in rng.permutation(len(eligible))]

    n_groups = len(order) // cfg.speakers_per_batch
    groups = [
        order[g * cfg.speakers_per_batch : (g + 1) * cfg.speakers_per_batch]
        for g in range(n_groups)
    ]
    tail = order[n_groups * cfg.speakers_per_batch :]
    if tail and not cfg.drop_last:
        groups.append(tail)

    plan = BatchPlan(excluded_speakers=excluded)
    for group in groups:
        batch: list[str] = []
        for speaker in group:
            pool = sorted(by_speaker[speaker])
            drawn, n_cross, n_fallback = _draw_pairs(
                pool, languages, cfg.utts_per_speaker // 2, rng
            )
            plan.crosslingual_pairs += n_cross
            plan.fallback_pairs += n_fallback
            batch.extend(drawn)
        plan.batches.append(batch)
    return plan


def plan_epochs(
    utterances: list[Utterance], cfg: SamplerConfig, n_iterations: int
) -> list[BatchPlan]:
    """Independent seeded iterations; iteration i uses seed + i."""
    if n_iterations < 0:
        raise ValueError("n_iterations must be >= 0")
    return [
        plan_iteration(utterances, replace(cfg, seed=cfg.seed + i))
        for i in range(n_iterations)
    ]
