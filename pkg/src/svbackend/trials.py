"""Construction of the calibration training trial set.

The recipe: enumerate within-gender candidate pairs (positives additionally
exclude same-session pairs), draw a seeded balanced sample with a configured
fraction of cross-lingual trials per class (cross-linguality judged on
predicted languages), then discard the easiest fraction of each class by
language-embedding cosine distance: the least-distant positives and the
most-distant negatives.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .data import EmbeddingTable, Gender, Label, PosteriorTable, Trial, Utterance
from .errors import QuotaError
from .scoring import cosine_score

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrialBuildConfig:
    seed: int
    total_trials: int = 100000
    crosslingual_fraction: float = 0.5
    discard_fraction: float = 0.2
    crop_min: float = 2.0
    crop_max: float = 4.0
    crop_half: bool = True

    def __post_init__(self):
        if self.total_trials < 1:
            raise ValueError("total_trials must be positive")
        for name in ("crosslingual_fraction", "discard_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if not 0 < self.crop_min <= self.crop_max:
            raise ValueError("need 0 < crop_min <= crop_max")


def simulate_crops(utterances: list[Utterance], cfg: TrialBuildConfig) -> list[Utterance]:
    """Give a seeded random half of the utterances a shortened duration,
    drawn uniformly from [crop_min, min(crop_max, original)].

    Metadata only; an utterance already shorter than crop_min keeps its
    duration (a crop cannot lengthen audio).
    """
    if not cfg.crop_half:
        return list(utterances)
    rng = np.random.default_rng([cfg.seed, 0])
    n = len(utterances)
    chosen = set(rng.permutation(n)[: n // 2].tolist())
    out = []
    for i, utt in enumerate(utterances):
        if i in chosen and utt.duration > cfg.crop_min:
            new_dur = float(rng.uniform(cfg.crop_min, min(cfg.crop_max, utt.duration)))
            out.append(replace(utt, duration=new_dur))
        else:
            out.append(utt)
    return out


def _quotas(total: int, xl_fraction: float) -> dict[str, int]:
    n_class = total // 2
    n_xl = int(round(xl_fraction * n_class))
    return {
        "pos_xl": n_xl,
        "pos_sl": n_class - n_xl,
        "neg_xl": n_xl,
        "neg_sl": n_class - n_xl,
    }


def build_trials(
    utterances: list[Utterance],
    lang_embeddings: EmbeddingTable,
    posteriors: PosteriorTable,
    cfg: TrialBuildConfig,
) -> list[Trial]:
    """Balanced, labelled calibration trials per the recipe above.

    When the candidate pools cannot sustain total_trials under the class and
    cross-lingual quotas, the largest feasible total is used with a warning;
    a stratum with zero candidates but a positive quota is an error.
    """
    utts = sorted(utterances, key=lambda u: u.utt_id)
    for u in utts:
        if u.gender is Gender.UNKNOWN:
            raise ValueError(f"utterance {u.utt_id!r} has unknown gender")
        if u.utt_id not in posteriors:
            raise KeyError(f"no posterior for utterance {u.utt_id!r}")
        if u.utt_id not in lang_embeddings:
            raise KeyError(f"no language embedding for utterance {u.utt_id!r}")

    pred = np.array([posteriors.predicted_index(u.utt_id) for u in utts])
    spk = np.array([u.speaker_id for u in utts])
    gender = np.array([u.gender.value for u in utts])
    session = np.array([u.session_id for u in utts])

    n = len(utts)
    ii, jj = np.triu_indices(n, k=1)
    same_gender = gender[ii] == gender[jj]
    same_spk = spk[ii] == spk[jj]
    same_session = session[ii] == session[jj]
    crossling = pred[ii] != pred[jj]

    pos_mask = same_gender & same_spk & ~same_session
    neg_mask = same_gender & ~same_spk
    pools = {
        "pos_xl": np.flatnonzero(pos_mask & crossling),
        "pos_sl": np.flatnonzero(pos_mask & ~crossling),
        "neg_xl": np.flatnonzero(neg_mask & crossling),
        "neg_sl": np.flatnonzero(neg_mask & ~crossling),
    }

    total = cfg.total_trials
    while total >= 2:
        quotas = _quotas(total, cfg.crosslingual_fraction)
        if all(len(pools[k]) >= quotas[k] for k in quotas):
            break
        total -= 2
    else:
        achievable = {k: len(v) for k, v in pools.items()}
        raise QuotaError(
            "cannot build any balanced trial set under the cross-lingual "
            f"quota; candidate counts: {achievable}"
        )
    quotas = _quotas(total, cfg.crosslingual_fraction)
    if total < cfg.total_trials:
        logger.warning(
            "trial builder: quota reduced from %d to %d (candidate counts: %s)",
            cfg.total_trials,
            total,
            {k: len(v) for k, v in pools.items()},
        )

    rng = np.random.default_rng([cfg.seed, 1])
    selected: dict[str, np.ndarray] = {}
    for stratum in ("pos_xl", "pos_sl", "neg_xl", "neg_sl"):
        pool = pools[stratum]
        take = quotas[stratum]
        pick = rng.choice(pool.size, size=take, replace=False) if take else np.zeros(0, int)
        selected[stratum] = np.sort(pool[pick])

    def lang_distance(pair_idx: int) -> float:
        a, b = ii[pair_idx], jj[pair_idx]
        return 1.0 - cosine_score(
            lang_embeddings[utts[a].utt_id], lang_embeddings[utts[b].utt_id]
        )

    def finalize(class_pairs: np.ndarray, drop_least: bool) -> list[int]:
        k = int(cfg.discard_fraction * class_pairs.size + 0.5)
        if k == 0:
            return class_pairs.tolist()
        dist = np.array([lang_distance(p) for p in class_pairs])
        order = np.lexsort((class_pairs, dist))  # distance asc, index tiebreak
        kept = order[k:] if drop_least else order[: class_pairs.size - k]
        return sorted(class_pairs[kept].tolist())

    pos_pairs = np.sort(np.concatenate([selected["pos_xl"], selected["pos_sl"]]))
    neg_pairs = np.sort(np.concatenate([selected["neg_xl"], selected["neg_sl"]]))
    kept_pos = finalize(pos_pairs, drop_least=True)
    kept_neg = finalize(neg_pairs, drop_least=False)

    trials = []
    for pair_idx in kept_pos:
        trials.append(Trial(utts[ii[pair_idx]].utt_id, utts[jj[pair_idx]].utt_id, Label.TARGET))
    for pair_idx in kept_neg:
        trials.append(Trial(utts[ii[pair_idx]].utt_id, utts[jj[pair_idx]].utt_id, Label.NONTARGET))
    return trials


def language_distances(
    trials: list[Trial], lang_embeddings: EmbeddingTable
) -> list[float]:
    """1 - cosine similarity of the language embeddings, per trial (the
    audit sidecar written next to a built trial list)."""
    return [
        1.0 - cosine_score(lang_embeddings[t.enroll_id], lang_embeddings[t.test_id])
        for t in trials
    ]
