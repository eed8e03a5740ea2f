"""Per-trial quality features: durations and language information.

All features are side-independent (symmetric in enrollment and test), which
is what makes them usable by the calibration backend. The language features
come in three flavours of increasing softness: a binary same/different
prediction indicator, the Jensen-Shannon distance between the two class
posterior vectors, and the cosine similarity of the two language embeddings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import EmbeddingTable, PosteriorTable, ScoredTrial, Utterance
from .scoring import cosine_score

QMF_LOG_DUR_MIN = "log_dur_min"
QMF_LOG_DUR_SUM = "log_dur_sum"
QMF_LANG_BINARY = "lang_binary"
QMF_LANG_JS = "lang_js"
QMF_LANG_EMB_COS = "lang_emb_cos"

QMF_NAMES = (
    QMF_LOG_DUR_MIN,
    QMF_LOG_DUR_SUM,
    QMF_LANG_BINARY,
    QMF_LANG_JS,
    QMF_LANG_EMB_COS,
)

# Maximum Jensen-Shannon distance (natural log), attained for distributions
# with disjoint support.
JS_MAX = math.sqrt(math.log(2.0))


@dataclass(frozen=True)
class AamScale:
    """Scale factor applied to classifier cosines before the softmax."""

    scale: float = 30.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")


def posterior_from_cosines(cosines, scale: AamScale | float = AamScale()) -> np.ndarray:
    """Softmax of scaled classifier cosines; preserves the argmax."""
    s = scale.scale if isinstance(scale, AamScale) else float(scale)
    if not s > 0:
        raise ValueError(f"scale must be positive, got {s}")
    c = np.asarray(cosines, dtype=np.float64)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("cosines must be a non-empty 1-d vector")
    if np.any(c < -1.0 - 1e-9) or np.any(c > 1.0 + 1e-9):
        raise ValueError("cosines must lie in [-1, 1]")
    z = s * np.clip(c, -1.0, 1.0)
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def binary_crosslingual(e_probs, t_probs) -> float:
    """1.0 when the two argmax predictions differ, else 0.0.

    Ties resolve to the lowest index on both sides.
    """
    e = np.asarray(e_probs, dtype=np.float64)
    t = np.asarray(t_probs, dtype=np.float64)
    if e.shape != t.shape or e.ndim != 1:
        raise ValueError("probability vectors must be 1-d and equal length")
    return 1.0 if int(np.argmax(e)) != int(np.argmax(t)) else 0.0


def _kl(p: np.ndarray, m: np.ndarray) -> float:
    mask = p > 0.0
    return float(np.sum(p[mask] * np.log(p[mask] / m[mask])))


def js_distance(e_probs, t_probs) -> float:
    """Jensen-Shannon distance (natural log) between two probability vectors.

    sqrt((KL(E||M) + KL(T||M)) / 2) with M = (E + T) / 2. Zero-probability
    terms contribute nothing; the result is a metric bounded by sqrt(ln 2).
    """
    e = np.asarray(e_probs, dtype=np.float64)
    t = np.asarray(t_probs, dtype=np.float64)
    if e.shape != t.shape or e.ndim != 1 or e.size == 0:
        raise ValueError("probability vectors must be 1-d, non-empty and equal length")
    for name, v in (("enroll", e), ("test", t)):
        if np.any(v < 0):
            raise ValueError(f"{name}-side vector has negative entries")
        if abs(float(v.sum()) - 1.0) > 1e-8:
            raise ValueError(f"{name}-side vector does not sum to 1")
    m = 0.5 * (e + t)
    js2 = 0.5 * (_kl(e, m) + _kl(t, m))
    return math.sqrt(max(js2, 0.0))


def lang_embedding_feature(e_emb, t_emb) -> float:
    """Cosine similarity of the two sides' language embeddings."""
    return cosine_score(e_emb, t_emb)


def log_duration_qmf(enroll: Utterance, test: Utterance) -> float:
    """Natural log of the shorter side's duration."""
    return _log_dur_min(enroll.duration, test.duration)


def _log_dur_min(d_e: float, d_t: float) -> float:
    if not (d_e > 0 and d_t > 0):
        raise ValueError("durations must be positive")
    return math.log(min(d_e, d_t))


def _log_dur_sum(d_e: float, d_t: float) -> float:
    if not (d_e > 0 and d_t > 0):
        raise ValueError("durations must be positive")
    return math.log(d_e) + math.log(d_t)


def compute_qmfs(
    scored: list[ScoredTrial],
    names: list[str],
    utterances: list[Utterance] | None = None,
    lang_embeddings: EmbeddingTable | None = None,
    posteriors: PosteriorTable | None = None,
) -> None:
    """Fill each trial's qmf dict with the named features, in recipe order.

    Duration features need utterance metadata, lang_binary and lang_js need
    posteriors, lang_emb_cos needs language embeddings; a feature whose
    inputs are missing raises naming the gap.
    """
    unknown = [n for n in names if n not in QMF_NAMES]
    if unknown:
        raise ValueError(f"unknown QMF name {unknown[0]!r}; known: {', '.join(QMF_NAMES)}")
    if len(set(names)) != len(names):
        raise ValueError("duplicate QMF name in recipe")

    by_id = {u.utt_id: u for u in utterances} if utterances is not None else {}

    def utt(utt_id: str) -> Utterance:
        if utt_id not in by_id:
            raise KeyError(f"no metadata for utterance {utt_id!r}")
        return by_id[utt_id]

    def posterior(utt_id: str) -> np.ndarray:
        if posteriors is None or utt_id not in posteriors:
            raise KeyError(f"no posterior for utterance {utt_id!r}")
        return posteriors[utt_id]

    def lang_emb(utt_id: str) -> np.ndarray:
        if lang_embeddings is None or utt_id not in lang_embeddings:
            raise KeyError(f"no language embedding for utterance {utt_id!r}")
        return lang_embeddings[utt_id]

    for st in scored:
        e_id, t_id = st.trial.enroll_id, st.trial.test_id
        for name in names:
            if name == QMF_LOG_DUR_MIN:
                value = _log_dur_min(utt(e_id).duration, utt(t_id).duration)
            elif name == QMF_LOG_DUR_SUM:
                value = _log_dur_sum(utt(e_id).duration, utt(t_id).duration)
            elif name == QMF_LANG_BINARY:
                value = binary_crosslingual(posterior(e_id), posterior(t_id))
            elif name == QMF_LANG_JS:
                value = js_distance(posterior(e_id), posterior(t_id))
            else:
                value = lang_embedding_feature(lang_emb(e_id), lang_emb(t_id))
            st.qmf[name] = value
