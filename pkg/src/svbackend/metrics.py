"""Detection metrics: DET points, EER, MinDCF and grouped score histograms.

Threshold convention (pinned so independent oracles can agree bitwise):
a trial is rejected when score < t and accepted when score >= t, so

    p_miss(t) = fraction of targets with score <  t
    p_fa(t)   = fraction of nontargets with score >= t

The DET staircase has one point per distinct score plus sentinels at -inf
(accept everything) and +inf (reject everything).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Label, ScoredTrial


@dataclass(frozen=True)
class DcfParams:
    p_target: float
    c_fa: float = 1.0
    c_miss: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.p_target < 1.0:
            raise ValueError(f"p_target must be in (0, 1), got {self.p_target}")
        if not (self.c_fa > 0 and self.c_miss > 0):
            raise ValueError("c_fa and c_miss must be positive")


def _to_arrays(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    is_target = np.empty(len(labels), dtype=bool)
    for i, lab in enumerate(labels):
        if isinstance(lab, Label):
            if lab is Label.UNKNOWN:
                raise ValueError(f"trial {i} has unknown label")
            is_target[i] = lab is Label.TARGET
        else:
            is_target[i] = bool(lab)
    if s.shape != is_target.shape:
        raise ValueError("scores and labels must have equal length")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if not is_target.any() or is_target.all():
        raise ValueError("need at least one target and one nontarget trial")
    return s, is_target


def _det_arrays(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    s, is_target = _to_arrays(scores, labels)
    tar = np.sort(s[is_target])
    non = np.sort(s[~is_target])
    thr = np.unique(s)
    # score < t misses; score >= t false-alarms
    p_miss = np.searchsorted(tar, thr, side="left") / tar.size
    p_fa = (non.size - np.searchsorted(non, thr, side="left")) / non.size
    thr = np.concatenate(([-np.inf], thr, [np.inf]))
    p_miss = np.concatenate(([0.0], p_miss, [1.0]))
    p_fa = np.concatenate(([1.0], p_fa, [0.0]))
    return thr, p_miss, p_fa


def det_points(scores, labels) -> list[tuple[float, float, float]]:
    """(threshold, p_miss, p_fa) per distinct score plus the two sentinels."""
    thr, p_miss, p_fa = _det_arrays(scores, labels)
    return [(float(t), float(m), float(f)) for t, m, f in zip(thr, p_miss, p_fa)]


def eer(scores, labels) -> float:
    """Operating point where p_miss equals p_fa, linearly interpolated
    between adjacent DET points when there is no exact crossing."""
    _, p_miss, p_fa = _det_arrays(scores, labels)
    diff = p_miss - p_fa  # non-decreasing along the staircase
    idx = int(np.searchsorted(diff, 0.0, side="left"))
    if diff[idx] == 0.0:
        return float(p_miss[idx])
    # diff[idx] > 0 and diff[idx - 1] < 0: interpolate the sign change
    alpha = diff[idx - 1] / (diff[idx - 1] - diff[idx])
    return float((1.0 - alpha) * p_miss[idx - 1] + alpha * p_miss[idx])


def normalized_dcf(p_miss: float, p_fa: float, params: DcfParams) -> float:
    """Detection cost at one operating point, normalized by the best
    trivial decision policy."""
    cost = params.p_target * params.c_miss * p_miss + (1.0 - params.p_target) * params.c_fa * p_fa
    floor = min(params.p_target * params.c_miss, (1.0 - params.p_target) * params.c_fa)
    return cost / floor


def min_dcf(scores, labels, params: DcfParams) -> float:
    """Minimum normalized detection cost over all thresholds; at most 1."""
    _, p_miss, p_fa = _det_arrays(scores, labels)
    cost = params.p_target * params.c_miss * p_miss + (1.0 - params.p_target) * params.c_fa * p_fa
    floor = min(params.p_target * params.c_miss, (1.0 - params.p_target) * params.c_fa)
    return float(cost.min() / floor)


GROUP_NAMES = ("target_same", "target_cross", "nontarget_same", "nontarget_cross")


@dataclass(frozen=True)
class GroupedHistogram:
    """Per-group bin counts over a shared grid of bin_width-aligned bins.

    bin_left_edges[i] is the inclusive left edge of bin i; each count array
    aligns with it. Empty input produces empty arrays.
    """

    bin_width: float
    bin_left_edges: np.ndarray
    counts: dict[str, np.ndarray]

    def total(self, group: str) -> int:
        return int(self.counts[group].sum())


def group_scores(
    scored: list[ScoredTrial], crosslingual_flags
) -> dict[str, np.ndarray]:
    """Split effective scores (normalized when present, else raw) into the
    four {target, nontarget} x {cross-lingual, same-language} groups."""
    if len(scored) != len(crosslingual_flags):
        raise ValueError("one cross-lingual flag per trial required")
    buckets: dict[str, list[float]] = {name: [] for name in GROUP_NAMES}
    for st, flag in zip(scored, crosslingual_flags):
        if st.trial.label is Label.UNKNOWN:
            raise ValueError(
                f"trial ({st.trial.enroll_id}, {st.trial.test_id}) has unknown label"
            )
        side = "target" if st.trial.label is Label.TARGET else "nontarget"
        kind = "cross" if flag else "same"
        score = st.norm_score if st.norm_score is not None else st.raw_score
        buckets[f"{side}_{kind}"].append(score)
    return {name: np.asarray(vals, dtype=np.float64) for name, vals in buckets.items()}


def grouped_histogram(
    scored: list[ScoredTrial], crosslingual_flags, bin_width: float
) -> GroupedHistogram:
    """Histogram the four trial groups on bins aligned to multiples of
    bin_width; counts sum to the group sizes."""
    if not bin_width > 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    groups = group_scores(scored, crosslingual_flags)
    all_scores = np.concatenate(list(groups.values())) if scored else np.zeros(0)
    if all_scores.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return GroupedHistogram(
            bin_width, np.zeros(0), {name: empty.copy() for name in GROUP_NAMES}
        )
    lo = int(np.floor(all_scores.min() / bin_width))
    hi = int(np.floor(all_scores.max() / bin_width))
    n_bins = hi - lo + 1
    edges = (lo + np.arange(n_bins)) * bin_width
    counts = {}
    for name, vals in groups.items():
        c = np.zeros(n_bins, dtype=np.int64)
        if vals.size:
            idx = np.floor(vals / bin_width).astype(np.int64) - lo
            np.add.at(c, idx, 1)
        counts[name] = c
    return GroupedHistogram(bin_width, edges, counts)
