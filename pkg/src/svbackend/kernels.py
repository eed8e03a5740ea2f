"""Hot numerical kernels with an optional compiled backend.

The compiled extension (svbackend._core, built from _core.pyx) is selected
at import time when present; set SVBACKEND_NO_EXT=1 to force the NumPy
fallback. Both backends implement the same contracts:

- pair_scores: independent row-wise dot products, so results do not depend
  on how the trial list is chunked.
- cohort_stats: per utterance, scores against every cohort row, then mean
  and population standard deviation of the top_n largest scores. The top
  slice is sorted descending before reduction, which makes the statistics
  exactly invariant under permutation of the cohort.
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("SVBACKEND_NO_EXT"):
    _core = None
else:
    try:
        from . import _core  # type: ignore[attr-defined]
    except ImportError:
        _core = None


def backend_name() -> str:
    return "pure" if _core is None else "compiled"


def _pair_scores_py(unit: np.ndarray, enroll_idx: np.ndarray, test_idx: np.ndarray) -> np.ndarray:
    if len(enroll_idx) == 0:
        return np.zeros(0)
    return np.einsum("ij,ij->i", unit[enroll_idx], unit[test_idx])


def _cohort_stats_py(
    unit: np.ndarray, cohort: np.ndarray, top_n: int
) -> tuple[np.ndarray, np.ndarray]:
    n = unit.shape[0]
    k = min(top_n, cohort.shape[0])
    mu = np.empty(n)
    sigma = np.empty(n)
    for i in range(n):
        scores = cohort @ unit[i]
        top = np.sort(scores)[::-1][:k]
        mu[i] = top.mean()
        sigma[i] = top.std()
    return mu, sigma


def pair_scores(unit: np.ndarray, enroll_idx, test_idx) -> np.ndarray:
    """Dot product of unit[enroll_idx[i]] with unit[test_idx[i]] for each i."""
    unit = np.ascontiguousarray(unit, dtype=np.float64)
    ei = np.ascontiguousarray(enroll_idx, dtype=np.int64)
    ti = np.ascontiguousarray(test_idx, dtype=np.int64)
    if _core is not None:
        return _core.pair_scores(unit, ei, ti)
    return _pair_scores_py(unit, ei, ti)


def cohort_stats(unit: np.ndarray, cohort: np.ndarray, top_n: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population std of each row's top_n cohort scores.

    top_n is clamped to the cohort size. Cohort must be non-empty.
    """
    unit = np.ascontiguousarray(unit, dtype=np.float64)
    cohort = np.ascontiguousarray(cohort, dtype=np.float64)
    if cohort.shape[0] == 0:
        raise ValueError("cohort is empty")
    if unit.shape[0] and unit.shape[1] != cohort.shape[1]:
        raise ValueError(
            f"dimension mismatch: utterances {unit.shape[1]}, cohort {cohort.shape[1]}"
        )
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    if _core is not None:
        return _core.cohort_stats(unit, cohort, int(top_n))
    return _cohort_stats_py(unit, cohort, int(top_n))
