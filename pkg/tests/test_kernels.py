import numpy as np
import pytest

from svbackend import kernels
from svbackend.kernels import _cohort_stats_py, _pair_scores_py

compiled = pytest.mark.skipif(
    kernels.backend_name() != "compiled",
    reason="compiled extension not built; NumPy fallback already under test",
)


def random_problem(rng, n_utts=60, n_cohort=35, dim=24):
    unit = rng.standard_normal((n_utts, dim))
    unit /= np.linalg.norm(unit, axis=1, keepdims=True)
    cohort = rng.standard_normal((n_cohort, dim))
    cohort /= np.linalg.norm(cohort, axis=1, keepdims=True)
    m = 4 * n_utts
    ei = rng.integers(0, n_utts, m).astype(np.int64)
    ti = rng.integers(0, n_utts, m).astype(np.int64)
    return unit, cohort, ei, ti


class TestFallback:
    def test_pair_scores_match_rowwise_dots(self):
        rng = np.random.default_rng(0)
        unit, _, ei, ti = random_problem(rng)
        out = _pair_scores_py(unit, ei, ti)
        for k in range(0, len(ei), 17):
            assert out[k] == pytest.approx(float(unit[ei[k]] @ unit[ti[k]]), abs=1e-14)

    def test_cohort_stats_match_direct(self):
        rng = np.random.default_rng(1)
        unit, cohort, _, _ = random_problem(rng)
        mu, sig = _cohort_stats_py(unit, cohort, 10)
        for i in range(0, unit.shape[0], 13):
            scores = np.sort(cohort @ unit[i])[::-1][:10]
            assert mu[i] == pytest.approx(scores.mean(), abs=1e-14)
            assert sig[i] == pytest.approx(scores.std(), abs=1e-14)

    def test_empty_cohort_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            kernels.cohort_stats(np.ones((2, 3)), np.zeros((0, 3)), 5)

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dimension"):
            kernels.cohort_stats(np.ones((2, 3)), np.ones((4, 5)), 5)


@compiled
class TestCompiledAgreement:
    def test_pair_scores_agree(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            unit, _, ei, ti = random_problem(rng)
            np.testing.assert_allclose(
                kernels.pair_scores(unit, ei, ti),
                _pair_scores_py(unit, ei, ti),
                rtol=0,
                atol=1e-12,
            )

    def test_cohort_stats_agree(self):
        rng = np.random.default_rng(3)
        for top_n in (2, 7, 35, 400):
            unit, cohort, _, _ = random_problem(rng)
            mu_c, sig_c = kernels.cohort_stats(unit, cohort, top_n)
            mu_p, sig_p = _cohort_stats_py(unit, cohort, top_n)
            np.testing.assert_allclose(mu_c, mu_p, rtol=0, atol=1e-12)
            np.testing.assert_allclose(sig_c, sig_p, rtol=0, atol=1e-12)

    def test_empty_trial_list(self):
        rng = np.random.default_rng(4)
        unit, _, _, _ = random_problem(rng)
        out = kernels.pair_scores(unit, np.zeros(0, np.int64), np.zeros(0, np.int64))
        assert out.shape == (0,)
