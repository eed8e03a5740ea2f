import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svbackend.data import EmbeddingTable, Gender, Trial, Utterance
from svbackend.errors import DegenerateCohortError, EmptyTableError
from svbackend.scoring import (
    Cohort,
    SNormConfig,
    adaptive_s_norm,
    build_cohort,
    cosine_score,
    score_trials,
)


class TestCosineScore:
    def test_identity(self):
        assert cosine_score([1, 0], [1, 0]) == 1.0

    def test_orthogonal(self):
        assert cosine_score([1, 0], [0, 1]) == 0.0

    def test_hand_computed(self):
        assert cosine_score([1, 2], [2, 1]) == pytest.approx(0.8, abs=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError, match="zero"):
            cosine_score([0, 0], [1, 0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="equal length"):
            cosine_score([1, 0, 0], [1, 0])

    @given(
        st.lists(st.floats(-10, 10), min_size=2, max_size=8),
        st.lists(st.floats(-10, 10), min_size=2, max_size=8),
        st.floats(0.01, 100.0),
    )
    @settings(max_examples=200)
    def test_symmetric_and_scale_invariant(self, a, b, c):
        n = min(len(a), len(b))
        a, b = np.array(a[:n]), np.array(b[:n])
        if not (np.linalg.norm(a) > 1e-6 and np.linalg.norm(b) > 1e-6):
            return
        s = cosine_score(a, b)
        assert -1.0 <= s <= 1.0
        assert cosine_score(b, a) == pytest.approx(s, abs=1e-12)
        assert cosine_score(c * a, b) == pytest.approx(s, abs=1e-9)


class TestBuildCohort:
    def _table(self, vectors):
        table = EmbeddingTable()
        for utt_id, vec in vectors.items():
            table.insert(utt_id, vec)
        return table

    def test_single_speaker_mean(self):
        table = self._table({"u1": [1.0, 0.0], "u2": [0.0, 1.0]})
        meta = [Utterance("u1", "s1", 1.0), Utterance("u2", "s1", 1.0)]
        cohort = build_cohort(table, meta)
        assert cohort.size == 1
        np.testing.assert_allclose(
            cohort.vectors[0], [1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-12
        )

    def test_single_utterance_normalized(self):
        table = self._table({"u1": [3.0, 4.0]})
        cohort = build_cohort(table, [Utterance("u1", "s1", 1.0)])
        np.testing.assert_allclose(cohort.vectors[0], [0.6, 0.8], atol=1e-12)

    def test_two_speakers(self):
        table = self._table({"u1": [1.0, 0.0], "u2": [0.0, 2.0]})
        meta = [Utterance("u1", "s1", 1.0), Utterance("u2", "s2", 1.0)]
        assert build_cohort(table, meta).size == 2

    def test_speaker_without_embeddings_skipped(self, caplog):
        table = self._table({"u1": [1.0, 0.0]})
        meta = [Utterance("u1", "s1", 1.0), Utterance("u2", "s2", 1.0)]
        with caplog.at_level("WARNING"):
            cohort = build_cohort(table, meta)
        assert cohort.size == 1
        assert "skipped 1" in caplog.text

    def test_all_speakers_unusable_errors(self):
        table = EmbeddingTable()
        table.insert("other", [1.0, 0.0])
        with pytest.raises(EmptyTableError):
            build_cohort(table, [Utterance("u1", "s1", 1.0)])

    def test_cohort_validates_unit_norm(self):
        with pytest.raises(ValueError, match="unit"):
            Cohort(np.array([[2.0, 0.0]]), ("s1",))


class TestAdaptiveSNorm:
    def test_hand_example_full_lists(self):
        # enroll stats mu=0.2 sigma=0.1, test mu=0.3 sigma=0.2
        enroll = [0.3, 0.1]  # mean 0.2, population std 0.1
        test = [0.5, 0.1]  # mean 0.3, population std 0.2
        out = adaptive_s_norm(0.5, enroll, test, SNormConfig(top_n=2))
        assert out == pytest.approx(2.0, abs=1e-12)

    def test_hand_example_top_two(self):
        out = adaptive_s_norm(
            0.95, [0.9, 0.1, 0.2, 0.8], [0.6, 0.4, 0.2, 0.0], SNormConfig(top_n=2)
        )
        assert out == pytest.approx(3.25, abs=1e-12)

    def test_constant_cohort_degenerate(self):
        with pytest.raises(DegenerateCohortError):
            adaptive_s_norm(0.5, [0.2, 0.2, 0.2], [0.1, 0.4], SNormConfig(top_n=2))

    def test_top_n_clamps_to_length(self):
        short = [0.4, 0.1]
        out_clamped = adaptive_s_norm(0.5, short, short, SNormConfig(top_n=400))
        out_exact = adaptive_s_norm(0.5, short, short, SNormConfig(top_n=2))
        assert out_clamped == out_exact

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            adaptive_s_norm(0.5, [], [0.1, 0.2])

    def test_permutation_invariant_bitwise(self):
        rng = np.random.default_rng(0)
        scores = rng.standard_normal(37)
        cfg = SNormConfig(top_n=11)
        base = adaptive_s_norm(0.4, scores, scores[::-1], cfg)
        for _ in range(10):
            perm_e = rng.permutation(scores)
            perm_t = rng.permutation(scores[::-1])
            assert adaptive_s_norm(0.4, perm_e, perm_t, cfg) == base

    @given(
        st.floats(-5, 5),
        st.lists(st.floats(-3, 3), min_size=3, max_size=40),
        st.floats(0.1, 7.0),
        st.floats(-4, 4),
    )
    @settings(max_examples=200)
    def test_affine_invariance(self, raw, cohort, a, c):
        cohort = np.asarray(cohort)
        top = np.sort(cohort)[::-1][:5]
        if np.ptp(top) < 1e-3:  # the statistic uses only the top slice
            return
        cfg = SNormConfig(top_n=5)
        base = adaptive_s_norm(raw, cohort, cohort + 1.0, cfg)
        mapped = adaptive_s_norm(a * raw + c, a * cohort + c, a * (cohort + 1.0) + c, cfg)
        assert mapped == pytest.approx(base, rel=1e-9, abs=1e-9)

    def test_plain_snorm_when_top_n_covers_cohort(self):
        rng = np.random.default_rng(1)
        enroll = rng.standard_normal(20)
        test = rng.standard_normal(20)
        cfg = SNormConfig(top_n=20)
        expect = 0.5 * (
            (0.3 - enroll.mean()) / enroll.std() + (0.3 - test.mean()) / test.std()
        )
        assert adaptive_s_norm(0.3, enroll, test, cfg) == pytest.approx(expect, abs=1e-12)


def _small_world():
    rng = np.random.default_rng(5)
    table = EmbeddingTable()
    meta = []
    for s in range(3):
        for k in range(2):
            utt_id = f"s{s}u{k}"
            table.insert(utt_id, rng.standard_normal(6))
            meta.append(Utterance(utt_id, f"s{s}", 1.0, Gender.MALE, f"v{s}{k}"))
    return table, meta


class TestScoreTrials:
    def test_self_trial_raw_one(self):
        table, meta = _small_world()
        cohort = build_cohort(table, meta)
        out = score_trials([Trial("s0u0", "s0u0")], table, cohort, SNormConfig(top_n=3))
        assert out[0].raw_score == pytest.approx(1.0, abs=1e-12)

    def test_empty_trials(self):
        table, meta = _small_world()
        cohort = build_cohort(table, meta)
        assert score_trials([], table, cohort) == []

    def test_missing_embedding_named(self):
        table, meta = _small_world()
        cohort = build_cohort(table, meta)
        with pytest.raises(KeyError, match="ghost"):
            score_trials([Trial("s0u0", "ghost")], table, cohort)

    def test_matches_scalar_composition(self):
        table, meta = _small_world()
        cohort = build_cohort(table, meta)
        cfg = SNormConfig(top_n=2)
        trials = [Trial("s0u0", "s1u0"), Trial("s2u1", "s0u1")]
        out = score_trials(trials, table, cohort, cfg)
        for st_out, trial in zip(out, trials):
            e = table[trial.enroll_id]
            t = table[trial.test_id]
            raw = cosine_score(e, t)
            enroll_scores = [cosine_score(e, c) for c in cohort.vectors]
            test_scores = [cosine_score(t, c) for c in cohort.vectors]
            norm = adaptive_s_norm(raw, enroll_scores, test_scores, cfg)
            assert st_out.raw_score == pytest.approx(raw, abs=1e-12)
            assert st_out.norm_score == pytest.approx(norm, abs=1e-10)

    def test_chunking_is_bitwise_identical(self):
        rng = np.random.default_rng(9)
        table = EmbeddingTable()
        meta = []
        for s in range(8):
            for k in range(3):
                utt_id = f"s{s}u{k}"
                table.insert(utt_id, rng.standard_normal(12))
                meta.append(Utterance(utt_id, f"s{s}", 1.0))
        cohort = build_cohort(table, meta)
        ids = [u.utt_id for u in meta]
        trials = [
            Trial(ids[int(rng.integers(len(ids)))], ids[int(rng.integers(len(ids)))])
            for _ in range(60)
        ]
        cfg = SNormConfig(top_n=5)
        full = score_trials(trials, table, cohort, cfg)
        for cut in (1, 7, 30, 59):
            parts = score_trials(trials[:cut], table, cohort, cfg) + score_trials(
                trials[cut:], table, cohort, cfg
            )
            for a, b in zip(full, parts):
                assert a.raw_score == b.raw_score
                assert a.norm_score == b.norm_score

    def test_output_order_is_input_order(self):
        table, meta = _small_world()
        cohort = build_cohort(table, meta)
        trials = [Trial("s2u0", "s1u1"), Trial("s0u0", "s0u1")]
        out = score_trials(trials, table, cohort)
        assert [o.trial for o in out] == trials
