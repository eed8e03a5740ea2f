import pytest

from svbackend.data import (
    EmbeddingTable,
    Gender,
    Label,
    PosteriorTable,
    ScoredTrial,
    Trial,
    Utterance,
    attach_predicted_languages,
)
from svbackend.errors import EmptyTableError


class TestUtterance:
    def test_positive_duration_required(self):
        with pytest.raises(ValueError, match="duration"):
            Utterance("u1", "s1", 0.0)
        with pytest.raises(ValueError, match="duration"):
            Utterance("u1", "s1", -3.0)

    def test_defaults(self):
        u = Utterance("u1", "s1", 2.5)
        assert u.gender is Gender.UNKNOWN
        assert u.predicted_language is None


class TestTrial:
    def test_self_trial_allowed_and_flagged(self):
        t = Trial("u1", "u1")
        assert t.is_self_trial
        assert not Trial("u1", "u2").is_self_trial

    def test_default_label_unknown(self):
        assert Trial("a", "b").label is Label.UNKNOWN


class TestEmbeddingTable:
    def test_dim_set_by_first_insert(self):
        table = EmbeddingTable()
        table.insert("u1", [1.0, 0.0])
        assert table.dim == 2
        with pytest.raises(ValueError, match="length"):
            table.insert("u2", [0.5])

    def test_empty_table_dim_errors(self):
        with pytest.raises(EmptyTableError):
            EmbeddingTable().dim

    def test_rejects_zero_vector(self):
        table = EmbeddingTable()
        with pytest.raises(ValueError, match="zero"):
            table.insert("u1", [0.0, 0.0])

    def test_rejects_non_finite(self):
        table = EmbeddingTable()
        with pytest.raises(ValueError, match="finite"):
            table.insert("u1", [1.0, float("nan")])

    def test_rejects_duplicate_id(self):
        table = EmbeddingTable()
        table.insert("u1", [1.0, 0.0])
        with pytest.raises(ValueError, match="duplicate"):
            table.insert("u1", [0.0, 1.0])

    def test_vectors_are_read_only(self):
        table = EmbeddingTable()
        table.insert("u1", [1.0, 0.0])
        with pytest.raises(ValueError):
            table["u1"][0] = 5.0

    def test_matrix_names_missing_id(self):
        table = EmbeddingTable()
        table.insert("u1", [1.0, 0.0])
        with pytest.raises(KeyError, match="u9"):
            table.matrix(["u1", "u9"])


class TestPosteriorTable:
    def test_valid_insert(self):
        table = PosteriorTable(["en", "fr"])
        table.insert("u1", [0.25, 0.75])
        assert table.predicted_index("u1") == 1

    def test_sum_tolerance(self):
        table = PosteriorTable(["en", "fr"])
        table.insert("ok", [0.5, 0.5 + 5e-10])
        with pytest.raises(ValueError, match="sums to"):
            table.insert("bad", [0.5, 0.6])

    def test_rejects_out_of_range(self):
        table = PosteriorTable(["en", "fr"])
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            table.insert("u1", [-0.1, 1.1])

    def test_argmax_tie_breaks_low_index(self):
        table = PosteriorTable(["en", "fr"])
        table.insert("u1", [0.5, 0.5])
        assert table.predicted_index("u1") == 0

    def test_unique_languages_required(self):
        with pytest.raises(ValueError, match="unique"):
            PosteriorTable(["en", "en"])


class TestScoredTrial:
    def test_score_selection(self):
        st = ScoredTrial(Trial("a", "b"), raw_score=0.4)
        assert st.score(use_norm=False) == 0.4
        with pytest.raises(ValueError, match="no normalized score"):
            st.score(use_norm=True)
        st.norm_score = 1.5
        assert st.score() == 1.5


class TestAttachPredictedLanguages:
    def test_attaches_argmax(self):
        table = PosteriorTable(["en", "fr"])
        table.insert("u1", [0.2, 0.8])
        utts = [Utterance("u1", "s1", 3.0)]
        out = attach_predicted_languages(utts, table)
        assert out[0].predicted_language == 1
        assert utts[0].predicted_language is None  # original untouched

    def test_missing_posterior_named(self):
        table = PosteriorTable(["en"])
        with pytest.raises(KeyError, match="u1"):
            attach_predicted_languages([Utterance("u1", "s1", 3.0)], table)
