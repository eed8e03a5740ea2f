"""Line-based text IO for every artifact the pipeline reads or writes.

Conventions shared by all formats: UTF-8, LF line endings, fields joined by
single spaces, lines starting with '#' ignored, floats printed with 9
significant digits so that save -> load -> save is byte-identical.
"""

from __future__ import annotations

from pathlib import Path

from .data import (
    EmbeddingTable,
    Gender,
    Label,
    PosteriorTable,
    ScoredTrial,
    Trial,
    Utterance,
)
from .errors import FormatError


def fmt_float(x: float) -> str:
    """Canonical 9-significant-digit rendering used by every writer."""
    return format(float(x), ".9g")


def _parse_float(token: str, path, line_no: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise FormatError(path, line_no, f"invalid {what} {token!r}") from None
    if value != value or value in (float("inf"), float("-inf")):
        raise FormatError(path, line_no, f"non-finite {what} {token!r}")
    return value


def _data_lines(path):
    """Yield (line_no, fields) for non-comment, non-blank lines.

    Fields are split on single spaces; empty tokens (from repeated spaces)
    are a format error.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split(" ")
            if any(f == "" for f in fields):
                raise FormatError(path, line_no, "fields must be separated by single spaces")
            yield line_no, fields


def _write_lines(path, lines) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


# ---------------------------------------------------------------------------
# Embeddings: "<utt_id> <v1> ... <vD>"


def load_embeddings(path) -> EmbeddingTable:
    table = EmbeddingTable()
    for line_no, fields in _data_lines(path):
        if len(fields) < 2:
            raise FormatError(path, line_no, "expected '<utt_id> <v1> ...'")
        utt_id = fields[0]
        vec = [_parse_float(t, path, line_no, "embedding value") for t in fields[1:]]
        try:
            table.insert(utt_id, vec)
        except ValueError as exc:
            raise FormatError(path, line_no, str(exc)) from None
    return table


def save_embeddings(path, table: EmbeddingTable) -> None:
    lines = [
        " ".join([utt_id] + [fmt_float(v) for v in table[utt_id]])
        for utt_id in table.ids()
    ]
    _write_lines(path, lines)


# ---------------------------------------------------------------------------
# Posteriors: header "languages <code1> ...", then "<utt_id> <p1> ... <pL>"


def load_posteriors(path) -> PosteriorTable:
    table = None
    for line_no, fields in _data_lines(path):
        if table is None:
            if fields[0] != "languages" or len(fields) < 2:
                raise FormatError(
                    path, line_no, "first data line must be 'languages <code1> ...'"
                )
            try:
                table = PosteriorTable(fields[1:])
            except ValueError as exc:
                raise FormatError(path, line_no, str(exc)) from None
            continue
        if len(fields) != table.n_languages + 1:
            raise FormatError(
                path,
                line_no,
                f"expected utt_id plus {table.n_languages} probabilities, "
                f"got {len(fields) - 1}",
            )
        probs = [_parse_float(t, path, line_no, "probability") for t in fields[1:]]
        try:
            table.insert(fields[0], probs)
        except ValueError as exc:
            raise FormatError(path, line_no, str(exc)) from None
    if table is None:
        raise FormatError(path, 0, "missing 'languages' header line")
    return table


def save_posteriors(path, table: PosteriorTable) -> None:
    lines = ["languages " + " ".join(table.languages)]
    for utt_id in table.ids():
        lines.append(" ".join([utt_id] + [fmt_float(p) for p in table[utt_id]]))
    _write_lines(path, lines)


# ---------------------------------------------------------------------------
# Metadata: "<utt_id> <speaker_id> <duration_seconds> <gender> <session_id>"


def load_metadata(path) -> list[Utterance]:
    utterances = []
    seen = set()
    for line_no, fields in _data_lines(path):
        if len(fields) != 5:
            raise FormatError(
                path, line_no,
                "expected '<utt_id> <speaker_id> <duration> <gender> <session_id>'",
            )
        utt_id, speaker_id, dur_tok, gender_tok, session_id = fields
        if utt_id in seen:
            raise FormatError(path, line_no, f"duplicate utterance id {utt_id!r}")
        seen.add(utt_id)
        duration = _parse_float(dur_tok, path, line_no, "duration")
        try:
            gender = Gender(gender_tok)
        except ValueError:
            raise FormatError(path, line_no, f"unknown gender token {gender_tok!r}") from None
        try:
            utterances.append(
                Utterance(utt_id, speaker_id, duration, gender, session_id)
            )
        except ValueError as exc:
            raise FormatError(path, line_no, str(exc)) from None
    return utterances


def save_metadata(path, utterances: list[Utterance]) -> None:
    lines = [
        " ".join(
            [u.utt_id, u.speaker_id, fmt_float(u.duration), u.gender.value, u.session_id]
        )
        for u in utterances
    ]
    _write_lines(path, lines)


# ---------------------------------------------------------------------------
# Trials: "<enroll_id> <test_id> [target|nontarget]"


def load_trials(path) -> list[Trial]:
    trials = []
    for line_no, fields in _data_lines(path):
        if len(fields) == 2:
            trials.append(Trial(fields[0], fields[1]))
        elif len(fields) == 3:
            if fields[2] not in (Label.TARGET.value, Label.NONTARGET.value):
                raise FormatError(path, line_no, f"unknown label token {fields[2]!r}")
            trials.append(Trial(fields[0], fields[1], Label(fields[2])))
        else:
            raise FormatError(
                path, line_no, "expected '<enroll_id> <test_id> [target|nontarget]'"
            )
    return trials


def save_trials(path, trials: list[Trial]) -> None:
    lines = []
    for t in trials:
        if t.label is Label.UNKNOWN:
            lines.append(f"{t.enroll_id} {t.test_id}")
        else:
            lines.append(f"{t.enroll_id} {t.test_id} {t.label.value}")
    _write_lines(path, lines)


# ---------------------------------------------------------------------------
# Scores: "<enroll_id> <test_id> <score>"


def load_scores(path) -> list[tuple[str, str, float]]:
    rows = []
    for line_no, fields in _data_lines(path):
        if len(fields) != 3:
            raise FormatError(path, line_no, "expected '<enroll_id> <test_id> <score>'")
        rows.append((fields[0], fields[1], _parse_float(fields[2], path, line_no, "score")))
    return rows


def save_score_rows(path, rows: list[tuple[str, str, float]]) -> None:
    _write_lines(path, [f"{e} {t} {fmt_float(s)}" for e, t, s in rows])


def save_scores(path, scored: list[ScoredTrial], which: str = "norm") -> None:
    """Write one score per trial; `which` selects raw, norm or llr."""
    rows = []
    for st in scored:
        value = {"raw": st.raw_score, "norm": st.norm_score, "llr": st.llr}[which]
        if value is None:
            raise ValueError(
                f"trial ({st.trial.enroll_id}, {st.trial.test_id}) has no {which} score"
            )
        rows.append((st.trial.enroll_id, st.trial.test_id, value))
    save_score_rows(path, rows)


# ---------------------------------------------------------------------------
# QMF features: header "features <name1> ...", then "<enroll> <test> <f1> ..."


def load_qmf(path) -> tuple[list[str], list[tuple[str, str, list[float]]]]:
    names = None
    rows = []
    for line_no, fields in _data_lines(path):
        if names is None:
            if fields[0] != "features":
                raise FormatError(
                    path, line_no, "first data line must be 'features <name1> ...'"
                )
            names = fields[1:]
            if len(set(names)) != len(names):
                raise FormatError(path, line_no, "duplicate feature name in header")
            continue
        if len(fields) != len(names) + 2:
            raise FormatError(
                path, line_no,
                f"expected enroll, test plus {len(names)} values, got {len(fields) - 2}",
            )
        values = [_parse_float(t, path, line_no, "feature value") for t in fields[2:]]
        rows.append((fields[0], fields[1], values))
    if names is None:
        raise FormatError(path, 0, "missing 'features' header line")
    return names, rows


def save_qmf(path, names: list[str], scored: list[ScoredTrial]) -> None:
    lines = ["features " + " ".join(names)]
    for st in scored:
        values = [st.qmf[n] for n in names]
        lines.append(
            " ".join(
                [st.trial.enroll_id, st.trial.test_id] + [fmt_float(v) for v in values]
            )
        )
    _write_lines(path, lines)


# ---------------------------------------------------------------------------
# Per-utterance language labels: "<utt_id> <language_code>"


def load_language_labels(path) -> dict[str, str]:
    labels = {}
    for line_no, fields in _data_lines(path):
        if len(fields) != 2:
            raise FormatError(path, line_no, "expected '<utt_id> <language_code>'")
        if fields[0] in labels:
            raise FormatError(path, line_no, f"duplicate utterance id {fields[0]!r}")
        labels[fields[0]] = fields[1]
    return labels


def save_language_labels(path, labels: dict[str, str]) -> None:
    _write_lines(path, [f"{u} {lang}" for u, lang in labels.items()])
