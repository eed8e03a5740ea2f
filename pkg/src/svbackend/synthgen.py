"""Seeded synthetic embedding world for desk-scale validation.

Each utterance embedding is the unit-normalized mixture of a speaker
direction, a language direction and isotropic noise, so same-speaker pairs
in different languages score systematically lower than same-language pairs
(the cross-lingual shift). The language classifier is simulated by noisy
language embeddings in a separate space whose pairwise geometry matches the
contamination directions exactly (a shared semi-orthogonal projection), so
soft classifier outputs carry graded information about the shift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import EmbeddingTable, Gender, Label, PosteriorTable, Trial, Utterance
from .errors import QuotaError
from .langfeat import AamScale, posterior_from_cosines


@dataclass(frozen=True)
class WorldConfig:
    seed: int
    n_speakers: int = 64
    n_languages: int = 4
    utts_per_speaker: int = 8
    emb_dim: int = 32
    lang_emb_dim: int = 16
    speaker_strength: float = 1.0
    language_strength: float = 0.5
    noise_strength: float = 0.3
    classifier_noise: float = 0.1
    multilingual_fraction: float = 1.0
    duration_min: float = 2.0
    duration_max: float = 10.0

    def __post_init__(self):
        for name in ("n_speakers", "n_languages", "utts_per_speaker", "emb_dim", "lang_emb_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not self.speaker_strength > 0:
            raise ValueError("speaker_strength must be positive")
        if self.language_strength < 0 or self.noise_strength < 0 or self.classifier_noise < 0:
            raise ValueError("strengths must be non-negative")
        if not 0.0 <= self.multilingual_fraction <= 1.0:
            raise ValueError("multilingual_fraction must be in [0, 1]")
        if not 0 < self.duration_min <= self.duration_max:
            raise ValueError("need 0 < duration_min <= duration_max")
        if self.lang_emb_dim > self.emb_dim:
            raise ValueError("lang_emb_dim must not exceed emb_dim")


@dataclass(frozen=True)
class World:
    utterances: list[Utterance]
    speaker_embeddings: EmbeddingTable
    language_embeddings: EmbeddingTable
    posteriors: PosteriorTable
    true_languages: dict[str, str]
    config: WorldConfig


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    return matrix / np.linalg.norm(matrix, axis=1, keepdims=True)


def _unit_draw(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Random direction of unit length; keeps mixture strengths comparable
    across dimensionalities."""
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def generate_world(cfg: WorldConfig) -> World:
    """Deterministic world: metadata, speaker and language embeddings,
    classifier posteriors and ground-truth language labels."""
    if cfg.n_languages < 2 and cfg.multilingual_fraction > 0:
        raise ValueError("multilingual speakers need at least two languages")
    rng = np.random.default_rng(cfg.seed)
    lang_codes = [f"L{i:02d}" for i in range(cfg.n_languages)]

    lang_dirs = _unit_rows(rng.standard_normal((cfg.n_languages, cfg.lang_emb_dim)))
    projection, _ = np.linalg.qr(rng.standard_normal((cfg.emb_dim, cfg.lang_emb_dim)))
    emb_lang_dirs = lang_dirs @ projection.T
    speaker_dirs = _unit_rows(rng.standard_normal((cfg.n_speakers, cfg.emb_dim)))

    n_multi = int(round(cfg.multilingual_fraction * cfg.n_speakers))
    multi = set(rng.choice(cfg.n_speakers, size=n_multi, replace=False).tolist())
    speaker_langs = []
    for s in range(cfg.n_speakers):
        if s in multi:
            speaker_langs.append(rng.choice(cfg.n_languages, size=2, replace=False).tolist())
        else:
            speaker_langs.append([int(rng.integers(cfg.n_languages))])

    utterances = []
    spk_table = EmbeddingTable()
    lang_table = EmbeddingTable()
    posteriors = PosteriorTable(lang_codes)
    true_languages: dict[str, str] = {}
    scale = AamScale()

    for s in range(cfg.n_speakers):
        speaker_id = f"spk{s:03d}"
        gender = Gender.MALE if s % 2 == 0 else Gender.FEMALE
        langs = speaker_langs[s]
        for k in range(cfg.utts_per_speaker):
            utt_id = f"{speaker_id}_u{k:02d}"
            lang = langs[k % len(langs)]
            duration = float(rng.uniform(cfg.duration_min, cfg.duration_max))
            utterances.append(
                Utterance(
                    utt_id=utt_id,
                    speaker_id=speaker_id,
                    duration=duration,
                    gender=gender,
                    session_id=f"{speaker_id}_s{k // 2}",
                )
            )
            emb = (
                cfg.speaker_strength * speaker_dirs[s]
                + cfg.language_strength * emb_lang_dirs[lang]
                + cfg.noise_strength * _unit_draw(rng, cfg.emb_dim)
            )
            norm = np.linalg.norm(emb)
            if norm == 0.0:
                raise ValueError(f"degenerate zero embedding for {utt_id!r}")
            spk_table.insert(utt_id, emb / norm)

            lvec = lang_dirs[lang] + cfg.classifier_noise * _unit_draw(rng, cfg.lang_emb_dim)
            lnorm = np.linalg.norm(lvec)
            if lnorm == 0.0:
                raise ValueError(f"degenerate zero language embedding for {utt_id!r}")
            lvec = lvec / lnorm
            lang_table.insert(utt_id, lvec)

            cosines = np.clip(lang_dirs @ lvec, -1.0, 1.0)
            posteriors.insert(utt_id, posterior_from_cosines(cosines, scale))
            true_languages[utt_id] = lang_codes[lang]

    return World(utterances, spk_table, lang_table, posteriors, true_languages, cfg)


_CELLS = ("target_same", "target_cross", "nontarget_same", "nontarget_cross")


def generate_eval_trials(
    world: World, n_per_cell: int, seed: int
) -> tuple[list[Trial], list[bool]]:
    """Balanced evaluation trials: n_per_cell in each of the four
    {target, nontarget} x {same-language, cross-lingual} cells, flagged by
    ground-truth language labels."""
    if n_per_cell < 0:
        raise ValueError("n_per_cell must be >= 0")
    if n_per_cell == 0:
        return [], []
    utts = sorted(world.utterances, key=lambda u: u.utt_id)
    spk = np.array([u.speaker_id for u in utts])
    lang = np.array([world.true_languages[u.utt_id] for u in utts])

    ii, jj = np.triu_indices(len(utts), k=1)
    same_spk = spk[ii] == spk[jj]
    same_lang = lang[ii] == lang[jj]
    cells = {
        "target_same": np.flatnonzero(same_spk & same_lang),
        "target_cross": np.flatnonzero(same_spk & ~same_lang),
        "nontarget_same": np.flatnonzero(~same_spk & same_lang),
        "nontarget_cross": np.flatnonzero(~same_spk & ~same_lang),
    }
    for cell in _CELLS:
        if cells[cell].size < n_per_cell:
            raise QuotaError(
                f"cell {cell!r} has only {cells[cell].size} candidate pairs, "
                f"need {n_per_cell}"
            )

    rng = np.random.default_rng(seed)
    trials: list[Trial] = []
    flags: list[bool] = []
    for cell in _CELLS:
        pool = cells[cell]
        pick = np.sort(pool[rng.choice(pool.size, size=n_per_cell, replace=False)])
        label = Label.TARGET if cell.startswith("target") else Label.NONTARGET
        cross = cell.endswith("cross")
        for pair in pick:
            trials.append(Trial(utts[ii[pair]].utt_id, utts[jj[pair]].utt_id, label))
            flags.append(cross)
    return trials, flags
