"""Batch-oriented command line wiring the pipeline stages through files.

Each subcommand validates its own inputs, writes exactly its declared
outputs and exits 0; usage errors exit 2 (argparse), data errors exit 1
with a single `error: ...` line on stderr. Every randomized command
requires an explicit seed. An optional `key value` config file supplies
defaults; explicit flags win.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import calibration, fileio, langfeat, metrics, sampler, scoring, synthgen, trials
from .data import ScoredTrial, attach_predicted_languages
from .errors import ToolkitError
from .metrics import GROUP_NAMES


def _str2bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes"):
        return True
    if low in ("0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {raw!r}")


def _load_config(path) -> dict[str, str]:
    config = {}
    for line_no, fields in fileio._data_lines(path):
        if len(fields) != 2:
            raise ToolkitError(f"{path}:{line_no}: config lines must be 'key value'")
        config[fields[0].replace("-", "_")] = fields[1]
    return config


_REQUIRED = object()


class _Settings:
    """Flag > config-file > default resolution for one parsed command."""

    def __init__(self, ns: argparse.Namespace, parser: argparse.ArgumentParser):
        self.ns = ns
        self.parser = parser
        self.config = _load_config(ns.config) if ns.config else {}

    def get(self, name: str, default=_REQUIRED, cast=str):
        value = getattr(self.ns, name, None)
        if value is not None:
            return value
        raw = self.config.get(name)
        if raw is None:
            if default is _REQUIRED:
                self.parser.error(f"missing required option --{name.replace('_', '-')}")
            return default
        try:
            return _str2bool(raw) if cast is bool else cast(raw)
        except (ValueError, argparse.ArgumentTypeError):
            raise ToolkitError(f"config key {name!r}: invalid value {raw!r}") from None


# ---------------------------------------------------------------------------
# Stage helpers shared between single commands and the pipeline command


def _score_stage(embeddings, metadata, trial_list, top_n, epsilon_sigma):
    cohort = scoring.build_cohort(embeddings, metadata)
    cfg = scoring.SNormConfig(top_n=top_n, epsilon_sigma=epsilon_sigma)
    return scoring.score_trials(trial_list, embeddings, cohort, cfg)


def _check_aligned(trial_list, rows, path):
    if len(rows) != len(trial_list):
        raise ToolkitError(
            f"{path}: {len(rows)} rows but {len(trial_list)} trials"
        )
    for i, (t, row) in enumerate(zip(trial_list, rows), start=1):
        if (t.enroll_id, t.test_id) != (row[0], row[1]):
            raise ToolkitError(
                f"{path}: row {i} is ({row[0]}, {row[1]}), "
                f"expected ({t.enroll_id}, {t.test_id}); trial and score files "
                "must list the same pairs in the same order"
            )


def _scored_from_files(trials_path, scores_path):
    trial_list = fileio.load_trials(trials_path)
    rows = fileio.load_scores(scores_path)
    _check_aligned(trial_list, rows, scores_path)
    return [
        ScoredTrial(trial=t, raw_score=row[2], norm_score=row[2])
        for t, row in zip(trial_list, rows)
    ]


def _attach_qmf(scored, qmf_path):
    names, rows = fileio.load_qmf(qmf_path)
    _check_aligned([st.trial for st in scored], rows, qmf_path)
    for st, row in zip(scored, rows):
        st.qmf = dict(zip(names, row[2]))
    return names


def _metric_report(scores, labels, p_targets, c_fa, c_miss) -> list[str]:
    lines = [f"eer {metrics.eer(scores, labels):.9f}"]
    for p in p_targets:
        params = metrics.DcfParams(p_target=p, c_fa=c_fa, c_miss=c_miss)
        lines.append(f"min_dcf@{p:g} {metrics.min_dcf(scores, labels, params):.9f}")
    return lines


def _write_histogram(path, hist) -> None:
    lines = ["# bin_left " + " ".join(GROUP_NAMES)]
    for i, edge in enumerate(hist.bin_left_edges):
        counts = " ".join(str(int(hist.counts[g][i])) for g in GROUP_NAMES)
        lines.append(f"{fileio.fmt_float(edge)} {counts}")
    fileio._write_lines(path, lines)


def _crosslingual_flags(trial_list, languages):
    flags = []
    for t in trial_list:
        for u in (t.enroll_id, t.test_id):
            if u not in languages:
                raise ToolkitError(f"no language label for utterance {u!r}")
        flags.append(languages[t.enroll_id] != languages[t.test_id])
    return flags


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_gen_synth(s: _Settings) -> None:
    out_dir = Path(s.get("out_dir"))
    cfg = synthgen.WorldConfig(
        seed=s.get("seed", cast=int),
        n_speakers=s.get("n_speakers", 64, int),
        n_languages=s.get("n_languages", 4, int),
        utts_per_speaker=s.get("utts_per_speaker", 8, int),
        emb_dim=s.get("emb_dim", 32, int),
        lang_emb_dim=s.get("lang_emb_dim", 16, int),
        speaker_strength=s.get("speaker_strength", 1.0, float),
        language_strength=s.get("language_strength", 0.5, float),
        noise_strength=s.get("noise_strength", 0.3, float),
        classifier_noise=s.get("classifier_noise", 0.1, float),
        multilingual_fraction=s.get("multilingual_fraction", 1.0, float),
        duration_min=s.get("duration_min", 2.0, float),
        duration_max=s.get("duration_max", 10.0, float),
    )
    world = synthgen.generate_world(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    fileio.save_metadata(out_dir / "metadata.txt", world.utterances)
    fileio.save_embeddings(out_dir / "spk_embeddings.txt", world.speaker_embeddings)
    fileio.save_embeddings(out_dir / "lang_embeddings.txt", world.language_embeddings)
    fileio.save_posteriors(out_dir / "posteriors.txt", world.posteriors)
    fileio.save_language_labels(out_dir / "languages.txt", world.true_languages)
    n_eval = s.get("n_eval_per_cell", 0, int)
    if n_eval > 0:
        eval_trials, _ = synthgen.generate_eval_trials(
            world, n_eval, seed=s.get("eval_seed", cfg.seed + 1, int)
        )
        fileio.save_trials(out_dir / "eval_trials.txt", eval_trials)


def _trial_build_config(s: _Settings) -> trials.TrialBuildConfig:
    return trials.TrialBuildConfig(
        seed=s.get("seed", cast=int),
        total_trials=s.get("total_trials", 100000, int),
        crosslingual_fraction=s.get("crosslingual_fraction", 0.5, float),
        discard_fraction=s.get("discard_fraction", 0.2, float),
        crop_min=s.get("crop_min", 2.0, float),
        crop_max=s.get("crop_max", 4.0, float),
        crop_half=s.get("crop_half", True, bool),
    )


def _cmd_build_trials(s: _Settings) -> None:
    metadata = fileio.load_metadata(s.get("metadata"))
    lang_emb = fileio.load_embeddings(s.get("lang_embeddings"))
    posteriors = fileio.load_posteriors(s.get("posteriors"))
    cfg = _trial_build_config(s)
    cropped = trials.simulate_crops(metadata, cfg)
    built = trials.build_trials(cropped, lang_emb, posteriors, cfg)
    fileio.save_trials(s.get("out_trials"), built)
    distances = trials.language_distances(built, lang_emb)
    fileio.save_score_rows(
        s.get("out_distances"),
        [(t.enroll_id, t.test_id, d) for t, d in zip(built, distances)],
    )
    out_metadata = s.get("out_metadata", None)
    if out_metadata is not None:
        fileio.save_metadata(out_metadata, cropped)


def _cmd_score(s: _Settings) -> None:
    embeddings = fileio.load_embeddings(s.get("embeddings"))
    metadata = fileio.load_metadata(s.get("metadata"))
    trial_list = fileio.load_trials(s.get("trials"))
    scored = _score_stage(
        embeddings,
        metadata,
        trial_list,
        s.get("top_n", 400, int),
        s.get("epsilon_sigma", 1e-12, float),
    )
    fileio.save_scores(s.get("out_norm"), scored, which="norm")
    out_raw = s.get("out_raw", None)
    if out_raw is not None:
        fileio.save_scores(out_raw, scored, which="raw")


def _parse_recipe(raw: str) -> list[str]:
    return [name for name in raw.split(",") if name] if raw else []


def _cmd_qmf(s: _Settings) -> None:
    trial_list = fileio.load_trials(s.get("trials"))
    recipe = _parse_recipe(s.get("recipe"))
    metadata = fileio.load_metadata(s.get("metadata"))
    lang_path = s.get("lang_embeddings", None)
    post_path = s.get("posteriors", None)
    scored = [ScoredTrial(trial=t, raw_score=0.0) for t in trial_list]
    langfeat.compute_qmfs(
        scored,
        recipe,
        metadata,
        fileio.load_embeddings(lang_path) if lang_path else None,
        fileio.load_posteriors(post_path) if post_path else None,
    )
    fileio.save_qmf(s.get("out"), recipe, scored)


def _cmd_calib_fit(s: _Settings) -> None:
    scored = _scored_from_files(s.get("trials"), s.get("scores"))
    recipe = _parse_recipe(s.get("recipe", ""))
    qmf_path = s.get("qmf", None)
    if qmf_path is not None:
        _attach_qmf(scored, qmf_path)
    cfg = calibration.FitConfig(
        effective_prior=s.get("effective_prior", 0.05, float),
        max_iters=s.get("max_iters", 200, int),
        grad_tolerance=s.get("grad_tolerance", 1e-9, float),
        l2_lambda=s.get("l2_lambda", 1e-6, float),
    )
    model = calibration.fit(scored, recipe, cfg)
    calibration.save_model(s.get("out_model"), model)


def _cmd_calib_apply(s: _Settings) -> None:
    model = calibration.load_model(s.get("model"))
    scored = _scored_from_files(s.get("trials"), s.get("scores"))
    qmf_path = s.get("qmf", None)
    if qmf_path is not None:
        names = _attach_qmf(scored, qmf_path)
    else:
        names = []
    missing = [n for n in model.feature_names if n not in names]
    if missing:
        raise ToolkitError(
            f"model needs feature {missing[0]!r} which the QMF file does not provide"
        )
    calibration.apply_to_trials(model, scored)
    fileio.save_scores(s.get("out"), scored, which="llr")


def _cmd_evaluate(s: _Settings) -> None:
    trial_list = fileio.load_trials(s.get("trials"))
    rows = fileio.load_scores(s.get("scores"))
    _check_aligned(trial_list, rows, s.get("scores"))
    scores = [r[2] for r in rows]
    labels = [t.label for t in trial_list]
    p_targets = s.get("p_target", None)
    if p_targets is None:
        raw = s.config.get("p_target")
        p_targets = [float(raw)] if raw else [0.05]
    lines = _metric_report(
        scores, labels, p_targets, s.get("c_fa", 1.0, float), s.get("c_miss", 1.0, float)
    )
    for line in lines:
        print(line)
    out = s.get("out", None)
    if out is not None:
        fileio._write_lines(out, lines)


def _cmd_hist(s: _Settings) -> None:
    trial_list = fileio.load_trials(s.get("trials"))
    rows = fileio.load_scores(s.get("scores"))
    _check_aligned(trial_list, rows, s.get("scores"))
    languages = fileio.load_language_labels(s.get("languages"))
    flags = _crosslingual_flags(trial_list, languages)
    scored = [
        ScoredTrial(trial=t, raw_score=row[2], norm_score=row[2])
        for t, row in zip(trial_list, rows)
    ]
    hist = metrics.grouped_histogram(scored, flags, s.get("bin_width", 0.25, float))
    _write_histogram(s.get("out"), hist)


def _cmd_sample_batches(s: _Settings) -> None:
    metadata = fileio.load_metadata(s.get("metadata"))
    posteriors = fileio.load_posteriors(s.get("posteriors"))
    utterances = attach_predicted_languages(metadata, posteriors)
    cfg = sampler.SamplerConfig(
        speakers_per_batch=s.get("speakers_per_batch", cast=int),
        utts_per_speaker=s.get("utts_per_speaker", cast=int),
        seed=s.get("seed", cast=int),
        drop_last=s.get("drop_last", True, bool),
    )
    n_iterations = s.get("iterations", 1, int)
    plans = sampler.plan_epochs(utterances, cfg, n_iterations)
    lines = []
    index = 0
    for plan in plans:
        for batch in plan.batches:
            lines.append(f"batch {index} " + " ".join(batch))
            index += 1
    for i, plan in enumerate(plans):
        lines.append(
            f"# iteration {i} crosslingual_pairs {plan.crosslingual_pairs} "
            f"fallback_pairs {plan.fallback_pairs} "
            f"excluded_speakers {plan.excluded_speakers}"
        )
    fileio._write_lines(s.get("out"), lines)


def _stage(handler, parser, **kwargs) -> None:
    """Run another subcommand's handler with explicit settings, so the
    pipeline is exactly a chain of the individual file-boundary stages."""
    handler(_Settings(argparse.Namespace(config=None, **kwargs), parser))


def _cmd_pipeline(s: _Settings) -> None:
    out = Path(s.get("out_dir"))
    out.mkdir(parents=True, exist_ok=True)
    seed = s.get("seed", cast=int)
    recipe = s.get("recipe", "log_dur_min,lang_emb_cos")
    top_n = s.get("top_n", 400, int)
    eps = s.get("epsilon_sigma", 1e-12, float)

    _stage(
        _cmd_gen_synth, s.parser,
        out_dir=str(out),
        seed=seed,
        n_eval_per_cell=s.get("n_eval_per_cell", 250, int),
        eval_seed=seed + 2,
        n_speakers=s.get("n_speakers", 64, int),
        n_languages=s.get("n_languages", 8, int),
        utts_per_speaker=s.get("utts_per_speaker", 8, int),
        emb_dim=s.get("emb_dim", 32, int),
        lang_emb_dim=s.get("lang_emb_dim", 3, int),
        speaker_strength=s.get("speaker_strength", 1.0, float),
        language_strength=s.get("language_strength", 0.5, float),
        noise_strength=s.get("noise_strength", 0.8, float),
        classifier_noise=s.get("classifier_noise", 0.5, float),
        multilingual_fraction=s.get("multilingual_fraction", 1.0, float),
        duration_min=s.get("duration_min", 2.0, float),
        duration_max=s.get("duration_max", 10.0, float),
    )
    _stage(
        _cmd_build_trials, s.parser,
        metadata=str(out / "metadata.txt"),
        lang_embeddings=str(out / "lang_embeddings.txt"),
        posteriors=str(out / "posteriors.txt"),
        out_trials=str(out / "cal_trials.txt"),
        out_distances=str(out / "cal_lang_distances.txt"),
        out_metadata=str(out / "cal_metadata.txt"),
        seed=seed + 1,
        total_trials=s.get("total_trials", 1600, int),
        crosslingual_fraction=s.get("crosslingual_fraction", 0.5, float),
        discard_fraction=s.get("discard_fraction", 0.2, float),
        crop_min=s.get("crop_min", 2.0, float),
        crop_max=s.get("crop_max", 4.0, float),
        crop_half=s.get("crop_half", True, bool),
    )
    for split, trial_file, qmf_metadata in (
        ("cal", "cal_trials.txt", "cal_metadata.txt"),
        ("eval", "eval_trials.txt", "metadata.txt"),
    ):
        _stage(
            _cmd_score, s.parser,
            embeddings=str(out / "spk_embeddings.txt"),
            metadata=str(out / "metadata.txt"),
            trials=str(out / trial_file),
            out_norm=str(out / f"{split}_scores_norm.txt"),
            out_raw=str(out / f"{split}_scores_raw.txt"),
            top_n=top_n,
            epsilon_sigma=eps,
        )
        _stage(
            _cmd_qmf, s.parser,
            trials=str(out / trial_file),
            metadata=str(out / qmf_metadata),
            lang_embeddings=str(out / "lang_embeddings.txt"),
            posteriors=str(out / "posteriors.txt"),
            recipe=recipe,
            out=str(out / f"{split}_qmf.txt"),
        )
    _stage(
        _cmd_calib_fit, s.parser,
        trials=str(out / "cal_trials.txt"),
        scores=str(out / "cal_scores_norm.txt"),
        qmf=str(out / "cal_qmf.txt"),
        recipe=recipe,
        out_model=str(out / "calibration_model.txt"),
        effective_prior=s.get("effective_prior", 0.05, float),
        max_iters=s.get("max_iters", 200, int),
        grad_tolerance=s.get("grad_tolerance", 1e-9, float),
        l2_lambda=s.get("l2_lambda", 1e-6, float),
    )
    _stage(
        _cmd_calib_apply, s.parser,
        model=str(out / "calibration_model.txt"),
        trials=str(out / "eval_trials.txt"),
        scores=str(out / "eval_scores_norm.txt"),
        qmf=str(out / "eval_qmf.txt"),
        out=str(out / "eval_llrs.txt"),
    )
    p_targets = getattr(s.ns, "p_target", None)
    if p_targets is None:
        raw = s.config.get("p_target")
        p_targets = [float(raw)] if raw else [0.05]
    _stage(
        _cmd_evaluate, s.parser,
        scores=str(out / "eval_llrs.txt"),
        trials=str(out / "eval_trials.txt"),
        out=str(out / "eval_report.txt"),
        p_target=p_targets,
        c_fa=s.get("c_fa", 1.0, float),
        c_miss=s.get("c_miss", 1.0, float),
    )
    _stage(
        _cmd_hist, s.parser,
        scores=str(out / "eval_scores_norm.txt"),
        trials=str(out / "eval_trials.txt"),
        languages=str(out / "languages.txt"),
        bin_width=s.get("bin_width", 0.25, float),
        out=str(out / "eval_hist.txt"),
    )


# ---------------------------------------------------------------------------
# Parser


def _add(sub, name, help_text, handler, options):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", help="key-value config file; explicit flags win")
    for args, kwargs in options:
        p.add_argument(*args, **kwargs)
    p.set_defaults(handler=handler)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svbackend",
        description="Speaker-verification backend pipeline (scoring, "
        "normalization, calibration, evaluation).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    opt = lambda *names, **kw: (names, kw)  # noqa: E731

    world_opts = [
        opt("--n-speakers", type=int),
        opt("--n-languages", type=int),
        opt("--utts-per-speaker", type=int),
        opt("--emb-dim", type=int),
        opt("--lang-emb-dim", type=int),
        opt("--speaker-strength", type=float),
        opt("--language-strength", type=float),
        opt("--noise-strength", type=float),
        opt("--classifier-noise", type=float),
        opt("--multilingual-fraction", type=float),
        opt("--duration-min", type=float),
        opt("--duration-max", type=float),
    ]
    build_opts = [
        opt("--total-trials", type=int),
        opt("--crosslingual-fraction", type=float),
        opt("--discard-fraction", type=float),
        opt("--crop-min", type=float),
        opt("--crop-max", type=float),
        opt("--crop-half", type=_str2bool),
    ]
    fit_opts = [
        opt("--effective-prior", type=float),
        opt("--max-iters", type=int),
        opt("--grad-tolerance", type=float),
        opt("--l2-lambda", type=float),
    ]
    metric_opts = [
        opt("--p-target", type=float, action="append"),
        opt("--c-fa", type=float),
        opt("--c-miss", type=float),
    ]

    _add(sub, "gen-synth", "generate a seeded synthetic embedding world",
         _cmd_gen_synth,
         [opt("--out-dir"), opt("--seed", type=int), opt("--n-eval-per-cell", type=int),
          opt("--eval-seed", type=int)] + world_opts)
    _add(sub, "build-trials", "build balanced calibration trials",
         _cmd_build_trials,
         [opt("--metadata"), opt("--lang-embeddings"), opt("--posteriors"),
          opt("--out-trials"), opt("--out-distances"), opt("--out-metadata"),
          opt("--seed", type=int)] + build_opts)
    _add(sub, "score", "cosine score trials and apply adaptive s-norm",
         _cmd_score,
         [opt("--embeddings"), opt("--metadata"), opt("--trials"),
          opt("--out-norm"), opt("--out-raw"),
          opt("--top-n", type=int), opt("--epsilon-sigma", type=float)])
    _add(sub, "qmf", "compute per-trial quality features",
         _cmd_qmf,
         [opt("--trials"), opt("--metadata"), opt("--lang-embeddings"),
          opt("--posteriors"), opt("--recipe"), opt("--out")])
    _add(sub, "calib-fit", "fit the calibration model on labelled trials",
         _cmd_calib_fit,
         [opt("--trials"), opt("--scores"), opt("--qmf"), opt("--recipe"),
          opt("--out-model")] + fit_opts)
    _add(sub, "calib-apply", "apply a calibration model, emitting LLRs",
         _cmd_calib_apply,
         [opt("--model"), opt("--trials"), opt("--scores"), opt("--qmf"), opt("--out")])
    _add(sub, "evaluate", "report EER and MinDCF for scored trials",
         _cmd_evaluate,
         [opt("--scores"), opt("--trials"), opt("--out")] + metric_opts)
    _add(sub, "hist", "grouped score histogram (label x cross-linguality)",
         _cmd_hist,
         [opt("--scores"), opt("--trials"), opt("--languages"),
          opt("--bin-width", type=float), opt("--out")])
    _add(sub, "sample-batches", "plan cross-lingual mini-batches",
         _cmd_sample_batches,
         [opt("--metadata"), opt("--posteriors"), opt("--speakers-per-batch", type=int),
          opt("--utts-per-speaker", type=int), opt("--seed", type=int),
          opt("--iterations", type=int), opt("--drop-last", type=_str2bool), opt("--out")])
    _add(sub, "pipeline", "run the full synthetic pipeline into one directory",
         _cmd_pipeline,
         [opt("--out-dir"), opt("--seed", type=int), opt("--n-eval-per-cell", type=int),
          opt("--recipe"), opt("--top-n", type=int), opt("--epsilon-sigma", type=float),
          opt("--bin-width", type=float)]
         + world_opts + build_opts + fit_opts + metric_opts)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    settings = _Settings(ns, parser)
    try:
        ns.handler(settings)
    except BrokenPipeError:
        return 1
    except (ToolkitError, KeyError, ValueError, OSError) as exc:
        message = exc.args[0] if exc.args else str(exc)
        print(f"error: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
