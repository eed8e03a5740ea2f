"""Score calibration: affine mapping of (score, quality features) to LLRs.

The mapping l(s) = w_s * s + w_q . q + b is fit by prior-weighted logistic
regression: targets carry weight prior / N_tar and nontargets
(1 - prior) / N_non, and logit(prior) is added to the model output inside
the loss only, so the stored parameters emit prior-free log-likelihood
ratios. The optimizer is deterministic: full-batch Newton iterations with
step halving from a zero initialization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Label, ScoredTrial
from .errors import ConvergenceError, FormatError, MissingFeatureError
from .fileio import _data_lines, _write_lines, fmt_float


@dataclass(frozen=True)
class CalibrationModel:
    w_s: float
    w_q: tuple[float, ...]
    b: float
    effective_prior: float
    feature_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.w_q) != len(self.feature_names):
            raise ValueError("w_q length must match feature_names")
        if not 0.0 < self.effective_prior < 1.0:
            raise ValueError("effective_prior must be in (0, 1)")


@dataclass(frozen=True)
class FitConfig:
    effective_prior: float = 0.05
    max_iters: int = 200
    grad_tolerance: float = 1e-9
    l2_lambda: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.effective_prior < 1.0:
            raise ValueError("effective_prior must be in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.grad_tolerance > 0:
            raise ValueError("grad_tolerance must be positive")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be non-negative")


def assemble_features(trial: ScoredTrial, recipe: list[str]) -> np.ndarray:
    """Project the trial's named features into recipe order."""
    if len(set(recipe)) != len(recipe):
        raise ValueError("duplicate feature name in recipe")
    values = []
    for name in recipe:
        if name not in trial.qmf:
            raise MissingFeatureError(
                f"trial ({trial.trial.enroll_id}, {trial.trial.test_id}) "
                f"is missing feature {name!r}"
            )
        values.append(trial.qmf[name])
    return np.asarray(values, dtype=np.float64)


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _objective_grad_hessian(beta, design, y, weights, offset, l2):
    """Weighted cross-entropy with L2 on the slope block (not the intercept).

    Returns (objective, gradient, hessian); the intercept is the last
    design column.
    """
    z = design @ beta + offset
    p = _sigmoid(z)
    loss = np.where(y == 1.0, _softplus(-z), _softplus(z))
    slopes = beta[:-1]
    obj = float(weights @ loss) + l2 * float(slopes @ slopes)
    grad = design.T @ (weights * (p - y))
    grad[:-1] += 2.0 * l2 * slopes
    d = weights * p * (1.0 - p)
    hess = design.T @ (design * d[:, None])
    hess[np.arange(len(beta) - 1), np.arange(len(beta) - 1)] += 2.0 * l2
    return obj, grad, hess


def _objective_only(beta, design, y, weights, offset, l2):
    z = design @ beta + offset
    loss = np.where(y == 1.0, _softplus(-z), _softplus(z))
    slopes = beta[:-1]
    return float(weights @ loss) + l2 * float(slopes @ slopes)


def fit(
    scored: list[ScoredTrial],
    recipe: list[str],
    cfg: FitConfig = FitConfig(),
    use_norm_score: bool = True,
) -> CalibrationModel:
    """Fit calibration weights on labelled, scored trials.

    Needs at least one target and one nontarget; raises ConvergenceError
    (carrying the final gradient norm) if the gradient tolerance is not
    reached within max_iters Newton steps.
    """
    if len(set(recipe)) != len(recipe):
        raise ValueError("duplicate feature name in recipe")
    n = len(scored)
    if n == 0:
        raise ValueError("no trials to fit on")
    y = np.empty(n)
    for i, st in enumerate(scored):
        if st.trial.label is Label.UNKNOWN:
            raise ValueError(
                f"trial ({st.trial.enroll_id}, {st.trial.test_id}) has unknown label"
            )
        y[i] = 1.0 if st.trial.label is Label.TARGET else 0.0
    n_tar = int(y.sum())
    n_non = n - n_tar
    if n_tar == 0 or n_non == 0:
        raise ValueError("need at least one target and one nontarget trial")

    design = np.empty((n, len(recipe) + 2))
    for i, st in enumerate(scored):
        design[i, 0] = st.score(use_norm=use_norm_score)
        design[i, 1:-1] = assemble_features(st, recipe)
        design[i, -1] = 1.0
    if not np.all(np.isfinite(design)):
        raise ValueError("scores and features must be finite")

    prior = cfg.effective_prior
    weights = np.where(y == 1.0, prior / n_tar, (1.0 - prior) / n_non)
    offset = math.log(prior / (1.0 - prior))

    beta = np.zeros(design.shape[1])
    grad_norm = math.inf
    for _ in range(cfg.max_iters):
        obj, grad, hess = _objective_grad_hessian(
            beta, design, y, weights, offset, cfg.l2_lambda
        )
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm < cfg.grad_tolerance:
            break
        step = np.linalg.solve(hess, grad)
        t = 1.0
        while t > 1e-12:
            candidate = beta - t * step
            if _objective_only(candidate, design, y, weights, offset, cfg.l2_lambda) <= obj:
                beta = candidate
                break
            t *= 0.5
        else:
            # no descent possible at float precision; treat as converged
            break
    else:
        raise ConvergenceError(
            f"calibration fit did not converge in {cfg.max_iters} iterations "
            f"(gradient inf-norm {grad_norm:.3g})"
        )

    return CalibrationModel(
        w_s=float(beta[0]),
        w_q=tuple(float(v) for v in beta[1:-1]),
        b=float(beta[-1]),
        effective_prior=prior,
        feature_names=tuple(recipe),
    )


def apply(model: CalibrationModel, score: float, qmf_values) -> float:
    """Evaluate l(s) = w_s * s + w_q . q + b."""
    q = np.asarray(qmf_values, dtype=np.float64)
    if q.shape != (len(model.w_q),):
        raise ValueError(
            f"expected {len(model.w_q)} feature values, got {q.shape}"
        )
    return float(model.w_s * score + np.dot(model.w_q, q) + model.b)


def apply_to_trials(
    model: CalibrationModel, scored: list[ScoredTrial], use_norm_score: bool = True
) -> None:
    """Fill each trial's llr in place using the model's feature recipe."""
    for st in scored:
        q = assemble_features(st, list(model.feature_names))
        st.llr = apply(model, st.score(use_norm=use_norm_score), q)


def weighted_cross_entropy(llrs, labels, prior: float) -> float:
    """Prior-weighted binary cross-entropy of LLRs (natural log).

    Measures calibration quality: targets weighted prior / N_tar and
    nontargets (1 - prior) / N_non, evaluated at the prior's operating
    point. Lower is better; the floor is 0.
    """
    if not 0.0 < prior < 1.0:
        raise ValueError("prior must be in (0, 1)")
    llr = np.asarray(llrs, dtype=np.float64)
    y = np.empty(llr.size)
    for i, lab in enumerate(labels):
        if isinstance(lab, Label):
            if lab is Label.UNKNOWN:
                raise ValueError(f"trial {i} has unknown label")
            y[i] = 1.0 if lab is Label.TARGET else 0.0
        else:
            y[i] = 1.0 if lab else 0.0
    n_tar = int(y.sum())
    n_non = y.size - n_tar
    if n_tar == 0 or n_non == 0:
        raise ValueError("need at least one target and one nontarget trial")
    z = llr + math.log(prior / (1.0 - prior))
    loss = np.where(y == 1.0, _softplus(-z), _softplus(z))
    w = np.where(y == 1.0, prior / n_tar, (1.0 - prior) / n_non)
    return float(w @ loss)


# ---------------------------------------------------------------------------
# Model file: "key value" lines — w_s, b, prior, then one w_q:<name> per QMF


def save_model(path, model: CalibrationModel) -> None:
    lines = [
        f"w_s {fmt_float(model.w_s)}",
        f"b {fmt_float(model.b)}",
        f"prior {fmt_float(model.effective_prior)}",
    ]
    for name, w in zip(model.feature_names, model.w_q):
        lines.append(f"w_q:{name} {fmt_float(w)}")
    _write_lines(path, lines)


def load_model(path) -> CalibrationModel:
    w_s = b = prior = None
    names: list[str] = []
    w_q: list[float] = []
    for line_no, fields in _data_lines(path):
        if len(fields) != 2:
            raise FormatError(path, line_no, "expected 'key value'")
        key, raw = fields
        try:
            value = float(raw)
        except ValueError:
            raise FormatError(path, line_no, f"invalid value {raw!r}") from None
        if key == "w_s":
            w_s = value
        elif key == "b":
            b = value
        elif key == "prior":
            prior = value
        elif key.startswith("w_q:") and len(key) > 4:
            name = key[4:]
            if name in names:
                raise FormatError(path, line_no, f"duplicate feature {name!r}")
            names.append(name)
            w_q.append(value)
        else:
            raise FormatError(path, line_no, f"unknown key {key!r}")
    for key, val in (("w_s", w_s), ("b", b), ("prior", prior)):
        if val is None:
            raise FormatError(path, 0, f"missing required key {key!r}")
    return CalibrationModel(
        w_s=w_s, w_q=tuple(w_q), b=b, effective_prior=prior, feature_names=tuple(names)
    )
