"""Probabilistic evaluation: Brier score, skill, calibration, transfer tests.

The Brier score is the mean squared distance between forecast probabilities
and binary outcomes. Skill is measured against a climatology reference that
always predicts the training base rate:

    BSS = 1 - BS / BS_ref

so 1 is perfect, 0 matches climatology, negative is worse than it. When the
reference score is 0 (a degenerate train/test combination) the skill score
is undefined and reported as such rather than inf.

Calibration uses ten fixed probability bins [0, 0.1), ..., [0.9, 1.0]; the
last bin is closed so a forecast of exactly 1.0 lands in it. Empty bins stay
in the output with n = 0 and no observed fraction.

Cross-city transfer evaluates every ordered (train, test) city pair, always
standardizing test features with the training model's stored moments.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .model import FeatureTable, FittedModel, design_for_model, predict_matrix

N_BINS = 10
THRESHOLD = 0.5

__all__ = [
    "EvaluationError",
    "CalibrationBin",
    "EvaluationReport",
    "accuracy",
    "brier_score",
    "climatology_brier",
    "brier_skill_score",
    "reliability_curve",
    "evaluate",
    "cross_evaluate",
    "reports_to_csv",
    "report_to_json",
    "reliability_to_csv",
    "render_reliability_svg",
]


class EvaluationError(Exception):
    pass


def _check_pairs(probs: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if probs.shape != labels.shape:
        raise EvaluationError(
            f"{probs.shape[0]} probabilities but {labels.shape[0]} labels"
        )
    if probs.size == 0:
        raise EvaluationError("no predictions to evaluate")
    if float(probs.min()) < 0.0 or float(probs.max()) > 1.0:
        raise EvaluationError("probabilities must lie in [0, 1]")
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise EvaluationError("labels must be 0 or 1")
    return probs, labels


def accuracy(probs: np.ndarray, labels: np.ndarray, threshold: float = THRESHOLD) -> float:
    probs, labels = _check_pairs(probs, labels)
    predicted = (probs >= threshold).astype(float)
    return float(np.mean(predicted == labels))


def brier_score(probs: np.ndarray, labels: np.ndarray) -> float:
    probs, labels = _check_pairs(probs, labels)
    d = probs - labels
    return float(np.mean(d * d))


def climatology_brier(train_labels: np.ndarray, test_labels: np.ndarray) -> float:
    """Brier score of the constant forecast equal to the training base rate."""
    train_labels = np.asarray(train_labels, dtype=float)
    if train_labels.size == 0:
        raise EvaluationError("no training labels for the climatology reference")
    base = float(np.mean(train_labels))
    probs = np.full(np.asarray(test_labels).shape, base)
    return brier_score(probs, test_labels)


def brier_skill_score(bs: float, bs_ref: float) -> float:
    if bs_ref == 0.0:
        raise EvaluationError("skill score undefined: reference Brier score is 0")
    return 1.0 - bs / bs_ref


@dataclass(frozen=True)
class CalibrationBin:
    lo: float
    hi: float
    n: int
    mean_predicted: float | None
    observed_fraction: float | None


def reliability_curve(probs: np.ndarray, labels: np.ndarray) -> list[CalibrationBin]:
    probs, labels = _check_pairs(probs, labels)
    bins: list[CalibrationBin] = []
    for b in range(N_BINS):
        lo = b / N_BINS
        hi = (b + 1) / N_BINS
        if b == N_BINS - 1:
            mask = (probs >= lo) & (probs <= hi)
        else:
            mask = (probs >= lo) & (probs < hi)
        n = int(np.sum(mask))
        if n == 0:
            bins.append(CalibrationBin(lo, hi, 0, None, None))
        else:
            bins.append(
                CalibrationBin(
                    lo,
                    hi,
                    n,
                    float(np.mean(probs[mask])),
                    float(np.mean(labels[mask])),
                )
            )
    return bins


@dataclass
class EvaluationReport:
    train_city: str
    test_city: str
    n_test: int
    accuracy: float
    brier: float
    brier_reference: float
    skill: float | None
    bins: list[CalibrationBin]

    @property
    def histogram(self) -> list[int]:
        return [b.n for b in self.bins]


def evaluate(
    model: FittedModel,
    X: np.ndarray,
    labels: np.ndarray,
    train_labels: np.ndarray,
    test_city: str | None = None,
) -> EvaluationReport:
    """Score a model on a prepared design matrix.

    `X` must already use the model's standardization (see design_for_model).
    `train_labels` feed the climatology reference; for within-city reports
    they are simply the training labels of the same model.
    """
    probs = predict_matrix(model, X)
    probs, labels = _check_pairs(probs, labels)
    bs = brier_score(probs, labels)
    bs_ref = climatology_brier(train_labels, labels)
    skill = None if bs_ref == 0.0 else brier_skill_score(bs, bs_ref)
    return EvaluationReport(
        train_city=model.city,
        test_city=test_city if test_city is not None else model.city,
        n_test=int(labels.shape[0]),
        accuracy=accuracy(probs, labels),
        brier=bs,
        brier_reference=bs_ref,
        skill=skill,
        bins=reliability_curve(probs, labels),
    )


def evaluate_table(
    model: FittedModel,
    table: FeatureTable,
    train_labels: np.ndarray,
    test_city: str | None = None,
) -> EvaluationReport:
    """Evaluate on raw features, applying the model's stored scaling."""
    X = design_for_model(model, table)
    return evaluate(model, X, table.y, train_labels, test_city=test_city)


def cross_evaluate(
    models: dict[str, FittedModel],
    tables: dict[str, FeatureTable],
    train_labels: dict[str, np.ndarray],
) -> list[EvaluationReport]:
    """Every ordered (train city, test city) pair with train != test.

    Three cities give the six-row transfer matrix. Test features are always
    transformed with the training model's scaling, so a model fitted on one
    city sees another city's speeds through its own training moments.
    """
    missing = [c for c in models if c not in tables or c not in train_labels]
    if missing:
        raise EvaluationError(f"no test data for: {', '.join(sorted(missing))}")
    reports = []
    for train_city in sorted(models):
        model = models[train_city]
        for test_city in sorted(tables):
            if test_city == train_city:
                continue
            reports.append(
                evaluate_table(model, tables[test_city], train_labels[train_city], test_city)
            )
    return reports


def reports_to_csv(reports: list[EvaluationReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["train_city", "test_city", "n_test", "accuracy", "brier", "brier_reference", "skill"])
    for r in reports:
        w.writerow(
            [
                r.train_city,
                r.test_city,
                r.n_test,
                repr(r.accuracy),
                repr(r.brier),
                repr(r.brier_reference),
                "" if r.skill is None else repr(r.skill),
            ]
        )
    return buf.getvalue()


def report_to_json(report: EvaluationReport) -> str:
    doc = {
        "train_city": report.train_city,
        "test_city": report.test_city,
        "n_test": report.n_test,
        "accuracy": report.accuracy,
        "brier": report.brier,
        "brier_reference": report.brier_reference,
        "skill": report.skill,
        "reliability": [
            {
                "lo": b.lo,
                "hi": b.hi,
                "n": b.n,
                "mean_predicted": b.mean_predicted,
                "observed_fraction": b.observed_fraction,
            }
            for b in report.bins
        ],
        "histogram": report.histogram,
    }
    return json.dumps(doc, indent=1)


def reliability_to_csv(bins: list[CalibrationBin]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lo", "hi", "n", "mean_predicted", "observed_fraction"])
    for b in bins:
        w.writerow(
            [
                repr(b.lo),
                repr(b.hi),
                b.n,
                "" if b.mean_predicted is None else repr(b.mean_predicted),
                "" if b.observed_fraction is None else repr(b.observed_fraction),
            ]
        )
    return buf.getvalue()


def render_reliability_svg(report: EvaluationReport, size: int = 420) -> str:
    """Reliability diagram as a standalone SVG string.

    Draws the diagonal (perfect calibration), one dot per occupied bin at
    (mean predicted, observed fraction), and a count histogram along the
    bottom edge. No plotting dependency; the output is plain markup.
    """
    pad = 48.0
    plot = size - 2 * pad

    def sx(v: float) -> float:
        return pad + v * plot

    def sy(v: float) -> float:
        return size - pad - v * plot

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<line x1="{sx(0)}" y1="{sy(0)}" x2="{sx(1)}" y2="{sy(1)}" '
        'stroke="#999" stroke-dasharray="4 3"/>',
        f'<rect x="{pad}" y="{pad}" width="{plot}" height="{plot}" '
        'fill="none" stroke="#333"/>',
    ]
    max_n = max((b.n for b in report.bins), default=0)
    if max_n > 0:
        bar_h = plot * 0.18
        for b in report.bins:
            if b.n == 0:
                continue
            h = bar_h * b.n / max_n
            x0 = sx(b.lo)
            parts.append(
                f'<rect x="{x0}" y="{size - pad - h}" width="{plot / N_BINS}" '
                f'height="{h}" fill="#b8cfe6" stroke="none"/>'
            )
    pts = [
        (b.mean_predicted, b.observed_fraction)
        for b in report.bins
        if b.n > 0 and b.mean_predicted is not None
    ]
    for px, py in pts:
        parts.append(f'<circle cx="{sx(px)}" cy="{sy(py)}" r="4" fill="#1c4e80"/>')
    if len(pts) > 1:
        path = " ".join(f"{sx(px)},{sy(py)}" for px, py in pts)
        parts.append(f'<polyline points="{path}" fill="none" stroke="#1c4e80"/>')
    title = f"{report.train_city} on {report.test_city}"
    parts.append(
        f'<text x="{size / 2}" y="{pad / 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{title}</text>'
    )
    parts.append(
        f'<text x="{size / 2}" y="{size - 10}" text-anchor="middle" '
        'font-family="sans-serif" font-size="11">mean predicted probability</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts)
