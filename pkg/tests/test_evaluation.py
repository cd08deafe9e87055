import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from bikerisk.evaluation import (
    EvaluationError,
    accuracy,
    brier_score,
    brier_skill_score,
    climatology_brier,
    cross_evaluate,
    evaluate,
    evaluate_table,
    reliability_curve,
    reliability_to_csv,
    render_reliability_svg,
    report_to_json,
    reports_to_csv,
)
from bikerisk.model import design_for_model, predict_matrix


# --- scores ------------------------------------------------------------------


def test_brier_single_pair_fixtures():
    assert abs(brier_score([0.9], [1]) - 0.01) < 1e-15
    assert abs(brier_score([0.55], [1]) - 0.2025) < 1e-15


def test_brier_perfect_and_worst():
    assert brier_score([0.0, 1.0], [0, 1]) == 0.0
    assert brier_score([1.0, 0.0], [0, 1]) == 1.0


def test_brier_mean_over_pairs():
    assert brier_score([0.5, 0.5], [0, 1]) == pytest.approx(0.25)


def test_accuracy_threshold_is_inclusive():
    assert accuracy([0.5], [1]) == 1.0
    assert accuracy([0.5], [0]) == 0.0
    assert accuracy([0.49999, 0.7, 0.2], [0, 1, 0]) == 1.0


def test_climatology_uses_train_base_rate():
    train = np.array([1, 0, 0, 0, 0, 1, 0, 0, 0, 0])  # base rate 0.2
    test = np.array([1, 0])
    expected = ((0.2 - 1) ** 2 + (0.2 - 0) ** 2) / 2
    assert climatology_brier(train, test) == pytest.approx(expected)
    with pytest.raises(EvaluationError):
        climatology_brier(np.array([]), test)


def test_skill_score_identity_and_anchors():
    assert brier_skill_score(0.12, 0.24) == pytest.approx(0.5)
    assert brier_skill_score(0.0, 0.2) == 1.0
    assert brier_skill_score(0.2, 0.2) == 0.0
    assert brier_skill_score(0.4, 0.2) == -1.0
    with pytest.raises(EvaluationError, match="reference"):
        brier_skill_score(0.1, 0.0)


@given(
    probs=hnp.arrays(
        float, st.integers(1, 60), elements=st.floats(0.0, 1.0, allow_nan=False)
    ),
    data=st.data(),
)
def test_brier_permutation_invariant(probs, data):
    labels = np.array(data.draw(st.lists(st.sampled_from([0.0, 1.0]), min_size=len(probs), max_size=len(probs))))
    perm = np.array(data.draw(st.permutations(range(len(probs)))))
    assert brier_score(probs[perm], labels[perm]) == pytest.approx(
        brier_score(probs, labels), abs=1e-12
    )


@given(
    p=st.floats(0.0, 1.0, allow_nan=False),
    n_pos=st.integers(0, 40),
    n_neg=st.integers(0, 40),
)
def test_brier_decomposition_for_constant_forecast(p, n_pos, n_neg):
    if n_pos + n_neg == 0:
        return
    labels = np.array([1.0] * n_pos + [0.0] * n_neg)
    q = n_pos / (n_pos + n_neg)
    expected = (p - q) ** 2 + q * (1 - q)
    assert brier_score(np.full(len(labels), p), labels) == pytest.approx(expected, abs=1e-12)


def test_climatology_algebra_on_all_positive_test():
    train = np.array([1.0, 0.0, 0.0, 1.0, 0.0])  # base rate 0.4
    test = np.ones(7)
    assert climatology_brier(train, test) == pytest.approx((1 - 0.4) ** 2, abs=1e-15)


def test_pair_validation_errors():
    with pytest.raises(EvaluationError, match="labels"):
        brier_score([0.5, 0.5], [1])
    with pytest.raises(EvaluationError, match="no predictions"):
        brier_score([], [])
    with pytest.raises(EvaluationError, match=r"\[0, 1\]"):
        brier_score([1.2], [1])
    with pytest.raises(EvaluationError, match="0 or 1"):
        brier_score([0.5], [2])


# --- calibration -------------------------------------------------------------


def test_reliability_fixed_bins_and_edges():
    bins = reliability_curve([0.05, 0.05, 0.15, 1.0], [0, 1, 1, 1])
    assert len(bins) == 10
    assert [b.lo for b in bins] == pytest.approx([i / 10 for i in range(10)])
    assert [b.hi for b in bins] == pytest.approx([(i + 1) / 10 for i in range(10)])

    assert bins[0].n == 2
    assert bins[0].mean_predicted == pytest.approx(0.05)
    assert bins[0].observed_fraction == pytest.approx(0.5)
    assert bins[1].n == 1  # 0.15 belongs to [0.1, 0.2), not [0, 0.1)
    assert bins[9].n == 1  # closed top bin catches 1.0 exactly
    assert bins[9].observed_fraction == 1.0
    for b in bins[2:9]:
        assert b.n == 0
        assert b.mean_predicted is None
        assert b.observed_fraction is None


def test_reliability_boundary_goes_to_upper_bin():
    bins = reliability_curve([0.1, 0.9], [0, 1])
    assert bins[0].n == 0
    assert bins[1].n == 1
    assert bins[9].n == 1


def test_reliability_counts_sum_to_n():
    rng = np.random.default_rng(31)
    probs = rng.random(5_000)
    labels = (rng.random(5_000) < probs).astype(float)
    bins = reliability_curve(probs, labels)
    assert sum(b.n for b in bins) == 5_000


def test_reliability_single_bin_example():
    probs = np.full(100, 0.75)
    labels = np.array([1.0] * 75 + [0.0] * 25)
    bins = reliability_curve(probs, labels)
    assert bins[7].n == 100
    assert bins[7].mean_predicted == pytest.approx(0.75)
    assert bins[7].observed_fraction == pytest.approx(0.75)
    assert sum(b.n for b in bins) == 100
    assert sum(1 for b in bins if b.n > 0) == 1


def test_reliability_all_probs_in_lowest_bin():
    rng = np.random.default_rng(33)
    probs = rng.uniform(0.0, 0.0999, 500)
    labels = (rng.random(500) < probs).astype(float)
    bins = reliability_curve(probs, labels)
    assert bins[0].n == 500
    assert all(b.n == 0 for b in bins[1:])
    assert sum(b.n for b in bins) == 500


@given(
    probs=hnp.arrays(
        float, st.integers(1, 80), elements=st.floats(0.0, 1.0, allow_nan=False)
    ),
    data=st.data(),
)
def test_reliability_conserves_probability_and_label_mass(probs, data):
    labels = np.array(
        data.draw(st.lists(st.sampled_from([0.0, 1.0]), min_size=len(probs), max_size=len(probs)))
    )
    bins = reliability_curve(probs, labels)
    assert sum(b.n for b in bins) == len(probs)
    prob_mass = sum(b.n * b.mean_predicted for b in bins if b.n > 0)
    label_mass = sum(b.n * b.observed_fraction for b in bins if b.n > 0)
    assert prob_mass == pytest.approx(float(np.sum(probs)), abs=1e-9)
    assert label_mass == pytest.approx(float(np.sum(labels)), abs=1e-9)


def test_calibrated_forecasts_sit_near_diagonal():
    rng = np.random.default_rng(32)
    probs = rng.random(20_000)
    labels = (rng.random(20_000) < probs).astype(float)
    for b in reliability_curve(probs, labels):
        assert b.n > 0
        assert abs(b.observed_fraction - b.mean_predicted) < 0.02


# --- reports -----------------------------------------------------------------


def test_evaluate_table_self_consistency(city_models, city_tables):
    model = city_models["london"]
    table = city_tables["london"]
    report = evaluate_table(model, table, table.y)
    probs = predict_matrix(model, design_for_model(model, table))

    assert report.train_city == "london"
    assert report.test_city == "london"
    assert report.n_test == len(table)
    assert report.brier == pytest.approx(brier_score(probs, table.y), abs=1e-15)
    assert report.brier_reference == pytest.approx(
        climatology_brier(table.y, table.y), abs=1e-15
    )
    assert report.skill == pytest.approx(
        1.0 - report.brier / report.brier_reference, abs=1e-15
    )
    assert report.histogram == [b.n for b in report.bins]
    assert sum(report.histogram) == report.n_test


def test_evaluate_skill_none_when_reference_degenerate(city_models, city_tables):
    model = city_models["london"]
    table = city_tables["london"]
    X = design_for_model(model, table)
    zeros = np.zeros(len(table))
    report = evaluate(model, X, zeros, zeros, test_city="degenerate")
    assert report.brier_reference == 0.0
    assert report.skill is None


def test_cross_evaluate_emits_six_ordered_transfer_rows(city_models, city_tables):
    labels = {city: t.y for city, t in city_tables.items()}
    reports = cross_evaluate(city_models, city_tables, labels)
    pairs = [(r.train_city, r.test_city) for r in reports]
    assert pairs == [
        ("boston", "london"),
        ("boston", "pittsburgh"),
        ("london", "boston"),
        ("london", "pittsburgh"),
        ("pittsburgh", "boston"),
        ("pittsburgh", "london"),
    ]
    for r in reports:
        assert r.skill is not None
        assert r.skill == pytest.approx(1.0 - r.brier / r.brier_reference, abs=1e-15)


def test_cross_evaluate_applies_training_moments(city_models, city_tables):
    labels = {city: t.y for city, t in city_tables.items()}
    reports = cross_evaluate(city_models, city_tables, labels)
    r = next(x for x in reports if (x.train_city, x.test_city) == ("london", "boston"))
    model = city_models["london"]
    X = design_for_model(model, city_tables["boston"])  # london moments on boston data
    probs = predict_matrix(model, X)
    assert r.brier == pytest.approx(brier_score(probs, city_tables["boston"].y), abs=1e-15)
    assert r.brier_reference == pytest.approx(
        climatology_brier(city_tables["london"].y, city_tables["boston"].y), abs=1e-15
    )


def test_cross_evaluate_missing_city_rejected(city_models, city_tables):
    labels = {city: t.y for city, t in city_tables.items()}
    with pytest.raises(EvaluationError, match="boston"):
        cross_evaluate(city_models, {"london": city_tables["london"]}, labels)


# --- serialization -----------------------------------------------------------


def test_reports_csv_shape(city_models, city_tables):
    labels = {city: t.y for city, t in city_tables.items()}
    reports = cross_evaluate(city_models, city_tables, labels)
    lines = reports_to_csv(reports).splitlines()
    assert lines[0] == "train_city,test_city,n_test,accuracy,brier,brier_reference,skill"
    assert len(lines) == 7
    first = lines[1].split(",")
    assert first[0] == "boston" and first[1] == "london"
    assert float(first[4]) == reports[0].brier  # repr round-trips exactly


def test_report_json_fields(city_models, city_tables):
    model = city_models["london"]
    table = city_tables["london"]
    report = evaluate_table(model, table, table.y)
    doc = json.loads(report_to_json(report))
    assert sorted(doc) == [
        "accuracy",
        "brier",
        "brier_reference",
        "histogram",
        "n_test",
        "reliability",
        "skill",
        "test_city",
        "train_city",
    ]
    assert len(doc["reliability"]) == 10
    assert doc["histogram"] == report.histogram


def test_reliability_csv_keeps_empty_bins():
    bins = reliability_curve([0.05], [1])
    lines = reliability_to_csv(bins).splitlines()
    assert lines[0] == "lo,hi,n,mean_predicted,observed_fraction"
    assert len(lines) == 11
    assert lines[2].endswith(",0,,")  # empty bin: n=0, blanks for the stats


def test_reliability_svg_structure(city_models, city_tables):
    model = city_models["london"]
    table = city_tables["london"]
    report = evaluate_table(model, table, table.y)
    svg = render_reliability_svg(report)
    assert svg.startswith("<svg ")
    assert svg.endswith("</svg>")
    assert "stroke-dasharray" in svg  # diagonal reference line
    populated = sum(1 for b in report.bins if b.n > 0)
    assert svg.count("<circle") == populated
    if populated > 1:
        assert "<polyline" in svg
    assert "nan" not in svg.lower()
    assert f"{model.city} on {report.test_city}" in svg
