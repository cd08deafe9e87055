import json
import math

import numpy as np
import pytest
from scipy import optimize, stats

from bikerisk.model import (
    CONTINUOUS_COLUMNS,
    DESIGN_COLUMNS,
    FeatureTable,
    FittedModel,
    ModelError,
    SingularDesignError,
    build_design,
    ci_overlap_table,
    compare_models,
    design_for_model,
    fit_logistic,
    fit_model,
    log_likelihood,
    log_likelihood_gradient,
    p_two_sided,
    predict_matrix,
    predict_risk,
    wald_table,
)


def random_table(rng: np.random.Generator, n: int) -> FeatureTable:
    return FeatureTable(
        speed_limit=rng.normal(40.0, 10.0, n).clip(10.0, 110.0),
        width=rng.normal(8.0, 2.0, n).clip(3.0, 20.0),
        betweenness=rng.uniform(0.0, 0.3, n),
        dist_intersect=rng.exponential(50.0, n),
        hilly=(rng.random(n) < 0.2).astype(float),
        curved=(rng.random(n) < 0.25).astype(float),
        bikelane=(rng.random(n) < 0.35).astype(float),
        y=np.zeros(n),
        dates=["2020-06-15"] * n,
        source_city=["synth"] * n,
        ids=[f"synth-{i}" for i in range(n)],
    )


def table_with_outcomes(rng, n, true_coef):
    table = random_table(rng, n)
    X, _ = build_design(table, scaling="fit")
    p = 1.0 / (1.0 + np.exp(-(X @ true_coef)))
    table.y = (rng.random(n) < p).astype(float)
    if table.y.min() == table.y.max():  # astronomically unlikely, retry shifted
        table.y[0] = 1.0 - table.y[0]
    return table


TRUE_COEF = np.array([-0.4, 0.6, -0.3, 0.25, -0.2, 0.3, 0.15, -0.5, 0.1, -0.2, 0.05])


# --- design matrix -----------------------------------------------------------


def test_design_column_order_fixed():
    assert DESIGN_COLUMNS == (
        "intercept",
        "speed_limit",
        "width",
        "betweenness",
        "dist_intersect",
        "hilly",
        "curved",
        "bikelane",
        "speed_limit:betweenness",
        "speed_limit:bikelane",
        "speed_limit:dist_intersect",
    )


def test_fit_scaling_standardizes_continuous_columns():
    rng = np.random.default_rng(1)
    table = random_table(rng, 500)
    X, moments = build_design(table, scaling="fit")
    assert X.shape == (500, 11)
    assert np.allclose(X[:, 0], 1.0)
    for idx in (1, 2, 3, 4):
        assert abs(X[:, idx].mean()) < 1e-10
        assert abs(X[:, idx].std() - 1.0) < 1e-10
    for name in CONTINUOUS_COLUMNS:
        col = table.raw_column(name)
        assert moments[name]["mean"] == pytest.approx(col.mean())
        assert moments[name]["sd"] == pytest.approx(col.std())


def test_indicators_left_unscaled():
    rng = np.random.default_rng(2)
    table = random_table(rng, 200)
    X, _ = build_design(table, scaling="fit")
    for idx in (5, 6, 7):
        assert set(np.unique(X[:, idx])) <= {0.0, 1.0}


def test_interactions_use_standardized_factors():
    rng = np.random.default_rng(3)
    table = random_table(rng, 200)
    X, _ = build_design(table, scaling="fit")
    assert np.allclose(X[:, 8], X[:, 1] * X[:, 3])
    assert np.allclose(X[:, 9], X[:, 1] * X[:, 7])
    assert np.allclose(X[:, 10], X[:, 1] * X[:, 4])


def test_apply_scaling_replays_training_moments():
    rng = np.random.default_rng(4)
    train = random_table(rng, 300)
    _, moments = build_design(train, scaling="fit")
    test = random_table(rng, 100)
    X, returned = build_design(test, scaling=moments)
    assert returned == moments
    expected = (test.speed_limit - moments["speed_limit"]["mean"]) / moments["speed_limit"]["sd"]
    assert np.allclose(X[:, 1], expected)


def test_none_scaling_is_identity():
    rng = np.random.default_rng(5)
    table = random_table(rng, 50)
    X, moments = build_design(table, scaling="none")
    assert np.allclose(X[:, 1], table.speed_limit)
    assert all(m == {"mean": 0.0, "sd": 1.0} for m in moments.values())


def test_zero_variance_column_recorded_and_passed_through():
    rng = np.random.default_rng(6)
    table = random_table(rng, 80)
    table.width = np.full(80, 7.5)
    X, moments = build_design(table, scaling="fit")
    assert moments["width"]["sd"] == 0.0
    assert np.allclose(X[:, 2], 7.5)


def test_build_design_rejects_unknown_mode_and_partial_scaling():
    rng = np.random.default_rng(7)
    table = random_table(rng, 20)
    with pytest.raises(ModelError):
        build_design(table, scaling="standardize")
    with pytest.raises(ModelError):
        build_design(table, scaling={"speed_limit": {"mean": 0.0, "sd": 1.0}})


# --- fitting -----------------------------------------------------------------


def test_fit_recovers_known_coefficients():
    rng = np.random.default_rng(8)
    table = table_with_outcomes(rng, 20_000, TRUE_COEF)
    model = fit_model(table, "synth")
    assert model.converged
    assert np.max(np.abs(model.coefficients - TRUE_COEF)) < 0.15


def test_fit_matches_scipy_optimizer():
    rng = np.random.default_rng(9)
    table = table_with_outcomes(rng, 2_000, TRUE_COEF)
    X, _ = build_design(table, scaling="fit")
    got = fit_logistic(X, table.y)

    res = optimize.minimize(
        lambda b: -log_likelihood(b, X, table.y),
        np.zeros(11),
        jac=lambda b: -log_likelihood_gradient(b, X, table.y),
        method="BFGS",
        options={"gtol": 1e-10, "maxiter": 500},
    )
    assert np.max(np.abs(got.coefficients - res.x)) < 1e-5


def test_gradient_vanishes_at_optimum():
    rng = np.random.default_rng(10)
    table = table_with_outcomes(rng, 3_000, TRUE_COEF)
    X, _ = build_design(table, scaling="fit")
    result = fit_logistic(X, table.y)
    grad = log_likelihood_gradient(result.coefficients, X, table.y)
    assert np.max(np.abs(grad)) < 1e-6 * len(table)


def test_likelihood_never_below_start():
    rng = np.random.default_rng(11)
    for _ in range(5):
        table = table_with_outcomes(rng, 400, TRUE_COEF)
        X, _ = build_design(table, scaling="fit")
        result = fit_logistic(X, table.y)
        assert result.log_likelihood >= log_likelihood(np.zeros(11), X, table.y)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    for _ in range(5):
        n, k = 60, 4
        X = rng.normal(size=(n, k))
        y = (rng.random(n) < 0.5).astype(float)
        b = rng.normal(scale=0.5, size=k)
        grad = log_likelihood_gradient(b, X, y)
        h = 1e-5
        for j in range(k):
            e = np.zeros(k)
            e[j] = h
            fd = (log_likelihood(b + e, X, y) - log_likelihood(b - e, X, y)) / (2 * h)
            assert grad[j] == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_complete_separation_flagged_not_raised():
    x = np.linspace(-2.0, 2.0, 40)
    X = np.column_stack([np.ones(40), x])
    y = (x > 0).astype(float)
    result = fit_logistic(X, y, columns=("intercept", "x"))
    assert not result.converged
    assert any("separation" in w for w in result.warnings)
    assert np.isfinite(result.coefficients).all()


def test_duplicate_column_reported_as_singular():
    rng = np.random.default_rng(13)
    n = 200
    x = rng.normal(size=n)
    X = np.column_stack([np.ones(n), x, x])
    y = (rng.random(n) < 0.5).astype(float)
    with pytest.raises(SingularDesignError) as err:
        fit_logistic(X, y, columns=("intercept", "a", "a_copy"))
    assert err.value.columns


def test_ridge_rescues_collinear_fit():
    rng = np.random.default_rng(14)
    n = 200
    x = rng.normal(size=n)
    X = np.column_stack([np.ones(n), x, x])
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-x))).astype(float)
    result = fit_logistic(X, y, columns=("intercept", "a", "a_copy"), ridge=1.0)
    assert np.isfinite(result.coefficients).all()
    assert np.isfinite(result.covariance).all()


def test_fit_input_validation():
    X = np.ones((5, 11))
    with pytest.raises(ModelError, match="labels"):
        fit_logistic(X, np.zeros(4))
    with pytest.raises(ModelError, match="cannot fit"):
        fit_logistic(np.ones((5, 11)), np.array([0, 1, 0, 1, 0.0]))
    with pytest.raises(ModelError, match="identical"):
        fit_logistic(np.ones((20, 1)), np.zeros(20), columns=("intercept",))


def test_standard_errors_are_covariance_diagonal():
    rng = np.random.default_rng(25)
    table = table_with_outcomes(rng, 900, TRUE_COEF)
    model = fit_model(table, "synth")
    assert np.allclose(model.standard_errors, np.sqrt(np.diag(model.covariance)), atol=0, rtol=1e-12)
    assert model.covariance.shape == (11, 11)
    assert np.allclose(model.covariance, model.covariance.T)


def test_fit_is_deterministic_and_json_stable():
    rng = np.random.default_rng(15)
    table = table_with_outcomes(rng, 600, TRUE_COEF)
    a = fit_model(table, "synth").to_json()
    b = fit_model(table, "synth").to_json()
    assert a == b


def test_model_json_round_trip():
    rng = np.random.default_rng(16)
    table = table_with_outcomes(rng, 600, TRUE_COEF)
    model = fit_model(table, "synth")
    restored = FittedModel.from_json(model.to_json())
    assert restored.city == model.city
    assert restored.columns == model.columns
    assert np.array_equal(restored.coefficients, model.coefficients)
    assert np.array_equal(restored.covariance, model.covariance)
    assert restored.scaling == model.scaling
    assert restored.train_window == model.train_window
    assert restored.n_train == model.n_train
    assert restored.log_likelihood == model.log_likelihood


def test_model_json_field_set():
    rng = np.random.default_rng(17)
    table = table_with_outcomes(rng, 300, TRUE_COEF)
    doc = json.loads(fit_model(table, "synth").to_json())
    assert sorted(doc) == [
        "city",
        "coefficients",
        "columns",
        "converged",
        "covariance",
        "log_likelihood",
        "n_train",
        "scaling",
        "standard_errors",
        "train_window",
    ]
    assert len(doc["covariance"]) == 121


def test_model_json_missing_field_rejected():
    rng = np.random.default_rng(18)
    table = table_with_outcomes(rng, 300, TRUE_COEF)
    doc = json.loads(fit_model(table, "synth").to_json())
    del doc["covariance"]
    with pytest.raises(ModelError, match="missing"):
        FittedModel.from_json(json.dumps(doc))


def test_train_window_from_dates():
    rng = np.random.default_rng(19)
    table = table_with_outcomes(rng, 300, TRUE_COEF)
    table.dates = ["2018-03-01"] + ["2020-06-15"] * 298 + ["2021-11-30"]
    model = fit_model(table, "synth")
    assert model.train_window == {"from": "2018-03-01", "to": "2021-11-30"}


# --- prediction --------------------------------------------------------------


def test_predict_risk_hand_computed():
    model = FittedModel(
        city="t",
        columns=DESIGN_COLUMNS,
        coefficients=np.array([0.2, 0.5, 0, 0, 0, 0, 0, -0.7, 0, 0.3, 0.0]),
        standard_errors=np.ones(11),
        covariance=np.eye(11),
        scaling={
            "speed_limit": {"mean": 40.0, "sd": 10.0},
            "width": {"mean": 8.0, "sd": 2.0},
            "betweenness": {"mean": 0.1, "sd": 0.05},
            "dist_intersect": {"mean": 50.0, "sd": 25.0},
        },
        train_window={"from": None, "to": None},
        n_train=10,
        converged=True,
        log_likelihood=-5.0,
    )
    feats = {
        "speed_limit": 50.0,
        "width": 8.0,
        "betweenness": 0.1,
        "dist_intersect": 50.0,
        "hilly": 0,
        "curved": 0,
        "bikelane": 1,
    }
    # standardized speed = 1.0; eta = 0.2 + 0.5 - 0.7 + 0.3*1*1 = 0.3
    assert predict_risk(model, feats) == pytest.approx(1.0 / (1.0 + math.exp(-0.3)), abs=1e-12)


def test_predict_risk_agrees_with_design_path():
    rng = np.random.default_rng(20)
    table = table_with_outcomes(rng, 500, TRUE_COEF)
    model = fit_model(table, "synth")
    X = design_for_model(model, table)
    bulk = predict_matrix(model, X)
    for i in (0, 7, 123):
        feats = {
            "speed_limit": table.speed_limit[i],
            "width": table.width[i],
            "betweenness": table.betweenness[i],
            "dist_intersect": table.dist_intersect[i],
            "hilly": table.hilly[i],
            "curved": table.curved[i],
            "bikelane": table.bikelane[i],
        }
        assert predict_risk(model, feats) == pytest.approx(bulk[i], abs=1e-12)


def test_predict_matrix_rejects_wrong_width():
    rng = np.random.default_rng(21)
    table = table_with_outcomes(rng, 100, TRUE_COEF)
    model = fit_model(table, "synth")
    with pytest.raises(ModelError, match="columns"):
        predict_matrix(model, np.ones((5, 7)))


# --- inference ---------------------------------------------------------------


def test_p_two_sided_against_scipy():
    for z in (-3.2, -1.632, -0.5, 0.0, 0.7, 1.959964, 4.1):
        expected = 2.0 * stats.norm.sf(abs(z))
        assert p_two_sided(z) == pytest.approx(expected, abs=1e-12)


def test_p_value_fixture_at_95_boundary():
    assert p_two_sided(1.959964) == pytest.approx(0.05, abs=1e-6)
    assert p_two_sided(0.0) == 1.0


def test_wald_table_shape_and_ci():
    rng = np.random.default_rng(22)
    table = table_with_outcomes(rng, 800, TRUE_COEF)
    model = fit_model(table, "synth")
    rows = wald_table(model)
    assert [r["column"] for r in rows] == list(DESIGN_COLUMNS)
    for r, se, b in zip(rows, model.standard_errors, model.coefficients):
        assert r["ci_high"] - r["ci_low"] == pytest.approx(2 * 1.959964 * se)
        assert r["z"] == pytest.approx(b / se)
        assert 0.0 <= r["p"] <= 1.0


def test_compare_model_with_itself_is_all_zero():
    rng = np.random.default_rng(23)
    table = table_with_outcomes(rng, 500, TRUE_COEF)
    model = fit_model(table, "synth")
    rows = compare_models(model, model)
    assert all(r["z"] == 0.0 for r in rows)
    assert all(r["p"] == 1.0 for r in rows)
    assert all(r["no_detectable_difference"] for r in rows)


def test_compare_models_z_formula():
    rng = np.random.default_rng(24)
    t1 = table_with_outcomes(rng, 700, TRUE_COEF)
    t2 = table_with_outcomes(rng, 700, TRUE_COEF * 0.5)
    a, b = fit_model(t1, "a"), fit_model(t2, "b")
    rows = compare_models(a, b)
    for i, r in enumerate(rows):
        diff = a.coefficients[i] - b.coefficients[i]
        se = math.sqrt(a.standard_errors[i] ** 2 + b.standard_errors[i] ** 2)
        assert r["difference"] == pytest.approx(diff)
        if diff != 0.0:
            assert r["z"] == pytest.approx(diff / se)
        assert r["no_detectable_difference"] == (r["p"] >= 0.05)


def test_ci_overlap_table_cases():
    base = dict(
        columns=("intercept",),
        covariance=np.eye(1),
        scaling={},
        train_window={"from": None, "to": None},
        n_train=10,
        converged=True,
        log_likelihood=0.0,
    )
    m1 = FittedModel(
        city="a", coefficients=np.array([0.0]), standard_errors=np.array([0.1]), **base
    )
    m2 = FittedModel(
        city="b", coefficients=np.array([0.3]), standard_errors=np.array([0.1]), **base
    )
    m3 = FittedModel(
        city="c", coefficients=np.array([5.0]), standard_errors=np.array([0.1]), **base
    )
    assert ci_overlap_table(m1, m2)[0]["overlap"] is True
    assert ci_overlap_table(m1, m3)[0]["overlap"] is False


def test_compare_requires_same_columns():
    base = dict(
        covariance=np.eye(1),
        scaling={},
        train_window={"from": None, "to": None},
        n_train=10,
        converged=True,
        log_likelihood=0.0,
    )
    m1 = FittedModel(
        city="a",
        columns=("intercept",),
        coefficients=np.array([0.0]),
        standard_errors=np.array([0.1]),
        **base,
    )
    m2 = FittedModel(
        city="b",
        columns=("slope",),
        coefficients=np.array([0.0]),
        standard_errors=np.array([0.1]),
        **base,
    )
    with pytest.raises(ModelError):
        compare_models(m1, m2)


# --- feature table io --------------------------------------------------------


def test_feature_table_csv_round_trip(city_tables):
    table = city_tables["london"]
    restored = FeatureTable.from_csv(table.to_csv())
    assert np.array_equal(restored.speed_limit, table.speed_limit)
    assert np.array_equal(restored.betweenness, table.betweenness)
    assert np.array_equal(restored.y, table.y)
    assert restored.ids == table.ids
    assert restored.dates == table.dates
    assert restored.edge_ids == table.edge_ids


def test_feature_table_missing_column():
    with pytest.raises(ModelError, match="missing columns"):
        FeatureTable.from_csv("id,lat\nx,1\n")


def test_feature_table_bad_indicator():
    header = (
        "id,source_city,date,lat,lon,edge_id,speed_limit,width,betweenness,"
        "dist_intersect,hilly,curved,bikelane,y"
    )
    row = "a,c,2020-01-01,51.5,-0.1,e1,30,7,0.1,20,2,0,0,1"
    with pytest.raises(ModelError, match="0/1"):
        FeatureTable.from_csv(f"{header}\n{row}\n")


def test_filter_dates_inclusive(city_tables):
    table = city_tables["london"]
    kept = table.filter_dates("2020-01-01", "2021-12-31")
    assert len(kept) > 0
    assert all("2020-01-01" <= d <= "2021-12-31" for d in kept.dates)
    with pytest.raises(ModelError):
        table.filter_dates("2099-01-01", None)
