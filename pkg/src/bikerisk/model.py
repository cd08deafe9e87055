"""Severity model: design matrix, logistic fit, and Wald inference.

The response is binary (1 = severe outcome). The linear predictor uses a
fixed column order so fitted coefficient vectors are comparable across
cities, with interaction terms formed after standardization:

    intercept, speed_limit, width, betweenness, dist_intersect,
    hilly, curved, bikelane,
    speed_limit:betweenness, speed_limit:bikelane, speed_limit:dist_intersect

Continuous features are standardized to zero mean and unit variance using
moments from the training rows; the moments are stored with the model so the
same transform can be replayed on new data. Indicator features stay 0/1.

Fitting is iteratively reweighted least squares (Newton-Raphson on the
log-likelihood) with step halving, which keeps the likelihood monotone.
Standard errors come from the inverse observed information at the optimum.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

DESIGN_COLUMNS = (
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

CONTINUOUS_COLUMNS = ("speed_limit", "width", "betweenness", "dist_intersect")
INDICATOR_COLUMNS = ("hilly", "curved", "bikelane")

# Raw per-accident feature table layout (unstandardized, as written by the
# feature extraction step).
FEATURE_CSV_COLUMNS = (
    "id",
    "source_city",
    "date",
    "lat",
    "lon",
    "edge_id",
    "speed_limit",
    "width",
    "betweenness",
    "dist_intersect",
    "hilly",
    "curved",
    "bikelane",
    "y",
)

MAX_ITER = 100
STEP_TOL = 1e-8
Z_95 = 1.959964  # two-sided 95% normal quantile

__all__ = [
    "DESIGN_COLUMNS",
    "CONTINUOUS_COLUMNS",
    "FEATURE_CSV_COLUMNS",
    "FeatureTable",
    "FittedModel",
    "ModelError",
    "SingularDesignError",
    "build_design",
    "build_feature_table",
    "fit_logistic",
    "fit_model",
    "design_for_model",
    "predict_matrix",
    "predict_risk",
    "log_likelihood",
    "log_likelihood_gradient",
    "p_two_sided",
    "wald_table",
    "compare_models",
    "ci_overlap_table",
]


class ModelError(Exception):
    pass


class SingularDesignError(ModelError):
    def __init__(self, columns: list[str]):
        self.columns = columns
        super().__init__(
            "design matrix is singular; offending columns: " + ", ".join(columns)
        )


@dataclass
class FeatureTable:
    """Raw (unstandardized) per-accident features plus labels and row metadata."""

    speed_limit: np.ndarray
    width: np.ndarray
    betweenness: np.ndarray
    dist_intersect: np.ndarray
    hilly: np.ndarray
    curved: np.ndarray
    bikelane: np.ndarray
    y: np.ndarray
    ids: list[str] = field(default_factory=list)
    source_city: list[str] = field(default_factory=list)
    dates: list[str] = field(default_factory=list)
    lats: list[float] = field(default_factory=list)
    lons: list[float] = field(default_factory=list)
    edge_ids: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.y.shape[0])

    def raw_column(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FEATURE_CSV_COLUMNS)
        n = len(self)
        for i in range(n):
            w.writerow(
                [
                    self.ids[i] if self.ids else "",
                    self.source_city[i] if self.source_city else "",
                    self.dates[i] if self.dates else "",
                    repr(self.lats[i]) if self.lats else "",
                    repr(self.lons[i]) if self.lons else "",
                    self.edge_ids[i] if self.edge_ids else "",
                    repr(float(self.speed_limit[i])),
                    repr(float(self.width[i])),
                    repr(float(self.betweenness[i])),
                    repr(float(self.dist_intersect[i])),
                    int(self.hilly[i]),
                    int(self.curved[i]),
                    int(self.bikelane[i]),
                    int(self.y[i]),
                ]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FeatureTable":
        reader = csv.DictReader(io.StringIO(text))
        missing = [c for c in FEATURE_CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ModelError(f"feature table is missing columns: {', '.join(missing)}")
        rows = list(reader)
        if not rows:
            raise ModelError("feature table has no rows")

        def floats(col: str) -> np.ndarray:
            return np.array([float(r[col]) for r in rows], dtype=float)

        def indicators(col: str) -> np.ndarray:
            out = []
            for r in rows:
                v = r[col].strip()
                if v not in ("0", "1"):
                    raise ModelError(f"column {col} must be 0/1, got {v!r}")
                out.append(int(v))
            return np.array(out, dtype=float)

        return cls(
            speed_limit=floats("speed_limit"),
            width=floats("width"),
            betweenness=floats("betweenness"),
            dist_intersect=floats("dist_intersect"),
            hilly=indicators("hilly"),
            curved=indicators("curved"),
            bikelane=indicators("bikelane"),
            y=indicators("y"),
            ids=[r["id"] for r in rows],
            source_city=[r["source_city"] for r in rows],
            dates=[r["date"] for r in rows],
            lats=[float(r["lat"]) if r["lat"] else math.nan for r in rows],
            lons=[float(r["lon"]) if r["lon"] else math.nan for r in rows],
            edge_ids=[r["edge_id"] for r in rows],
        )

    def filter_dates(self, date_from: str | None, date_to: str | None) -> "FeatureTable":
        """Keep rows with date_from <= date <= date_to (ISO dates compare lexically)."""
        keep = [
            i
            for i, d in enumerate(self.dates)
            if (date_from is None or d >= date_from) and (date_to is None or d <= date_to)
        ]
        if not keep:
            raise ModelError("date filter left no rows")
        idx = np.array(keep, dtype=int)
        return FeatureTable(
            speed_limit=self.speed_limit[idx],
            width=self.width[idx],
            betweenness=self.betweenness[idx],
            dist_intersect=self.dist_intersect[idx],
            hilly=self.hilly[idx],
            curved=self.curved[idx],
            bikelane=self.bikelane[idx],
            y=self.y[idx],
            ids=[self.ids[i] for i in keep],
            source_city=[self.source_city[i] for i in keep],
            dates=[self.dates[i] for i in keep],
            lats=[self.lats[i] for i in keep],
            lons=[self.lons[i] for i in keep],
            edge_ids=[self.edge_ids[i] for i in keep],
        )


def build_feature_table(records, graph, betweenness, snap_radius_m: float | None = None):
    """Snap accident records to the graph and extract raw model features.

    Records beyond the snap radius are dropped. Returns (table, n_dropped);
    raises ModelError when nothing snaps.
    """
    from .graph import DEFAULT_SNAP_RADIUS_M, SnapError, nearest_edge, segment_features

    radius = DEFAULT_SNAP_RADIUS_M if snap_radius_m is None else snap_radius_m
    rows = []
    dropped = 0
    for rec in records:
        try:
            snap = nearest_edge(graph, rec.lat, rec.lon, radius)
        except SnapError:
            dropped += 1
            continue
        feats = segment_features(graph, betweenness, snap.edge_id, snap.point)
        rows.append((rec, snap, feats))
    if not rows:
        raise ModelError("no accident record could be snapped to the graph")
    table = FeatureTable(
        speed_limit=np.array([f.speed_limit_kmh for _, _, f in rows]),
        width=np.array([f.width_m for _, _, f in rows]),
        betweenness=np.array([f.betweenness for _, _, f in rows]),
        dist_intersect=np.array([f.dist_intersect_m for _, _, f in rows]),
        hilly=np.array([float(f.hilly) for _, _, f in rows]),
        curved=np.array([float(f.curved) for _, _, f in rows]),
        bikelane=np.array([float(f.bikelane) for _, _, f in rows]),
        y=np.array([1.0 if r.severe else 0.0 for r, _, _ in rows]),
        ids=[r.id for r, _, _ in rows],
        source_city=[r.source_city for r, _, _ in rows],
        dates=[r.when.isoformat() for r, _, _ in rows],
        lats=[r.lat for r, _, _ in rows],
        lons=[r.lon for r, _, _ in rows],
        edge_ids=[s.edge_id for _, s, _ in rows],
    )
    return table, dropped


Scaling = dict[str, dict[str, float]]


def _standardize(col: np.ndarray, mean: float, sd: float) -> np.ndarray:
    if sd == 0.0:
        # Degenerate column (no variance in training data): left untouched so
        # the fit can flag the resulting collinearity instead of dividing by 0.
        return col - 0.0
    return (col - mean) / sd


def build_design(
    table: FeatureTable, scaling: Scaling | str = "fit"
) -> tuple[np.ndarray, Scaling]:
    """Assemble the fixed 11-column design matrix.

    scaling="fit" computes standardization moments from `table` and returns
    them; a dict replays previously stored moments; "none" leaves continuous
    features raw (identity moments are still recorded so downstream scoring
    is uniform). Interactions multiply the already-standardized columns.
    """
    if isinstance(scaling, str):
        if scaling == "fit":
            moments: Scaling = {}
            for name in CONTINUOUS_COLUMNS:
                col = table.raw_column(name)
                mean = float(np.mean(col))
                sd = float(np.std(col))
                moments[name] = {"mean": mean, "sd": sd}
        elif scaling == "none":
            moments = {name: {"mean": 0.0, "sd": 1.0} for name in CONTINUOUS_COLUMNS}
        else:
            raise ModelError(f"unknown scaling mode {scaling!r}")
    else:
        moments = scaling
        missing = [c for c in CONTINUOUS_COLUMNS if c not in moments]
        if missing:
            raise ModelError(f"scaling metadata missing columns: {', '.join(missing)}")

    n = len(table)
    std = {
        name: _standardize(table.raw_column(name), moments[name]["mean"], moments[name]["sd"])
        for name in CONTINUOUS_COLUMNS
    }
    cols = {
        "intercept": np.ones(n),
        "speed_limit": std["speed_limit"],
        "width": std["width"],
        "betweenness": std["betweenness"],
        "dist_intersect": std["dist_intersect"],
        "hilly": table.hilly.astype(float),
        "curved": table.curved.astype(float),
        "bikelane": table.bikelane.astype(float),
        "speed_limit:betweenness": std["speed_limit"] * std["betweenness"],
        "speed_limit:bikelane": std["speed_limit"] * table.bikelane,
        "speed_limit:dist_intersect": std["speed_limit"] * std["dist_intersect"],
    }
    X = np.column_stack([cols[c] for c in DESIGN_COLUMNS])
    return X, moments


def design_csv(X: np.ndarray, y: np.ndarray | None = None) -> str:
    """Standardized design matrix as CSV, optionally with the label column."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = list(DESIGN_COLUMNS) + (["y"] if y is not None else [])
    w.writerow(header)
    for i in range(X.shape[0]):
        row = [repr(float(v)) for v in X[i]]
        if y is not None:
            row.append(int(y[i]))
        w.writerow(row)
    return buf.getvalue()


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(eta, -700.0, 700.0)))


def log_likelihood(coef: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    """Bernoulli log-likelihood, computed without overflow for any eta."""
    eta = X @ coef
    # y*eta - log(1 + exp(eta)), with the softplus evaluated stably.
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def log_likelihood_gradient(coef: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    return X.T @ (y - _sigmoid(X @ coef))


def _collinear_columns(X: np.ndarray, columns: tuple[str, ...]) -> list[str]:
    """Names of columns implicated in a rank deficiency, via QR diagonal."""
    _, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    tol = max(X.shape) * np.finfo(float).eps * (diag.max() if diag.size else 1.0)
    return [columns[i] for i in range(len(columns)) if diag[i] <= tol]


@dataclass
class FitResult:
    coefficients: np.ndarray
    covariance: np.ndarray
    converged: bool
    log_likelihood: float
    n_iter: int
    warnings: list[str]


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    columns: tuple[str, ...] = DESIGN_COLUMNS,
    ridge: float = 0.0,
) -> FitResult:
    """Newton-Raphson logistic fit with step halving.

    Starts from the zero vector and stops when the largest coefficient step
    falls below 1e-8 or after 100 iterations. Step halving enforces a
    monotone (penalized) log-likelihood. With ridge > 0 an L2 penalty on
    every coefficient except the intercept regularizes near-singular fits.

    Raises SingularDesignError when the information matrix cannot be solved,
    naming the collinear columns. Complete separation is detected (all
    fitted probabilities at their labels) and reported via `converged=False`
    plus a warning rather than an exception.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if y.shape[0] != n:
        raise ModelError(f"{n} design rows but {y.shape[0]} labels")
    if n < k:
        raise ModelError(f"cannot fit {k} coefficients from {n} rows")
    if float(y.min()) == float(y.max()):
        raise ModelError("labels are all identical; both outcome classes are required")

    penalty = np.full(k, ridge)
    if columns and columns[0] == "intercept":
        penalty[0] = 0.0

    def pen_ll(c: np.ndarray) -> float:
        return log_likelihood(c, X, y) - 0.5 * float(penalty @ (c * c))

    coef = np.zeros(k)
    ll = pen_ll(coef)
    warnings: list[str] = []
    converged = False
    n_iter = 0

    for n_iter in range(1, MAX_ITER + 1):
        p = _sigmoid(X @ coef)
        w = np.maximum(p * (1.0 - p), 1e-12)
        grad = X.T @ (y - p) - penalty * coef
        info = (X * w[:, None]).T @ X + np.diag(penalty)
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            raise SingularDesignError(_collinear_columns(X * np.sqrt(w)[:, None], columns))

        new_coef = coef + step
        new_ll = pen_ll(new_coef)
        halvings = 0
        while new_ll < ll and halvings < 40:
            step = step * 0.5
            new_coef = coef + step
            new_ll = pen_ll(new_coef)
            halvings += 1

        max_step = float(np.max(np.abs(new_coef - coef)))
        coef, ll = new_coef, new_ll
        if max_step < STEP_TOL:
            converged = True
            break
        p_now = _sigmoid(X @ coef)
        if bool(np.all(np.abs(y - p_now) < 1e-7)):
            warnings.append(
                "complete separation: fitted probabilities reached the labels, "
                "estimates diverge; returning the last iterate"
            )
            break

    if not converged and not warnings:
        warnings.append(f"did not converge within {MAX_ITER} iterations")

    p = _sigmoid(X @ coef)
    w = np.maximum(p * (1.0 - p), 1e-12)
    info = (X * w[:, None]).T @ X + np.diag(penalty)
    try:
        covariance = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise SingularDesignError(_collinear_columns(X * np.sqrt(w)[:, None], columns))

    return FitResult(
        coefficients=coef,
        covariance=covariance,
        converged=converged,
        log_likelihood=log_likelihood(coef, X, y),
        n_iter=n_iter,
        warnings=warnings,
    )


@dataclass
class FittedModel:
    city: str
    columns: tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    covariance: np.ndarray
    scaling: Scaling
    train_window: dict[str, str | None]
    n_train: int
    converged: bool
    log_likelihood: float
    warnings: list[str] = field(default_factory=list)
    ridge: float = 0.0

    def to_json(self) -> str:
        doc = {
            "city": self.city,
            "columns": list(self.columns),
            "coefficients": [float(v) for v in self.coefficients],
            "standard_errors": [float(v) for v in self.standard_errors],
            "covariance": [float(v) for v in self.covariance.reshape(-1)],
            "scaling": self.scaling,
            "train_window": self.train_window,
            "n_train": self.n_train,
            "converged": self.converged,
            "log_likelihood": self.log_likelihood,
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "FittedModel":
        doc = json.loads(text)
        required = [
            "city",
            "columns",
            "coefficients",
            "standard_errors",
            "covariance",
            "scaling",
            "train_window",
            "n_train",
            "converged",
            "log_likelihood",
        ]
        missing = [f for f in required if f not in doc]
        if missing:
            raise ModelError(f"model file is missing fields: {', '.join(missing)}")
        columns = tuple(doc["columns"])
        k = len(columns)
        cov = np.array(doc["covariance"], dtype=float)
        if cov.shape[0] != k * k:
            raise ModelError(f"covariance has {cov.shape[0]} entries, expected {k * k}")
        return cls(
            city=doc["city"],
            columns=columns,
            coefficients=np.array(doc["coefficients"], dtype=float),
            standard_errors=np.array(doc["standard_errors"], dtype=float),
            covariance=cov.reshape(k, k),
            scaling=doc["scaling"],
            train_window=doc["train_window"],
            n_train=int(doc["n_train"]),
            converged=bool(doc["converged"]),
            log_likelihood=float(doc["log_likelihood"]),
        )

    def ci95(self) -> list[tuple[float, float]]:
        return [
            (float(b - Z_95 * se), float(b + Z_95 * se))
            for b, se in zip(self.coefficients, self.standard_errors)
        ]


def fit_model(
    table: FeatureTable,
    city: str,
    train_window: dict[str, str | None] | None = None,
    scaling_mode: str = "fit",
    ridge: float = 0.0,
) -> FittedModel:
    X, moments = build_design(table, scaling=scaling_mode)
    zero_sd = [c for c in CONTINUOUS_COLUMNS if moments[c]["sd"] == 0.0]
    result = fit_logistic(X, table.y, DESIGN_COLUMNS, ridge=ridge)
    warnings = list(result.warnings)
    if zero_sd:
        warnings.append("zero variance in training data for: " + ", ".join(zero_sd))
    if train_window is None:
        dates = [d for d in table.dates if d]
        train_window = {
            "from": min(dates) if dates else None,
            "to": max(dates) if dates else None,
        }
    return FittedModel(
        city=city,
        columns=DESIGN_COLUMNS,
        coefficients=result.coefficients,
        standard_errors=np.sqrt(np.diag(result.covariance)),
        covariance=result.covariance,
        scaling=moments,
        train_window=train_window,
        n_train=len(table),
        converged=result.converged,
        log_likelihood=result.log_likelihood,
        warnings=warnings,
        ridge=ridge,
    )


def design_for_model(model: FittedModel, table: FeatureTable) -> np.ndarray:
    """Design matrix for new raw rows using the model's stored standardization."""
    X, _ = build_design(table, scaling=model.scaling)
    return X


def predict_matrix(model: FittedModel, X: np.ndarray) -> np.ndarray:
    if X.shape[1] != len(model.columns):
        raise ModelError(
            f"design has {X.shape[1]} columns, model expects {len(model.columns)}"
        )
    return _sigmoid(X @ model.coefficients)


def predict_risk(model: FittedModel, features: dict[str, float]) -> float:
    """Severity probability for one segment given raw feature values.

    `features` carries speed_limit, width, betweenness, dist_intersect,
    hilly, curved, bikelane in raw units; standardization and interactions
    are applied here.
    """
    std = {}
    for name in CONTINUOUS_COLUMNS:
        m = model.scaling[name]
        v = float(features[name])
        std[name] = v - m["mean"] if m["sd"] == 0.0 else (v - m["mean"]) / m["sd"]
    bikelane = float(features["bikelane"])
    values = {
        "intercept": 1.0,
        "speed_limit": std["speed_limit"],
        "width": std["width"],
        "betweenness": std["betweenness"],
        "dist_intersect": std["dist_intersect"],
        "hilly": float(features["hilly"]),
        "curved": float(features["curved"]),
        "bikelane": bikelane,
        "speed_limit:betweenness": std["speed_limit"] * std["betweenness"],
        "speed_limit:bikelane": std["speed_limit"] * bikelane,
        "speed_limit:dist_intersect": std["speed_limit"] * std["dist_intersect"],
    }
    eta = sum(float(b) * values[c] for c, b in zip(model.columns, model.coefficients))
    return float(_sigmoid(np.array([eta]))[0])


def p_two_sided(z: float) -> float:
    """Two-sided normal tail probability for a z statistic."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def wald_table(model: FittedModel) -> list[dict[str, object]]:
    """Per-coefficient estimate, SE, 95% CI, z, and two-sided p."""
    rows = []
    for i, name in enumerate(model.columns):
        b = float(model.coefficients[i])
        se = float(model.standard_errors[i])
        z = b / se if se > 0.0 else 0.0
        rows.append(
            {
                "column": name,
                "estimate": b,
                "se": se,
                "ci_low": b - Z_95 * se,
                "ci_high": b + Z_95 * se,
                "z": z,
                "p": p_two_sided(z),
            }
        )
    return rows


def compare_models(a: FittedModel, b: FittedModel) -> list[dict[str, object]]:
    """Column-wise coefficient comparison between independently fitted models.

    z = (b_a - b_b) / sqrt(se_a^2 + se_b^2). Identical estimates give z = 0
    exactly (the ratio is not evaluated). p >= 0.05 is summarized as no
    detectable difference.
    """
    if a.columns != b.columns:
        raise ModelError("models have different column layouts and cannot be compared")
    rows = []
    for i, name in enumerate(a.columns):
        ba, bb = float(a.coefficients[i]), float(b.coefficients[i])
        sea, seb = float(a.standard_errors[i]), float(b.standard_errors[i])
        diff = ba - bb
        if diff == 0.0:
            z = 0.0
        else:
            z = diff / math.sqrt(sea * sea + seb * seb)
        p = p_two_sided(z)
        rows.append(
            {
                "column": name,
                "estimate_a": ba,
                "estimate_b": bb,
                "difference": diff,
                "z": z,
                "p": p,
                "no_detectable_difference": p >= 0.05,
            }
        )
    return rows


def ci_overlap_table(a: FittedModel, b: FittedModel) -> list[dict[str, object]]:
    """Whether the 95% confidence intervals overlap, per column."""
    if a.columns != b.columns:
        raise ModelError("models have different column layouts and cannot be compared")
    rows = []
    for i, name in enumerate(a.columns):
        lo_a, hi_a = (
            float(a.coefficients[i] - Z_95 * a.standard_errors[i]),
            float(a.coefficients[i] + Z_95 * a.standard_errors[i]),
        )
        lo_b, hi_b = (
            float(b.coefficients[i] - Z_95 * b.standard_errors[i]),
            float(b.coefficients[i] + Z_95 * b.standard_errors[i]),
        )
        rows.append(
            {
                "column": name,
                "interval_a": [lo_a, hi_a],
                "interval_b": [lo_b, hi_b],
                "overlap": lo_a <= hi_b and lo_b <= hi_a,
            }
        )
    return rows
