"""HTTP scoring service.

Loads a street graph, betweenness values, and one or more fitted models at
startup, then serves point scores, per-segment layers, and what-if scenario
comparisons. Handlers are plain synchronous functions (the framework runs
them on a worker thread pool) and every error body has the same shape:

    {"status": <http code>, "reason": <human-readable message>}

Numbers are serialized at full double precision; any rounding for display
is the client's concern.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI, Query
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import __version__, geo
from .betweenness import BetweennessResult
from .graph import (
    DEFAULT_SNAP_RADIUS_M,
    SnapError,
    StreetGraph,
    nearest_edge,
    segment_features,
)
from .model import FittedModel, predict_risk
from .scenario import (
    EditError,
    ScenarioError,
    compare_scenarios,
    parse_edits,
    render_percent,
    result_to_geojson,
)

__all__ = ["ServiceConfig", "ServiceState", "load_state", "create_app"]


@dataclass
class ServiceConfig:
    graph: str
    betweenness: str
    models: list[str]
    snap_radius_m: float = DEFAULT_SNAP_RADIUS_M
    cors_origins: list[str] = field(default_factory=list)
    host: str = "127.0.0.1"
    port: int = 8000

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        doc = json.loads(Path(path).read_text())
        unknown = set(doc) - {
            "graph",
            "betweenness",
            "models",
            "snap_radius_m",
            "cors_origins",
            "host",
            "port",
        }
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        missing = [k for k in ("graph", "betweenness", "models") if k not in doc]
        if missing:
            raise ValueError(f"config missing keys: {', '.join(missing)}")
        base = Path(path).resolve().parent

        def rel(p: str) -> str:
            return str(p) if Path(p).is_absolute() else str(base / p)

        return cls(
            graph=rel(doc["graph"]),
            betweenness=rel(doc["betweenness"]),
            models=[rel(m) for m in doc["models"]],
            snap_radius_m=float(doc.get("snap_radius_m", DEFAULT_SNAP_RADIUS_M)),
            cors_origins=list(doc.get("cors_origins", [])),
            host=doc.get("host", "127.0.0.1"),
            port=int(doc.get("port", 8000)),
        )


@dataclass
class ServiceState:
    graph: StreetGraph
    betweenness: BetweennessResult
    models: dict[str, FittedModel]
    snap_radius_m: float
    cors_origins: list[str]
    graph_id: str


def load_state(config: ServiceConfig) -> ServiceState:
    graph_text = Path(config.graph).read_text()
    graph = StreetGraph.from_json(graph_text)
    betweenness = BetweennessResult.from_csv(Path(config.betweenness).read_text())
    models: dict[str, FittedModel] = {}
    for mp in config.models:
        model = FittedModel.from_json(Path(mp).read_text())
        if model.city in models:
            raise ValueError(f"two models share the key {model.city!r}")
        models[model.city] = model
    graph_id = hashlib.sha256(graph_text.encode()).hexdigest()[:12]
    return ServiceState(
        graph=graph,
        betweenness=betweenness,
        models=models,
        snap_radius_m=config.snap_radius_m,
        cors_origins=config.cors_origins,
        graph_id=graph_id,
    )


def _error(status: int, reason: str) -> JSONResponse:
    return JSONResponse({"status": status, "reason": reason}, status_code=status)


def _parse_bbox(raw: str) -> tuple[float, float, float, float]:
    parts = raw.split(",")
    if len(parts) != 4:
        raise ValueError("bbox must be 'minlon,minlat,maxlon,maxlat'")
    try:
        minlon, minlat, maxlon, maxlat = (float(p) for p in parts)
    except ValueError:
        raise ValueError("bbox values must be numbers")
    if minlon > maxlon or minlat > maxlat:
        raise ValueError("bbox min corner must not exceed max corner")
    return (minlon, minlat, maxlon, maxlat)


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="bikerisk", version=__version__)
    if state.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=state.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(StarletteHTTPException)
    def http_exception(request, exc):
        return _error(exc.status_code, str(exc.detail))

    @app.exception_handler(RequestValidationError)
    def validation_exception(request, exc):
        first = exc.errors()[0] if exc.errors() else {}
        loc = ".".join(str(p) for p in first.get("loc", ()))
        msg = first.get("msg", "invalid request")
        return _error(422, f"{loc}: {msg}" if loc else msg)

    def _model_or_none(key: str) -> FittedModel | None:
        return state.models.get(key)

    @app.get("/v1/models")
    def list_models():
        out = []
        for key in sorted(state.models):
            m = state.models[key]
            out.append(
                {
                    "city": m.city,
                    "columns": list(m.columns),
                    "coefficients": [float(v) for v in m.coefficients],
                    "standard_errors": [float(v) for v in m.standard_errors],
                    "ci95": [[lo, hi] for lo, hi in m.ci95()],
                    "train_window": m.train_window,
                }
            )
        return out

    @app.get("/v1/score")
    def score(lat: float = Query(...), lon: float = Query(...), model: str = Query(...)):
        m = _model_or_none(model)
        if m is None:
            return _error(404, f"unknown model {model!r}")
        try:
            snap = nearest_edge(state.graph, lat, lon, state.snap_radius_m)
        except SnapError as exc:
            return _error(422, str(exc))
        feats = segment_features(state.graph, state.betweenness, snap.edge_id, snap.point)
        risk = predict_risk(m, feats.as_dict())
        return {
            "model": model,
            "graph_id": state.graph_id,
            "edge_id": snap.edge_id,
            "snapped": {"lon": snap.point[0], "lat": snap.point[1]},
            "snap_distance_m": snap.distance_m,
            "features": feats.as_dict(),
            "risk": risk,
            "safety": 1.0 - risk,
        }

    @app.get("/v1/segments")
    def segments(bbox: str = Query(...), model: str = Query(...)):
        m = _model_or_none(model)
        if m is None:
            return _error(404, f"unknown model {model!r}")
        try:
            box = _parse_bbox(bbox)
        except ValueError as exc:
            return _error(422, str(exc))
        features = []
        for eid in sorted(state.graph.edges):
            edge = state.graph.edges[eid]
            if not geo.polyline_intersects_bbox(edge.geometry, box):
                continue
            feats = segment_features(state.graph, state.betweenness, eid, edge.midpoint())
            risk = predict_risk(m, feats.as_dict())
            features.append(
                {
                    "type": "Feature",
                    "geometry": {
                        "type": "LineString",
                        "coordinates": [[p[0], p[1]] for p in edge.geometry],
                    },
                    "properties": {
                        "edge_id": eid,
                        "highway": edge.highway,
                        "length_m": edge.length_m,
                        "features": feats.as_dict(),
                        "risk_midpoint": risk,
                        "safety_midpoint": 1.0 - risk,
                    },
                }
            )
        return {
            "type": "FeatureCollection",
            "model": model,
            "graph_id": state.graph_id,
            "features": features,
        }

    @app.post("/v1/scenario")
    def scenario(payload: dict = Body(...)):
        model_key = payload.get("model")
        if not isinstance(model_key, str):
            return _error(400, "body must include a 'model' string")
        m = _model_or_none(model_key)
        if m is None:
            return _error(404, f"unknown model {model_key!r}")
        region_raw = payload.get("region")
        if not isinstance(region_raw, list) or len(region_raw) < 3:
            return _error(400, "region must be a polygon of at least 3 [lon, lat] pairs")
        try:
            region = tuple((float(p[0]), float(p[1])) for p in region_raw)
        except (TypeError, ValueError, IndexError):
            return _error(400, "region vertices must be [lon, lat] pairs")
        densify = payload.get("densify_m")
        if densify is not None and (not isinstance(densify, (int, float)) or densify <= 0):
            return _error(400, "densify_m must be a positive number")
        try:
            edits = parse_edits(payload.get("edits"))
        except EditError as exc:
            return _error(400, str(exc))
        try:
            result = compare_scenarios(
                m,
                state.graph,
                state.betweenness,
                region,
                edits,
                densify_m=float(densify) if densify is not None else None,
            )
        except ScenarioError as exc:
            return _error(422, str(exc))
        return {
            "model": model_key,
            "graph_id": state.graph_id,
            "mean_baseline": result.mean_baseline,
            "mean_scenario": result.mean_scenario,
            "relative_change": result.relative_change,
            "relative_change_text": render_percent(result.relative_change),
            "n_points": len(result.points),
            "edits": [
                {
                    "attribute": r.attribute,
                    "matched": r.matched,
                    "changed": r.changed,
                    "warning": r.warning,
                }
                for r in result.edit_reports
            ],
            "points": result_to_geojson(result),
        }

    return app
