"""Command line front end for the full pipeline.

One binary, one subcommand per pipeline stage:

    ingest        accident CSV -> unified JSONL records
    graph-build   OSM XML -> street graph JSON
    betweenness   graph -> per-edge centrality CSV
    features      records + graph + centrality -> model-ready feature CSV
    fit           feature CSV -> model JSON
    eval          model + feature CSVs -> evaluation report
    cross-eval    several models and cities -> transfer matrix CSV
    compare       two or more models -> coefficient comparison CSV
    score         coordinates -> per-point risk CSV
    scenario      edits + region -> before/after safety report
    serve         start the HTTP service

Exit codes: 0 on success, 1 on usage errors (bad flags or arguments),
2 on data errors (unreadable or invalid inputs). Diagnostics go to stderr;
data goes to the requested output files (or stdout for "-").

Every file-producing stage writes `<output>.meta.json` beside its output
with input hashes and parameters, so artifacts can be traced and reproduced.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__, evaluation, ingest, model, provenance, scenario
from .betweenness import BetweennessResult, edge_betweenness
from .graph import (
    DEFAULT_SNAP_RADIUS_M,
    GraphError,
    StreetGraph,
    build_graph,
    load_elevations,
    nearest_edge,
    segment_features,
)

_DATA_ERRORS = (
    ingest.IngestError,
    GraphError,
    model.ModelError,
    evaluation.EvaluationError,
    scenario.ScenarioError,
    OSError,
    json.JSONDecodeError,
    ValueError,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this CLI reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _meta(out: str, inputs: dict[str, str], parameters: dict | None = None) -> None:
    if out != "-":
        provenance.write_meta(out, inputs, parameters)


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_table(path: str) -> model.FeatureTable:
    return model.FeatureTable.from_csv(Path(path).read_text())


def _single_city(table: model.FeatureTable, path: str) -> str:
    cities = sorted({c for c in table.source_city if c})
    if len(cities) != 1:
        raise model.ModelError(
            f"{path} mixes source cities ({', '.join(cities) or 'none'}); pass --city"
        )
    return cities[0]


# --- subcommand implementations -------------------------------------------


def _cmd_ingest(args) -> int:
    schema = ingest.load_schema(args.schema)
    records, rejects = ingest.ingest_file(args.input, schema)
    if args.years is not None:
        records = ingest.filter_window(records, args.years)
    if not records:
        raise ingest.IngestError(f"{args.input}: no usable records after filtering")
    _write_text(args.out, ingest.records_to_jsonl(records))
    _meta(
        args.out,
        {"input": args.input},
        {"schema": schema.name, "years": args.years, "n_records": len(records), "n_rejected": len(rejects)},
    )
    _info(f"{len(records)} records written, {len(rejects)} rows rejected")
    for r in rejects[:20]:
        _info(f"  row {r.row}: {r.reason}")
    if len(rejects) > 20:
        _info(f"  ... {len(rejects) - 20} more")
    return 0


def _cmd_graph_build(args) -> int:
    elevations = load_elevations(args.elevation) if args.elevation else None
    graph = build_graph(args.osm, elevations=elevations)
    _write_text(args.out, graph.to_json())
    inputs = {"osm": args.osm}
    if args.elevation:
        inputs["elevation"] = args.elevation
    _meta(args.out, inputs, {"n_nodes": len(graph.nodes), "n_edges": len(graph.edges)})
    _info(f"graph: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
    return 0


def _cmd_betweenness(args) -> int:
    graph = StreetGraph.from_json(Path(args.graph).read_text())
    result = edge_betweenness(graph, mode=args.mode, sample_size=args.sources, seed=args.seed)
    _write_text(args.out, result.to_csv())
    _meta(
        args.out,
        {"graph": args.graph},
        {"mode": args.mode, "sources": result.sample_size, "seed": result.seed},
    )
    _info(f"betweenness over {len(graph.edges)} edges ({args.mode})")
    return 0


def _cmd_features(args) -> int:
    records = ingest.records_from_jsonl(Path(args.records).read_text())
    graph = StreetGraph.from_json(Path(args.graph).read_text())
    beta = BetweennessResult.from_csv(Path(args.betweenness).read_text())
    if args.date_from or args.date_to:
        records = [
            r
            for r in records
            if (args.date_from is None or r.when.isoformat() >= args.date_from)
            and (args.date_to is None or r.when.isoformat() <= args.date_to)
        ]
        if not records:
            raise ingest.IngestError("date filter left no records")

    table, dropped = model.build_feature_table(records, graph, beta, args.snap_radius_m)
    _write_text(args.out, table.to_csv())
    _meta(
        args.out,
        {"records": args.records, "graph": args.graph, "betweenness": args.betweenness},
        {
            "snap_radius_m": args.snap_radius_m,
            "date_from": args.date_from,
            "date_to": args.date_to,
            "n_rows": len(table),
            "n_unsnapped": dropped,
        },
    )
    _info(f"{len(table)} feature rows written, {dropped} records beyond snap radius")
    return 0


def _cmd_fit(args) -> int:
    table = _load_table(args.features)
    city = args.city or _single_city(table, args.features)
    fitted = model.fit_model(table, city, ridge=args.ridge)
    for w in fitted.warnings:
        _info(f"warning: {w}")
    _write_text(args.out, fitted.to_json())
    _meta(
        args.out,
        {"features": args.features},
        {"city": city, "ridge": args.ridge, "n_train": fitted.n_train, "converged": fitted.converged},
    )
    if args.design_out:
        X, _ = model.build_design(table, scaling=fitted.scaling)
        _write_text(args.design_out, model.design_csv(X, table.y))
        _meta(args.design_out, {"features": args.features}, {"city": city})
    _info(f"fit {city}: n={fitted.n_train}, converged={fitted.converged}")
    return 0


def _cmd_eval(args) -> int:
    fitted = model.FittedModel.from_json(Path(args.model).read_text())
    test = _load_table(args.test)
    train = _load_table(args.train)
    test_city = args.test_city
    if test_city is None:
        cities = sorted({c for c in test.source_city if c})
        test_city = cities[0] if len(cities) == 1 else "test"
    report = evaluation.evaluate_table(fitted, test, train.y, test_city=test_city)
    if args.out_json:
        _write_text(args.out_json, evaluation.report_to_json(report))
        _meta(args.out_json, {"model": args.model, "test": args.test, "train": args.train})
    if args.out_csv:
        _write_text(args.out_csv, evaluation.reports_to_csv([report]))
        _meta(args.out_csv, {"model": args.model, "test": args.test, "train": args.train})
    if args.reliability_csv:
        _write_text(args.reliability_csv, evaluation.reliability_to_csv(report.bins))
        _meta(args.reliability_csv, {"model": args.model, "test": args.test, "train": args.train})
    if args.reliability_svg:
        _write_text(args.reliability_svg, evaluation.render_reliability_svg(report))
        _meta(args.reliability_svg, {"model": args.model, "test": args.test, "train": args.train})
    skill = "undefined" if report.skill is None else f"{report.skill!r}"
    _info(
        f"{report.train_city} on {report.test_city}: accuracy={report.accuracy!r} "
        f"brier={report.brier!r} skill={skill}"
    )
    if not any([args.out_json, args.out_csv, args.reliability_csv, args.reliability_svg]):
        sys.stdout.write(evaluation.report_to_json(report) + "\n")
    return 0


def _cmd_cross_eval(args) -> int:
    models: dict[str, model.FittedModel] = {}
    for mp in args.model:
        m = model.FittedModel.from_json(Path(mp).read_text())
        if m.city in models:
            raise model.ModelError(f"two models share the city {m.city!r}")
        models[m.city] = m
    tables: dict[str, model.FeatureTable] = {}
    for fp in args.features:
        t = _load_table(fp)
        city = _single_city(t, fp)
        if city in tables:
            raise model.ModelError(f"two feature files for city {city!r}")
        tables[city] = t
    train_labels = {c: tables[c].y for c in models if c in tables}
    reports = evaluation.cross_evaluate(models, tables, train_labels)
    _write_text(args.out, evaluation.reports_to_csv(reports))
    inputs = {f"model_{i}": p for i, p in enumerate(args.model)}
    inputs.update({f"features_{i}": p for i, p in enumerate(args.features)})
    _meta(args.out, inputs, {"n_reports": len(reports)})
    if args.out_json:
        doc = [json.loads(evaluation.report_to_json(r)) for r in reports]
        _write_text(args.out_json, json.dumps(doc, indent=1))
        _meta(args.out_json, inputs, {"n_reports": len(reports)})
    _info(f"{len(reports)} (train, test) pairs evaluated")
    return 0


def _cmd_compare(args) -> int:
    models = [model.FittedModel.from_json(Path(p).read_text()) for p in args.model]
    if len(models) < 2:
        raise model.ModelError("compare needs at least two --model files")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        [
            "model_a",
            "model_b",
            "column",
            "estimate_a",
            "estimate_b",
            "difference",
            "z",
            "p",
            "no_detectable_difference",
            "ci95_overlap",
        ]
    )
    for i in range(len(models)):
        for j in range(i + 1, len(models)):
            a, b = models[i], models[j]
            overlap = {r["column"]: r["overlap"] for r in model.ci_overlap_table(a, b)}
            for row in model.compare_models(a, b):
                w.writerow(
                    [
                        a.city,
                        b.city,
                        row["column"],
                        repr(row["estimate_a"]),
                        repr(row["estimate_b"]),
                        repr(row["difference"]),
                        repr(row["z"]),
                        repr(row["p"]),
                        int(bool(row["no_detectable_difference"])),
                        int(bool(overlap[row["column"]])),
                    ]
                )
    _write_text(args.out, buf.getvalue())
    _meta(args.out, {f"model_{i}": p for i, p in enumerate(args.model)})
    _info(f"compared {len(models)} models")
    return 0


def _cmd_score(args) -> int:
    graph = StreetGraph.from_json(Path(args.graph).read_text())
    beta = BetweennessResult.from_csv(Path(args.betweenness).read_text())
    fitted = model.FittedModel.from_json(Path(args.model).read_text())
    reader = csv.DictReader(io.StringIO(Path(args.points).read_text()))
    fields = reader.fieldnames or []
    if "lat" not in fields or "lon" not in fields:
        raise model.ModelError(f"{args.points} needs lat and lon columns")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        [
            "id",
            "lat",
            "lon",
            "edge_id",
            "snap_distance_m",
            "speed_limit",
            "width",
            "betweenness",
            "dist_intersect",
            "hilly",
            "curved",
            "bikelane",
            "risk",
            "safety",
        ]
    )
    n = 0
    for i, row in enumerate(reader):
        lat, lon = float(row["lat"]), float(row["lon"])
        snap = nearest_edge(graph, lat, lon, args.snap_radius_m)
        feats = segment_features(graph, beta, snap.edge_id, snap.point)
        risk = model.predict_risk(fitted, feats.as_dict())
        w.writerow(
            [
                row.get("id", str(i)),
                repr(lat),
                repr(lon),
                snap.edge_id,
                repr(snap.distance_m),
                repr(feats.speed_limit_kmh),
                repr(feats.width_m),
                repr(feats.betweenness),
                repr(feats.dist_intersect_m),
                int(feats.hilly),
                int(feats.curved),
                int(feats.bikelane),
                repr(risk),
                repr(1.0 - risk),
            ]
        )
        n += 1
    if n == 0:
        raise model.ModelError(f"{args.points} has no rows")
    _write_text(args.out, buf.getvalue())
    _meta(
        args.out,
        {"graph": args.graph, "betweenness": args.betweenness, "model": args.model, "points": args.points},
        {"snap_radius_m": args.snap_radius_m},
    )
    _info(f"scored {n} points")
    return 0


def _cmd_scenario(args) -> int:
    graph = StreetGraph.from_json(Path(args.graph).read_text())
    beta = BetweennessResult.from_csv(Path(args.betweenness).read_text())
    fitted = model.FittedModel.from_json(Path(args.model).read_text())
    region_doc = json.loads(Path(args.region).read_text())
    if not isinstance(region_doc, list) or len(region_doc) < 3:
        raise scenario.ScenarioError("region file must hold a polygon of [lon, lat] pairs")
    region = tuple((float(p[0]), float(p[1])) for p in region_doc)
    edits = scenario.parse_edits(json.loads(Path(args.edits).read_text()))
    result = scenario.compare_scenarios(
        fitted,
        graph,
        beta,
        region,
        edits,
        densify_m=args.densify_m,
        recompute_betweenness=args.recompute_betweenness,
    )
    for r in result.edit_reports:
        if r.warning:
            _info(f"warning: {r.attribute} edit: {r.warning}")
    _write_text(args.out, scenario.result_to_json(result))
    inputs = {
        "graph": args.graph,
        "betweenness": args.betweenness,
        "model": args.model,
        "region": args.region,
        "edits": args.edits,
    }
    _meta(
        args.out,
        inputs,
        {"densify_m": args.densify_m, "recompute_betweenness": args.recompute_betweenness},
    )
    if args.geojson_out:
        _write_text(args.geojson_out, json.dumps(scenario.result_to_geojson(result), indent=1))
        _meta(args.geojson_out, inputs)
    _info(
        f"mean safety {result.mean_baseline!r} -> {result.mean_scenario!r} "
        f"({scenario.render_percent(result.relative_change)})"
    )
    return 0


def _cmd_serve(args) -> int:
    from . import service

    if args.config:
        config = service.ServiceConfig.from_file(args.config)
    else:
        if not (args.graph and args.betweenness and args.model):
            raise ValueError("serve needs --config or all of --graph, --betweenness, --model")
        config = service.ServiceConfig(graph=args.graph, betweenness=args.betweenness, models=[])
    if args.graph:
        config.graph = args.graph
    if args.betweenness:
        config.betweenness = args.betweenness
    if args.model:
        config.models = list(args.model)
    if args.snap_radius_m is not None:
        config.snap_radius_m = args.snap_radius_m
    if args.cors_origin:
        config.cors_origins = list(args.cors_origin)
    if args.host:
        config.host = args.host
    if args.port is not None:
        config.port = args.port

    state = service.load_state(config)
    app = service.create_app(state)
    _info(f"serving {len(state.models)} models on {config.host}:{config.port}")

    import uvicorn

    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bikerisk", description="street-level bicycle accident severity toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("ingest", help="normalize an accident CSV into unified records")
    p.add_argument("--input", required=True, help="accident CSV file")
    p.add_argument("--schema", required=True, help="built-in schema name or descriptor JSON path")
    p.add_argument("--years", type=int, default=None, help="keep the last N calendar years")
    p.add_argument("--out", required=True, help="output JSONL path (- for stdout)")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("graph-build", help="build a street graph from OSM XML")
    p.add_argument("--osm", required=True)
    p.add_argument("--elevation", default=None, help="CSV of node_id,elevation_m")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_graph_build)

    p = sub.add_parser("betweenness", help="per-edge betweenness centrality")
    p.add_argument("--graph", required=True)
    p.add_argument("--mode", choices=["exact", "sampled"], default="exact")
    p.add_argument("--sources", type=int, default=None, help="sample size for sampled mode")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_betweenness)

    p = sub.add_parser("features", help="snap records to the graph and extract model features")
    p.add_argument("--records", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--betweenness", required=True)
    p.add_argument("--snap-radius-m", type=float, default=DEFAULT_SNAP_RADIUS_M)
    p.add_argument("--date-from", default=None, help="keep records on or after this ISO date")
    p.add_argument("--date-to", default=None, help="keep records on or before this ISO date")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("fit", help="fit the severity model on a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--city", default=None, help="model key (defaults to the single source city)")
    p.add_argument("--ridge", type=float, default=0.0, help="L2 penalty for unstable fits")
    p.add_argument("--design-out", default=None, help="also write the standardized design CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("eval", help="evaluate a model on a feature CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True, help="test feature CSV")
    p.add_argument("--train", required=True, help="training feature CSV (climatology reference)")
    p.add_argument("--test-city", default=None)
    p.add_argument("--out-json", default=None)
    p.add_argument("--out-csv", default=None)
    p.add_argument("--reliability-csv", default=None)
    p.add_argument("--reliability-svg", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("cross-eval", help="evaluate every (train, test) city pair")
    p.add_argument("--model", action="append", required=True, help="model JSON (repeatable)")
    p.add_argument("--features", action="append", required=True, help="feature CSV (repeatable)")
    p.add_argument("--out", required=True)
    p.add_argument("--out-json", default=None)
    p.set_defaults(func=_cmd_cross_eval)

    p = sub.add_parser("compare", help="column-wise coefficient comparison between models")
    p.add_argument("--model", action="append", required=True, help="model JSON (at least two)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("score", help="risk at arbitrary coordinates")
    p.add_argument("--graph", required=True)
    p.add_argument("--betweenness", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--points", required=True, help="CSV with lat,lon (and optional id)")
    p.add_argument("--snap-radius-m", type=float, default=DEFAULT_SNAP_RADIUS_M)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("scenario", help="compare area safety before and after edits")
    p.add_argument("--graph", required=True)
    p.add_argument("--betweenness", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--region", required=True, help="JSON polygon [[lon,lat],...]")
    p.add_argument("--edits", required=True, help="JSON edit list")
    p.add_argument("--densify-m", type=float, default=None)
    p.add_argument("--recompute-betweenness", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--geojson-out", default=None)
    p.set_defaults(func=_cmd_scenario)

    p = sub.add_parser("serve", help="start the HTTP scoring service")
    p.add_argument("--config", default=None, help="service config JSON")
    p.add_argument("--graph", default=None)
    p.add_argument("--betweenness", default=None)
    p.add_argument("--model", action="append", default=None, help="model JSON (repeatable)")
    p.add_argument("--snap-radius-m", type=float, default=None)
    p.add_argument("--cors-origin", action="append", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"bikerisk: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
