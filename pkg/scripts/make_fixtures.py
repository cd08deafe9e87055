#!/usr/bin/env python3
"""Generate the committed desk-scale fixtures under fixtures/.

Everything here is synthetic and deterministic (seeded), so re-running the
script reproduces the files byte for byte. The street layout is a small
grid with enough variety to exercise every feature path: mph and km/h speed
tags, missing speeds and widths, an explicit cycle lane tag, a separate
parallel cycleway, a curved crescent, an elevation rise, excluded footway
and building ways, and a way referencing a clipped-out node.

The demo model is constructed by hand so that scenario arithmetic has exact
expected values: with all coefficients zero except the intercept and the
bikelane term, every segment without a bike lane scores safety 0.54 and
every segment with one scores 0.68.
"""

from __future__ import annotations

import json
import math
import random
from datetime import date, timedelta
from pathlib import Path

import sys

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from bikerisk import geo  # noqa: E402
from bikerisk.betweenness import edge_betweenness  # noqa: E402
from bikerisk.graph import build_graph, segment_features  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

LON0, LAT0 = -0.1000, 51.5000
DLON, DLAT = 0.003, 0.002  # roughly 208 m x 222 m blocks


def node_id(x: int, y: int) -> int:
    return 1000 + y * 10 + x


def grid_lon(x: float) -> float:
    return LON0 + x * DLON


def grid_lat(y: float) -> float:
    return LAT0 + y * DLAT


def build_osm() -> str:
    nodes: list[tuple[int, float, float]] = []
    for y in range(4):
        for x in range(5):
            nodes.append((node_id(x, y), grid_lat(y), grid_lon(x)))

    # Crescent: zigzag north from the grid's northeast corner.
    crescent = [
        (2001, grid_lat(3) + 0.0008, grid_lon(4) + 0.0006),
        (2002, grid_lat(3) + 0.0016, grid_lon(4) - 0.0002),
        (2003, grid_lat(3) + 0.0024, grid_lon(4) + 0.0006),
        (2004, grid_lat(3) + 0.0032, grid_lon(4)),
    ]
    nodes += crescent

    # Dedicated cycleway just north of row 1, between columns 0 and 2.
    nodes.append((3001, grid_lat(1) + 0.00005, grid_lon(0) - 0.0002))
    nodes.append((3002, grid_lat(1) + 0.00005, grid_lon(2) + 0.0002))

    # A footpath and a building outline, both excluded from the road graph.
    nodes.append((4001, grid_lat(0) + 0.0003, grid_lon(0) + 0.0003))
    nodes.append((4002, grid_lat(1) - 0.0003, grid_lon(1) - 0.0003))
    for i, (dx, dy) in enumerate([(0.3, 0.3), (0.7, 0.3), (0.7, 0.7), (0.3, 0.7)]):
        nodes.append((5001 + i, grid_lat(2 + dy), grid_lon(2 + dx)))

    # Dead-end stub east of the grid; its middle ref is clipped out.
    nodes.append((6001, grid_lat(0), grid_lon(4) + 0.0015))

    def way(way_id: int, refs: list[int], tags: dict[str, str]) -> str:
        parts = [f' <way id="{way_id}">']
        parts += [f'  <nd ref="{r}"/>' for r in refs]
        parts += [f'  <tag k="{k}" v="{v}"/>' for k, v in tags.items()]
        parts.append(" </way>")
        return "\n".join(parts)

    ways = [
        # East-west streets.
        way(
            100,
            [node_id(x, 0) for x in range(5)],
            {
                "highway": "primary",
                "name": "High Street",
                "maxspeed": "30 mph",
                "width": "10.5",
                "cycleway:left": "lane",
            },
        ),
        way(
            101,
            [node_id(x, 1) for x in range(5)],
            {"highway": "secondary", "name": "Mill Road", "maxspeed": "40"},
        ),
        way(
            102,
            [node_id(x, 2) for x in range(5)],
            {"highway": "residential", "name": "Orchard Way", "width": "6.5"},
        ),
        way(
            103,
            [node_id(x, 3) for x in range(5)],
            {"highway": "secondary", "name": "North Parade", "maxspeed": "40", "width": "9.0"},
        ),
        # North-south streets.
        way(
            200,
            [node_id(0, y) for y in range(4)],
            {"highway": "tertiary", "name": "West Lane", "maxspeed": "50", "width": "8.0"},
        ),
        way(201, [node_id(1, y) for y in range(4)], {"highway": "residential", "name": "Baker Row"}),
        way(
            202,
            [node_id(2, y) for y in range(4)],
            {"highway": "primary", "name": "Central Avenue", "maxspeed": "30 mph", "width": "10.0"},
        ),
        way(203, [node_id(3, y) for y in range(4)], {"highway": "service", "name": "Depot Access"}),
        way(
            204,
            [node_id(4, y) for y in range(4)],
            {"highway": "living_street", "name": "East Close", "maxspeed": "20", "width": "5.5"},
        ),
        # Curved residential crescent off the northeast corner.
        way(
            300,
            [node_id(4, 3), 2001, 2002, 2003, 2004],
            {"highway": "residential", "name": "Crescent Lane", "maxspeed": "30"},
        ),
        # Separate cycleway parallel to Mill Road's western half.
        way(400, [3001, 3002], {"highway": "cycleway", "name": "Mill Path"}),
        # Excluded: footway and building.
        way(500, [4001, 4002], {"highway": "footway", "name": "Cut Through"}),
        way(600, [5001, 5002, 5003, 5004, 5001], {"building": "yes"}),
        # Stub with a reference to a node missing from the extract (9999999).
        way(
            700,
            [node_id(4, 0), 9999999, 6001],
            {"highway": "residential", "name": "Quarry Stub", "maxspeed": "32 km/h"},
        ),
    ]

    lines = ['<?xml version="1.0" encoding="UTF-8"?>', '<osm version="0.6" generator="fixture">']
    for nid, lat, lon in nodes:
        lines.append(f' <node id="{nid}" lat="{lat!r}" lon="{lon!r}"/>')
    lines += ways
    lines.append("</osm>")
    return "\n".join(lines) + "\n"


def build_elevations() -> str:
    lines = ["node_id,elevation_m"]
    for y in range(4):
        for x in range(5):
            elev = 25.0 if (x, y) == (0, 3) else 10.0
            lines.append(f"{node_id(x, y)},{elev!r}")
    return "\n".join(lines) + "\n"


def severe_probability(feats) -> float:
    eta = (
        -0.8
        + 0.045 * (feats.speed_limit_kmh - 38.0)
        - 0.9 * float(feats.bikelane)
        - 0.04 * (feats.width_m - 8.0)
        + 0.2 * float(feats.curved)
    )
    return 1.0 / (1.0 + math.exp(-eta))


def random_date(rng: random.Random) -> date:
    start = date(2017, 1, 1)
    span = (date(2023, 12, 31) - start).days
    return start + timedelta(days=rng.randrange(span + 1))


def make_accident_rows(graph, beta, rng: random.Random, n: int):
    """(lat, lon, severe, date) rows jittered around random edge locations."""
    edge_ids = sorted(graph.edges)
    feats_cache = {eid: segment_features(graph, beta, eid) for eid in edge_ids}
    rows = []
    for _ in range(n):
        eid = rng.choice(edge_ids)
        edge = graph.edges[eid]
        offset = rng.uniform(0.1, 0.9) * edge.length_m
        lon, lat = geo.point_along_polyline(list(edge.geometry), offset)
        lat += rng.uniform(-0.00012, 0.00012)
        lon += rng.uniform(-0.00012, 0.00012)
        severe = rng.random() < severe_probability(feats_cache[eid])
        rows.append((lat, lon, severe, random_date(rng)))
    return rows


def write_london(rows, rng: random.Random) -> str:
    out = ["latitude,longitude,severity,date,borough"]
    for lat, lon, severe, when in rows:
        if severe:
            label = rng.choice(["Serious", "serious", "Fatal"])
        else:
            label = rng.choice(["Slight", "slight", "SLIGHT"])
        out.append(f"{lat:.6f},{lon:.6f},{label},{when.isoformat()},Graphwick")
    # Rows the pipeline must reject, not silently absorb.
    out.append(f"99.9,{LON0:.6f},Slight,2021-05-01,Graphwick")
    out.append(f"{LAT0:.6f},{LON0:.6f},Slight,31/02/2021,Graphwick")
    out.append(f"{LAT0:.6f},{LON0:.6f},Catastrophic,2021-05-01,Graphwick")
    return "\n".join(out) + "\n"


def write_boston(rows, rng: random.Random) -> str:
    out = ["lat,long,injury_level,crash_date,mode_type"]
    for lat, lon, severe, when in rows:
        label = rng.choice(["2", "3", "4"]) if severe else rng.choice(["0", "1"])
        out.append(f"{lat:.6f},{lon:.6f},{label},{when.strftime('%m/%d/%Y')},bike")
    out.append(f"{LAT0:.6f},-190.0,1,05/01/2021,bike")
    out.append(f"{LAT0:.6f},{LON0:.6f},7,05/01/2021,bike")
    return "\n".join(out) + "\n"


def write_pittsburgh(rows, rng: random.Random) -> str:
    out = ["dec_lat,dec_long,max_severity,crash_date,county"]
    for lat, lon, severe, when in rows:
        if severe:
            label = rng.choice(["Moderate injury", "Major injury", "Killed"])
        else:
            label = rng.choice(["Not injured", "Minor injury", "minor injury"])
        out.append(f"{lat:.6f},{lon:.6f},{label},{when.isoformat()},Graph")
    out.append(f"{LAT0:.6f},{LON0:.6f},,2021-05-01,Graph")
    out.append(f"{LAT0:.6f},{LON0:.6f},Minor injury,not-a-date,Graph")
    return "\n".join(out) + "\n"


def demo_model() -> dict:
    k = 11
    columns = [
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
    ]
    b0 = math.log(0.46 / 0.54)
    b_bike = math.log(0.32 / 0.68) - b0
    coefficients = [0.0] * k
    coefficients[0] = b0
    coefficients[columns.index("bikelane")] = b_bike
    covariance = [0.0] * (k * k)
    for i in range(k):
        covariance[i * k + i] = 0.01
    return {
        "city": "demo",
        "columns": columns,
        "coefficients": coefficients,
        "standard_errors": [0.1] * k,
        "covariance": covariance,
        "scaling": {
            name: {"mean": 0.0, "sd": 1.0}
            for name in ("speed_limit", "width", "betweenness", "dist_intersect")
        },
        "train_window": {"from": "2019-01-01", "to": "2023-12-31"},
        "n_train": 400,
        "converged": True,
        "log_likelihood": -250.0,
    }


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    (FIXTURES / "accidents").mkdir(exist_ok=True)
    (FIXTURES / "service").mkdir(exist_ok=True)
    (FIXTURES / "scenario").mkdir(exist_ok=True)

    osm = build_osm()
    (FIXTURES / "mini_city.osm").write_text(osm)
    (FIXTURES / "elevations.csv").write_text(build_elevations())

    graph = build_graph(FIXTURES / "mini_city.osm", elevations=FIXTURES / "elevations.csv")
    beta = edge_betweenness(graph, mode="exact")
    (FIXTURES / "service" / "graph.json").write_text(graph.to_json())
    (FIXTURES / "service" / "beta.csv").write_text(beta.to_csv())
    (FIXTURES / "service" / "model_demo.json").write_text(
        json.dumps(demo_model(), indent=1) + "\n"
    )
    (FIXTURES / "service" / "config.json").write_text(
        json.dumps(
            {
                "graph": "graph.json",
                "betweenness": "beta.csv",
                "models": ["model_demo.json"],
                "snap_radius_m": 50.0,
                "cors_origins": ["http://localhost:5173", "http://127.0.0.1:5173"],
                "host": "127.0.0.1",
                "port": 8787,
            },
            indent=1,
        )
        + "\n"
    )

    rng = random.Random(20240611)
    for city, writer in (
        ("london", write_london),
        ("boston", write_boston),
        ("pittsburgh", write_pittsburgh),
    ):
        rows = make_accident_rows(graph, beta, rng, 400)
        (FIXTURES / "accidents" / f"{city}.csv").write_text(writer(rows, rng))

    # Scenario: bike lanes on every non-local street inside a band that
    # covers exactly the four North Parade segments.
    region = [
        [-0.1010, 51.5055],
        [-0.0875, 51.5055],
        [-0.0875, 51.5065],
        [-0.1010, 51.5065],
    ]
    edits = [
        {
            "select": {
                "classes": ["motorway", "trunk", "primary", "secondary", "tertiary", "unclassified"],
                "polygon": region,
            },
            "set": {"set_bikelane": True},
        }
    ]
    (FIXTURES / "scenario" / "region.json").write_text(json.dumps(region, indent=1) + "\n")
    (FIXTURES / "scenario" / "edits.json").write_text(json.dumps(edits, indent=1) + "\n")

    # Points for the score subcommand: near streets, with one unsnappable row
    # kept in a separate file for error-path tests.
    pts = ["id,lat,lon"]
    for i, (eid_x, eid_y) in enumerate([(0.5, 0), (1.5, 1), (2.5, 2), (0, 1.5), (4, 2.5)]):
        pts.append(f"p{i},{grid_lat(eid_y) + 0.00008:.6f},{grid_lon(eid_x) - 0.00005:.6f}")
    (FIXTURES / "points.csv").write_text("\n".join(pts) + "\n")
    (FIXTURES / "points_far.csv").write_text("id,lat,lon\nfar0,51.7,0.5\n")

    print(f"graph: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
    counts: dict[str, int] = {}
    for e in graph.edges.values():
        counts[e.highway] = counts.get(e.highway, 0) + 1
    print("classes:", dict(sorted(counts.items())))
    in_region = [
        eid
        for eid in sorted(graph.edges)
        if geo.point_in_polygon(graph.edges[eid].midpoint(), tuple((p[0], p[1]) for p in region))
    ]
    print("region midpoint edges:", in_region)
    print("bikelane edges:", [eid for eid in sorted(graph.edges) if graph.edges[eid].bikelane])


if __name__ == "__main__":
    main()
