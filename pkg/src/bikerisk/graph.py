"""Street network model built from OpenStreetMap XML extracts.

Graph nodes are street intersections (or way endpoints); edges are the street
segments between them, carrying the attributes the risk model consumes: speed
limit, width, bikelane presence, highway class, geometry, and length. Interior
way points of degree 2 are collapsed into edge geometry.

Missing maxspeed/width tags are left unset at build time and imputed at
feature time from explicit per-class tables recorded in the graph's
provenance block, so every imputed value is auditable.
"""

from __future__ import annotations

import copy
import json
import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import geo

# Way classes treated as ridable streets. Pure cycleways are kept aside: they
# are not street segments themselves but flag bikelanes on parallel roads.
ROAD_CLASSES = frozenset(
    {
        "motorway",
        "trunk",
        "primary",
        "secondary",
        "tertiary",
        "unclassified",
        "residential",
        "living_street",
        "service",
        "road",
        "motorway_link",
        "trunk_link",
        "primary_link",
        "secondary_link",
        "tertiary_link",
    }
)

CYCLEWAY_CLASS = "cycleway"

# Fallback speed limits (km/h) by highway class when maxspeed is untagged.
DEFAULT_SPEED_KMH = {
    "motorway": 100.0,
    "motorway_link": 60.0,
    "trunk": 80.0,
    "trunk_link": 60.0,
    "primary": 50.0,
    "primary_link": 50.0,
    "secondary": 50.0,
    "secondary_link": 50.0,
    "tertiary": 50.0,
    "tertiary_link": 50.0,
    "unclassified": 40.0,
    "residential": 30.0,
    "living_street": 20.0,
    "service": 20.0,
    "road": 50.0,
}
FALLBACK_SPEED_KMH = 50.0
FALLBACK_WIDTH_M = 7.0

MPH_TO_KMH = 1.609344

CYCLEWAY_PROXIMITY_M = 10.0
DEFAULT_SNAP_RADIUS_M = 50.0
SINUOSITY_CURVED_THRESHOLD = 1.05
HILLY_GRADE_THRESHOLD = 0.04

# Distances closer than this are treated as ties and broken by edge id.
_SNAP_TIE_EPS_M = 1e-7


class GraphError(Exception):
    """Malformed extract, empty road set, or a broken graph invariant."""


class SnapError(GraphError):
    """No street segment within the snap radius of a query point."""

    def __init__(self, lat: float, lon: float, radius_m: float):
        self.lat, self.lon, self.radius_m = lat, lon, radius_m
        super().__init__(f"no segment within {radius_m:g} m of ({lat}, {lon})")


@dataclass(frozen=True)
class Node:
    id: str
    lat: float
    lon: float
    elevation_m: float | None = None

    @property
    def point(self) -> geo.Point:
        return (self.lon, self.lat)


@dataclass(frozen=True)
class Edge:
    id: str
    u: str
    v: str
    geometry: tuple[geo.Point, ...]  # (lon, lat) polyline from u to v
    highway: str
    length_m: float
    speed_limit_kmh: float | None = None
    width_m: float | None = None
    bikelane: bool = False

    def midpoint(self) -> geo.Point:
        return geo.point_along_polyline(list(self.geometry), self.length_m / 2.0)


@dataclass(frozen=True)
class SegmentFeatures:
    """Independent variables of the risk model at one snapped location."""

    speed_limit_kmh: float
    width_m: float
    dist_intersect_m: float
    hilly: bool
    curved: bool
    bikelane: bool
    betweenness: float  # normalized to [0, 1]

    def as_dict(self) -> dict:
        """Model-column keys; speed in km/h, distances in meters."""
        return {
            "speed_limit": self.speed_limit_kmh,
            "width": self.width_m,
            "betweenness": self.betweenness,
            "dist_intersect": self.dist_intersect_m,
            "hilly": int(self.hilly),
            "curved": int(self.curved),
            "bikelane": int(self.bikelane),
        }


@dataclass(frozen=True)
class SnapResult:
    edge_id: str
    point: geo.Point  # snapped (lon, lat)
    offset_m: float  # arc length from edge start to the snapped point
    distance_m: float  # great-circle distance from the query point


class StreetGraph:
    """Immutable-after-build street network.

    Mutation happens only by constructing a new graph (see scenario module);
    derived structures (adjacency, degrees) are cached per instance.
    """

    def __init__(self, nodes: dict[str, Node], edges: dict[str, Edge], provenance: dict | None = None):
        self.nodes = nodes
        self.edges = edges
        self.provenance = provenance or {}
        self._adjacency: dict[str, list[tuple[str, str, float]]] | None = None
        self._degrees: dict[str, int] | None = None

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, StreetGraph)
            and self.nodes == other.nodes
            and self.edges == other.edges
        )

    def adjacency(self) -> dict[str, list[tuple[str, str, float]]]:
        """node id -> [(neighbor id, edge id, length_m)], parallel edges kept."""
        if self._adjacency is None:
            adj: dict[str, list[tuple[str, str, float]]] = {n: [] for n in self.nodes}
            for e in self.edges.values():
                adj[e.u].append((e.v, e.id, e.length_m))
                if e.u != e.v:
                    adj[e.v].append((e.u, e.id, e.length_m))
            self._adjacency = adj
        return self._adjacency

    def degree(self, node_id: str) -> int:
        if self._degrees is None:
            deg = {n: 0 for n in self.nodes}
            for e in self.edges.values():
                deg[e.u] += 1
                deg[e.v] += 1
            self._degrees = deg
        return self._degrees[node_id]

    def effective_speed_kmh(self, edge: Edge) -> float:
        if edge.speed_limit_kmh is not None:
            return edge.speed_limit_kmh
        table = self.provenance.get("speed_imputation_kmh", DEFAULT_SPEED_KMH)
        return table.get(edge.highway, FALLBACK_SPEED_KMH)

    def effective_width_m(self, edge: Edge) -> float:
        if edge.width_m is not None:
            return edge.width_m
        table = self.provenance.get("width_imputation_m", {})
        return table.get(edge.highway, FALLBACK_WIDTH_M)

    def validate(self) -> None:
        for e in self.edges.values():
            if e.u not in self.nodes or e.v not in self.nodes:
                raise GraphError(f"edge {e.id} references missing node")
            recomputed = geo.polyline_length_m(list(e.geometry))
            if recomputed > 0 and abs(recomputed - e.length_m) > 0.001 * recomputed:
                raise GraphError(f"edge {e.id} length {e.length_m} != geometry length {recomputed}")
            if e.speed_limit_kmh is not None and e.speed_limit_kmh <= 0:
                raise GraphError(f"edge {e.id} non-positive speed limit")
            if e.width_m is not None and e.width_m <= 0:
                raise GraphError(f"edge {e.id} non-positive width")

    def bbox(self) -> tuple[float, float, float, float]:
        return geo.bbox_of([n.point for n in self.nodes.values()])

    def copy_with_edges(self, new_edges: dict[str, Edge]) -> "StreetGraph":
        return StreetGraph(self.nodes, new_edges, copy.deepcopy(self.provenance))

    # --- serialization ---------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "nodes": [
                {"id": n.id, "lat": n.lat, "lon": n.lon, "elevation_m": n.elevation_m}
                for n in sorted(self.nodes.values(), key=lambda n: n.id)
            ],
            "edges": [
                {
                    "id": e.id,
                    "u": e.u,
                    "v": e.v,
                    "geometry": [list(p) for p in e.geometry],
                    "highway": e.highway,
                    "speed_limit_kmh": e.speed_limit_kmh,
                    "width_m": e.width_m,
                    "bikelane": e.bikelane,
                    "length_m": e.length_m,
                }
                for e in sorted(self.edges.values(), key=lambda e: e.id)
            ],
            "provenance": self.provenance,
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "StreetGraph":
        doc = json.loads(text)
        nodes = {
            n["id"]: Node(id=n["id"], lat=n["lat"], lon=n["lon"], elevation_m=n.get("elevation_m"))
            for n in doc["nodes"]
        }
        edges = {}
        for e in doc["edges"]:
            edges[e["id"]] = Edge(
                id=e["id"],
                u=e["u"],
                v=e["v"],
                geometry=tuple((p[0], p[1]) for p in e["geometry"]),
                highway=e["highway"],
                speed_limit_kmh=e.get("speed_limit_kmh"),
                width_m=e.get("width_m"),
                bikelane=bool(e.get("bikelane", False)),
                length_m=e["length_m"],
            )
        return cls(nodes, edges, doc.get("provenance", {}))


# --- OSM parsing ----------------------------------------------------------

_NUM_RE = re.compile(r"[-+]?\d+(?:\.\d+)?")


def parse_maxspeed_kmh(value: str | None) -> float | None:
    """'30' -> 30.0, '30 mph' -> 48.28..., 'none'/'walk' -> None."""
    if not value:
        return None
    m = _NUM_RE.search(value)
    if not m:
        return None
    speed = float(m.group(0))
    if "mph" in value.lower():
        speed *= MPH_TO_KMH
    return speed if speed > 0 else None


def parse_width_m(value: str | None) -> float | None:
    if not value:
        return None
    m = _NUM_RE.search(value)
    if not m:
        return None
    width = float(m.group(0))
    return width if width > 0 else None


def _tagged_bikelane(tags: dict[str, str]) -> bool:
    if tags.get("bicycle") == "designated":
        return True
    for key in ("cycleway", "cycleway:left", "cycleway:right", "cycleway:both"):
        if tags.get(key) in {"lane", "track"}:
            return True
    return False


def load_elevations(path: str | Path) -> dict[str, float]:
    """Sidecar CSV: node_id, elevation_m (header optional)."""
    out: dict[str, float] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        node_id, _, value = line.partition(",")
        try:
            out[node_id.strip()] = float(value)
        except ValueError:
            continue  # header or junk line
    return out


def build_graph(
    osm_path: str | Path,
    elevations: dict[str, float] | str | Path | None = None,
) -> StreetGraph:
    """Build the street graph from an OSM XML extract.

    Split points are way endpoints plus any node used by more than one road
    way position (intersections); degree-2 interior chains collapse into edge
    geometry. Deterministic: same extract bytes give the same graph, edge ids
    included (``w<way_id>.<segment_index>``).
    """
    osm_path = Path(osm_path)
    try:
        tree = ET.parse(osm_path)
    except ET.ParseError as exc:
        raise GraphError(f"malformed OSM XML in {osm_path}: {exc}") from None
    root = tree.getroot()

    node_coords: dict[str, geo.Point] = {}
    road_ways: list[tuple[str, list[str], dict[str, str]]] = []
    cycle_ways: list[list[str]] = []

    for el in root:
        if el.tag == "node":
            node_coords[el.attrib["id"]] = (float(el.attrib["lon"]), float(el.attrib["lat"]))
        elif el.tag == "way":
            tags = {t.attrib["k"]: t.attrib["v"] for t in el if t.tag == "tag"}
            refs = [n.attrib["ref"] for n in el if n.tag == "nd"]
            highway = tags.get("highway")
            if highway in ROAD_CLASSES:
                road_ways.append((el.attrib["id"], refs, tags))
            elif highway == CYCLEWAY_CLASS:
                cycle_ways.append(refs)

    if not road_ways:
        raise GraphError(f"{osm_path}: extract contains no road ways")

    # Drop references to nodes clipped out of the extract.
    cleaned_ways = []
    for way_id, refs, tags in road_ways:
        present = [r for r in refs if r in node_coords]
        if len(present) >= 2:
            cleaned_ways.append((way_id, present, tags))
    if not cleaned_ways:
        raise GraphError(f"{osm_path}: no road way has two or more nodes in the extract")

    usage: dict[str, int] = {}
    for _, refs, _ in cleaned_ways:
        for r in refs:
            usage[r] = usage.get(r, 0) + 1

    if isinstance(elevations, (str, Path)):
        elevations = load_elevations(elevations)
    elevations = elevations or {}

    nodes: dict[str, Node] = {}
    edges: dict[str, Edge] = {}

    def ensure_node(ref: str) -> None:
        if ref not in nodes:
            lon, lat = node_coords[ref]
            nodes[ref] = Node(id=ref, lat=lat, lon=lon, elevation_m=elevations.get(ref))

    for way_id, refs, tags in cleaned_ways:
        split_at = {0, len(refs) - 1}
        for i, r in enumerate(refs):
            if usage[r] >= 2:
                split_at.add(i)
        cuts = sorted(split_at)
        speed = parse_maxspeed_kmh(tags.get("maxspeed"))
        width = parse_width_m(tags.get("width"))
        bike = _tagged_bikelane(tags)
        seg_index = 0
        for a, b in zip(cuts, cuts[1:]):
            chain = refs[a : b + 1]
            geometry = tuple(node_coords[r] for r in chain)
            length = geo.polyline_length_m(list(geometry))
            if length == 0.0:
                continue  # duplicate node artifacts
            ensure_node(chain[0])
            ensure_node(chain[-1])
            eid = f"w{way_id}.{seg_index}"
            seg_index += 1
            edges[eid] = Edge(
                id=eid,
                u=chain[0],
                v=chain[-1],
                geometry=geometry,
                highway=tags["highway"],
                length_m=length,
                speed_limit_kmh=speed,
                width_m=width,
                bikelane=bike,
            )

    # Bikelane by proximity: a dedicated cycleway running within 10 m of the
    # segment midpoint marks the street as having bike infrastructure.
    cycle_polylines = []
    for refs in cycle_ways:
        pts = [node_coords[r] for r in refs if r in node_coords]
        if len(pts) >= 2:
            cycle_polylines.append(pts)
    if cycle_polylines:
        for eid, e in edges.items():
            if e.bikelane:
                continue
            mid = e.midpoint()
            if _near_any_polyline(mid, cycle_polylines, CYCLEWAY_PROXIMITY_M):
                edges[eid] = replace(e, bikelane=True)

    width_by_class: dict[str, list[float]] = {}
    for e in edges.values():
        if e.width_m is not None:
            width_by_class.setdefault(e.highway, []).append(e.width_m)
    width_table = {
        cls: _median(vals) for cls, vals in sorted(width_by_class.items())
    }

    provenance = {
        "source": str(osm_path.name),
        "bbox": list(geo.bbox_of(list(node_coords.values()))) if node_coords else None,
        "speed_imputation_kmh": dict(DEFAULT_SPEED_KMH),
        "width_imputation_m": width_table,
        "width_fallback_m": FALLBACK_WIDTH_M,
        "elevation_nodes": sum(1 for n in nodes.values() if n.elevation_m is not None),
    }
    graph = StreetGraph(nodes, edges, provenance)
    graph.validate()
    return graph


def _median(values: list[float]) -> float:
    vals = sorted(values)
    n = len(vals)
    mid = n // 2
    return vals[mid] if n % 2 else (vals[mid - 1] + vals[mid]) / 2.0


def _near_any_polyline(p: geo.Point, polylines: list[list[geo.Point]], radius_m: float) -> bool:
    for pts in polylines:
        for i in range(len(pts) - 1):
            _, dist, _ = geo.project_onto_segment(p, pts[i], pts[i + 1])
            if dist <= radius_m:
                return True
    return False


# --- queries ----------------------------------------------------------------


def nearest_edge(
    graph: StreetGraph,
    lat: float,
    lon: float,
    snap_radius_m: float = DEFAULT_SNAP_RADIUS_M,
) -> SnapResult:
    """Snap a coordinate to the closest street segment.

    Minimizes great-circle distance to the edge polylines; exact ties go to
    the lowest edge id. Raises SnapError when nothing lies within the radius.
    """
    if not graph.edges:
        raise GraphError("nearest_edge on an empty graph")
    query = (lon, lat)
    # Generous degree-space prefilter box around the query point.
    pad = (snap_radius_m * 4) / 111_320.0 + 1e-4
    best: tuple[float, str, geo.Point, float] | None = None  # (dist, id, point, offset)
    for eid in sorted(graph.edges):
        e = graph.edges[eid]
        ebox = geo.bbox_of(list(e.geometry))
        qbox = (lon - pad, lat - pad, lon + pad, lat + pad)
        if not geo.bboxes_overlap(ebox, qbox) and best is not None:
            continue
        walked = 0.0
        for i in range(len(e.geometry) - 1):
            a, b = e.geometry[i], e.geometry[i + 1]
            seg_len = geo.haversine_m(a, b)
            snapped, dist, t = geo.project_onto_segment(query, a, b)
            if best is None or dist < best[0] - _SNAP_TIE_EPS_M:
                best = (dist, eid, snapped, walked + t * seg_len)
            walked += seg_len
    assert best is not None
    dist, eid, point, offset = best
    if dist > snap_radius_m:
        raise SnapError(lat, lon, snap_radius_m)
    return SnapResult(edge_id=eid, point=point, offset_m=offset, distance_m=dist)


def segment_features(
    graph: StreetGraph,
    betweenness: "BetweennessResult",
    edge_id: str,
    snapped_point: geo.Point | None = None,
    *,
    sinuosity_threshold: float = SINUOSITY_CURVED_THRESHOLD,
    hilly_grade_threshold: float = HILLY_GRADE_THRESHOLD,
) -> SegmentFeatures:
    """Feature vector for a location snapped onto an edge.

    - speed/width come from tags or the graph's imputation tables
    - dist_intersect is the great-circle distance from the snapped point to
      the nearest endpoint that is a true intersection (degree >= 3); edges
      whose endpoints are both dead ends fall back to the nearest endpoint
    - curved means sinuosity (arc length / endpoint chord) above threshold
    - hilly requires elevation on both endpoints and |grade| above threshold
    """
    if edge_id not in graph.edges:
        raise KeyError(f"no edge {edge_id!r}")
    e = graph.edges[edge_id]
    point = snapped_point if snapped_point is not None else e.midpoint()

    intersections = [n for n in (e.u, e.v) if graph.degree(n) >= 3]
    candidates = intersections or [e.u, e.v]
    d = min(geo.haversine_m(point, graph.nodes[n].point) for n in candidates)

    chord = geo.haversine_m(graph.nodes[e.u].point, graph.nodes[e.v].point)
    curved = True if chord == 0.0 else (e.length_m / chord) > sinuosity_threshold

    eu, ev = graph.nodes[e.u].elevation_m, graph.nodes[e.v].elevation_m
    hilly = False
    if eu is not None and ev is not None and e.length_m > 0:
        hilly = abs(ev - eu) / e.length_m > hilly_grade_threshold

    beta = betweenness.beta(edge_id)
    return SegmentFeatures(
        speed_limit_kmh=graph.effective_speed_kmh(e),
        width_m=graph.effective_width_m(e),
        dist_intersect_m=d,
        hilly=hilly,
        curved=curved,
        bikelane=e.bikelane,
        betweenness=min(1.0, max(0.0, beta)),
    )
