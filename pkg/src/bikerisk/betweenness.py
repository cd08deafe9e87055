"""Edge betweenness centrality over the street network.

For every unordered pair of intersections, each street segment accumulates
the fraction of the pair's shortest paths that traverse it. Shortest paths
are weighted by segment length, so the score behaves like a travel-distance
traffic proxy. Computed with single-source Dijkstra passes and dependency
accumulation; an optional sampled mode estimates the same quantity from K
random source nodes for large networks.

Values are normalized by the number of unordered node pairs, n(n-1)/2, which
bounds the feature to [0, 1] (each pair contributes at most 1 to any edge).
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .graph import StreetGraph

Adjacency = dict[str, list[tuple[str, str, float]]]


@dataclass(frozen=True)
class BetweennessResult:
    """Raw per-edge accumulations plus the normalization constant.

    `values[e]` is the unnormalized sum over unordered pairs of
    sigma_ij(e) / sigma_ij; `beta(e)` divides by `normalization` to give the
    bounded model feature.
    """

    values: dict[str, float]
    mode: str  # "exact" | "sampled" | "loaded"
    normalization: float
    sample_size: int | None = None
    seed: int | None = None

    def beta(self, edge_id: str) -> float:
        return self.values[edge_id] / self.normalization

    def normalized(self) -> dict[str, float]:
        return {e: v / self.normalization for e, v in self.values.items()}

    def to_csv(self) -> str:
        lines = ["edge_id,beta"]
        for eid in sorted(self.values):
            lines.append(f"{eid},{self.beta(eid)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "BetweennessResult":
        values: dict[str, float] = {}
        for line in text.splitlines()[1:]:
            line = line.strip()
            if not line:
                continue
            eid, _, beta = line.rpartition(",")
            values[eid] = float(beta)
        return cls(values=values, mode="loaded", normalization=1.0)


def _source_pass(
    adj: Adjacency, source: str
) -> tuple[list[str], dict[str, float], dict[str, list[tuple[str, str]]]]:
    """Dijkstra from one source with shortest-path counting.

    Returns (settle order, path counts sigma, predecessors). Predecessor
    entries are (node, edge_id) pairs so parallel equal-length edges are
    counted as distinct paths. Requires strictly positive edge lengths, which
    guarantees every equal-distance predecessor settles before its successor.
    """
    settled: dict[str, float] = {}
    tentative: dict[str, float] = {source: 0.0}
    sigma: dict[str, float] = {source: 1.0}
    preds: dict[str, list[tuple[str, str]]] = {source: []}
    order: list[str] = []
    heap: list[tuple[float, str]] = [(0.0, source)]
    while heap:
        d, v = heapq.heappop(heap)
        if v in settled:
            continue
        settled[v] = d
        order.append(v)
        sigma_v = sigma[v]
        for w, eid, length in adj[v]:
            if w == v or w in settled:
                continue
            vw = d + length
            t = tentative.get(w)
            if t is None or vw < t:
                tentative[w] = vw
                sigma[w] = sigma_v
                preds[w] = [(v, eid)]
                heapq.heappush(heap, (vw, w))
            elif vw == t:
                sigma[w] += sigma_v
                preds[w].append((v, eid))
    return order, sigma, preds


def edge_betweenness(
    graph: "StreetGraph",
    mode: str = "exact",
    sample_size: int | None = None,
    seed: int | None = None,
) -> BetweennessResult:
    """Length-weighted edge betweenness over unordered node pairs.

    Exact mode runs one pass per node. Sampled mode draws `sample_size`
    sources without replacement and rescales by n/K, so K = n reproduces the
    exact result; given a seed it is deterministic. Disconnected graphs are
    handled naturally (unreachable pairs contribute nothing).
    """
    nodes = sorted(graph.nodes)
    n = len(nodes)
    adj = graph.adjacency()
    raw = {eid: 0.0 for eid in sorted(graph.edges)}

    if mode == "exact":
        sources = nodes
        scale = 1.0
    elif mode == "sampled":
        if sample_size is None or sample_size <= 0:
            raise ValueError(f"sampled mode needs a positive source count, got {sample_size}")
        k = min(sample_size, n)
        rng = random.Random(seed)
        sources = rng.sample(nodes, k)
        scale = n / k
    else:
        raise ValueError(f"unknown betweenness mode {mode!r}")

    for s in sources:
        order, sigma, preds = _source_pass(adj, s)
        delta = {v: 0.0 for v in order}
        for w in reversed(order):
            coeff = (1.0 + delta[w]) / sigma[w]
            for v, eid in preds[w]:
                c = sigma[v] * coeff
                raw[eid] += c * scale
                delta[v] += c

    # Every unordered pair was visited from both endpoints.
    for eid in raw:
        raw[eid] /= 2.0

    normalization = n * (n - 1) / 2.0 if n >= 2 else 1.0
    return BetweennessResult(
        values=raw,
        mode=mode,
        normalization=normalization,
        sample_size=len(sources) if mode == "sampled" else None,
        seed=seed if mode == "sampled" else None,
    )
