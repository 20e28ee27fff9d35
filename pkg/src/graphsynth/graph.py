"""Weighted concept co-occurrence graph and combination enumeration.

Nodes are concept ids; an (undirected) edge records how many seed examples
mention both endpoints. Pairs at hop distance greater than one are never
materialized as edges: distances are answered on demand by breadth-first
search, which is all the enumeration below ever needs (distances are capped
at three hops).

Combination kinds:

* ``one_hop``    - directly connected pairs (weight = co-occurrence count)
* ``two_hop``    - pairs at BFS distance exactly 2
* ``three_hop``  - pairs at distance exactly 3 with at least one hub endpoint
* ``community``  - 3- or 4-cliques (weight = minimum internal edge weight)

For multi-hop pairs, "weight" is the bottleneck weight: the maximum over all
minimum-hop paths of the smallest edge weight on the path. It degenerates to
the plain edge weight at distance one and favors pairs linked through
well-attested co-occurrences.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ValidationError

COMBINATION_KINDS = ("one_hop", "two_hop", "three_hop", "community")


@dataclass
class ConceptCombination:
    """A typed tuple of concept ids with its weight and, for hop kinds, one
    shortest path witnessing the distance."""

    kind: str
    concept_ids: list[str]
    weight: float
    witness: list[str] | None = None

    def __post_init__(self) -> None:
        if self.kind not in COMBINATION_KINDS:
            raise ValidationError(f"unknown combination kind {self.kind!r}")
        n = len(self.concept_ids)
        if self.kind == "community":
            if n not in (3, 4):
                raise ValidationError("community combinations have 3 or 4 concepts")
        elif n != 2:
            raise ValidationError(f"{self.kind} combinations have exactly 2 concepts")

    @property
    def combo_id(self) -> str:
        return f"{self.kind}:{'+'.join(self.concept_ids)}"

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "concept_ids": list(self.concept_ids),
            "weight": self.weight,
            "witness": list(self.witness) if self.witness is not None else None,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ConceptCombination":
        return cls(
            kind=rec["kind"],
            concept_ids=list(rec["concept_ids"]),
            weight=rec["weight"],
            witness=list(rec["witness"]) if rec.get("witness") is not None else None,
        )


@dataclass
class HubSet:
    """Top-degree nodes; ties broken by ascending concept id."""

    hub_ids: set[str]
    selection_fraction: float
    min_degree_achieved: int


class ConceptGraph:
    """Immutable after build; all queries are pure and thread-safe."""

    def __init__(self) -> None:
        self._adj: dict[str, dict[str, int]] = {}

    # -- construction (module-private; use build_graph) ----------------------

    def _add_node(self, node: str) -> None:
        self._adj.setdefault(node, {})

    def _add_cooccurrence(self, a: str, b: str) -> None:
        if a == b:
            return
        self._adj.setdefault(a, {})[b] = self._adj.setdefault(a, {}).get(b, 0) + 1
        self._adj.setdefault(b, {})[a] = self._adj.setdefault(b, {}).get(a, 0) + 1

    # -- views ----------------------------------------------------------------

    @property
    def nodes(self) -> set[str]:
        return set(self._adj)

    def node_count(self) -> int:
        return len(self._adj)

    def edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self._adj.values()) // 2

    def has_node(self, node: str) -> bool:
        return node in self._adj

    def neighbors(self, node: str) -> dict[str, int]:
        self._require(node)
        return dict(self._adj[node])

    def degree(self, node: str) -> int:
        self._require(node)
        return len(self._adj[node])

    def weight(self, a: str, b: str) -> int | None:
        self._require(a)
        self._require(b)
        return self._adj[a].get(b)

    def edges(self) -> list[tuple[str, str, int]]:
        """All edges as (a, b, weight) with a < b, sorted."""
        out = []
        for a in sorted(self._adj):
            for b, w in self._adj[a].items():
                if a < b:
                    out.append((a, b, w))
        out.sort()
        return out

    def _require(self, node: str) -> None:
        if node not in self._adj:
            raise ValidationError(f"unknown concept id {node!r}")

    # -- distance machinery ----------------------------------------------------

    def _layered_search(
        self, source: str, max_dist: int | None = None, target: str | None = None
    ) -> tuple[dict[str, int], dict[str, float], dict[str, str | None]]:
        """BFS from ``source`` tracking, per reached node, the shortest-path
        distance, the bottleneck width over all shortest paths (widest
        shortest path), and one predecessor achieving that width.

        Width is computed by dynamic programming over the BFS layer DAG:
        width(v) = max over predecessors u in the previous layer of
        min(width(u), w(u, v)). Ties on width pick the smallest predecessor
        id so witnesses are deterministic.
        """
        self._require(source)
        dist: dict[str, int] = {source: 0}
        width: dict[str, float] = {source: math.inf}
        parent: dict[str, str | None] = {source: None}
        frontier = [source]
        d = 0
        while frontier and (max_dist is None or d < max_dist):
            if target is not None and target in dist:
                break
            d += 1
            candidates: dict[str, tuple[float, str]] = {}
            for u in frontier:
                for v, w in self._adj[u].items():
                    if v in dist:
                        continue
                    cand = (min(width[u], w), u)
                    best = candidates.get(v)
                    if best is None or cand[0] > best[0] or (cand[0] == best[0] and u < best[1]):
                        candidates[v] = cand
            frontier = []
            for v in sorted(candidates):
                dist[v] = d
                width[v], parent[v] = candidates[v]
                frontier.append(v)
        return dist, width, parent

    def _witness(self, parent: dict[str, str | None], node: str) -> list[str]:
        path = [node]
        cur: str | None = node
        while parent[cur] is not None:
            cur = parent[cur]
            path.append(cur)
        path.reverse()
        return path


def build_graph(
    seed_concept_sets: Sequence[tuple[str, Iterable[str]]],
    all_concept_ids: Iterable[str] | None = None,
) -> ConceptGraph:
    """Build the co-occurrence graph from per-seed concept id sets.

    Every unordered pair inside one seed's set gains +1 edge weight. When
    ``all_concept_ids`` is given it defines the node universe: ids outside it
    raise (naming the seed), and ids never co-occurring remain isolated nodes.
    """
    g = ConceptGraph()
    known = set(all_concept_ids) if all_concept_ids is not None else None
    if known is not None:
        for node in sorted(known):
            g._add_node(node)
    for seed_id, concept_ids in seed_concept_sets:
        ids = sorted(set(concept_ids))
        if known is not None:
            unknown = [c for c in ids if c not in known]
            if unknown:
                raise ValidationError(
                    f"seed {seed_id!r} references unknown concept ids {unknown}"
                )
        for node in ids:
            g._add_node(node)
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                g._add_cooccurrence(ids[i], ids[j])
    return g


def hop_distance(g: ConceptGraph, a: str, b: str) -> int | None:
    """Shortest-path length in edges between ``a`` and ``b``; None when
    unreachable; 0 for a node and itself."""
    g._require(a)
    g._require(b)
    dist, _, _ = g._layered_search(a, target=b)
    return dist.get(b)


def bottleneck_weight(g: ConceptGraph, a: str, b: str) -> float:
    """Maximum over all minimum-hop paths of the smallest edge weight along
    the path. For adjacent pairs this is the edge weight itself; for a == b
    it is +inf (empty path)."""
    g._require(a)
    g._require(b)
    dist, width, _ = g._layered_search(a, target=b)
    if b not in dist:
        raise ValidationError(f"no path between {a!r} and {b!r}")
    return width[b]


def enumerate_one_hop(g: ConceptGraph) -> list[ConceptCombination]:
    """One combination per explicit edge, sorted by pair ids."""
    return [
        ConceptCombination(kind="one_hop", concept_ids=[a, b], weight=w, witness=[a, b])
        for a, b, w in g.edges()
    ]


def pairs_at_distance(
    g: ConceptGraph,
    distance: int,
    sources: Iterable[str] | None = None,
) -> list[tuple[str, str, float, list[str]]]:
    """All unordered pairs at exactly ``distance`` hops, as
    (a, b, bottleneck_width, witness_path) with a < b, sorted.

    ``sources`` restricts one endpoint to the given set (used for
    hub-anchored enumeration); pairs qualifying from both endpoints are
    emitted once. The same machinery serves distances beyond three for
    quality-by-distance studies.
    """
    if distance < 1:
        raise ValidationError("distance must be >= 1")
    chosen = sorted(g.nodes if sources is None else set(sources))
    found: dict[tuple[str, str], tuple[float, list[str]]] = {}
    for src in chosen:
        dist, width, parent = g._layered_search(src, max_dist=distance)
        for node, d in dist.items():
            if d != distance:
                continue
            key = (src, node) if src < node else (node, src)
            if key in found:
                continue
            path = g._witness(parent, node)
            if key[0] != src:
                path = list(reversed(path))
            found[key] = (width[node], path)
    return [(a, b, w, path) for (a, b), (w, path) in sorted(found.items())]


def enumerate_two_hop(g: ConceptGraph) -> list[ConceptCombination]:
    """Pairs connected through exactly one intermediate node."""
    return [
        ConceptCombination(kind="two_hop", concept_ids=[a, b], weight=w, witness=path)
        for a, b, w, path in pairs_at_distance(g, 2)
    ]


def identify_hubs(g: ConceptGraph, fraction: float) -> HubSet:
    """Top ceil(fraction * |nodes|) nodes by degree; ties by ascending id."""
    if not 0 < fraction <= 1:
        raise ValidationError("hub fraction must be in (0, 1]")
    if g.node_count() == 0:
        raise ValidationError("cannot select hubs from an empty graph")
    k = max(1, math.ceil(fraction * g.node_count()))
    ranked = sorted(g.nodes, key=lambda n: (-g.degree(n), n))
    hubs = ranked[:k]
    return HubSet(
        hub_ids=set(hubs),
        selection_fraction=fraction,
        min_degree_achieved=min(g.degree(n) for n in hubs),
    )


def enumerate_three_hop(
    g: ConceptGraph, hubs: HubSet, min_weight: float = 2
) -> list[ConceptCombination]:
    """Pairs (hub, other) at distance exactly 3 whose bottleneck weight
    reaches ``min_weight``; low-weight pairs are dropped."""
    return [
        ConceptCombination(kind="three_hop", concept_ids=[a, b], weight=w, witness=path)
        for a, b, w, path in pairs_at_distance(g, 3, sources=hubs.hub_ids)
        if w >= min_weight
    ]


def enumerate_communities(
    g: ConceptGraph,
    sizes: Iterable[int] = (3, 4),
    cap: int | None = None,
) -> list[ConceptCombination]:
    """All 3-cliques and 4-cliques, each weighted by its minimum internal
    edge weight. ``cap`` truncates each clique size deterministically after
    sorting by member ids; 3-cliques nested inside 4-cliques are kept.
    """
    sizes = sorted(set(sizes))
    if any(s not in (3, 4) for s in sizes):
        raise ValidationError("community sizes must be within {3, 4}")
    if cap is not None and cap < 0:
        raise ValidationError("cap must be >= 0")
    triangles: list[tuple[str, str, str]] = []
    for a, b, _ in g.edges():
        common = sorted(set(g._adj[a]) & set(g._adj[b]))
        for c in common:
            if c > b:
                triangles.append((a, b, c))
    triangles.sort()
    out: list[ConceptCombination] = []
    if 3 in sizes:
        chosen3 = triangles if cap is None else triangles[:cap]
        for tri in chosen3:
            out.append(
                ConceptCombination(
                    kind="community",
                    concept_ids=list(tri),
                    weight=_min_internal_weight(g, tri),
                )
            )
    if 4 in sizes:
        quads: list[tuple[str, str, str, str]] = []
        for a, b, c in triangles:
            common = sorted(set(g._adj[a]) & set(g._adj[b]) & set(g._adj[c]))
            for d in common:
                if d > c:
                    quads.append((a, b, c, d))
        quads.sort()
        chosen4 = quads if cap is None else quads[:cap]
        for quad in chosen4:
            out.append(
                ConceptCombination(
                    kind="community",
                    concept_ids=list(quad),
                    weight=_min_internal_weight(g, quad),
                )
            )
    return out


def _min_internal_weight(g: ConceptGraph, members: tuple[str, ...]) -> int:
    weights = []
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            w = g.weight(members[i], members[j])
            if w is None:
                raise ValidationError(
                    f"community {members} is not a clique: missing edge "
                    f"{members[i]}-{members[j]}"
                )
            weights.append(w)
    return min(weights)


def is_novel(
    combination: ConceptCombination,
    seed_concept_sets: Iterable[Iterable[str]],
) -> bool:
    """True when the combination's concept set is not contained in any seed
    example's concept set. Empty combinations are not novel by convention."""
    concepts = set(combination.concept_ids)
    if not concepts:
        return False
    return not any(concepts <= set(s) for s in seed_concept_sets)


def sample_combinations(
    combos: Sequence[ConceptCombination],
    budget: int | None,
    seed: int,
) -> list[ConceptCombination]:
    """Uniform sample without replacement, deterministic under ``seed``.

    The result is order-normalized (sorted by combination id); a budget of
    None or >= len(combos) returns everything.
    """
    ordered = sorted(combos, key=lambda c: c.combo_id)
    if budget is None or budget >= len(ordered):
        return ordered
    if budget < 0:
        raise ValidationError("budget must be >= 0")
    rng = random.Random(seed)
    chosen = sorted(rng.sample(range(len(ordered)), budget))
    return [ordered[i] for i in chosen]
