"""Build a concept co-occurrence graph from a toy corpus and query it.

Three seed problems mention overlapping concepts; pairs that appear in the
same problem get an edge whose weight counts the co-occurrences. Pairs that
never co-occurred are still reachable through intermediate nodes, which is
what the multi-hop machinery exploits.
"""

from graphsynth.graph import (
    bottleneck_weight,
    build_graph,
    hop_distance,
    identify_hubs,
)

# Each entry: (seed problem id, the concepts it uses).
corpus = [
    ("prob-1", {"Pythagorean theorem", "Perimeter of a triangle", "Square roots"}),
    ("prob-2", {"Perimeter of a triangle", "Square roots", "Linear equations"}),
    ("prob-3", {"Linear equations", "Systems of equations"}),
]

g = build_graph(corpus)

print("nodes:", sorted(g.nodes))
print("edges (a, b, co-occurrence count):")
for a, b, w in g.edges():
    print(f"  {a} -- {b}  (weight {w})")

# "Square roots" and "Perimeter of a triangle" co-occurred twice:
print("\nweight(Square roots, Perimeter):",
      g.weight("Square roots", "Perimeter of a triangle"))

# Distances: 1 = explicit co-occurrence, >1 = implicit relationship.
pairs = [
    ("Pythagorean theorem", "Perimeter of a triangle"),
    ("Pythagorean theorem", "Linear equations"),
    ("Pythagorean theorem", "Systems of equations"),
]
print("\nhop distances:")
for a, b in pairs:
    print(f"  D({a!r}, {b!r}) = {hop_distance(g, a, b)}")

# Hubs are the highest-degree nodes; ties break on the concept id.
hubs = identify_hubs(g, fraction=0.4)
print("\ntop-degree hubs:", sorted(hubs.hub_ids))
print("minimum hub degree:", hubs.min_degree_achieved)

# The bottleneck weight of a pair is the widest shortest path: the best
# guaranteed co-occurrence strength along some minimum-hop route.
print("\nbottleneck(Pythagorean theorem, Linear equations):",
      bottleneck_weight(g, "Pythagorean theorem", "Linear equations"))
