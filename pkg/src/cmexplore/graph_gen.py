"""Configuration-model multigraphs, their components, and exhaustive matchings."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np

from .degree_model import validate_sequence
from .errors import TooLarge

DEFAULT_ENUM_LIMIT = 14


@dataclass(frozen=True)
class Multigraph:
    """Multigraph on vertices ``0..n-1``; self-loops and parallel edges allowed.

    ``edges`` is an ``(m, 2)`` int array of unordered pairs stored with the
    smaller endpoint first. ``degrees`` counts a self-loop twice.
    """

    n: int
    edges: np.ndarray
    degrees: np.ndarray

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_multiset(self) -> tuple:
        """Canonical hashable form: sorted tuple of (u, v) pairs."""
        return tuple(sorted(map(tuple, self.edges.tolist())))

    def realized_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg


@dataclass(frozen=True)
class ComponentRecord:
    vertices: tuple
    edge_count: int
    degree_config: dict

    def key(self) -> tuple:
        """(edge_count, sorted degree_config items) for multiset comparisons."""
        return (self.edge_count, tuple(sorted(self.degree_config.items())))


def _make_graph(degrees: np.ndarray, pairs: np.ndarray) -> Multigraph:
    pairs = np.sort(pairs.reshape(-1, 2), axis=1)
    return Multigraph(n=len(degrees), edges=pairs, degrees=degrees)


def half_edge_owners(degrees: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(len(degrees)), degrees)


def uniform_matching(degrees: Sequence[int], rng: np.random.Generator) -> Multigraph:
    """Uniform random perfect matching of the half-edges.

    Partial Fisher-Yates: position ``i`` (even) is paired with a uniformly
    chosen position among ``i+1 .. 2m-1``, which is swapped into ``i+1``.
    """
    d = validate_sequence(degrees)
    owners = half_edge_owners(d)
    size = len(owners)
    u = rng.random(size // 2)
    for j, i in enumerate(range(0, size, 2)):
        pick = i + 1 + int(u[j] * (size - i - 1))
        owners[i + 1], owners[pick] = owners[pick], owners[i + 1]
    return _make_graph(d, owners)


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


def components_of(g: Multigraph) -> list[ComponentRecord]:
    """Connected components, ordered by smallest vertex id.

    Degree configurations use each vertex's degree in ``g.degrees``.
    """
    uf = _UnionFind(g.n)
    edges = g.edges.tolist()
    for u, v in edges:
        uf.union(u, v)
    roots = [uf.find(v) for v in range(g.n)]
    members: dict[int, list[int]] = {}
    for v, r in enumerate(roots):
        members.setdefault(r, []).append(v)
    edge_counts = Counter(roots[u] for u, _ in edges)
    degs = g.degrees.tolist()
    out = []
    for r in sorted(members, key=lambda r: members[r][0]):
        vs = members[r]
        out.append(
            ComponentRecord(
                vertices=tuple(vs),
                edge_count=edge_counts.get(r, 0),
                degree_config=dict(Counter(degs[v] for v in vs)),
            )
        )
    return out


def double_factorial_odd(m: int) -> int:
    """(2m - 1)!!, the number of perfect matchings of 2m points."""
    out = 1
    for j in range(1, 2 * m, 2):
        out *= j
    return out


def enumerate_matchings(
    degrees: Sequence[int], limit: int = DEFAULT_ENUM_LIMIT
) -> Iterator[Multigraph]:
    """Yield every perfect matching of the half-edges exactly once.

    Half-edges are distinguishable, so the count is (2m-1)!! even when
    several matchings produce the same edge multiset.
    """
    d = validate_sequence(degrees)
    owners = half_edge_owners(d)
    size = len(owners)
    if size > limit:
        raise TooLarge(f"2m = {size} half-edges exceeds enumeration limit {limit}")
    pairs = np.empty(size, dtype=np.int64)

    def rec(remaining: list[int], depth: int):
        if not remaining:
            yield _make_graph(d, owners[pairs].copy())
            return
        first = remaining[0]
        for idx in range(1, len(remaining)):
            pairs[depth] = first
            pairs[depth + 1] = remaining[idx]
            yield from rec(remaining[1:idx] + remaining[idx + 1 :], depth + 2)

    yield from rec(list(range(size)), 0)


def write_edge_list(g: Multigraph, path) -> None:
    """Edge-list text, one ``u v`` per line, vertices 1-based."""
    with open(path, "w") as fh:
        for u, v in g.edges.tolist():
            fh.write(f"{u + 1} {v + 1}\n")


def component_summary(c: ComponentRecord) -> dict:
    return {
        "size": len(c.vertices),
        "smallest_vertex": c.vertices[0] + 1,
        "edge_count": c.edge_count,
        "degree_config": {str(k): v for k, v in sorted(c.degree_config.items())},
    }
