"""Edge-exploration algorithm: builds the configuration model while
reading off its components as excursions of the active half-edge count.

Move types are encoded by the degree class they consume, which is also the
jump type of the continuous-time process: ``0`` pairs two active half-edges,
``k >= 1`` touches a sleeping degree-``k`` vertex (a plain wake-up when no
half-edge is active, otherwise a pairing that wakes the vertex).

RNG consumption is fixed: one uniform per step when ``A == 0``, two per
step otherwise, drawn in step order from a single block of
``2 * (m + n)`` uniforms taken from the generator at the start of a run.
"""

from __future__ import annotations

import csv
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .degree_model import validate_sequence
from .errors import Terminated
from .graph_gen import ComponentRecord, Multigraph

WAKE, PAIR_ACTIVE, PAIR_WAKE = 0, 1, 2
STEP_NAMES = {WAKE: "wake", PAIR_ACTIVE: "pair-active", PAIR_WAKE: "pair-wake"}


@dataclass(frozen=True)
class CountState:
    """Count-level state: active half-edges ``A`` and sleeping vertices per degree."""

    A: int
    V: Mapping[int, int]

    def sleeping_half_edges(self) -> int:
        return sum(k * v for k, v in self.V.items())


def transition_distribution(state) -> dict[int, float]:
    """Law of the next move from a count state.

    Keys are move types (0 = pair two actives, k = consume a degree-k vertex).
    Zero-probability moves are omitted.
    """
    a = state.A
    V = state.V
    pair_w = max(a - 1, 0)
    total = pair_w + sum(k * v for k, v in V.items())
    if total == 0:
        if a == 0:
            raise Terminated("exploration has terminated (A = 0 and V = 0)")
        # a == 1 with nothing sleeping cannot arise from a valid sequence
        raise Terminated("no living partner for the last active half-edge")
    out = {}
    if pair_w:
        out[0] = pair_w / total
    for k in sorted(V):
        if V[k]:
            out[k] = k * V[k] / total
    return out


class ExplorationState:
    """Half-edge level exploration state.

    Active half-edges live in an index-swap array for O(1) uniform
    sampling and removal; sleeping vertices are kept per degree class the
    same way. A half-edge of a sleeping vertex is sleeping; a half-edge of
    an awake vertex is active or dead.
    """

    def __init__(self, degrees: Sequence[int]):
        d = validate_sequence(degrees)
        self.degrees = d.tolist()
        self.n = len(self.degrees)
        start = np.concatenate(([0], np.cumsum(d)[:-1]))
        self.start = start.tolist()
        self.owner = np.repeat(np.arange(self.n), d).tolist()
        self.two_m = len(self.owner)
        self.active: list[int] = []
        self.apos = [-1] * self.two_m
        self.classes = sorted(set(self.degrees))
        self.sleep: dict[int, list[int]] = {k: [] for k in self.classes}
        self.spos = [0] * self.n
        for v, k in enumerate(self.degrees):
            self.spos[v] = len(self.sleep[k])
            self.sleep[k].append(v)
        self.S = self.two_m  # sleeping half-edges
        self.dead = 0
        self._comp_vertices: list[int] = []
        self._comp_edges = 0

    @property
    def A(self) -> int:
        return len(self.active)

    @property
    def V(self) -> dict[int, int]:
        return {k: len(s) for k, s in self.sleep.items()}

    def counts(self) -> CountState:
        return CountState(self.A, self.V)

    def terminated(self) -> bool:
        return not self.active and self.S == 0

    # internal moves

    def _remove_active(self, idx: int) -> int:
        act = self.active
        h = act[idx]
        last = act.pop()
        if last != h:
            act[idx] = last
            self.apos[last] = idx
        self.apos[h] = -1
        return h

    def _wake(self, v: int, killed: int = -1) -> None:
        k = self.degrees[v]
        lst = self.sleep[k]
        i = self.spos[v]
        last = lst.pop()
        if last != v:
            lst[i] = last
            self.spos[last] = i
        self.S -= k
        act = self.active
        apos = self.apos
        for h in range(self.start[v], self.start[v] + k):
            if h != killed:
                apos[h] = len(act)
                act.append(h)
        self._comp_vertices.append(v)

    def _sleeping_by_index(self, idx: int) -> tuple[int, int]:
        """Map ``idx`` in [0, S) to (vertex, half-edge) over sleeping half-edges."""
        for k in self.classes:
            block = k * len(self.sleep[k])
            if idx < block:
                v = self.sleep[k][idx // k]
                return v, self.start[v] + idx % k
            idx -= block
        raise IndexError("sleeping half-edge index out of range")

    # public steps

    def step_uniform(self, u1: float, u2: float = 0.0) -> tuple[int, int, int, int]:
        """One EEA step driven by uniforms.

        Returns ``(kind, type, u, v)`` where ``(u, v)`` is the realized edge
        or ``(-1, -1)`` for a plain wake-up.
        """
        A = len(self.active)
        if A == 0:
            if self.S == 0:
                raise Terminated("exploration has terminated")
            v, _ = self._sleeping_by_index(int(u1 * self.S))
            self._comp_vertices.clear()
            self._comp_edges = 0
            self._wake(v)
            return WAKE, self.degrees[v], -1, -1
        h1 = self._remove_active(int(u1 * A))
        living = A - 1 + self.S
        if living == 0:
            raise Terminated("no living partner for the last active half-edge")
        idx = int(u2 * living)
        self.dead += 2
        self._comp_edges += 1
        if idx < A - 1:
            h2 = self._remove_active(idx)
            return PAIR_ACTIVE, 0, self.owner[h1], self.owner[h2]
        v, h2 = self._sleeping_by_index(idx - (A - 1))
        self._wake(v, killed=h2)
        return PAIR_WAKE, self.degrees[v], self.owner[h1], v

    def step_type(self, k: int, u1: float, u2: float = 0.0) -> tuple[int, int, int, int]:
        """Realize a move of prescribed type ``k`` uniformly within that type."""
        A = len(self.active)
        if k == 0:
            if A < 2:
                raise Terminated("pairing two actives needs A >= 2")
            h1 = self._remove_active(int(u1 * A))
            h2 = self._remove_active(int(u2 * (A - 1)))
            self.dead += 2
            self._comp_edges += 1
            return PAIR_ACTIVE, 0, self.owner[h1], self.owner[h2]
        lst = self.sleep.get(k)
        if not lst:
            raise Terminated(f"no sleeping vertex of degree {k}")
        if A == 0:
            v = lst[int(u1 * len(lst))]
            self._comp_vertices.clear()
            self._comp_edges = 0
            self._wake(v)
            return WAKE, k, -1, -1
        h1 = self._remove_active(int(u1 * A))
        r = int(u2 * k * len(lst))
        v = lst[r // k]
        self.dead += 2
        self._comp_edges += 1
        self._wake(v, killed=self.start[v] + r % k)
        return PAIR_WAKE, k, self.owner[h1], v

    def component_if_complete(self) -> ComponentRecord | None:
        """Record for the component just finished, if the last step closed one."""
        if self.active or not self._comp_vertices:
            return None
        vs = sorted(self._comp_vertices)
        rec = ComponentRecord(
            vertices=tuple(vs),
            edge_count=self._comp_edges,
            degree_config=dict(Counter(self.degrees[v] for v in vs)),
        )
        self._comp_vertices = []
        self._comp_edges = 0
        return rec


@dataclass(frozen=True)
class ExcursionLog:
    """Per-step records of one EEA run.

    ``kinds`` uses WAKE / PAIR_ACTIVE / PAIR_WAKE; ``types`` the move type
    (0 or the woken degree); ``a_after`` and ``v_after`` the counts after
    each step; ``edges`` the realized edge or (-1, -1). Row 0 of
    ``a_after``/``v_after`` is the initial state, so they have one more row
    than the step arrays.
    """

    n: int
    degree_classes: tuple
    kinds: np.ndarray
    types: np.ndarray
    a_after: np.ndarray
    v_after: np.ndarray
    edges: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.kinds)

    def excursion_bounds(self) -> list[tuple[int, int]]:
        """Half-open step ranges ``[start, end)`` of excursions (1-based step j)."""
        zeros = np.flatnonzero(self.a_after[1:] == 0) + 1
        out = []
        prev = 0
        for j in zeros.tolist():
            out.append((prev + 1, j + 1))
            prev = j
        return out

    def edge_count(self) -> int:
        return int(np.count_nonzero(self.kinds != WAKE))


def eea_run(
    degrees: Sequence[int], rng: np.random.Generator
) -> tuple[Multigraph, ExcursionLog, list[ComponentRecord]]:
    """Run the edge-exploration algorithm to termination."""
    st = ExplorationState(degrees)
    n, m = st.n, st.two_m // 2
    u = rng.random(2 * (m + n)).tolist()
    classes = st.classes
    cls_index = {k: i for i, k in enumerate(classes)}
    V = [len(st.sleep[k]) for k in classes]
    kinds, types, a_after, v_rows, edges = [], [], [0], [tuple(V)], []
    comps: list[ComponentRecord] = []
    pos = 0
    while not st.terminated():
        if st.active:
            kind, k, a, b = st.step_uniform(u[pos], u[pos + 1])
            pos += 2
        else:
            kind, k, a, b = st.step_uniform(u[pos])
            pos += 1
        kinds.append(kind)
        types.append(k)
        if kind != PAIR_ACTIVE:
            V[cls_index[k]] -= 1
        a_after.append(len(st.active))
        v_rows.append(tuple(V))
        if kind != WAKE:
            edges.append((a, b) if a <= b else (b, a))
        rec = st.component_if_complete()
        if rec is not None:
            comps.append(rec)
    comps.sort(key=lambda c: c.vertices[0])
    edge_arr = np.array(edges, dtype=np.int64).reshape(-1, 2)
    graph = Multigraph(n=n, edges=edge_arr, degrees=np.asarray(st.degrees, dtype=np.int64))
    full_edges = np.full((len(kinds), 2), -1, dtype=np.int64)
    kinds_arr = np.array(kinds, dtype=np.int8)
    full_edges[kinds_arr != WAKE] = edge_arr
    log = ExcursionLog(
        n=n,
        degree_classes=tuple(classes),
        kinds=kinds_arr,
        types=np.array(types, dtype=np.int64),
        a_after=np.array(a_after, dtype=np.int64),
        v_after=np.array(v_rows, dtype=np.int64),
        edges=full_edges,
    )
    return graph, log, comps


def components_from_log(log: ExcursionLog) -> list[tuple[int, dict]]:
    """(edge_count, degree_config) per excursion, from the step records alone."""
    out = []
    for start, end in log.excursion_bounds():
        kinds = log.kinds[start - 1 : end - 1]
        types = log.types[start - 1 : end - 1]
        woken = types[kinds != PAIR_ACTIVE]
        out.append((int(np.count_nonzero(kinds != WAKE)), dict(Counter(woken.tolist()))))
    return out


def scaled_embedding(log: ExcursionLog, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Embedded chain ``(A(j) - 1, V(j)) / n`` for ``j = 0..steps``.

    Returns ``(x0, xk)`` with ``xk`` dense over degrees ``0..kmax`` (column 0
    unused and zero), so ``xk[:, k]`` is the scaled count of sleeping
    degree-``k`` vertices.
    """
    n = log.n if n is None else n
    x0 = (log.a_after - 1) / n
    kmax = max(log.degree_classes)
    xk = np.zeros((len(log.a_after), kmax + 1))
    xk[:, list(log.degree_classes)] = log.v_after / n
    return x0, xk


def write_log(log: ExcursionLog, path) -> None:
    """Step records ``j,type,k,A_after`` as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "type", "k", "A_after"])
        for j in range(log.steps):
            w.writerow([j + 1, STEP_NAMES[int(log.kinds[j])], int(log.types[j]), int(log.a_after[j + 1])])
