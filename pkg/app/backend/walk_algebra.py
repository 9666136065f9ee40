"""
File contains the walk-based queries on mixed graphs: m-separation, arcs, districts,
Markov boundary and background, ancestral closure, plus a walk-enumeration oracle.
"""

import logging

from collections import deque
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, Iterator

import networkx as nx

from app.backend.errors import QueryError
from app.backend.graph_core import AnyGraph
from app.backend.settings import Settings

logger = logging.getLogger(__name__)


class Mark(Enum):
    """
    Enumerator class for edge marks.
    """

    TAIL = "tail"
    ARROW = "arrow"


Incidence = dict[str, tuple[tuple[Mark, str, Mark], ...]]


@dataclass(frozen=True)
class SeparationQuery:
    """
    Class stores a separation query J, K given L.
    """

    J: frozenset[str]
    K: frozenset[str]
    L: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "J", frozenset(self.J))
        object.__setattr__(self, "K", frozenset(self.K))
        object.__setattr__(self, "L", frozenset(self.L))
        if not self.J or not self.K:
            raise QueryError("J and K must be nonempty")
        if self.J & self.K or self.J & self.L or self.K & self.L:
            raise QueryError(f"query sets overlap: J={sorted(self.J)} K={sorted(self.K)} L={sorted(self.L)}")

    def check(self, g: AnyGraph) -> None:
        g.require(*self.J, *self.K, *self.L)

    def swapped(self) -> "SeparationQuery":
        return SeparationQuery(self.K, self.J, self.L)

    def describe(self) -> str:
        """
        Method renders the query with sets sorted lexicographically.
        :return: text such as "{A} _||_ {C} | {B}"
        """
        return f"{format_set(self.J)} _||_ {format_set(self.K)} | {format_set(self.L)}"


def format_set(vs: Iterable[str]) -> str:
    return "{" + ", ".join(sorted(vs)) + "}"


@dataclass(frozen=True)
class WalkStep:
    """
    Class stores one traversed edge with the marks at its two ends.
    """

    start: str
    start_mark: Mark
    end_mark: Mark
    end: str


@dataclass(frozen=True)
class Walk:
    """
    Class stores a walk as a nonempty sequence of steps.
    """

    steps: tuple[WalkStep, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise QueryError("a walk needs at least one step")
        for before, after in zip(self.steps, self.steps[1:]):
            if before.end != after.start:
                raise QueryError(f"steps do not connect at {before.end} / {after.start}")

    @property
    def first(self) -> str:
        return self.steps[0].start

    @property
    def last(self) -> str:
        return self.steps[-1].end

    def interior(self) -> Iterator[tuple[str, bool]]:
        """
        Method yields each interior vertex with its collider status.
        :return: iterator of (vertex, is_collider)
        """
        for before, after in zip(self.steps, self.steps[1:]):
            yield before.end, before.end_mark is Mark.ARROW and after.start_mark is Mark.ARROW

    def is_blocked(self, L: frozenset[str]) -> bool:
        """
        Method applies the walk blocking rule given L.
        :param L: conditioning set
        :return: True iff a collider lies outside L or a non-collider lies in L
        """
        return any((v in L) != collider for v, collider in self.interior())

    def is_collider_free(self) -> bool:
        return not any(collider for _, collider in self.interior())


# region Incidence


@lru_cache(maxsize=2048)
def incidence(g: AnyGraph, with_overlay: bool = False) -> Incidence:
    """
    Function lists, for every vertex, the edges at it as (mark here, neighbour, mark there).
    Loops appear once as (ARROW, v, ARROW); overlay edges only when requested.
    :param g: graph or conditional graph
    :param with_overlay: include the overlay edges of a tilde-fixed graph
    :return: mapping vertex to edge tuples
    """
    table: dict[str, list[tuple[Mark, str, Mark]]] = {v: [] for v in g.vertices}
    for tail, head in g.directed:
        table[tail].append((Mark.TAIL, head, Mark.ARROW))
        table[head].append((Mark.ARROW, tail, Mark.TAIL))
    edges = set(g.bidirected) | (set(g.overlay) if with_overlay else set())
    for edge in edges:
        a, b = tuple(edge)
        table[a].append((Mark.ARROW, b, Mark.ARROW))
        table[b].append((Mark.ARROW, a, Mark.ARROW))
    for v in g.loop_vertices:
        table[v].append((Mark.ARROW, v, Mark.ARROW))
    return {v: tuple(sorted(es, key=lambda e: (e[1], e[0].value, e[2].value))) for v, es in table.items()}


# endregion

# region m-separation


def m_connected(g: AnyGraph, q: SeparationQuery) -> bool:
    """
    Function decides m-connection by reachability over (vertex, arriving mark) states.
    Overlay edges of a tilde-fixed graph are included.
    :param g: canonical graph or conditional graph
    :param q: separation query
    :return: True iff an unblocked walk joins J and K given L
    """
    q.check(g)
    edges = incidence(g, True)
    seen: set[tuple[str, Mark]] = set()
    queue: deque[tuple[str, Mark]] = deque()
    for j in q.J:
        for _, neighbour, mark_there in edges[j]:
            queue.append((neighbour, mark_there))

    while queue:
        state = queue.popleft()
        if state in seen:
            continue
        seen.add(state)
        v, arrived = state
        if v in q.K:
            return True
        for leaving, neighbour, mark_there in edges[v]:
            collider = arrived is Mark.ARROW and leaving is Mark.ARROW
            if collider == (v in q.L):
                queue.append((neighbour, mark_there))
    return False


def m_separated(g: AnyGraph, q: SeparationQuery) -> bool:
    return not m_connected(g, q)


def walks_from(g: AnyGraph, start: str, max_len: int) -> Iterator[Walk]:
    """
    Function enumerates every walk from start with at most max_len steps, blocked or not.
    A walk never traverses the same edge twice in the same direction.
    :param g: graph
    :param start: first vertex
    :param max_len: step bound
    :return: iterator of walks
    """
    edges = incidence(g, True)
    steps: list[WalkStep] = []
    used: set[WalkStep] = set()

    def extend(v: str) -> Iterator[Walk]:
        if len(steps) >= max_len:
            return
        for leaving, neighbour, mark_there in edges[v]:
            step = WalkStep(v, leaving, mark_there, neighbour)
            if step in used:
                continue
            used.add(step)
            steps.append(step)
            yield Walk(tuple(steps))
            yield from extend(neighbour)
            steps.pop()
            used.discard(step)

    yield from extend(start)


@lru_cache(maxsize=64)
def _walk_table(g: AnyGraph, start: str, max_len: int) -> tuple[Walk, ...]:
    return tuple(walks_from(g, start, max_len))


def m_connected_oracle(g: AnyGraph, q: SeparationQuery, max_len: int | None = None) -> bool:
    """
    Function decides m-connection by enumerating walks and applying the blocking rule to each.
    Test oracle only.

    A shortest connecting walk never repeats a (vertex, arriving mark) state, so twice the vertex
    count is a sufficient bound.
    :param g: graph
    :param q: separation query
    :param max_len: step bound, defaults to Settings.oracle_walk_factor times the vertex count
    :return: True iff an enumerated walk from J to K is unblocked
    """
    q.check(g)
    bound = Settings.oracle_walk_factor * len(g.vertices) if max_len is None else max_len
    for j in sorted(q.J):
        for walk in _walk_table(g, j, bound):
            if walk.last in q.K and not walk.is_blocked(q.L):
                return True
    return False


def arc_connected(g: AnyGraph, J: Iterable[str], K: Iterable[str]) -> bool:
    """
    Function checks for a collider-free walk between J and K.
    :param g: graph
    :param J: first vertex set
    :param K: second vertex set
    :return: True iff an arc joins them
    """
    return m_connected(g, SeparationQuery(frozenset(J), frozenset(K)))


# endregion

# region Districts and collider connection


def district(g: AnyGraph, v: str) -> frozenset[str]:
    """
    Function returns the vertices joined to v by bidirected edges, v included.
    :param g: graph
    :param v: vertex
    :return: district of v
    """
    g.require(v)
    members = {v}
    queue = deque([v])
    while queue:
        u = queue.popleft()
        for w in g.sibling_map[u]:
            if w not in members:
                members.add(w)
                queue.append(w)
    return frozenset(members)


def districts(g: AnyGraph, among: Iterable[str] | None = None) -> list[frozenset[str]]:
    """
    Function partitions vertices into districts, ordered by their first vertex.
    :param g: graph
    :param among: restrict to these vertices, defaults to all
    :return: list of districts
    """
    pool = g.vertices if among is None else g.sort(among)
    found: list[frozenset[str]] = []
    covered: set[str] = set()
    for v in pool:
        if v not in covered:
            d = district(g, v)
            found.append(d)
            covered |= d
    return found


def _collider_closure(g: AnyGraph, seeds: Iterable[tuple[str, Mark]], v: str) -> frozenset[str]:
    edges = incidence(g, False)
    seen: set[tuple[str, Mark]] = set()
    queue = deque(seeds)
    while queue:
        state = queue.popleft()
        if state in seen:
            continue
        seen.add(state)
        u, arrived = state
        if arrived is not Mark.ARROW:
            continue
        for leaving, neighbour, mark_there in edges[u]:
            if leaving is Mark.ARROW:
                queue.append((neighbour, mark_there))
    return frozenset(u for u, _ in seen if u != v)


def markov_boundary(g: AnyGraph, v: str) -> frozenset[str]:
    """
    Function returns the vertices collider-connected to v.
    :param g: graph
    :param v: vertex
    :return: Markov boundary of v, v excluded
    """
    g.require(v)
    return _collider_closure(g, ((n, m) for _, n, m in incidence(g, False)[v]), v)


def markov_background(g: AnyGraph, v: str) -> frozenset[str]:
    """
    Function returns the vertices collider-connected to v by a walk ending with an arrowhead at v.
    :param g: graph
    :param v: vertex
    :return: Markov background of v, v excluded
    """
    g.require(v)
    seeds = ((n, m) for here, n, m in incidence(g, False)[v] if here is Mark.ARROW)
    return _collider_closure(g, seeds, v)


def collider_connected(g: AnyGraph, u: str, v: str) -> bool:
    return u != v and u in markov_boundary(g, v)


# endregion

# region Directed closures


def parents(g: AnyGraph, v: str) -> frozenset[str]:
    g.require(v)
    return g.parent_map[v]


def children(g: AnyGraph, v: str) -> frozenset[str]:
    g.require(v)
    return g.child_map[v]


def ancestors(g: AnyGraph, v: str) -> frozenset[str]:
    """
    Function returns the ancestors of v, v included (reflexive).
    """
    g.require(v)
    return frozenset(nx.ancestors(g.digraph, v)) | {v}


def descendants(g: AnyGraph, v: str) -> frozenset[str]:
    """
    Function returns the descendants of v, v included (reflexive).
    """
    g.require(v)
    return frozenset(nx.descendants(g.digraph, v)) | {v}


def strict_ancestors(g: AnyGraph, v: str) -> frozenset[str]:
    return ancestors(g, v) - {v}


def strict_descendants(g: AnyGraph, v: str) -> frozenset[str]:
    return descendants(g, v) - {v}


def ancestral_closure(g: AnyGraph, S: Iterable[str]) -> frozenset[str]:
    """
    Function returns the smallest ancestral superset of S.
    :param g: acyclic graph
    :param S: vertex set
    :return: S together with all its ancestors
    """
    closure: set[str] = set()
    for v in S:
        closure |= ancestors(g, v)
    return frozenset(closure)


def is_ancestral(g: AnyGraph, S: Iterable[str]) -> bool:
    members = frozenset(S)
    return ancestral_closure(g, members) == members


def directed_path_avoiding(
    g: AnyGraph, sources: Iterable[str], targets: Iterable[str], blockers: Iterable[str]
) -> bool:
    """
    Function checks for a directed path from sources to targets that avoids blockers.
    :param g: graph
    :param sources: start vertices
    :param targets: end vertices
    :param blockers: vertices the path may not visit
    :return: True iff such a path exists
    """
    blocked = frozenset(blockers)
    sub = g.digraph.subgraph(v for v in g.vertices if v not in blocked)
    target_set = frozenset(targets) - blocked
    for s in frozenset(sources) - blocked:
        if target_set & (nx.descendants(sub, s) | {s}):
            return True
    return False


# endregion
