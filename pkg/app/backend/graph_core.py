"""
File contains the graph representations (directed mixed graphs and conditional ADMGs),
graph-class membership, topological orders and the graph text format.
"""

import logging
import re

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator

import networkx as nx

from app.backend.errors import GraphError, GraphSyntaxError
from app.backend.settings import Settings

logger = logging.getLogger(__name__)

LABEL_PATTERN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
EDGE_PATTERN = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(<->|->)\s*([A-Za-z_][A-Za-z0-9_]*)$")
VERTICES_PREFIX = "vertices:"


class GraphClass(Enum):
    """
    Enumerator class for the graph classes a directed mixed graph may belong to.
    """

    ADMG = "ADMG"
    DAG = "DAG"
    BIDIRECTED = "Bidirected"
    UNCONFOUNDED = "Unconfounded"


def _pair(a: str, b: str) -> frozenset[str]:
    return frozenset((a, b))


@dataclass(frozen=True)
class DirectedMixedGraph:
    """
    Class stores an immutable directed mixed graph.

    Bidirected edges are unordered pairs. When ``canonical`` is set every vertex carries an
    implicit bidirected loop, which is never stored.
    """

    vertices: tuple[str, ...]
    directed: frozenset[tuple[str, str]] = field(default_factory=frozenset)
    bidirected: frozenset[frozenset[str]] = field(default_factory=frozenset)
    canonical: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "directed", frozenset((str(t), str(h)) for t, h in self.directed))
        object.__setattr__(self, "bidirected", frozenset(frozenset(e) for e in self.bidirected))
        self._validate()

    def _validate(self) -> None:
        """
        Method checks labels, endpoints and loops.
        :return: Nothing, raises GraphError on the first problem found.
        """
        seen: set[str] = set()
        for v in self.vertices:
            if not isinstance(v, str) or not LABEL_PATTERN.fullmatch(v):
                raise GraphError(f"invalid vertex label: {v!r}")
            if v in seen:
                raise GraphError(f"duplicate vertex: {v}")
            seen.add(v)
        for tail, head in self.directed:
            for endpoint in (tail, head):
                if endpoint not in seen:
                    raise GraphError(f"unknown vertex in edge {tail} -> {head}: {endpoint}")
            if tail == head:
                raise GraphError(f"directed self-loop at {tail}")
        for edge in self.bidirected:
            if len(edge) != 2:
                raise GraphError(f"explicit bidirected loop at {next(iter(edge))} (loops are implicit)")
            for endpoint in edge:
                if endpoint not in seen:
                    raise GraphError(f"unknown vertex in edge {' <-> '.join(sorted(edge))}: {endpoint}")

    @cached_property
    def index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def parent_map(self) -> dict[str, frozenset[str]]:
        parents: dict[str, set[str]] = {v: set() for v in self.vertices}
        for tail, head in self.directed:
            parents[head].add(tail)
        return {v: frozenset(p) for v, p in parents.items()}

    @cached_property
    def child_map(self) -> dict[str, frozenset[str]]:
        children: dict[str, set[str]] = {v: set() for v in self.vertices}
        for tail, head in self.directed:
            children[tail].add(head)
        return {v: frozenset(c) for v, c in children.items()}

    @cached_property
    def sibling_map(self) -> dict[str, frozenset[str]]:
        siblings: dict[str, set[str]] = {v: set() for v in self.vertices}
        for edge in self.bidirected:
            a, b = tuple(edge)
            siblings[a].add(b)
            siblings[b].add(a)
        return {v: frozenset(s) for v, s in siblings.items()}

    @cached_property
    def digraph(self) -> nx.DiGraph:
        """
        Directed part of the graph as a networkx DiGraph, vertices in index order.
        """
        dg = nx.DiGraph()
        dg.add_nodes_from(self.vertices)
        dg.add_edges_from(self.directed)
        return dg

    @property
    def loop_vertices(self) -> frozenset[str]:
        return frozenset(self.vertices) if self.canonical else frozenset()

    @property
    def overlay(self) -> frozenset[frozenset[str]]:
        return frozenset()

    def has_loop(self, v: str) -> bool:
        """
        Method tells whether v carries the implicit bidirected loop.
        :param v: vertex label
        :return: True for every vertex of a canonical graph
        """
        self.require(v)
        return self.canonical

    def require(self, *vs: str) -> None:
        """
        Method raises GraphError when any of the labels is not a vertex.
        :param vs: vertex labels
        :return: Nothing
        """
        for v in vs:
            if v not in self.index:
                raise GraphError(f"unknown vertex: {v}")

    def sort(self, vs: Iterable[str]) -> tuple[str, ...]:
        """
        Method orders vertices by their index in this graph.
        :param vs: vertex labels
        :return: tuple in index order
        """
        return tuple(sorted(vs, key=self.index.__getitem__))

    def induced_subgraph(self, keep: Iterable[str]) -> "DirectedMixedGraph":
        """
        Method returns the subgraph induced by keep.
        :param keep: vertices to keep
        :return: new graph over keep, in the original vertex order
        """
        keep_set = frozenset(keep)
        self.require(*keep_set)
        return DirectedMixedGraph(
            vertices=tuple(v for v in self.vertices if v in keep_set),
            directed=frozenset(e for e in self.directed if e[0] in keep_set and e[1] in keep_set),
            bidirected=frozenset(e for e in self.bidirected if e <= keep_set),
            canonical=self.canonical,
        )

    def has_bidirected(self, a: str, b: str) -> bool:
        return _pair(a, b) in self.bidirected


@dataclass(frozen=True)
class CondADMG:
    """
    Class stores a conditional ADMG: random vertices carry implicit loops, fixed vertices receive no arrowheads.

    ``overlay`` holds bidirected edges among fixed vertices added by the tilde construction; only
    m-separation consults it.
    """

    graph: DirectedMixedGraph
    fixed: frozenset[str] = field(default_factory=frozenset)
    overlay: frozenset[frozenset[str]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "fixed", frozenset(self.fixed))
        object.__setattr__(self, "overlay", frozenset(frozenset(e) for e in self.overlay))
        self.graph.require(*self.fixed)
        for tail, head in self.graph.directed:
            if head in self.fixed:
                raise GraphError(f"directed edge {tail} -> {head} points into fixed vertex {head}")
        for edge in self.graph.bidirected:
            if edge & self.fixed:
                raise GraphError(f"bidirected edge {' <-> '.join(sorted(edge))} touches a fixed vertex")
        for edge in self.overlay:
            if len(edge) != 2 or not edge <= self.fixed:
                raise GraphError(f"overlay edge {sorted(edge)} must join two fixed vertices")

    @classmethod
    def from_graph(cls, g: DirectedMixedGraph) -> "CondADMG":
        return cls(graph=g)

    @property
    def vertices(self) -> tuple[str, ...]:
        return self.graph.vertices

    @property
    def random(self) -> tuple[str, ...]:
        return tuple(v for v in self.graph.vertices if v not in self.fixed)

    @property
    def directed(self) -> frozenset[tuple[str, str]]:
        return self.graph.directed

    @property
    def bidirected(self) -> frozenset[frozenset[str]]:
        return self.graph.bidirected

    @property
    def index(self) -> dict[str, int]:
        return self.graph.index

    @property
    def parent_map(self) -> dict[str, frozenset[str]]:
        return self.graph.parent_map

    @property
    def child_map(self) -> dict[str, frozenset[str]]:
        return self.graph.child_map

    @property
    def sibling_map(self) -> dict[str, frozenset[str]]:
        return self.graph.sibling_map

    @property
    def digraph(self) -> nx.DiGraph:
        return self.graph.digraph

    @property
    def loop_vertices(self) -> frozenset[str]:
        return frozenset(self.random)

    def has_loop(self, v: str) -> bool:
        self.graph.require(v)
        return v not in self.fixed

    def require(self, *vs: str) -> None:
        self.graph.require(*vs)

    def sort(self, vs: Iterable[str]) -> tuple[str, ...]:
        return self.graph.sort(vs)


AnyGraph = DirectedMixedGraph | CondADMG


@dataclass(frozen=True)
class TopologicalOrder:
    """
    Class stores a vertex sequence in which every directed edge points forward.
    """

    sequence: tuple[str, ...]

    def check(self, g: AnyGraph) -> None:
        """
        Method validates the order against g.
        :param g: graph the order claims to belong to
        :return: Nothing, raises GraphError when invalid
        """
        if sorted(self.sequence) != sorted(g.vertices) or len(set(self.sequence)) != len(self.sequence):
            raise GraphError(f"order {list(self.sequence)} is not a permutation of the vertices")
        position = {v: i for i, v in enumerate(self.sequence)}
        for tail, head in g.directed:
            if position[tail] > position[head]:
                raise GraphError(f"order places {head} before its parent {tail}")

    def pre(self, v: str) -> tuple[str, ...]:
        """
        Method returns the vertices strictly before v.
        :param v: vertex label
        :return: predecessors of v in this order
        """
        return self.sequence[: self.sequence.index(v)]


# region Graph text format


def parse_graph(text: str) -> DirectedMixedGraph:
    """
    Function parses the graph text format.
    :param text: file contents
    :return: canonical DirectedMixedGraph in the order of the vertices line
    """
    vertices: list[str] | None = None
    directed: set[tuple[str, str]] = set()
    bidirected: set[frozenset[str]] = set()

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if vertices is None:
            if not line.startswith(VERTICES_PREFIX):
                raise GraphSyntaxError(f"expected '{VERTICES_PREFIX}' line, got {line!r}", number)
            vertices = []
            for label in line[len(VERTICES_PREFIX) :].split():
                if not LABEL_PATTERN.fullmatch(label):
                    raise GraphSyntaxError(f"invalid vertex label {label!r}", number)
                if label in vertices:
                    raise GraphSyntaxError(f"duplicate vertex {label}", number)
                vertices.append(label)
            continue

        match = EDGE_PATTERN.match(line)
        if match is None:
            raise GraphSyntaxError(f"cannot parse edge {line!r}", number)
        a, arrow, b = match.groups()
        for endpoint in (a, b):
            if endpoint not in vertices:
                raise GraphSyntaxError(f"unknown vertex {endpoint}", number)
        if a == b:
            kind = "directed self-loop" if arrow == "->" else "explicit bidirected loop"
            raise GraphSyntaxError(f"{kind} at {a}", number)
        if arrow == "->":
            directed.add((a, b))
        else:
            bidirected.add(_pair(a, b))

    if vertices is None:
        raise GraphSyntaxError(f"missing '{VERTICES_PREFIX}' line", 1)
    g = DirectedMixedGraph(tuple(vertices), frozenset(directed), frozenset(bidirected))
    logger.debug(
        "parsed graph with %d vertices, %d directed, %d bidirected", len(vertices), len(directed), len(bidirected)
    )
    return g


def directed_lines(g: AnyGraph) -> list[str]:
    return [f"{t} -> {h}" for t, h in sorted(g.directed)]


def bidirected_lines(edges: Iterable[frozenset[str]]) -> list[str]:
    return sorted(" <-> ".join(sorted(e)) for e in edges)


def serialize_graph(g: DirectedMixedGraph) -> str:
    """
    Function writes g in the graph text format, edges sorted lexicographically.
    :param g: graph to serialize
    :return: text ending with a newline
    """
    lines = ["vertices: " + " ".join(g.vertices)] if g.vertices else ["vertices:"]
    lines += directed_lines(g)
    lines += bidirected_lines(g.bidirected)
    return "\n".join(lines) + "\n"


# endregion

# region Graph classes


def is_acyclic(g: AnyGraph) -> bool:
    """
    Function checks that the directed edges contain no cycle.
    :param g: graph
    :return: True iff no directed cycle exists
    """
    return nx.is_directed_acyclic_graph(g.digraph)


def exogenous_vertices(g: AnyGraph) -> frozenset[str]:
    """
    Function returns vertices without incoming directed edges.
    :param g: graph
    :return: set of exogenous vertices
    """
    heads = {h for _, h in g.directed}
    return frozenset(v for v in g.vertices if v not in heads)


def classify(g: DirectedMixedGraph) -> frozenset[GraphClass]:
    """
    Function returns every graph class g belongs to.
    :param g: graph
    :return: set of GraphClass members, empty for cyclic graphs
    """
    if not is_acyclic(g):
        return frozenset()
    classes = {GraphClass.ADMG}
    if not g.bidirected:
        classes.add(GraphClass.DAG)
    if not g.directed:
        classes.add(GraphClass.BIDIRECTED)
    exogenous = exogenous_vertices(g)
    if all(edge <= exogenous for edge in g.bidirected):
        classes.add(GraphClass.UNCONFOUNDED)
    return frozenset(classes)


def require_admg(g: DirectedMixedGraph) -> None:
    if not is_acyclic(g):
        raise GraphError("graph has a directed cycle")


def require_dag(g: DirectedMixedGraph) -> None:
    require_admg(g)
    if g.bidirected:
        raise GraphError("graph has bidirected edges, a DAG is required")


# endregion

# region Topological orders


def _orders(g: AnyGraph) -> Iterator[tuple[str, ...]]:
    indegree = {v: len(g.parent_map[v]) for v in g.vertices}
    prefix: list[str] = []
    placed: set[str] = set()

    def extend() -> Iterator[tuple[str, ...]]:
        if len(prefix) == len(g.vertices):
            yield tuple(prefix)
            return
        for v in g.vertices:
            if v in placed or indegree[v]:
                continue
            placed.add(v)
            prefix.append(v)
            for child in g.child_map[v]:
                indegree[child] -= 1
            yield from extend()
            for child in g.child_map[v]:
                indegree[child] += 1
            prefix.pop()
            placed.discard(v)

    yield from extend()


def topological_orders(g: AnyGraph, limit: int | None = None) -> list[TopologicalOrder]:
    """
    Function enumerates topological orders, lexicographic-first by vertex index.
    :param g: acyclic graph
    :param limit: maximum number of orders, defaults to Settings.topological_order_limit
    :return: list of TopologicalOrder
    """
    if not is_acyclic(g):
        raise GraphError("topological orders need an acyclic graph")
    limit = Settings.topological_order_limit if limit is None else limit
    result: list[TopologicalOrder] = []
    for sequence in _orders(g):
        if len(result) >= limit:
            break
        result.append(TopologicalOrder(sequence))
    return result


def first_topological_order(g: AnyGraph) -> TopologicalOrder:
    return topological_orders(g, limit=1)[0]


# endregion
