"""
File contains graph-level operators: latent projection, latent expansions, SWIGs,
augmentation, and fixing on conditional ADMGs.
"""

import itertools
import logging

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import networkx as nx

from app.backend.errors import GraphError, NotFixableError, QueryError
from app.backend.graph_core import AnyGraph, CondADMG, DirectedMixedGraph, require_admg
from app.backend.walk_algebra import SeparationQuery, descendants, district, markov_boundary

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UndirectedGraph:
    """
    Class stores a simple undirected graph.
    """

    vertices: tuple[str, ...]
    edges: frozenset[frozenset[str]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", frozenset(frozenset(e) for e in self.edges))
        members = set(self.vertices)
        for edge in self.edges:
            if len(edge) != 2:
                raise GraphError("undirected graphs have no loops")
            if not edge <= members:
                raise GraphError(f"edge {sorted(edge)} has an unknown endpoint")

    def to_networkx(self) -> nx.Graph:
        ug = nx.Graph()
        ug.add_nodes_from(self.vertices)
        ug.add_edges_from(tuple(e) for e in self.edges)
        return ug

    def serialize(self) -> str:
        lines = ["vertices: " + " ".join(self.vertices)] if self.vertices else ["vertices:"]
        lines += sorted(" - ".join(sorted(e)) for e in self.edges)
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class BidirectedClique:
    """
    Class stores a set of vertices pairwise joined by bidirected edges, in vertex order.
    """

    members: tuple[str, ...]


@dataclass(frozen=True)
class FixableSet:
    """
    Class stores a fixable vertex set with its lexicographic-first fixable permutation.
    """

    members: frozenset[str]
    order: tuple[str, ...]


# region Latent projection


def _hidden_ancestors(g: DirectedMixedGraph, v: str, keep: frozenset[str]) -> frozenset[str]:
    # non-kept vertices with a directed path into v through non-kept vertices only
    found: set[str] = set()
    queue = deque(p for p in g.parent_map[v] if p not in keep)
    while queue:
        u = queue.popleft()
        if u in found:
            continue
        found.add(u)
        queue.extend(p for p in g.parent_map[u] if p not in keep and p not in found)
    return frozenset(found)


def marginalize(g: DirectedMixedGraph, keep: Iterable[str]) -> DirectedMixedGraph:
    """
    Function projects g onto keep.

    A directed edge survives when a directed path joins its endpoints through removed vertices
    only. A bidirected edge appears when a confounding arc does, i.e. the endpoints share a
    removed ancestor or removed-ancestor chains meet at a bidirected edge.
    :param g: acyclic graph
    :param keep: vertices to keep
    :return: canonical graph over keep, vertex order preserved
    """
    require_admg(g)
    keep_set = frozenset(keep)
    g.require(*keep_set)
    kept = tuple(v for v in g.vertices if v in keep_set)

    directed: set[tuple[str, str]] = set()
    for u in kept:
        seen: set[str] = set()
        queue = deque(g.child_map[u])
        while queue:
            w = queue.popleft()
            if w in seen:
                continue
            seen.add(w)
            if w in keep_set:
                directed.add((u, w))
            else:
                queue.extend(g.child_map[w])

    hidden = {v: _hidden_ancestors(g, v, keep_set) for v in kept}
    bidirected: set[frozenset[str]] = set()
    for u, w in itertools.combinations(kept, 2):
        if hidden[u] & hidden[w]:
            bidirected.add(frozenset((u, w)))
            continue
        left = hidden[u] | {u}
        right = hidden[w] | {w}
        if any(frozenset((a, b)) in g.bidirected for a in left for b in right if a != b):
            bidirected.add(frozenset((u, w)))

    result = DirectedMixedGraph(kept, frozenset(directed), frozenset(bidirected))
    logger.debug("marginalized %d vertices away", len(g.vertices) - len(kept))
    return result


# endregion

# region Expansions


def enumerate_bidirected_cliques(g: DirectedMixedGraph, maximal: bool = False) -> list[BidirectedClique]:
    """
    Function lists bidirected cliques, singletons included, ordered by size then by vertex index.
    :param g: graph
    :param maximal: keep only maximal cliques
    :return: list of cliques
    """
    ug = nx.Graph()
    ug.add_nodes_from(g.vertices)
    ug.add_edges_from(tuple(e) for e in g.bidirected)
    found = nx.find_cliques(ug) if maximal else nx.enumerate_all_cliques(ug)
    cliques = [g.sort(c) for c in found]
    cliques.sort(key=lambda c: (len(c), [g.index[v] for v in c]))
    return [BidirectedClique(c) for c in cliques]


def _with_latents(
    g: DirectedMixedGraph,
    latents: list[str],
    directed: set[tuple[str, str]],
    bidirected: Iterable[frozenset[str]] = (),
) -> DirectedMixedGraph:
    if len(set(latents)) != len(latents):
        raise GraphError("latent names are not unique for these vertex labels")
    clash = set(latents) & set(g.vertices)
    if clash:
        raise GraphError(f"latent names collide with vertices: {sorted(clash)}")
    return DirectedMixedGraph(g.vertices + tuple(latents), frozenset(g.directed | directed), frozenset(bidirected))


def expand_pairwise(g: DirectedMixedGraph) -> DirectedMixedGraph:
    """
    Function replaces every bidirected edge by a latent common parent E_<j>_<k>.
    :param g: ADMG
    :return: DAG over the vertices plus latents
    """
    require_admg(g)
    pairs = sorted((g.sort(e) for e in g.bidirected), key=lambda p: (g.index[p[0]], g.index[p[1]]))
    latents = [f"E_{j}_{k}" for j, k in pairs]
    directed = {(name, v) for name, pair in zip(latents, pairs) for v in pair}
    return _with_latents(g, latents, directed)


def expand_clique(g: DirectedMixedGraph, maximal: bool = False, singletons: bool = True) -> DirectedMixedGraph:
    """
    Function replaces bidirected cliques by latent common parents E_c<index>.
    :param g: ADMG
    :param maximal: expand maximal cliques only
    :param singletons: keep singleton cliques
    :return: DAG over the vertices plus latents
    """
    require_admg(g)
    cliques = [c for c in enumerate_bidirected_cliques(g, maximal) if singletons or len(c.members) > 1]
    latents = [f"E_c{i}" for i in range(len(cliques))]
    directed = {(name, v) for name, clique in zip(latents, cliques) for v in clique.members}
    return _with_latents(g, latents, directed)


def expand_noise(g: DirectedMixedGraph) -> DirectedMixedGraph:
    """
    Function gives every vertex a noise parent E_<j>; noise parents inherit the bidirected edges.
    :param g: ADMG
    :return: unconfounded ADMG
    """
    require_admg(g)
    latents = [f"E_{v}" for v in g.vertices]
    directed = {(f"E_{v}", v) for v in g.vertices}
    bidirected = [frozenset(f"E_{v}" for v in e) for e in g.bidirected]
    return _with_latents(g, latents, directed, bidirected)


# endregion

# region SWIG and augmentation


def swig(g: DirectedMixedGraph, intervened: Iterable[str]) -> DirectedMixedGraph:
    """
    Function removes every directed edge leaving an intervened vertex.
    :param g: ADMG
    :param intervened: intervened vertices
    :return: new graph, same vertices
    """
    members = frozenset(intervened)
    g.require(*members)
    return DirectedMixedGraph(
        g.vertices, frozenset(e for e in g.directed if e[0] not in members), g.bidirected, g.canonical
    )


def swig_labels(
    g: DirectedMixedGraph, intervened: Iterable[str], assignment: Mapping[str, int] | None = None
) -> dict[str, str]:
    """
    Function builds display labels such as ``C(b)`` or ``C(B=1)``.
    :param g: graph
    :param intervened: intervened vertices
    :param assignment: optional values of the intervened vertices
    :return: vertex to label
    """
    members = g.sort(intervened)
    if not members:
        return {v: v for v in g.vertices}
    if assignment is None:
        tag = ",".join(v.lower() for v in members)
    else:
        tag = ",".join(f"{v}={assignment[v]}" for v in members)
    return {v: f"{v}({tag})" for v in g.vertices}


def augment(g: AnyGraph) -> UndirectedGraph:
    """
    Function joins every pair of collider-connected vertices.
    :param g: graph
    :return: augmented undirected graph
    """
    edges = {frozenset((u, w)) for u in g.vertices for w in markov_boundary(g, u)}
    return UndirectedGraph(g.vertices, frozenset(edges))


def undirected_separated(u: UndirectedGraph, q: SeparationQuery) -> bool:
    """
    Function checks that every path from J to K meets L.
    :param u: undirected graph
    :param q: separation query
    :return: True iff J and K are separated by L
    """
    members = set(u.vertices)
    if not (q.J | q.K | q.L) <= members:
        raise QueryError("query mentions vertices outside the graph")
    ug = u.to_networkx()
    ug.remove_nodes_from(q.L)
    reached: set[str] = set()
    for j in q.J:
        if j not in reached:
            reached |= nx.node_connected_component(ug, j)
    return not (reached & q.K)


# endregion

# region Fixing


def _as_conditional(g: AnyGraph) -> CondADMG:
    return g if isinstance(g, CondADMG) else CondADMG.from_graph(g)


def is_fixable(c: AnyGraph, v: str) -> bool:
    """
    Function checks that no strict descendant of v shares its district.
    :param c: graph or conditional graph
    :param v: random vertex
    :return: True iff v is fixable
    """
    c = _as_conditional(c)
    c.require(v)
    if v in c.fixed:
        raise NotFixableError(f"{v} is already fixed")
    return not ((descendants(c, v) - {v}) & district(c, v))


def fix_graph(c: AnyGraph, v: str) -> CondADMG:
    """
    Function fixes v: it becomes fixed and loses every edge with an arrowhead at it.
    :param c: graph or conditional graph
    :param v: fixable vertex
    :return: new conditional graph
    """
    c = _as_conditional(c)
    if not is_fixable(c, v):
        raise NotFixableError(f"{v} is not fixable: a strict descendant shares its district")
    g = c.graph
    graph = DirectedMixedGraph(
        g.vertices,
        frozenset(e for e in g.directed if e[1] != v),
        frozenset(e for e in g.bidirected if v not in e),
        g.canonical,
    )
    return CondADMG(graph, c.fixed | {v}, c.overlay)


def fix_graph_sequence(c: AnyGraph, order: Iterable[str]) -> CondADMG:
    current = _as_conditional(c)
    for v in order:
        current = fix_graph(current, v)
    return current


def fixable_permutations(g: AnyGraph, J: Iterable[str]) -> list[tuple[str, ...]]:
    """
    Function lists every fixable permutation of J, lexicographic by vertex index.
    :param g: graph or conditional graph
    :param J: vertex set
    :return: list of orders, empty when J is not fixable
    """
    start = _as_conditional(g)
    J = list(J)
    start.require(*J)
    targets = start.sort(J)
    found: list[tuple[str, ...]] = []

    def search(c: CondADMG, prefix: tuple[str, ...]) -> None:
        if len(prefix) == len(targets):
            found.append(prefix)
            return
        for v in targets:
            if v not in c.fixed and is_fixable(c, v):
                search(fix_graph(c, v), prefix + (v,))

    if set(targets) & start.fixed:
        raise QueryError("J contains already fixed vertices")
    search(start, ())
    return found


def find_fixable_order(g: AnyGraph, J: Iterable[str]) -> tuple[str, ...] | None:
    """
    Function finds the lexicographic-first fixable permutation of J.
    :param g: graph or conditional graph
    :param J: vertex set
    :return: order or None
    """
    start = _as_conditional(g)
    targets = start.sort(J)
    dead: set[frozenset[str]] = set()

    def search(c: CondADMG, prefix: tuple[str, ...]) -> tuple[str, ...] | None:
        if len(prefix) == len(targets):
            return prefix
        if c.fixed in dead:
            return None
        for v in targets:
            if v not in c.fixed and is_fixable(c, v):
                result = search(fix_graph(c, v), prefix + (v,))
                if result is not None:
                    return result
        dead.add(c.fixed)
        return None

    return search(start, ())


def tilde_fix_graph(g: DirectedMixedGraph, J: Iterable[str]) -> CondADMG:
    """
    Function fixes J along a fixable permutation and joins the members of J by overlay edges.
    :param g: ADMG
    :param J: fixable vertex set
    :return: conditional graph with overlay
    """
    members = frozenset(J)
    order = find_fixable_order(g, members)
    if order is None:
        raise NotFixableError(f"{{{', '.join(g.sort(members))}}} has no fixable permutation")
    c = fix_graph_sequence(g, order)
    overlay = frozenset(frozenset(p) for p in itertools.combinations(order, 2))
    return CondADMG(c.graph, c.fixed, overlay)


def fixable_sets(g: DirectedMixedGraph) -> list[FixableSet]:
    """
    Function enumerates every vertex set with a fixable permutation.

    Depth-first search over fixing states, memoized by the fixed set; children are tried in
    vertex order so the first visit of a set records its lexicographic-first permutation.
    :param g: ADMG
    :return: fixable sets ordered by size then vertex index, the empty set first
    """
    require_admg(g)
    orders: dict[frozenset[str], tuple[str, ...]] = {}

    def visit(c: CondADMG, prefix: tuple[str, ...]) -> None:
        orders[c.fixed] = prefix
        for v in c.random:
            if is_fixable(c, v):
                if c.fixed | {v} not in orders:
                    visit(fix_graph(c, v), prefix + (v,))

    visit(CondADMG.from_graph(g), ())
    result = [FixableSet(members, order) for members, order in orders.items()]
    result.sort(key=lambda s: (len(s.members), [g.index[v] for v in g.sort(s.members)]))
    logger.debug("found %d fixable sets", len(result))
    return result


# endregion
