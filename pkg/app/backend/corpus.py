"""
File contains named example graphs and seeded generators of random graphs and tables used by the
randomized suites, including the search for a table that separates the global Markov model from
the nested Markov model on the Verma graph.
"""

import itertools
import logging
import string

from fractions import Fraction
from typing import Any, Mapping

import numpy as np

from app.backend.causal_sim import dyadic_distribution, generate_system, induced_joint
from app.backend.dist_core import ArithmeticMode, JointTable, StateSpace, marginal_values, reorder
from app.backend.errors import AdmgError, GraphError
from app.backend.graph_core import DirectedMixedGraph, GraphClass, classify, exogenous_vertices, parse_graph
from app.backend.settings import Settings

logger = logging.getLogger(__name__)

NAMED_GRAPHS: dict[str, str] = {
    "mixed": "vertices: A B C D\nA -> B\nB -> C\nB -> D\nA <-> C\nC <-> D\n",
    "six_vertex": (
        "vertices: V1 V2 V3 V4 V5 V6\nV4 -> V3\nV4 -> V6\n"
        "V1 <-> V2\nV1 <-> V3\nV2 <-> V4\nV4 <-> V5\n"
    ),
    "six_vertex_projected": (
        "vertices: V1 V2 V3 V5 V6\n"
        "V1 <-> V2\nV1 <-> V3\nV2 <-> V3\nV2 <-> V6\nV3 <-> V5\nV3 <-> V6\nV5 <-> V6\n"
    ),
    "verma": "vertices: V1 V2 V3 V4\nV1 -> V2\nV2 -> V3\nV3 -> V4\nV2 <-> V4\n",
    "iv": "vertices: Z X Y\nX -> Y\nZ -> X\nX <-> Y\n",
    "chain": "vertices: A B C\nA -> B\nB -> C\n",
    "collider": "vertices: A B C\nA -> C\nB -> C\n",
    "fork": "vertices: A B C\nB -> A\nB -> C\n",
}

GRAPH_KINDS = ("admg", "unconfounded", "dag", "bidirected")


def named_graph(name: str) -> DirectedMixedGraph:
    """
    Function parses one of the named example graphs.
    :param name: key of NAMED_GRAPHS
    :return: graph
    """
    if name not in NAMED_GRAPHS:
        raise GraphError(f"unknown named graph {name!r}, expected one of {sorted(NAMED_GRAPHS)}")
    return parse_graph(NAMED_GRAPHS[name])


# region Random graphs


def _labels(n: int) -> tuple[str, ...]:
    if not 0 <= n <= len(string.ascii_uppercase):
        raise GraphError(f"random graphs take 0 to {len(string.ascii_uppercase)} vertices, got {n}")
    return tuple(string.ascii_uppercase[:n])


def _pairs(rng: np.random.Generator, members: list[str], p: float) -> set[frozenset[str]]:
    return {frozenset(pair) for pair in itertools.combinations(members, 2) if rng.random() < p}


def random_admg(
    rng: np.random.Generator,
    n: int,
    p_directed: float = 0.4,
    p_bidirected: float = 0.3,
    kind: str = "admg",
) -> DirectedMixedGraph:
    """
    Function draws a random canonical ADMG. Directed edges follow a hidden random ranking of the
    vertices, so the vertex order is not a topological order in general.
    :param rng: numpy random generator
    :param n: number of vertices
    :param p_directed: probability of each forward directed edge
    :param p_bidirected: probability of each bidirected edge
    :param kind: "admg", "unconfounded", "dag" or "bidirected"
    :return: graph
    """
    if kind not in GRAPH_KINDS:
        raise GraphError(f"unknown graph kind {kind!r}, expected one of {GRAPH_KINDS}")
    labels = _labels(n)
    ranked = [labels[i] for i in rng.permutation(n)]
    directed: set[tuple[str, str]] = set()
    if kind == "unconfounded":
        split = int(rng.integers(1, n + 1)) if n else 0
        exogenous, endogenous = ranked[:split], ranked[split:]
        for position, head in enumerate(endogenous):
            for tail in exogenous + endogenous[:position]:
                if rng.random() < p_directed:
                    directed.add((tail, head))
        bidirected = _pairs(rng, exogenous, p_bidirected)
    else:
        if kind != "bidirected":
            directed = {(a, b) for a, b in itertools.combinations(ranked, 2) if rng.random() < p_directed}
        bidirected = set() if kind == "dag" else _pairs(rng, ranked, p_bidirected)
    return DirectedMixedGraph(labels, frozenset(directed), frozenset(bidirected))


def random_dag(rng: np.random.Generator, n: int, p_directed: float = 0.4) -> DirectedMixedGraph:
    return random_admg(rng, n, p_directed, kind="dag")


def random_unconfounded_admg(
    rng: np.random.Generator, n: int, p_directed: float = 0.4, p_bidirected: float = 0.5
) -> DirectedMixedGraph:
    return random_admg(rng, n, p_directed, p_bidirected, kind="unconfounded")


def random_bidirected_graph(rng: np.random.Generator, n: int, p_bidirected: float = 0.4) -> DirectedMixedGraph:
    return random_admg(rng, n, p_bidirected=p_bidirected, kind="bidirected")


# endregion

# region Random tables


def _space(g: DirectedMixedGraph, cards: Mapping[str, int] | None) -> StateSpace:
    return StateSpace.of([(v, (cards or {}).get(v, Settings.default_cardinality)) for v in g.vertices])


def random_table(rng: np.random.Generator, space: StateSpace, bits: int | None = None) -> JointTable:
    """
    Function draws a positive rational table whose entries have a power-of-two denominator.
    :param rng: numpy random generator
    :param space: state space
    :param bits: denominator exponent, raised when too small for the space
    :return: rational joint table
    """
    space.check_cap()
    return JointTable(space, dyadic_distribution(rng, space.size, bits))


def random_ef_table(
    rng: np.random.Generator, g: DirectedMixedGraph, cards: Mapping[str, int] | None = None
) -> JointTable:
    """
    Function builds a member of the exogenous factorization model of an unconfounded ADMG:
    a clique-latent law over the exogenous vertices times random conditionals for the rest.
    :param rng: numpy random generator
    :param g: unconfounded ADMG
    :param cards: vertex cardinalities
    :return: rational joint table over the vertices of g
    """
    if GraphClass.UNCONFOUNDED not in classify(g):
        raise GraphError("exogenous factorization tables need an unconfounded graph")
    space = _space(g, cards)
    space.check_cap()
    exogenous = g.sort(exogenous_vertices(g))
    base = g.induced_subgraph(exogenous)
    law = induced_joint(generate_system(base, int(rng.integers(2**31)), cards=dict(zip(space.names, space.cards))))

    conditionals: dict[str, dict[tuple[int, ...], list[Fraction]]] = {}
    for v in g.vertices:
        if v in exogenous:
            continue
        parents = g.sort(g.parent_map[v])
        configurations = itertools.product(*(range(space.card(p)) for p in parents))
        conditionals[v] = {config: dyadic_distribution(rng, space.card(v)) for config in configurations}

    values = []
    for cell in space.assignments():
        point = dict(zip(space.names, cell))
        p = law.values[tuple(point[v] for v in law.names)]
        for v, table in conditionals.items():
            p = p * table[tuple(point[u] for u in g.sort(g.parent_map[v]))][point[v]]
        values.append(p)
    return JointTable(space, values)


def perturb_table(rng: np.random.Generator, t: JointTable, bits: int = 3) -> JointTable:
    """
    Function adds mass to one random cell and renormalizes.
    :param rng: numpy random generator
    :param t: table
    :param bits: the added mass is k / 2**bits for a random k between 1 and 2**bits
    :return: new table of the same mode
    """
    cells = t.flat()
    chosen = int(rng.integers(len(cells)))
    delta: Any = Fraction(int(rng.integers(1, 2**bits + 1)), 2**bits)
    if t.mode is ArithmeticMode.FLOAT:
        delta = float(delta)
    cells[chosen] = cells[chosen] + delta
    return JointTable(t.space, [x / (1 + delta) for x in cells], t.mode, tol=Settings.tolerance)


# endregion

# region Verma constraint


def verma_functional(t: JointTable) -> dict[tuple[int, int, int], Any]:
    """
    Function evaluates sum over v2 of p(v4 | v1, v2, v3) p(v2 | v1) for every (v1, v3, v4).
    On the Verma graph it must not depend on v1 for members of the nested Markov model.
    :param t: positive table over V1, V2, V3, V4
    :return: (v1, v3, v4) to value
    """
    names = ("V1", "V2", "V3", "V4")
    if sorted(t.names) != sorted(names):
        raise GraphError(f"the Verma functional needs variables {list(names)}")
    t = reorder(t, names)
    p = t.values
    p123 = marginal_values(t, names[:3])
    p12 = marginal_values(t, names[:2])
    p1 = marginal_values(t, names[:1])
    c1, c2, c3, c4 = p.shape
    result = {}
    for v1, v3, v4 in itertools.product(range(c1), range(c3), range(c4)):
        total: Any = 0
        for v2 in range(c2):
            total = total + p[v1, v2, v3, v4] / p123[v1, v2, v3] * p12[v1, v2] / p1[v1]
        result[(v1, v3, v4)] = total
    return result


def verma_gap(t: JointTable) -> float:
    """
    Function returns the largest change of the Verma functional across v1.
    :param t: positive table over V1, V2, V3, V4
    :return: nonnegative gap, zero when the constraint holds
    """
    values = verma_functional(t)
    worst = 0.0
    for (v1, v3, v4), value in values.items():
        worst = max(worst, float(abs(value - values[(0, v3, v4)])))
    return worst


def verma_gm_only_table(rng: np.random.Generator, budget: int = 100) -> JointTable:
    """
    Function searches for a positive binary table on the Verma graph with V1 _||_ V3 | V2 that
    violates the Verma constraint. Candidates factor as p(v1) p(v2|v1) p(v3|v2) p(v4|v1,v2,v3);
    those that satisfy the constraint are rejected.
    :param rng: numpy random generator
    :param budget: number of candidates to try
    :return: rational joint table
    """
    space = StateSpace.of([("V1", 2), ("V2", 2), ("V3", 2), ("V4", 2)])
    for attempt in range(budget):
        p1 = dyadic_distribution(rng, 2)
        p2 = {v1: dyadic_distribution(rng, 2) for v1 in range(2)}
        p3 = {v2: dyadic_distribution(rng, 2) for v2 in range(2)}
        p4 = {cell: dyadic_distribution(rng, 2) for cell in itertools.product(range(2), repeat=3)}
        values = [
            p1[v1] * p2[v1][v2] * p3[v2][v3] * p4[(v1, v2, v3)][v4]
            for v1, v2, v3, v4 in space.assignments()
        ]
        t = JointTable(space, values)
        if verma_gap(t) > 0:
            logger.debug("Verma search accepted candidate %d", attempt)
            return t
        logger.debug("Verma search rejected candidate %d", attempt)
    logger.warning("Verma search exhausted %d candidates", budget)
    raise AdmgError(f"no table violating the Verma constraint within {budget} candidates")


# endregion
