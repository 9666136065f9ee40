"""
File contains nonparametric equation systems over finite alphabets, exact potential-outcome
laws by recursive substitution, and the verifications of its causal properties.
"""

import itertools
import logging
import math

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Iterator, Mapping

import numpy as np

from app.backend.dist_core import (
    ArithmeticMode,
    JointTable,
    StateSpace,
    Variable,
    fix_sequence,
    gap,
    kernels_equal,
    marginal,
    marginal_values,
    same_value,
)
from app.backend.errors import NotFixableError, PreconditionError, QueryError, StateSpaceTooLarge, SystemSpecError
from app.backend.graph_core import DirectedMixedGraph, first_topological_order, require_admg, require_dag
from app.backend.graph_transform import enumerate_bidirected_cliques, fixable_permutations, swig
from app.backend.markov_checks import CheckReport, ModelKind, aligned, check_gm, check_um
from app.backend.settings import Settings
from app.backend.walk_algebra import directed_path_avoiding, format_set

logger = logging.getLogger(__name__)

CONSTRUCTIONS = ("clique_latent", "user")


def noise_name(v: str) -> str:
    return f"E_{v}"


def noise_graph(g: DirectedMixedGraph) -> DirectedMixedGraph:
    """
    Function returns the bidirected component of g with vertices renamed to their noise names.
    :param g: ADMG
    :return: bidirected graph over E_<v>
    """
    return DirectedMixedGraph(
        tuple(noise_name(v) for v in g.vertices),
        bidirected=frozenset(frozenset(noise_name(v) for v in e) for e in g.bidirected),
    )


@dataclass(frozen=True)
class PotentialOutcomeQuery:
    """
    Class stores an intervention: the intervened vertices with their values.
    """

    assignment: Mapping[str, int] = field(default_factory=dict)

    @property
    def intervened(self) -> frozenset[str]:
        return frozenset(self.assignment)

    def check(self, space: StateSpace) -> None:
        for v, x in self.assignment.items():
            if not 0 <= int(x) < space.card(v):
                raise QueryError(f"value {x} of {v} outside 0..{space.card(v) - 1}")

    def key(self) -> tuple[tuple[str, int], ...]:
        return tuple(sorted((v, int(x)) for v, x in self.assignment.items()))


class EquationSystem:
    """
    Class stores V_j = f_j(V_pa(j), E_j) for every vertex with a finite noise law.

    Function tables are integer arrays indexed by the parent values (parents in vertex order)
    followed by the noise value.
    """

    def __init__(
        self,
        graph: DirectedMixedGraph,
        space: StateSpace,
        noise: JointTable,
        functions: Mapping[str, Any],
        validate: bool = True,
    ) -> None:
        require_admg(graph)
        self.graph: DirectedMixedGraph = graph
        self.space: StateSpace = space
        self.noise: JointTable = noise
        self.functions: dict[str, np.ndarray] = {v: np.asarray(functions[v], dtype=np.int64) for v in graph.vertices}
        self.order: tuple[str, ...] = first_topological_order(graph).sequence
        self._check_shapes()
        if validate:
            self._check_noise()

    def parents(self, v: str) -> tuple[str, ...]:
        return self.graph.sort(self.graph.parent_map[v])

    @property
    def mode(self) -> ArithmeticMode:
        return self.noise.mode

    def _check_shapes(self) -> None:
        """
        Method checks names, function shapes and function ranges.
        :return: Nothing, raises SystemSpecError
        """
        if self.space.names != self.graph.vertices:
            raise SystemSpecError(f"vertex cardinalities {list(self.space.names)} do not follow the graph order")
        expected = tuple(noise_name(v) for v in self.graph.vertices)
        if self.noise.names != expected:
            raise SystemSpecError(f"noise variables must be {list(expected)}, got {list(self.noise.names)}")
        for v in self.graph.vertices:
            shape = tuple(self.space.card(p) for p in self.parents(v)) + (self.noise.space.card(noise_name(v)),)
            table = self.functions[v]
            if table.shape != shape:
                raise SystemSpecError(f"function of {v} has shape {table.shape}, expected {shape}")
            if table.size and (table.min() < 0 or table.max() >= self.space.card(v)):
                raise SystemSpecError(f"function of {v} leaves the range 0..{self.space.card(v) - 1}")

    def _check_noise(self) -> None:
        report = check_um(noise_graph(self.graph), self.noise)
        if not report.passed:
            first = report.violations[0].constraint
            raise SystemSpecError(f"noise is not unconditionally Markov to the bidirected component: {first}")

    def support(self) -> Iterator[tuple[tuple[int, ...], Any]]:
        """
        Method yields noise points with positive probability.
        :return: iterator of (noise index, probability)
        """
        for index in np.ndindex(*self.noise.values.shape):
            p = self.noise.values[index]
            if p != 0:
                yield tuple(int(x) for x in index), p

    def solve(self, point: tuple[int, ...], assignment: Mapping[str, int] | None = None) -> dict[str, int]:
        """
        Method evaluates every potential outcome V_j(v_I) at one noise point.

        Intervened values replace parents on right-hand sides only; an intervened vertex keeps
        its own natural value.
        :param point: noise values in vertex order
        :param assignment: intervention values
        :return: vertex to value
        """
        assignment = assignment or {}
        position = self.graph.index
        values: dict[str, int] = {}
        for v in self.order:
            inputs = tuple(int(assignment[p]) if p in assignment else values[p] for p in self.parents(v))
            values[v] = int(self.functions[v][inputs + (point[position[v]],)])
        return values


# region Potential outcome laws


def po_distribution(s: EquationSystem, q: PotentialOutcomeQuery | None = None) -> JointTable:
    """
    Function pushes the noise law through the recursive equations under an intervention.
    :param s: equation system
    :param q: intervention, none for the observational law
    :return: law of V(v_I) over all vertices
    """
    q = q or PotentialOutcomeQuery()
    q.check(s.space)
    if s.mode is ArithmeticMode.RATIONAL:
        accumulated = np.empty(s.space.size, dtype=object)
        accumulated[:] = [Fraction(0)] * s.space.size
        accumulated = accumulated.reshape(s.space.cards)
    else:
        accumulated = np.zeros(s.space.cards, dtype=np.float64)
    for point, p in s.support():
        values = s.solve(point, q.assignment)
        accumulated[tuple(values[v] for v in s.graph.vertices)] += p
    return JointTable(s.space, accumulated, s.mode, tol=Settings.tolerance)


def induced_joint(s: EquationSystem) -> JointTable:
    """
    Function returns the observational law of the system.
    :param s: equation system
    :return: joint table over the vertices
    """
    return po_distribution(s, PotentialOutcomeQuery())


def all_interventions(space: StateSpace, vertices: Iterable[str] | None = None) -> Iterator[dict[str, int]]:
    """
    Function yields every assignment to every subset of vertices, the empty one first.
    :param space: vertex state space
    :param vertices: vertices allowed in interventions, defaults to all
    :return: iterator of assignments
    """
    pool = space.names if vertices is None else tuple(n for n in space.names if n in set(vertices))
    for size in range(len(pool) + 1):
        for subset in itertools.combinations(pool, size):
            for values in itertools.product(*(range(space.card(v)) for v in subset)):
                yield dict(zip(subset, values))


class PotentialOutcomeSchedule:
    """
    Class stores the full map from noise point and intervention to the potential outcomes.
    Entries may be overwritten to build negative controls.
    """

    def __init__(self, system: EquationSystem) -> None:
        self.system: EquationSystem = system
        self.points: list[tuple[int, ...]] = [point for point, _ in system.support()]
        self.interventions: list[dict[str, int]] = list(all_interventions(system.space))
        self.entries: dict[tuple[tuple[int, ...], tuple[tuple[str, int], ...]], dict[str, int]] = {}
        for point in self.points:
            for assignment in self.interventions:
                self.entries[(point, PotentialOutcomeQuery(assignment).key())] = system.solve(point, assignment)

    def outcome(self, point: tuple[int, ...], assignment: Mapping[str, int]) -> dict[str, int]:
        return self.entries[(point, PotentialOutcomeQuery(assignment).key())]

    def overwrite(self, point: tuple[int, ...], assignment: Mapping[str, int], vertex: str, value: int) -> None:
        """
        Method changes one potential outcome in the schedule.
        :param point: noise point
        :param assignment: intervention
        :param vertex: vertex whose outcome changes
        :param value: new value
        :return: Nothing
        """
        key = (point, PotentialOutcomeQuery(assignment).key())
        self.entries[key] = {**self.entries[key], vertex: value}


# endregion

# region Verifications


def _witness(s: EquationSystem, point: tuple[int, ...], assignment: Mapping[str, int]) -> dict[str, int]:
    found = {noise_name(v): point[i] for i, v in enumerate(s.graph.vertices)}
    found.update({f"do({v})": int(x) for v, x in assignment.items()})
    return found


def _describe(assignment: Mapping[str, int]) -> str:
    return "{" + ", ".join(f"{v}={x}" for v, x in sorted(assignment.items())) + "}"


def verify_consistency(s: EquationSystem, schedule: PotentialOutcomeSchedule | None = None) -> CheckReport:
    """
    Function checks consistency of the potential outcomes at every noise point.

    First V(v_I, v_I') = V(v_I) whenever V_I'(v_I) = v_I', then the recursive form
    V_j(v_I) = V_j(v_pa(j)) with parents outside I taken at their potential outcomes.
    :param s: equation system
    :param schedule: schedule to check, built from s when omitted
    :return: report of mismatches
    """
    schedule = schedule or PotentialOutcomeSchedule(s)
    report = CheckReport(ModelKind.CONSISTENCY)
    vertices = s.graph.vertices
    for point in schedule.points:
        for assignment in schedule.interventions:
            base = schedule.outcome(point, assignment)
            free = [v for v in vertices if v not in assignment]
            for size in range(1, len(free) + 1):
                for extra in itertools.combinations(free, size):
                    combined = {**assignment, **{v: base[v] for v in extra}}
                    report.checked += 1
                    if schedule.outcome(point, combined) != base:
                        report.add(
                            f"V({_describe(combined)}) = V({_describe(assignment)})", _witness(s, point, combined), 1.0
                        )
            for v in vertices:
                parent_values = {p: assignment[p] if p in assignment else base[p] for p in s.parents(v)}
                report.checked += 1
                if schedule.outcome(point, parent_values)[v] != base[v]:
                    report.add(
                        f"{v}({_describe(assignment)}) = {v}({_describe(parent_values)})",
                        _witness(s, point, assignment),
                        1.0,
                    )
    logger.info("consistency: %d checks, %d violations", report.checked, len(report.violations))
    return report


def verify_no_direct_effect(
    s: EquationSystem, J: Iterable[str], K: Iterable[str], L: Iterable[str]
) -> CheckReport:
    """
    Function checks V_J(v_K, v_L) = V_J(v_K) at every noise point and assignment.
    :param s: equation system
    :param J: outcome vertices
    :param K: vertices intervened on in both worlds
    :param L: vertices additionally intervened on
    :return: report of mismatches
    """
    J_set, K_set, L_set = frozenset(J), frozenset(K), frozenset(L)
    s.graph.require(*J_set, *K_set, *L_set)
    if not J_set or not L_set or J_set & K_set or J_set & L_set or K_set & L_set:
        raise QueryError("J and L must be nonempty and J, K, L disjoint")
    if directed_path_avoiding(s.graph, L_set, J_set, K_set):
        raise PreconditionError(
            f"a directed path from {format_set(L_set)} to {format_set(J_set)} avoids {format_set(K_set)}"
        )
    report = CheckReport(ModelKind.NO_DIRECT_EFFECT)
    k_vertices, l_vertices = s.graph.sort(K_set), s.graph.sort(L_set)
    for point, _ in s.support():
        for k_values in itertools.product(*(range(s.space.card(v)) for v in k_vertices)):
            base_assignment = dict(zip(k_vertices, k_values))
            base = s.solve(point, base_assignment)
            for l_values in itertools.product(*(range(s.space.card(v)) for v in l_vertices)):
                assignment = {**base_assignment, **dict(zip(l_vertices, l_values))}
                other = s.solve(point, assignment)
                report.checked += 1
                if any(other[j] != base[j] for j in J_set):
                    report.add(
                        f"{format_set(J_set)}({_describe(assignment)}) = "
                        f"{format_set(J_set)}({_describe(base_assignment)})",
                        _witness(s, point, assignment),
                        1.0,
                    )
    return report


def verify_swig_markov(
    s: EquationSystem, I: Iterable[str], assignment: Mapping[str, int], tol: float | None = None
) -> CheckReport:
    """
    Function checks the law of V(v_I) against the global Markov property of the SWIG.
    :param s: equation system
    :param I: intervened vertices
    :param assignment: value for every vertex of I
    :param tol: float-mode tolerance
    :return: report in the SWIG_MARKOV model
    """
    intervened = frozenset(I)
    s.graph.require(*intervened)
    if set(assignment) != intervened:
        raise QueryError(f"assignment must give a value to exactly {format_set(intervened)}")
    q = PotentialOutcomeQuery(dict(assignment))
    report = check_gm(swig(s.graph, q.intervened), po_distribution(s, q), tol)
    report.model = ModelKind.SWIG_MARKOV
    return report


def verify_fixing_identity(
    s: EquationSystem, J: Iterable[str], assignment: Mapping[str, int] | None = None, tol: float | None = None
) -> CheckReport:
    """
    Function compares fixing J in the observational law with the potential-outcome margin.

    Every fixable permutation of J is used; the kernels must agree with each other and, on every
    defined slice, with the law of V_{-J}(v_J).
    :param s: equation system
    :param J: fixable vertex set
    :param assignment: single value of J to test, every value when omitted
    :param tol: float-mode tolerance
    :return: report of mismatches and skipped slices
    """
    members = frozenset(J)
    orders = fixable_permutations(s.graph, members)
    if not orders:
        raise NotFixableError(f"{format_set(members)} has no fixable permutation")
    joint = induced_joint(s)
    kernels = [fix_sequence(joint, s.graph, order)[0] for order in orders]
    report = CheckReport(ModelKind.FIXING_IDENTITY, tolerance=Settings.tolerance if tol is None else tol)

    for order, kernel in zip(orders[1:], kernels[1:]):
        report.checked += 1
        if not kernels_equal(kernels[0], kernel, tol):
            report.add(f"fixing order {list(orders[0])} = fixing order {list(order)}", {}, 1.0)

    fixed = s.graph.sort(members)
    rest = [v for v in s.graph.vertices if v not in members]
    if assignment is None:
        candidates: Iterable[dict[str, int]] = (
            dict(zip(fixed, values)) for values in itertools.product(*(range(s.space.card(v)) for v in fixed))
        )
    else:
        if set(assignment) != members:
            raise QueryError(f"assignment must give a value to exactly {format_set(members)}")
        PotentialOutcomeQuery(dict(assignment)).check(s.space)
        candidates = [dict(assignment)]
    for values in candidates:
        target = marginal(po_distribution(s, PotentialOutcomeQuery(values)), rest)
        for order, kernel in zip(orders, kernels):
            table = kernel.slice(values)
            if table is None:
                report.skipped_slices += 1
                continue
            report.checked += 1
            cells = list(zip(table.values.reshape(-1), target.values.reshape(-1)))
            worst = max((gap(a, b) for a, b in cells), default=0.0)
            if not all(same_value(a, b, s.mode, tol) for a, b in cells):
                constraint = f"fix {list(order)} at {_describe(values)} = law of V_-J({_describe(values)})"
                report.add(constraint, dict(values), worst)
    logger.info(
        "fixing identity for %s: %d checks, %d skipped", format_set(members), report.checked, report.skipped_slices
    )
    return report


def verify_basic_po_independence(s: EquationSystem, tol: float | None = None) -> CheckReport:
    """
    Function checks that, within each single world, basic potential outcomes V_j(v_pa(j)) are
    independent whenever no bidirected edge joins their vertex sets.

    The law of V(v) for a full assignment v is the law of the basic potential outcomes, so each
    world is checked against the unconditional Markov property of the bidirected part of the graph.
    Pairs inside one district are covered as well as pairs of districts.
    :param s: equation system
    :param tol: float-mode tolerance
    :return: report of failing worlds
    """
    confounding = DirectedMixedGraph(s.graph.vertices, bidirected=s.graph.bidirected)
    report = CheckReport(ModelKind.BASIC_PO_INDEPENDENCE, tolerance=Settings.tolerance if tol is None else tol)
    for world in s.space.assignments():
        values = dict(zip(s.graph.vertices, world))
        law = po_distribution(s, PotentialOutcomeQuery(values))
        sub = check_um(confounding, law, tol)
        report.checked += sub.checked
        for violation in sub.violations:
            report.add(f"world {_describe(values)}: {violation.constraint}", violation.witness, violation.magnitude)
    logger.info("basic potential outcome independence: %d checks over all worlds", report.checked)
    return report


# endregion

# region Construction


def dyadic_distribution(rng: np.random.Generator, card: int, bits: int | None = None) -> list[Fraction]:
    """
    Function draws a positive distribution whose probabilities have a power-of-two denominator.
    :param rng: numpy random generator
    :param card: number of outcomes
    :param bits: denominator exponent, raised when too small for card
    :return: list of fractions summing to one
    """
    bits = Settings.latent_precision_bits if bits is None else bits
    bits = max(bits, math.ceil(math.log2(card)) + 1) if card > 1 else bits
    total = 2**bits
    cuts = sorted(int(x) for x in rng.choice(np.arange(1, total), size=card - 1, replace=False))
    edges = [0] + cuts + [total]
    return [Fraction(b - a, total) for a, b in zip(edges, edges[1:])]


def latent_cliques(g: DirectedMixedGraph, maximal: bool = True) -> list[tuple[str, ...]]:
    """
    Function lists the cliques that receive an independent latent: maximal cliques plus every
    singleton, or every clique when maximal is off.
    :param g: ADMG
    :param maximal: restrict to maximal cliques plus singletons
    :return: cliques in canonical order
    """
    if not maximal:
        return [c.members for c in enumerate_bidirected_cliques(g)]
    chosen = {c.members for c in enumerate_bidirected_cliques(g, maximal=True)}
    chosen |= {(v,) for v in g.vertices}
    return sorted(chosen, key=lambda c: (len(c), [g.index[v] for v in c]))


def clique_latent_noise(
    g: DirectedMixedGraph, rng: np.random.Generator, noise_card: int, maximal: bool = True
) -> JointTable:
    """
    Function builds the noise law: one independent latent per clique, E_j the tuple of the
    latents of its cliques.
    :param g: ADMG
    :param rng: numpy random generator
    :param noise_card: alphabet size of every latent
    :param maximal: use maximal cliques plus singletons
    :return: rational joint table over E_<v>
    """
    cliques = latent_cliques(g, maximal)
    owned = {v: [i for i, c in enumerate(cliques) if v in c] for v in g.vertices}
    space = StateSpace(tuple(Variable(noise_name(v), noise_card ** len(owned[v])) for v in g.vertices))
    space.check_cap()
    if noise_card ** len(cliques) > Settings.state_space_cap:
        raise StateSpaceTooLarge(f"{len(cliques)} latents of size {noise_card} exceed the state-space cap")
    laws = [dyadic_distribution(rng, noise_card) for _ in cliques]

    accumulated = np.empty(space.size, dtype=object)
    accumulated[:] = [Fraction(0)] * space.size
    accumulated = accumulated.reshape(space.cards)
    for latent in itertools.product(range(noise_card), repeat=len(cliques)):
        p = math.prod((laws[i][x] for i, x in enumerate(latent)), start=Fraction(1))
        cell = []
        for v in g.vertices:
            e = 0
            for i in owned[v]:
                e = e * noise_card + latent[i]
            cell.append(e)
        accumulated[tuple(cell)] += p
    return JointTable(space, accumulated)


def generate_system(
    g: DirectedMixedGraph,
    seed: int,
    noise_card: int = 2,
    construction: str = "clique_latent",
    noise: JointTable | None = None,
    cards: Mapping[str, int] | None = None,
    maximal: bool = True,
) -> EquationSystem:
    """
    Function builds a random equation system on g, deterministic per seed.
    :param g: ADMG
    :param seed: random seed
    :param noise_card: alphabet size of every clique latent
    :param construction: "clique_latent" or "user"
    :param noise: noise law for the user construction
    :param cards: vertex cardinalities, defaults to Settings.default_cardinality
    :param maximal: clique_latent uses maximal cliques plus singletons
    :return: equation system
    """
    require_admg(g)
    if construction not in CONSTRUCTIONS:
        raise SystemSpecError(f"unknown construction {construction!r}, expected one of {CONSTRUCTIONS}")
    rng = np.random.default_rng(seed)
    space = StateSpace.of([(v, (cards or {}).get(v, Settings.default_cardinality)) for v in g.vertices])
    space.check_cap()
    if construction == "clique_latent":
        noise = clique_latent_noise(g, rng, noise_card, maximal)
    elif noise is None:
        raise SystemSpecError("the user construction needs a noise table")
    functions = {}
    for v in g.vertices:
        shape = tuple(space.card(p) for p in g.sort(g.parent_map[v])) + (noise.space.card(noise_name(v)),)
        functions[v] = rng.integers(0, space.card(v), size=shape)
    system = EquationSystem(g, space, noise, functions)
    logger.info("generated system on %d vertices with seed %d", len(g.vertices), seed)
    return system


def system_from_factorization(g: DirectedMixedGraph, t: JointTable) -> EquationSystem:
    """
    Function builds response-function noise reproducing a DAG-factorized table exactly: E_j lists
    the value of V_j for every parent configuration, drawn from p(v_j | pa_j) independently.
    :param g: DAG
    :param t: table over the vertices of g
    :return: equation system with independent noise
    """
    require_dag(g)
    t = aligned(g, t)
    variables = []
    laws = []
    functions = {}
    for v in g.vertices:
        card = t.space.card(v)
        pa = g.sort(g.parent_map[v])
        configurations = list(itertools.product(*(range(t.space.card(p)) for p in pa)))
        joint = marginal_values(t, set(pa) | {v})
        family = [n for n in t.names if n in set(pa) | {v}]
        conditionals = []
        for config in configurations:
            cell = dict(zip(pa, config))
            column = [joint[tuple(cell[n] if n != v else x for n in family)] for x in range(card)]
            total = sum(column)
            conditionals.append([x / total for x in column] if total != 0 else [1] + [0] * (card - 1))
        size = card ** len(configurations)
        variables.append(Variable(noise_name(v), size))
        law = []
        table = np.zeros(tuple(t.space.card(p) for p in pa) + (size,), dtype=np.int64)
        for e in range(size):
            digits = [(e // card**k) % card for k in range(len(configurations))]
            law.append(math.prod((conditionals[k][d] for k, d in enumerate(digits)), start=Fraction(1)))
            for k, config in enumerate(configurations):
                table[config + (e,)] = digits[k]
        laws.append(law)
        functions[v] = table
    space = StateSpace(tuple(variables))
    space.check_cap()
    accumulated = np.array(laws[0], dtype=object) if laws else np.array(Fraction(1), dtype=object)
    for law in laws[1:]:
        accumulated = np.multiply.outer(accumulated, np.array(law, dtype=object))
    noise = JointTable(space, accumulated, t.mode, tol=Settings.tolerance)
    return EquationSystem(g, t.space, noise, functions)


# endregion
