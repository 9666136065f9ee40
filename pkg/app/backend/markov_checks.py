"""
File contains membership checkers for the graphical models over a finite joint table
(GM, UM, LM, F, EF, A, NM) and the harness tabulating their observed relations.
"""

import itertools
import logging

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from app.backend.dist_core import (
    ArithmeticMode,
    JointTable,
    at,
    ci_violation,
    extended_ci_violation,
    fix_sequence,
    gap,
    marginal,
    marginal_values,
    reorder,
    same_value,
)
from app.backend.errors import DistributionError, GraphError
from app.backend.graph_core import (
    DirectedMixedGraph,
    GraphClass,
    TopologicalOrder,
    classify,
    exogenous_vertices,
    first_topological_order,
    require_admg,
    require_dag,
)
from app.backend.graph_transform import augment, fixable_sets, marginalize, tilde_fix_graph, undirected_separated
from app.backend.settings import Settings
from app.backend.walk_algebra import (
    SeparationQuery,
    arc_connected,
    format_set,
    is_ancestral,
    m_connected,
    markov_background,
    markov_boundary,
)

logger = logging.getLogger(__name__)


class ModelKind(Enum):
    """
    Enumerator class for the checked models and causal verifications.
    """

    GM = "gm"
    UM = "um"
    LM = "lm"
    F = "f"
    EF = "ef"
    A = "a"
    NM = "nm"
    CONSISTENCY = "consistency"
    NO_DIRECT_EFFECT = "no-direct-effect"
    SWIG_MARKOV = "swig-markov"
    FIXING_IDENTITY = "fixing-identity"
    BASIC_PO_INDEPENDENCE = "basic-po-independence"


class LocalForm(Enum):
    """
    Enumerator class for the two formulations of the local Markov property.

    ORDERED ranges over ancestral sets inside the predecessors of V_j in a topological order and
    conditions on the Markov background. SINK ranges over every ancestral set in which V_j has no
    children and conditions on the Markov boundary of the induced subgraph.
    """

    ORDERED = "ordered"
    SINK = "sink"


@dataclass
class Violation:
    """
    Class stores one failed constraint with the cell that shows it.
    """

    constraint: str
    witness: dict[str, int]
    magnitude: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "constraint": self.constraint,
            "witness": dict(sorted(self.witness.items())),
            "magnitude": self.magnitude,
        }


@dataclass
class CheckReport:
    """
    Class stores the outcome of one checker run.
    """

    model: ModelKind
    violations: list[Violation] = field(default_factory=list)
    skipped_slices: int = 0
    tolerance: float | None = None
    checked: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations

    def add(self, constraint: str, witness: dict[str, int], magnitude: float) -> None:
        self.violations.append(Violation(constraint, witness, magnitude))

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model.value,
            "passed": self.passed,
            "violations": [v.to_dict() for v in self.violations],
            "skipped_slices": self.skipped_slices,
            "tolerance": self.tolerance,
            "checked": self.checked,
        }

    def summary(self) -> str:
        """
        Method renders the report as text lines.
        :return: multi-line text ending with a newline
        """
        verdict = "pass" if self.passed else "FAIL"
        lines = [f"{self.model.value}: {verdict} ({self.checked} constraints, {len(self.violations)} violations)"]
        if self.skipped_slices:
            lines.append(f"skipped undefined slices: {self.skipped_slices}")
        for v in self.violations:
            cell = ", ".join(f"{k}={x}" for k, x in sorted(v.witness.items()))
            lines.append(f"violation: {v.constraint} at {cell} (gap {v.magnitude:.6g})")
        return "\n".join(lines) + "\n"


# region Helpers


def aligned(g: DirectedMixedGraph, t: JointTable) -> JointTable:
    """
    Function checks that t is over the vertices of g and puts it in vertex order.
    :param g: graph
    :param t: table
    :return: table in g's vertex order
    """
    if sorted(t.names) != sorted(g.vertices):
        raise DistributionError(f"table variables {sorted(t.names)} do not match graph vertices {sorted(g.vertices)}")
    return t if t.names == g.vertices else reorder(t, g.vertices)


def disjoint_triples(vertices: Sequence[str]) -> Iterator[SeparationQuery]:
    """
    Function yields every disjoint (J, K, L) with J and K nonempty, once per unordered {J, K}.
    :param vertices: vertices in index order
    :return: iterator of queries
    """
    for labels in itertools.product(range(4), repeat=len(vertices)):
        J = frozenset(v for v, x in zip(vertices, labels) if x == 1)
        K = frozenset(v for v, x in zip(vertices, labels) if x == 2)
        if not J or not K:
            continue
        if labels.index(1) > labels.index(2):
            continue
        L = frozenset(v for v, x in zip(vertices, labels) if x == 3)
        yield SeparationQuery(J, K, L)


def _tol(tol: float | None) -> float:
    return Settings.tolerance if tol is None else tol


def _check_ci(report: CheckReport, t: JointTable, q: SeparationQuery, tol: float, label: str = "") -> None:
    report.checked += 1
    witness = ci_violation(t, q, tol)
    if witness is not None:
        report.add(label + q.describe(), witness.assignment, witness.magnitude)


def _finish(report: CheckReport) -> CheckReport:
    verdict = "pass" if report.passed else "fail"
    logger.info("%s check: %s with %d violations", report.model.value, verdict, len(report.violations))
    return report


# endregion

# region Separation based checkers


def check_gm(g: DirectedMixedGraph, t: JointTable, tol: float | None = None) -> CheckReport:
    """
    Function checks the global Markov property: m-separation implies independence.
    :param g: ADMG
    :param t: table over the vertices of g
    :param tol: float-mode tolerance
    :return: report listing failing triples
    """
    t = aligned(g, t)
    report = CheckReport(ModelKind.GM, tolerance=_tol(tol))
    for q in disjoint_triples(g.vertices):
        if not m_connected(g, q):
            _check_ci(report, t, q, _tol(tol))
    return _finish(report)


def check_um(g: DirectedMixedGraph, t: JointTable, tol: float | None = None) -> CheckReport:
    """
    Function checks the unconditional Markov property: sets joined by no arc are independent.
    :param g: ADMG
    :param t: table over the vertices of g
    :param tol: float-mode tolerance
    :return: report listing failing pairs
    """
    t = aligned(g, t)
    report = CheckReport(ModelKind.UM, tolerance=_tol(tol))
    for q in disjoint_triples(g.vertices):
        if q.L:
            continue
        if not arc_connected(g, q.J, q.K):
            _check_ci(report, t, q, _tol(tol))
    return _finish(report)


def check_lm(
    g: DirectedMixedGraph,
    t: JointTable,
    order: TopologicalOrder | None = None,
    tol: float | None = None,
    form: LocalForm = LocalForm.ORDERED,
) -> CheckReport:
    """
    Function checks the local Markov property.

    In the ordered form, for each V_j and each ancestral K of its predecessors plus V_j, V_j must
    be independent of the rest of K given its Markov background in the subgraph induced by K.
    The sink form needs no order: it takes every ancestral K and every V_j childless in K, with
    the Markov boundary of V_j in the induced subgraph.
    :param g: ADMG
    :param t: table over the vertices of g
    :param order: topological order for the ordered form, defaults to the first one
    :param tol: float-mode tolerance
    :param form: formulation to check
    :return: report listing failing constraints
    """
    require_admg(g)
    t = aligned(g, t)
    report = CheckReport(ModelKind.LM, tolerance=_tol(tol))
    if form is LocalForm.SINK:
        for size in range(1, len(g.vertices) + 1):
            for subset in itertools.combinations(g.vertices, size):
                K = frozenset(subset)
                if not is_ancestral(g, K):
                    continue
                sub = g.induced_subgraph(K)
                for j in g.sort(K):
                    if sub.child_map[j]:
                        continue
                    _check_local(report, t, K, j, markov_boundary(sub, j), _tol(tol))
        return _finish(report)

    order = first_topological_order(g) if order is None else order
    order.check(g)
    for j in order.sequence:
        before = order.pre(j)
        for size in range(len(before) + 1):
            for subset in itertools.combinations(before, size):
                K = frozenset(subset) | {j}
                if not is_ancestral(g, K):
                    continue
                _check_local(report, t, K, j, markov_background(g.induced_subgraph(K), j), _tol(tol))
    return _finish(report)


def _check_local(
    report: CheckReport, t: JointTable, K: frozenset[str], j: str, blanket: frozenset[str], tol: float
) -> None:
    rest = K - blanket - {j}
    if rest:
        _check_ci(report, t, SeparationQuery(frozenset({j}), rest, blanket), tol, f"within {format_set(K)}: ")


def check_augmentation(g: DirectedMixedGraph, t: JointTable, tol: float | None = None) -> CheckReport:
    """
    Function checks the augmentation model: every ancestral margin is Markov to the augmented
    graph of its projection.
    :param g: ADMG
    :param t: table over the vertices of g
    :param tol: float-mode tolerance
    :return: report listing failing separations
    """
    require_admg(g)
    t = aligned(g, t)
    report = CheckReport(ModelKind.A, tolerance=_tol(tol))
    for size in range(2, len(g.vertices) + 1):
        for subset in itertools.combinations(g.vertices, size):
            if not is_ancestral(g, subset):
                continue
            undirected = augment(marginalize(g, subset))
            margin = marginal(t, subset)
            for q in disjoint_triples(subset):
                if undirected_separated(undirected, q):
                    _check_ci(report, margin, q, _tol(tol), f"ancestral {format_set(subset)}: ")
    return _finish(report)


# endregion

# region Factorization checkers


def _factorization_gaps(
    t: JointTable, factors: list[tuple[Iterable[str], Iterable[str]]], report: CheckReport, label: str, tol: float
) -> None:
    """
    Function compares p(v) with the product of the given conditionals cell by cell.
    :param t: table
    :param factors: (target variables, conditioning variables) pairs
    :param report: report receiving one violation for the worst cell
    :param label: constraint text
    :param tol: float-mode tolerance
    :return: Nothing
    """
    pieces = []
    for target, given in factors:
        given_set = frozenset(given)
        joint = marginal_values(t, frozenset(target) | given_set, keepdims=True)
        pieces.append((joint, marginal_values(t, given_set, keepdims=True)))
    worst: tuple[float, dict[str, int]] | None = None
    differing = 0
    for index in np.ndindex(*t.values.shape):
        product: Any = 1 if t.mode is ArithmeticMode.RATIONAL else 1.0
        defined = True
        for joint, base in pieces:
            denominator = at(base, index)
            if denominator == 0:
                defined = False
                break
            product = product * at(joint, index) / denominator
        if not defined:
            continue
        report.checked += 1
        if same_value(t.values[index], product, t.mode, tol):
            continue
        differing += 1
        size = gap(t.values[index], product)
        if worst is None or size > worst[0]:
            worst = (size, dict(zip(t.names, (int(x) for x in index))))
    if worst is not None:
        report.add(f"{label} ({differing} cells differ)", worst[1], worst[0])


def check_factorization(g: DirectedMixedGraph, t: JointTable, tol: float | None = None) -> CheckReport:
    """
    Function checks p(v) = prod_j p(v_j | v_pa(j)) wherever the conditionals are defined.
    :param g: DAG
    :param t: table over the vertices of g
    :param tol: float-mode tolerance
    :return: report with the worst differing cell
    """
    require_dag(g)
    t = aligned(g, t)
    report = CheckReport(ModelKind.F, tolerance=_tol(tol))
    factors = [({v}, g.parent_map[v]) for v in g.vertices]
    _factorization_gaps(t, factors, report, "p(v) = prod p(v_j | pa_j)", _tol(tol))
    return _finish(report)


def check_ef(g: DirectedMixedGraph, t: JointTable, tol: float | None = None) -> CheckReport:
    """
    Function checks the exogenous factorization model of an unconfounded ADMG.
    :param g: unconfounded ADMG
    :param t: table over the vertices of g
    :param tol: float-mode tolerance
    :return: report combining the factorization and the exogenous global Markov checks
    """
    classes = classify(g)
    if GraphClass.UNCONFOUNDED not in classes:
        raise GraphError("exogenous factorization needs an unconfounded ADMG")
    t = aligned(g, t)
    report = CheckReport(ModelKind.EF, tolerance=_tol(tol))
    exogenous = exogenous_vertices(g)
    factors: list[tuple[Iterable[str], Iterable[str]]] = [(exogenous, ())]
    factors += [({v}, g.parent_map[v]) for v in g.vertices if v not in exogenous]
    _factorization_gaps(t, factors, report, "p(v) = p(e) prod p(v_j | pa_j)", _tol(tol))

    if exogenous:
        bidirected_part = g.induced_subgraph(exogenous)
        margin = marginal(t, exogenous)
        for q in disjoint_triples(bidirected_part.vertices):
            if not m_connected(bidirected_part, q):
                _check_ci(report, margin, q, _tol(tol), "exogenous: ")
    return _finish(report)


# endregion

# region Nested Markov


def check_nm(g: DirectedMixedGraph, t: JointTable, tol: float | None = None) -> CheckReport:
    """
    Function checks the nested Markov property.

    For every fixable set J the kernel obtained by fixing J along its canonical order must satisfy
    every extended independence read off the tilde-fixed graph. Triples where both K and L hold
    fixed vertices are not constraints.
    :param g: ADMG
    :param t: table over the vertices of g
    :param tol: float-mode tolerance
    :return: report; each violation names its fixed set
    """
    require_admg(g)
    t = aligned(g, t)
    report = CheckReport(ModelKind.NM, tolerance=_tol(tol))
    for fixable in fixable_sets(g):
        kernel, _ = fix_sequence(t, g, fixable.order)
        tilde = tilde_fix_graph(g, fixable.members)
        report.skipped_slices += kernel.undefined_count
        if kernel.undefined_count == len(kernel.tables):
            logger.warning("every slice undefined after fixing %s", format_set(fixable.members))
            continue
        for q in disjoint_triples(g.vertices):
            if q.J & fixable.members and q.K & fixable.members:
                continue
            if m_connected(tilde, q):
                continue
            report.checked += 1
            witness = extended_ci_violation(kernel, q.J, q.K, q.L, _tol(tol))
            if witness is not None:
                report.add(f"fix {format_set(fixable.members)}: {q.describe()}", witness.assignment, witness.magnitude)
    if report.skipped_slices:
        logger.warning("nested Markov check skipped %d undefined kernel slices", report.skipped_slices)
    return _finish(report)


# endregion

# region Relations


CHECKERS = {
    ModelKind.GM: check_gm,
    ModelKind.UM: check_um,
    ModelKind.LM: check_lm,
    ModelKind.A: check_augmentation,
    ModelKind.NM: check_nm,
    ModelKind.EF: check_ef,
    ModelKind.F: check_factorization,
}


def applicable_models(g: DirectedMixedGraph) -> list[ModelKind]:
    classes = classify(g)
    models = [ModelKind.GM, ModelKind.UM, ModelKind.LM, ModelKind.A, ModelKind.NM]
    if GraphClass.UNCONFOUNDED in classes:
        models.append(ModelKind.EF)
    if GraphClass.DAG in classes:
        models.append(ModelKind.F)
    return models


def run_checker(model: ModelKind, g: DirectedMixedGraph, t: JointTable, tol: float | None = None) -> CheckReport:
    if model not in CHECKERS:
        raise GraphError(f"no table checker for {model.value}")
    return CHECKERS[model](g, t, tol=tol)


def verdicts(pair: tuple[DirectedMixedGraph, JointTable], tol: float | None = None) -> dict[ModelKind, bool]:
    """
    Function runs every applicable checker on one (graph, table) pair.
    :param pair: graph and table
    :param tol: float-mode tolerance
    :return: model to passed
    """
    g, t = pair
    return {model: run_checker(model, g, t, tol).passed for model in applicable_models(g)}


def expected_relations(g: DirectedMixedGraph) -> list[tuple[ModelKind, ModelKind]]:
    """
    Function lists the implications between verdicts that must hold for g's graph class.
    :param g: ADMG
    :return: (premise, conclusion) pairs
    """
    classes = classify(g)
    relations = [(ModelKind.NM, ModelKind.GM), (ModelKind.GM, ModelKind.UM)]
    equivalent = [(ModelKind.GM, ModelKind.A), (ModelKind.GM, ModelKind.LM)]
    if GraphClass.UNCONFOUNDED in classes:
        equivalent += [(ModelKind.GM, ModelKind.EF), (ModelKind.GM, ModelKind.NM)]
    if GraphClass.DAG in classes:
        equivalent.append((ModelKind.GM, ModelKind.F))
    if GraphClass.BIDIRECTED in classes:
        equivalent.append((ModelKind.GM, ModelKind.UM))
    for a, b in equivalent:
        relations += [(a, b), (b, a)]
    return relations


@dataclass
class RelationMatrix:
    """
    Class tabulates verdicts over a corpus: counts[a][b] is how often a and b both passed.
    """

    instances: int = 0
    pass_counts: dict[ModelKind, int] = field(default_factory=dict)
    counts: dict[ModelKind, dict[ModelKind, int]] = field(default_factory=dict)
    hard_failures: list[str] = field(default_factory=list)
    witnesses: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.hard_failures

    def record(self, number: int, g: DirectedMixedGraph, verdict: dict[ModelKind, bool]) -> None:
        """
        Method adds one instance.
        :param number: position of the instance in the corpus
        :param g: its graph
        :param verdict: model to passed
        :return: Nothing
        """
        self.instances += 1
        for a, ok in verdict.items():
            self.pass_counts[a] = self.pass_counts.get(a, 0) + int(ok)
            row = self.counts.setdefault(a, {})
            for b, other in verdict.items():
                row[b] = row.get(b, 0) + int(ok and other)
        for premise, conclusion in expected_relations(g):
            if verdict.get(premise) and verdict.get(conclusion) is False:
                self.hard_failures.append(f"instance {number}: {premise.value} passed but {conclusion.value} failed")
        if verdict.get(ModelKind.GM) and not verdict.get(ModelKind.NM):
            self.witnesses.append(f"instance {number}: gm passed, nm failed")
        if verdict.get(ModelKind.UM) and not verdict.get(ModelKind.GM):
            self.witnesses.append(f"instance {number}: um passed, gm failed")

    def to_dict(self) -> dict[str, Any]:
        return {
            "instances": self.instances,
            "pass_counts": {m.value: n for m, n in self.pass_counts.items()},
            "counts": {a.value: {b.value: n for b, n in row.items()} for a, row in self.counts.items()},
            "hard_failures": self.hard_failures,
            "witnesses": self.witnesses,
        }

    def format(self) -> str:
        """
        Method renders the pass counts and failures as text.
        :return: text ending with a newline
        """
        models = [m for m in ModelKind if m in self.pass_counts]
        lines = [f"instances: {self.instances}", "model " + " ".join(f"{m.value:>4}" for m in models)]
        for a in models:
            lines.append(f"{a.value:>5} " + " ".join(f"{self.counts[a].get(b, 0):>4}" for b in models))
        lines += [f"hard failure: {line}" for line in self.hard_failures]
        lines += [f"strictness witness: {line}" for line in self.witnesses]
        return "\n".join(lines) + "\n"


def relation_matrix(
    corpus: Sequence[tuple[DirectedMixedGraph, JointTable]], workers: int | None = None, tol: float | None = None
) -> RelationMatrix:
    """
    Function runs every applicable checker over a corpus and tabulates implications.
    :param corpus: (graph, table) pairs
    :param workers: process count, defaults to Settings.workers
    :param tol: float-mode tolerance, defaults to Settings.tolerance
    :return: relation matrix, merged in corpus order
    """
    workers = Settings.workers if workers is None else workers
    # worker processes do not see Settings overrides
    run = partial(verdicts, tol=_tol(tol))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, corpus))
    else:
        results = [run(pair) for pair in corpus]
    matrix = RelationMatrix()
    for number, ((g, _), verdict) in enumerate(zip(corpus, results)):
        matrix.record(number, g, verdict)
    logger.info("relations over %d instances, %d hard failures", matrix.instances, len(matrix.hard_failures))
    return matrix


# endregion
