"""
File contains tests for markov_checks file.
"""

from fractions import Fraction

import numpy as np
import pytest

from app.backend.causal_sim import generate_system, induced_joint
from app.backend.corpus import (
    named_graph,
    perturb_table,
    random_admg,
    random_bidirected_graph,
    random_dag,
    random_ef_table,
    random_table,
    random_unconfounded_admg,
    verma_gap,
    verma_gm_only_table,
)
from app.backend.dist_core import JointTable, StateSpace, reorder
from app.backend.errors import DistributionError, GraphError
from app.backend.graph_core import DirectedMixedGraph, TopologicalOrder, topological_orders
from app.backend.markov_checks import (
    CheckReport,
    LocalForm,
    ModelKind,
    RelationMatrix,
    applicable_models,
    check_augmentation,
    check_ef,
    check_factorization,
    check_gm,
    check_lm,
    check_nm,
    check_um,
    disjoint_triples,
    expected_relations,
    relation_matrix,
    run_checker,
    verdicts,
)
from app.tests.conftest import repetitions

F = Fraction


@pytest.fixture
def chain_table() -> JointTable:
    """
    Table factorizing along A -> B -> C with A and C dependent.
    :return: rational table over A, B, C
    """
    p_a = [F(1, 4), F(3, 4)]
    p_b = {0: [F(1, 2), F(1, 2)], 1: [F(1, 8), F(7, 8)]}
    p_c = {0: [F(1, 4), F(3, 4)], 1: [F(5, 8), F(3, 8)]}
    values = [p_a[a] * p_b[a][b] * p_c[b][c] for a in range(2) for b in range(2) for c in range(2)]
    return JointTable(StateSpace.of({"A": 2, "B": 2, "C": 2}), values)


def test_disjoint_triples_count() -> None:
    """
    Tests that every unordered disjoint triple is produced once.
    :return: Nothing, only provides test.
    """
    for n in range(1, 5):
        triples = list(disjoint_triples(tuple("ABCD"[:n])))
        assert len(triples) == (4**n - 2 * 3**n + 2**n) // 2
        assert len({(q.J, q.K, q.L) for q in triples}) == len(triples)
        assert not {(q.K, q.J, q.L) for q in triples} & {(q.J, q.K, q.L) for q in triples}


def test_report_rendering() -> None:
    """
    Tests the text and dictionary forms of a report.
    :return: Nothing, only provides test.
    """
    report = CheckReport(ModelKind.GM, tolerance=1e-9, checked=3)
    assert report.passed
    assert report.summary() == "gm: pass (3 constraints, 0 violations)\n"
    report.add("{A} _||_ {C}", {"C": 1, "A": 0}, 0.125)
    report.skipped_slices = 2
    assert not report.passed
    assert report.summary().splitlines()[1:] == [
        "skipped undefined slices: 2",
        "violation: {A} _||_ {C} at A=0, C=1 (gap 0.125)",
    ]
    data = report.to_dict()
    assert data["model"] == "gm"
    assert data["passed"] is False
    assert list(data["violations"][0]["witness"]) == ["A", "C"]


def test_table_must_match_graph(chain_table: JointTable, mixed: DirectedMixedGraph) -> None:
    """
    Tests that checkers refuse tables over other variables.
    :param chain_table: chain table
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    with pytest.raises(DistributionError):
        check_gm(mixed, chain_table)


def test_chain_table_checks(chain_table: JointTable) -> None:
    """
    Tests the chain table against the chain and the collider.
    :param chain_table: chain table
    :return: Nothing, only provides test.
    """
    chain = named_graph("chain")
    for model in applicable_models(chain):
        assert run_checker(model, chain, chain_table).passed, model
    collider = named_graph("collider")
    gm = check_gm(collider, chain_table)
    assert not gm.passed
    assert gm.violations[0].constraint == "{A} _||_ {B} | {}"
    assert not check_um(collider, chain_table).passed
    assert not check_lm(collider, chain_table).passed
    assert not check_factorization(collider, chain_table).passed


def test_checkers_align_variable_order(chain_table: JointTable) -> None:
    """
    Tests that the table's variable order does not matter.
    :param chain_table: chain table
    :return: Nothing, only provides test.
    """
    shuffled = reorder(chain_table, ["C", "A", "B"])
    assert check_gm(named_graph("chain"), shuffled).passed
    assert check_factorization(named_graph("chain"), shuffled).passed


def test_lm_with_explicit_order(chain_table: JointTable) -> None:
    """
    Tests the local Markov checker with a supplied order.
    :param chain_table: chain table
    :return: Nothing, only provides test.
    """
    collider = named_graph("collider")
    report = check_lm(collider, chain_table, TopologicalOrder(("B", "A", "C")))
    assert not report.passed
    assert report.violations[0].constraint == "within {A, B}: {A} _||_ {B} | {}"
    with pytest.raises(GraphError):
        check_lm(collider, chain_table, TopologicalOrder(("C", "A", "B")))


def test_lm_sink_form(chain_table: JointTable) -> None:
    """
    Tests the order-free local Markov form on the chain and the collider.
    :param chain_table: chain table
    :return: Nothing, only provides test.
    """
    chain, collider = named_graph("chain"), named_graph("collider")
    ordered = check_lm(chain, chain_table)
    sink = check_lm(chain, chain_table, form=LocalForm.SINK)
    assert ordered.passed and sink.passed
    assert sink.checked >= ordered.checked
    report = check_lm(collider, chain_table, form=LocalForm.SINK)
    assert not report.passed
    assert any(v.constraint.startswith("within {A, B}: ") for v in report.violations)


def test_factorization_requirements(mixed: DirectedMixedGraph) -> None:
    """
    Tests the graph-class preconditions of F and EF.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    t = JointTable.uniform(StateSpace.of([(v, 2) for v in mixed.vertices]))
    with pytest.raises(GraphError):
        check_factorization(mixed, t)
    with pytest.raises(GraphError):
        check_ef(mixed, t)
    assert ModelKind.EF not in applicable_models(mixed)
    assert ModelKind.F not in applicable_models(mixed)
    with pytest.raises(GraphError):
        run_checker(ModelKind.CONSISTENCY, mixed, t)


def test_factorization_reports_worst_cell(chain_table: JointTable) -> None:
    """
    Tests the single summarizing violation of the factorization checker.
    :param chain_table: chain table
    :return: Nothing, only provides test.
    """
    report = check_factorization(named_graph("collider"), chain_table)
    assert len(report.violations) == 1
    assert report.violations[0].constraint.startswith("p(v) = prod p(v_j | pa_j) (")
    assert set(report.violations[0].witness) == {"A", "B", "C"}
    assert report.checked == 8


def test_saturated_iv_graph(rng: np.random.Generator) -> None:
    """
    Tests that the instrumental-variable graph imposes no equality constraint.
    :param rng: random generator
    :return: Nothing, only provides test.
    """
    iv = named_graph("iv")
    t = random_table(rng, StateSpace.of([(v, 2) for v in iv.vertices]))
    assert all(verdicts((iv, t)).values())
    assert check_gm(iv, t).checked == 0


def test_mixed_member_passes_every_checker(mixed: DirectedMixedGraph) -> None:
    """
    Tests a generated law of the running example.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    t = induced_joint(generate_system(mixed, seed=1))
    for model in applicable_models(mixed):
        assert run_checker(model, mixed, t).passed, model


def test_verma_strictness(verma: DirectedMixedGraph) -> None:
    """
    Tests that the Verma graph separates the global and the nested Markov models.
    :param verma: Verma graph
    :return: Nothing, only provides test.
    """
    member = induced_joint(generate_system(verma, seed=2))
    assert check_gm(verma, member).passed
    assert check_nm(verma, member).passed

    separating = verma_gm_only_table(np.random.default_rng(5))
    assert verma_gap(separating) > 0
    gm = check_gm(verma, separating)
    assert gm.passed
    assert gm.checked == 1
    nm = check_nm(verma, separating)
    assert not nm.passed
    assert any(v.constraint.startswith("fix {V3}: ") for v in nm.violations)
    assert check_lm(verma, separating).passed
    assert check_augmentation(verma, separating).passed


def test_expected_relations_by_class(mixed: DirectedMixedGraph) -> None:
    """
    Tests which implications apply to each graph class.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    assert (ModelKind.GM, ModelKind.NM) not in expected_relations(mixed)
    assert (ModelKind.NM, ModelKind.GM) in expected_relations(mixed)
    chain = named_graph("chain")
    assert (ModelKind.F, ModelKind.GM) in expected_relations(chain)
    assert (ModelKind.GM, ModelKind.NM) in expected_relations(chain)
    bidirected = DirectedMixedGraph(("A", "B"), bidirected=frozenset({frozenset("AB")}))
    assert (ModelKind.UM, ModelKind.GM) in expected_relations(bidirected)


def test_relation_matrix_records_failures(mixed: DirectedMixedGraph) -> None:
    """
    Tests hard failures and strictness witnesses of the relation matrix.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    matrix = RelationMatrix()
    verdict = {ModelKind.GM: True, ModelKind.UM: False, ModelKind.LM: True, ModelKind.A: True, ModelKind.NM: False}
    matrix.record(0, mixed, verdict)
    assert not matrix.passed
    assert "instance 0: gm passed but um failed" in matrix.hard_failures
    assert matrix.witnesses == ["instance 0: gm passed, nm failed"]
    assert matrix.counts[ModelKind.GM][ModelKind.LM] == 1
    assert matrix.counts[ModelKind.GM][ModelKind.UM] == 0
    assert matrix.format().startswith("instances: 1\n")
    assert matrix.to_dict()["pass_counts"]["um"] == 0


def test_relation_matrix_over_small_corpus(rng: np.random.Generator, verma: DirectedMixedGraph) -> None:
    """
    Tests a corpus mixing members, non-members and the Verma witness.
    :param rng: random generator
    :param verma: Verma graph
    :return: Nothing, only provides test.
    """
    chain = named_graph("chain")
    member = induced_joint(generate_system(chain, seed=4))
    corpus = [
        (chain, member),
        (chain, perturb_table(rng, member)),
        (verma, verma_gm_only_table(rng)),
    ]
    matrix = relation_matrix(corpus)
    assert matrix.passed, matrix.hard_failures
    assert matrix.instances == 3
    assert [w for w in matrix.witnesses if "nm" in w] == ["instance 2: gm passed, nm failed"]


@pytest.mark.slow
def test_relation_matrix_with_workers(rng: np.random.Generator) -> None:
    """
    Tests that worker processes give the same matrix as the serial run.
    :param rng: random generator
    :return: Nothing, only provides test.
    """
    corpus = []
    for _ in range(4):
        g = random_admg(rng, 3)
        corpus.append((g, random_table(rng, StateSpace.of([(v, 2) for v in g.vertices]))))
    assert relation_matrix(corpus, workers=2).to_dict() == relation_matrix(corpus, workers=1).to_dict()


@pytest.mark.slow
def test_positive_tables_leave_no_kernel_slice_undefined() -> None:
    """
    Tests that the nested Markov check of a positive table compares every kernel slice.
    :return: Nothing, only provides test.
    """
    rng = np.random.default_rng(47)
    for _ in range(repetitions(50, 10)):
        g = random_admg(rng, int(rng.integers(2, 5)))
        t = random_table(rng, StateSpace.of([(v, 2) for v in g.vertices]))
        report = check_nm(g, t)
        assert report.skipped_slices == 0
        assert report.checked >= check_gm(g, t).checked


FIVE_MODELS = (ModelKind.GM, ModelKind.LM, ModelKind.A, ModelKind.EF, ModelKind.NM)


@pytest.mark.slow
def test_unconfounded_equivalences() -> None:
    """
    Tests that LM, GM, A, EF and NM agree on unconfounded graphs, for members and non-members.
    :return: Nothing, only provides test.
    """
    rng = np.random.default_rng(31)
    for _ in range(repetitions(100, 10)):
        g = random_unconfounded_admg(rng, int(rng.integers(1, 5)))
        member = random_ef_table(rng, g)
        verdict = verdicts((g, member))
        assert all(verdict[m] for m in FIVE_MODELS), (g, verdict)

        other = verdicts((g, perturb_table(rng, member)))
        assert len({other[m] for m in FIVE_MODELS}) == 1, (g, other)


@pytest.mark.slow
def test_dag_factorization_joins_equivalences() -> None:
    """
    Tests that F agrees with GM on DAGs.
    :return: Nothing, only provides test.
    """
    rng = np.random.default_rng(37)
    for _ in range(repetitions(50, 10)):
        g = random_dag(rng, int(rng.integers(1, 5)))
        member = induced_joint(generate_system(g, int(rng.integers(2**31))))
        factorization = check_factorization(g, member)
        assert factorization.passed
        assert factorization.checked > 0
        assert check_nm(g, member).passed
        other = perturb_table(rng, member)
        assert check_factorization(g, other).passed == check_gm(g, other).passed


@pytest.mark.slow
def test_bidirected_um_equals_gm() -> None:
    """
    Tests that UM and GM coincide on bidirected graphs.
    :return: Nothing, only provides test.
    """
    rng = np.random.default_rng(41)
    for number in range(repetitions(100, 10)):
        g = random_bidirected_graph(rng, int(rng.integers(1, 6)))
        t = induced_joint(generate_system(g, int(rng.integers(2**31))))
        if number % 2:
            t = perturb_table(rng, t)
        assert check_um(g, t).passed == check_gm(g, t).passed


@pytest.mark.slow
def test_gm_equals_augmentation_and_lm() -> None:
    """
    Tests the three separation based checkers on random ADMGs and tables.
    :return: Nothing, only provides test.
    """
    rng = np.random.default_rng(43)
    for _ in range(repetitions(100, 10)):
        g = random_admg(rng, int(rng.integers(1, 5)))
        t = induced_joint(generate_system(g, int(rng.integers(2**31))))
        if rng.random() < 0.5:
            t = perturb_table(rng, t)
        gm = check_gm(g, t).passed
        assert check_augmentation(g, t).passed == gm
        assert check_lm(g, t).passed == gm
        if gm is False:
            assert not check_nm(g, t).passed


@pytest.mark.slow
def test_local_markov_verdict_does_not_depend_on_the_order() -> None:
    """
    Tests that every topological order gives the same local Markov verdict.
    :return: Nothing, only provides test.
    """
    rng = np.random.default_rng(61)
    for number in range(repetitions(50, 10)):
        g = random_admg(rng, int(rng.integers(1, 5)))
        t = induced_joint(generate_system(g, int(rng.integers(2**31))))
        if number % 2:
            t = perturb_table(rng, t)
        verdict = {check_lm(g, t, order).passed for order in topological_orders(g, limit=24)}
        assert len(verdict) == 1, g


@pytest.mark.slow
def test_local_markov_forms_agree() -> None:
    """
    Tests that the predecessor-based and the sink-based local Markov forms give the same verdict.
    :return: Nothing, only provides test.
    """
    rng = np.random.default_rng(71)
    for number in range(repetitions(50, 10)):
        g = random_admg(rng, int(rng.integers(1, 5)))
        t = induced_joint(generate_system(g, int(rng.integers(2**31))))
        if number % 2:
            t = perturb_table(rng, t)
        ordered = check_lm(g, t)
        sink = check_lm(g, t, form=LocalForm.SINK)
        assert ordered.passed == sink.passed, g
        assert sink.checked >= ordered.checked
