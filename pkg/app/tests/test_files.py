"""
File contains tests for files file.
"""

import os

from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from app.backend.causal_sim import generate_system, induced_joint
from app.backend.dist_core import ArithmeticMode, JointTable, StateSpace, tables_equal
from app.backend.errors import DistributionError, InputFileError, SystemSpecError
from app.backend.files import Files
from app.backend.graph_core import DirectedMixedGraph
from app.backend.markov_checks import CheckReport, ModelKind
from app.tests.conftest import FIXTURES


def test_graph_files(tmp_path: Path, mixed: DirectedMixedGraph) -> None:
    """
    Tests writing a graph and reading it back, and the fixture copy of the running example.
    :param tmp_path: temporary directory
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    path = tmp_path / "g.g"
    Files.write_graph(path, mixed)
    assert Files.read_graph(path) == mixed
    assert Files.read_graph(os.path.join(FIXTURES, "mixed.g")) == mixed


def test_broken_graph_file() -> None:
    """
    Tests that syntax errors name the file and the line.
    :return: Nothing, only provides test.
    """
    path = os.path.join(FIXTURES, "broken.g")
    with pytest.raises(InputFileError) as error:
        Files.read_graph(path)
    assert str(error.value).startswith(f"{path}: line 3: ")


def test_missing_and_invalid_files(tmp_path: Path) -> None:
    """
    Tests unreadable files and broken JSON.
    :param tmp_path: temporary directory
    :return: Nothing, only provides test.
    """
    with pytest.raises(InputFileError):
        Files.read_text(tmp_path / "missing.g")
    broken = tmp_path / "broken.json"
    broken.write_text('{\n  "vars": [\n', encoding="utf-8")
    with pytest.raises(InputFileError) as error:
        Files.read_json(broken)
    assert "invalid JSON at line" in str(error.value)
    with pytest.raises(InputFileError):
        Files.write_text(tmp_path / "no" / "such" / "dir.txt", "x")


def test_distribution_files(tmp_path: Path) -> None:
    """
    Tests rational and float distribution files.
    :param tmp_path: temporary directory
    :return: Nothing, only provides test.
    """
    space = StateSpace.of({"A": 2, "B": 3})
    t = JointTable(space, [Fraction(1, 8), Fraction(1, 8), Fraction(1, 4), Fraction(1, 16), Fraction(3, 16), 0])
    path = tmp_path / "t.dist"
    Files.write_distribution(path, t)
    data = Files.read_json(path)
    assert data["probs"][:2] == ["1/8", "1/8"]
    assert data["vars"] == [{"name": "A", "card": 2}, {"name": "B", "card": 3}]
    assert tables_equal(Files.read_distribution(path), t)

    Files.write_distribution(path, t.to_float())
    loaded = Files.read_distribution(path)
    assert loaded.mode is ArithmeticMode.FLOAT
    assert tables_equal(loaded, t.to_float())


def test_distribution_from_dict_errors() -> None:
    """
    Tests rejected distribution objects.
    :return: Nothing, only provides test.
    """
    good = {"vars": [{"name": "A", "card": 2}], "mode": "rational", "probs": ["1/2", "1/2"]}
    assert Files.distribution_from_dict(good).flat() == [Fraction(1, 2), Fraction(1, 2)]
    assert Files.distribution_from_dict({**good, "probs": [0.25, 0.75]}).flat() == [Fraction(1, 4), Fraction(3, 4)]
    for bad in (
        {"vars": good["vars"]},
        {**good, "mode": "decimal"},
        {**good, "vars": [{"name": "A"}]},
        {**good, "probs": "1/2 1/2"},
        {**good, "probs": ["1/2", "half"]},
        {**good, "probs": ["1/2", "1/4"]},
        {**good, "vars": [{"name": "A", "card": "two"}]},
        {**good, "mode": "float", "probs": [0.5, "x"]},
        {**good, "mode": "float", "probs": [0.5, None]},
        [1, 2],
    ):
        with pytest.raises(DistributionError):
            Files.distribution_from_dict(bad)


def test_read_distribution_wraps_errors(tmp_path: Path) -> None:
    """
    Tests that content errors of a distribution file name the file.
    :param tmp_path: temporary directory
    :return: Nothing, only provides test.
    """
    path = tmp_path / "bad.dist"
    Files.write_json(path, {"vars": [{"name": "A", "card": 2}], "probs": ["1/2"]})
    with pytest.raises(InputFileError) as error:
        Files.read_distribution(path)
    assert str(error.value).startswith(f"{path}: ")


def test_fixture_distributions() -> None:
    """
    Tests the fixture tables of the running example.
    :return: Nothing, only provides test.
    """
    uniform = Files.read_distribution(os.path.join(FIXTURES, "mixed_uniform.dist"))
    assert uniform.names == ("A", "B", "C", "D")
    assert set(uniform.flat()) == {Fraction(1, 16)}
    copy = Files.read_distribution(os.path.join(FIXTURES, "mixed_copy.dist"))
    assert copy.prob({"A": 1, "B": 0, "C": 1, "D": 1}) == Fraction(1, 8)
    assert copy.prob({"A": 1, "B": 0, "C": 1, "D": 0}) == 0


def test_system_files(tmp_path: Path, mixed: DirectedMixedGraph) -> None:
    """
    Tests that a written system reproduces the same observational law.
    :param tmp_path: temporary directory
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    system = generate_system(mixed, seed=11)
    path = tmp_path / "s.json"
    Files.write_system(path, system)
    loaded = Files.read_system(path)
    assert loaded.graph == mixed
    assert loaded.space == system.space
    for v in mixed.vertices:
        assert np.array_equal(loaded.functions[v], system.functions[v])
    assert tables_equal(induced_joint(loaded), induced_joint(system))


def test_system_errors(tmp_path: Path, mixed: DirectedMixedGraph) -> None:
    """
    Tests rejected system objects.
    :param tmp_path: temporary directory
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    data = Files.system_to_dict(generate_system(mixed, seed=11))
    with pytest.raises(SystemSpecError):
        Files.system_from_dict({key: value for key, value in data.items() if key != "noise"})
    without_function = {**data, "functions": {v: f for v, f in data["functions"].items() if v != "D"}}
    with pytest.raises(SystemSpecError):
        Files.system_from_dict(without_function)
    path = tmp_path / "s.json"
    Files.write_json(path, without_function)
    with pytest.raises(InputFileError):
        Files.read_system(path)
    assert Files.read_system(os.path.join(FIXTURES, "copy_chain.json")).graph.vertices == ("A", "B", "C")


def test_write_report(tmp_path: Path) -> None:
    """
    Tests the JSON report file.
    :param tmp_path: temporary directory
    :return: Nothing, only provides test.
    """
    report = CheckReport(ModelKind.GM, tolerance=1e-9, checked=2)
    report.add("{A} _||_ {D} | {B}", {"D": 0, "A": 1}, 0.25)
    path = tmp_path / "report.json"
    Files.write_report(path, report)
    assert Files.read_json(path) == {
        "model": "gm",
        "passed": False,
        "violations": [{"constraint": "{A} _||_ {D} | {B}", "witness": {"A": 1, "D": 0}, "magnitude": 0.25}],
        "skipped_slices": 0,
        "tolerance": 1e-9,
        "checked": 2,
    }


def test_system_with_non_numeric_entries(mixed: DirectedMixedGraph) -> None:
    """
    Tests that non-numeric cards, noise cells and function entries are system errors.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    data = Files.system_to_dict(generate_system(mixed, seed=11))
    bad_card = {**data, "vertex_cards": {**data["vertex_cards"], "A": "two"}}
    bad_function = {**data, "functions": {**data["functions"], "A": ["x"] * len(data["functions"]["A"])}}
    bad_noise = {**data, "noise": {**data["noise"], "mode": "float", "probs": ["x"] * len(data["noise"]["probs"])}}
    for bad in (bad_card, bad_function):
        with pytest.raises(SystemSpecError):
            Files.system_from_dict(bad)
    with pytest.raises(DistributionError):
        Files.system_from_dict(bad_noise)
