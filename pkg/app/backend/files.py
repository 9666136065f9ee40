"""
File contains reading and writing of graph files, distribution files, equation systems and reports.
"""

import json
import logging

from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from app.backend.causal_sim import EquationSystem
from app.backend.dist_core import ArithmeticMode, JointTable, StateSpace, Variable, as_fraction
from app.backend.errors import AdmgError, DistributionError, InputFileError, SystemSpecError
from app.backend.graph_core import DirectedMixedGraph, parse_graph, serialize_graph
from app.backend.markov_checks import CheckReport

logger = logging.getLogger(__name__)


class Files:
    # region Plain files

    @staticmethod
    def read_text(path: str | Path) -> str:
        try:
            return Path(path).read_text(encoding="utf-8")
        except OSError as error:
            raise InputFileError(f"cannot read {path}: {error.strerror}") from error

    @staticmethod
    def write_text(path: str | Path, text: str) -> None:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as error:
            raise InputFileError(f"cannot write {path}: {error.strerror}") from error
        logger.debug("wrote %s", path)

    @staticmethod
    def read_json(path: str | Path) -> Any:
        text = Files.read_text(path)
        try:
            return json.loads(text)
        except json.JSONDecodeError as error:
            raise InputFileError(f"{path}: invalid JSON at line {error.lineno}: {error.msg}") from error

    @staticmethod
    def write_json(path: str | Path, data: Any) -> None:
        Files.write_text(path, json.dumps(data, indent=2) + "\n")

    # endregion

    # region Graphs

    @staticmethod
    def read_graph(path: str | Path) -> DirectedMixedGraph:
        """
        The function reads a graph file.
        :param path: path to the file
        :return: graph
        """
        text = Files.read_text(path)
        try:
            return parse_graph(text)
        except AdmgError as error:
            raise InputFileError(f"{path}: {error}") from error

    @staticmethod
    def write_graph(path: str | Path, g: DirectedMixedGraph) -> None:
        Files.write_text(path, serialize_graph(g))

    # endregion

    # region Distributions

    @staticmethod
    def distribution_to_dict(t: JointTable) -> dict[str, Any]:
        """
        The function converts a table to its JSON object, rational cells as "p/q" strings.
        :param t: table
        :return: JSON-ready dict
        """
        if t.mode is ArithmeticMode.RATIONAL:
            probs: list[Any] = [str(as_fraction(x)) for x in t.flat()]
        else:
            probs = [float(x) for x in t.flat()]
        return {
            "vars": [{"name": v.name, "card": v.card} for v in t.space.variables],
            "mode": t.mode.value,
            "probs": probs,
        }

    @staticmethod
    def distribution_from_dict(data: Any) -> JointTable:
        """
        The function builds a table from its JSON object.
        :param data: dict with vars, mode and probs
        :return: validated table
        """
        if not isinstance(data, dict) or not {"vars", "probs"} <= set(data):
            raise DistributionError("distribution needs 'vars' and 'probs'")
        try:
            mode = ArithmeticMode(data.get("mode", ArithmeticMode.RATIONAL.value))
        except ValueError:
            raise DistributionError(f"unknown arithmetic mode {data.get('mode')!r}") from None
        try:
            space = StateSpace(tuple(Variable(str(v["name"]), int(v["card"])) for v in data["vars"]))
        except DistributionError:
            raise
        except (KeyError, TypeError, ValueError):
            raise DistributionError("every variable needs a name and an integer card") from None
        probs = data["probs"]
        if not isinstance(probs, list):
            raise DistributionError("'probs' must be a list")
        if mode is ArithmeticMode.RATIONAL:
            try:
                values: list[Any] = [Fraction(str(x)) for x in probs]
            except (ValueError, ZeroDivisionError):
                raise DistributionError("rational entries must be strings such as \"1/4\"") from None
        else:
            try:
                values = [float(x) for x in probs]
            except (TypeError, ValueError):
                raise DistributionError("float entries must be numbers") from None
        return JointTable(space, values, mode)

    @staticmethod
    def read_distribution(path: str | Path) -> JointTable:
        data = Files.read_json(path)
        try:
            return Files.distribution_from_dict(data)
        except DistributionError as error:
            raise InputFileError(f"{path}: {error}") from error

    @staticmethod
    def write_distribution(path: str | Path, t: JointTable) -> None:
        Files.write_json(path, Files.distribution_to_dict(t))

    # endregion

    # region Equation systems

    @staticmethod
    def system_to_dict(s: EquationSystem) -> dict[str, Any]:
        """
        The function converts an equation system to its JSON object.
        :param s: equation system
        :return: JSON-ready dict with graph text, cardinalities, noise and function tables
        """
        return {
            "graph": serialize_graph(s.graph),
            "vertex_cards": {v.name: v.card for v in s.space.variables},
            "noise": Files.distribution_to_dict(s.noise),
            "functions": {v: s.functions[v].tolist() for v in s.graph.vertices},
        }

    @staticmethod
    def system_from_dict(data: Any) -> EquationSystem:
        """
        The function builds an equation system from its JSON object and validates it.
        :param data: dict with graph, vertex_cards, noise and functions
        :return: equation system
        """
        if not isinstance(data, dict) or not {"graph", "vertex_cards", "noise", "functions"} <= set(data):
            raise SystemSpecError("system needs 'graph', 'vertex_cards', 'noise' and 'functions'")
        g = parse_graph(data["graph"])
        cards = data["vertex_cards"]
        missing = [v for v in g.vertices if v not in cards or v not in data["functions"]]
        if missing:
            raise SystemSpecError(f"no cardinality or function for {missing}")
        try:
            space = StateSpace.of([(v, int(cards[v])) for v in g.vertices])
        except DistributionError:
            raise
        except (TypeError, ValueError):
            raise SystemSpecError("vertex cardinalities must be integers") from None
        noise = Files.distribution_from_dict(data["noise"])
        try:
            functions = {v: np.asarray(data["functions"][v], dtype=np.int64) for v in g.vertices}
        except (TypeError, ValueError):
            raise SystemSpecError("function tables must be nested lists of integers") from None
        return EquationSystem(g, space, noise, functions)

    @staticmethod
    def read_system(path: str | Path) -> EquationSystem:
        data = Files.read_json(path)
        try:
            return Files.system_from_dict(data)
        except AdmgError as error:
            raise InputFileError(f"{path}: {error}") from error

    @staticmethod
    def write_system(path: str | Path, s: EquationSystem) -> None:
        Files.write_json(path, Files.system_to_dict(s))

    # endregion

    @staticmethod
    def write_report(path: str | Path, report: CheckReport) -> None:
        Files.write_json(path, report.to_dict())
