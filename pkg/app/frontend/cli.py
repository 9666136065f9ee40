"""
This file contains the admg command group: graph queries, transformations, Markov checks and the
causal simulator over graph, distribution and system files.
"""

import json
import logging

from pathlib import Path
from typing import Any, Callable

import click

from app.backend.causal_sim import (
    PotentialOutcomeQuery,
    generate_system,
    po_distribution,
    verify_basic_po_independence,
    verify_consistency,
    verify_fixing_identity,
    verify_swig_markov,
)
from app.backend.dist_core import JointTable, fix_sequence
from app.backend.errors import AdmgError, QueryError
from app.backend.files import Files
from app.backend.graph_core import CondADMG, bidirected_lines, classify, directed_lines, serialize_graph
from app.backend.graph_transform import (
    augment,
    expand_clique,
    expand_noise,
    expand_pairwise,
    fix_graph_sequence,
    fixable_sets,
    marginalize,
    swig,
    swig_labels,
    tilde_fix_graph,
)
from app.backend.markov_checks import CheckReport, ModelKind, relation_matrix, run_checker
from app.backend.settings import Settings
from app.backend.walk_algebra import (
    SeparationQuery,
    ancestral_closure,
    district,
    format_set,
    m_separated,
    markov_background,
    markov_boundary,
)

logger = logging.getLogger(__name__)

TABLE_MODELS = ("gm", "um", "lm", "f", "ef", "a", "nm")
VERIFICATIONS = ("fixing", "consistency", "swig-markov", "basic-po-independence")

graph_option = click.option(
    "-g", "--graph", "graph_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Graph file."
)
system_option = click.option(
    "-s", "--system", "system_path", required=True, type=click.Path(exists=True, dir_okay=False), help="System file."
)
tol_option = click.option(
    "--tol", type=click.FloatRange(min=0.0), default=None, help="Float-mode tolerance, defaults to the group --tol."
)


class AdmgGroup(click.Group):
    """
    Command group turning backend errors into exit code 2 with the message on stderr.
    """

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except AdmgError as error:
            logger.debug("command failed", exc_info=True)
            click.echo(f"error: {error}", err=True)
            ctx.exit(2)


def split_names(text: str | None) -> list[str]:
    """
    Function splits a comma separated list of vertex names.
    :param text: text such as "A,B" or None
    :return: list of names, empty for None or ""
    """
    if not text:
        return []
    return [name.strip() for name in text.split(",") if name.strip()]


def parse_assignment(text: str | None) -> dict[str, int]:
    """
    Function parses an assignment such as "A=1,B=0".
    :param text: assignment text
    :return: vertex to value
    """
    assignment: dict[str, int] = {}
    for item in split_names(text):
        name, sep, value = item.partition("=")
        if not sep or not value.strip().isdigit():
            raise QueryError(f"cannot parse assignment {item!r}, expected NAME=VALUE")
        assignment[name.strip()] = int(value)
    return assignment


def format_table(t: JointTable) -> str:
    """
    Function lists the nonzero cells of a table, one per line.
    :param t: table
    :return: text ending with a newline
    """
    lines = []
    for cell in t.space.assignments():
        value = t.values[cell]
        if value != 0:
            lines.append(" ".join(f"{n}={x}" for n, x in zip(t.names, cell)) + f": {value}")
    return "\n".join(lines) + "\n"


def format_conditional(c: CondADMG) -> str:
    lines = ["vertices: " + " ".join(c.vertices) if c.vertices else "vertices:"]
    lines.append("fixed: " + " ".join(c.sort(c.fixed)) if c.fixed else "fixed:")
    lines += directed_lines(c)
    lines += bidirected_lines(c.bidirected)
    lines += ["overlay: " + line for line in bidirected_lines(c.overlay)]
    return "\n".join(lines) + "\n"


def emit(ctx: click.Context, text: str, result: Any, report: CheckReport | None = None) -> None:
    """
    Function prints text or the JSON envelope and leaves with 0, or 1 when the report failed.
    :param ctx: click context
    :param text: human readable output
    :param result: JSON result
    :param report: optional check report
    :return: Nothing, exits
    """
    ok = report is None or report.passed
    if ctx.obj["json"]:
        violations = [v.to_dict() for v in report.violations] if report is not None else []
        click.echo(json.dumps({"ok": ok, "result": result, "violations": violations}, indent=2))
    else:
        click.echo(text, nl=False)
    ctx.exit(0 if ok else 1)


@click.group(cls=AdmgGroup)
@click.option("-v", "--verbose", count=True, help="-v for info, -vv for debug logging.")
@click.option("--json", "as_json", is_flag=True, help="Print the JSON envelope instead of text.")
@click.option("--tol", type=float, default=None, help="Float-mode tolerance.")
@click.option("--workers", type=int, default=None, help="Worker processes for corpus runs.")
@click.pass_context
def admg(ctx: click.Context, verbose: int, as_json: bool, tol: float | None, workers: int | None) -> None:
    """Queries and checks on acyclic directed mixed graphs."""
    logging.getLogger().setLevel(logging.WARNING - 10 * min(verbose, 2))
    overrides: dict[str, Any] = {}
    if tol is not None:
        overrides["tolerance"] = tol
    if workers is not None:
        overrides["workers"] = workers
    if overrides:
        try:
            Settings.configure(**overrides)
        except (KeyError, TypeError, ValueError) as error:
            raise click.BadParameter(str(error)) from error
        ctx.call_on_close(Settings.reset)
    ctx.ensure_object(dict)
    ctx.obj["json"] = as_json


# region Graph queries


@admg.command()
@graph_option
@click.option("--from", "source", required=True, help="Comma separated J.")
@click.option("--to", "target", required=True, help="Comma separated K.")
@click.option("--given", default="", help="Comma separated L.")
@click.pass_context
def msep(ctx: click.Context, graph_path: str, source: str, target: str, given: str) -> None:
    """Test m-separation of J and K given L."""
    g = Files.read_graph(graph_path)
    q = SeparationQuery(frozenset(split_names(source)), frozenset(split_names(target)), frozenset(split_names(given)))
    separated = m_separated(g, q)
    emit(ctx, f"m-separated: {str(separated).lower()}\n", separated)


def _vertex_query(name: str, query: Callable[[Any, str], frozenset[str]]) -> None:
    @admg.command(name=name, help=f"Print {name}(v).")
    @graph_option
    @click.option("-v", "--vertex", required=True)
    @click.pass_context
    def command(ctx: click.Context, graph_path: str, vertex: str) -> None:
        g = Files.read_graph(graph_path)
        g.require(vertex)
        found = query(g, vertex)
        emit(ctx, f"{name}({vertex}) = {format_set(found)}\n", sorted(found))


_vertex_query("district", district)
_vertex_query("mb", markov_boundary)
_vertex_query("mbg", markov_background)


@admg.command()
@graph_option
@click.option("--set", "members", required=True, help="Comma separated vertex set.")
@click.pass_context
def ancestral(ctx: click.Context, graph_path: str, members: str) -> None:
    """Print the ancestral closure of a set."""
    g = Files.read_graph(graph_path)
    start = split_names(members)
    closure = ancestral_closure(g, start)
    emit(ctx, f"ancestral closure of {format_set(start)} = {format_set(closure)}\n", sorted(closure))


@admg.command(name="classify")
@graph_option
@click.pass_context
def classify_command(ctx: click.Context, graph_path: str) -> None:
    """Print the graph classes."""
    names = sorted(c.value for c in classify(Files.read_graph(graph_path)))
    emit(ctx, f"classes: {', '.join(names) if names else 'none (cyclic)'}\n", names)


# endregion

# region Graph transformations


@admg.command(name="marginalize")
@graph_option
@click.option("--keep", required=True, help="Comma separated vertices to keep.")
@click.pass_context
def marginalize_command(ctx: click.Context, graph_path: str, keep: str) -> None:
    """Print the latent projection onto the kept vertices."""
    text = serialize_graph(marginalize(Files.read_graph(graph_path), split_names(keep)))
    emit(ctx, text, text)


@admg.command()
@graph_option
@click.option("--kind", required=True, type=click.Choice(["pairwise", "clique", "noise"]))
@click.option("--maximal", is_flag=True, help="Clique expansion over maximal cliques only.")
@click.option("--no-singletons", is_flag=True, help="Clique expansion without singleton latents.")
@click.pass_context
def expand(ctx: click.Context, graph_path: str, kind: str, maximal: bool, no_singletons: bool) -> None:
    """Print a latent expansion of the graph."""
    g = Files.read_graph(graph_path)
    if kind == "pairwise":
        expanded = expand_pairwise(g)
    elif kind == "clique":
        expanded = expand_clique(g, maximal=maximal, singletons=not no_singletons)
    else:
        expanded = expand_noise(g)
    text = serialize_graph(expanded)
    emit(ctx, text, text)


@admg.command(name="swig")
@graph_option
@click.option("--on", "intervened", required=True, help="Comma separated intervened vertices.")
@click.option("--values", default=None, help="Optional values such as B=1 for the labels.")
@click.pass_context
def swig_command(ctx: click.Context, graph_path: str, intervened: str, values: str | None) -> None:
    """Print the single-world intervention graph."""
    g = Files.read_graph(graph_path)
    members = split_names(intervened)
    labels = swig_labels(g, members, parse_assignment(values) if values else None)
    text = serialize_graph(swig(g, members)) + "labels: " + " ".join(labels[v] for v in g.vertices) + "\n"
    emit(ctx, text, text)


@admg.command(name="augment")
@graph_option
@click.pass_context
def augment_command(ctx: click.Context, graph_path: str) -> None:
    """Print the augmented undirected graph."""
    text = augment(Files.read_graph(graph_path)).serialize()
    emit(ctx, text, text)


@admg.command()
@graph_option
@click.pass_context
def fixable(ctx: click.Context, graph_path: str) -> None:
    """List every fixable set with its first fixable permutation."""
    found = fixable_sets(Files.read_graph(graph_path))
    lines = [f"{format_set(s.members)} via {', '.join(s.order) if s.order else '-'}" for s in found]
    emit(ctx, "\n".join(lines) + "\n", [{"set": sorted(s.members), "order": list(s.order)} for s in found])


@admg.command()
@graph_option
@click.option("--seq", required=True, help="Comma separated fixing sequence.")
@click.option("--tilde", is_flag=True, help="Add overlay edges between the fixed vertices.")
@click.option("-d", "--dist", "dist_path", type=click.Path(exists=True, dir_okay=False), help="Table to fix.")
@click.pass_context
def fix(ctx: click.Context, graph_path: str, seq: str, tilde: bool, dist_path: str | None) -> None:
    """Fix a sequence of vertices in the graph and optionally in a table."""
    g = Files.read_graph(graph_path)
    order = split_names(seq)
    c = tilde_fix_graph(g, order) if tilde else fix_graph_sequence(g, order)
    text = format_conditional(c)
    result: dict[str, Any] = {"graph": text}
    if dist_path is not None:
        kernel, _ = fix_sequence(Files.read_distribution(dist_path), g, order)
        text += f"undefined slices: {kernel.undefined_count}\n"
        result["undefined_slices"] = kernel.undefined_count
    emit(ctx, text, result)


# endregion

# region Checks and simulation


@admg.command()
@click.argument("model", type=click.Choice(TABLE_MODELS))
@graph_option
@click.option("-d", "--dist", "dist_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Write the JSON report here.")
@tol_option
@click.pass_context
def check(
    ctx: click.Context, model: str, graph_path: str, dist_path: str, output: str | None, tol: float | None
) -> None:
    """Check a table against a Markov model of the graph."""
    report = run_checker(ModelKind(model), Files.read_graph(graph_path), Files.read_distribution(dist_path), tol)
    if output:
        Files.write_report(output, report)
    emit(ctx, report.summary(), report.to_dict(), report)


@admg.command(name="gen-system")
@graph_option
@click.option("--seed", type=int, required=True)
@click.option("--noise-card", type=int, default=2, show_default=True)
@click.option("--all-cliques", is_flag=True, help="One latent per clique instead of maximal cliques.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="System file to write.")
@click.pass_context
def gen_system(
    ctx: click.Context, graph_path: str, seed: int, noise_card: int, all_cliques: bool, output: str | None
) -> None:
    """Generate a random equation system on the graph."""
    system = generate_system(Files.read_graph(graph_path), seed, noise_card, maximal=not all_cliques)
    data = Files.system_to_dict(system)
    if output:
        Files.write_system(output, system)
        text = f"wrote system on {len(system.graph.vertices)} vertices to {output}\n"
    else:
        text = json.dumps(data, indent=2) + "\n"
    emit(ctx, text, data)


@admg.command()
@system_option
@click.option("--do", "intervention", default="", help="Intervention such as A=1,B=0.")
@click.pass_context
def po(ctx: click.Context, system_path: str, intervention: str) -> None:
    """Print the potential-outcome law under an intervention."""
    t = po_distribution(Files.read_system(system_path), PotentialOutcomeQuery(parse_assignment(intervention)))
    emit(ctx, format_table(t), Files.distribution_to_dict(t))


@admg.command()
@click.argument("kind", type=click.Choice(VERIFICATIONS))
@system_option
@click.option("--set", "members", default="", help="Fixable set for the fixing identity.")
@click.option("--do", "intervention", default="", help="Intervention for swig-markov or fixing.")
@tol_option
@click.pass_context
def verify(
    ctx: click.Context, kind: str, system_path: str, members: str, intervention: str, tol: float | None
) -> None:
    """Verify a causal property of an equation system."""
    system = Files.read_system(system_path)
    assignment = parse_assignment(intervention)
    if kind == "fixing":
        report = verify_fixing_identity(system, split_names(members), assignment or None, tol)
    elif kind == "consistency":
        report = verify_consistency(system)
    elif kind == "swig-markov":
        report = verify_swig_markov(system, assignment, assignment, tol)
    else:
        report = verify_basic_po_independence(system, tol)
    emit(ctx, report.summary(), report.to_dict(), report)


@admg.command()
@click.option("--corpus-dir", required=True, type=click.Path(exists=True, file_okay=False))
@tol_option
@click.pass_context
def relations(ctx: click.Context, corpus_dir: str, tol: float | None) -> None:
    """Tabulate model verdicts over every NAME.g / NAME.dist pair of a directory."""
    corpus = []
    for graph_file in sorted(Path(corpus_dir).glob("*.g")):
        dist_file = graph_file.with_suffix(".dist")
        if not dist_file.exists():
            logger.warning("no distribution for %s", graph_file.name)
            continue
        corpus.append((Files.read_graph(graph_file), Files.read_distribution(dist_file)))
    matrix = relation_matrix(corpus, tol=tol)
    ctx.exit(_emit_matrix(ctx, matrix))


def _emit_matrix(ctx: click.Context, matrix: Any) -> int:
    if ctx.obj["json"]:
        violations = [{"constraint": line} for line in matrix.hard_failures]
        click.echo(json.dumps({"ok": matrix.passed, "result": matrix.to_dict(), "violations": violations}, indent=2))
    else:
        click.echo(matrix.format(), nl=False)
    return 0 if matrix.passed else 1


# endregion
