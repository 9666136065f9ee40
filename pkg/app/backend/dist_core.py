"""
File contains exact finite joint distributions, kernels, (extended) conditional independence
tests and the fixing operator on densities.

Tables are numpy arrays shaped by the cardinalities, last variable fastest. Rational mode stores
fractions.Fraction objects in an object array, float mode stores float64.
"""

import itertools
import logging
import math

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Iterable, Iterator, Mapping

import numpy as np

from app.backend.errors import DistributionError, NotFixableError, QueryError, StateSpaceTooLarge
from app.backend.graph_core import AnyGraph, CondADMG
from app.backend.graph_transform import fix_graph, is_fixable
from app.backend.settings import Settings
from app.backend.walk_algebra import SeparationQuery, format_set, markov_background

logger = logging.getLogger(__name__)


class ArithmeticMode(Enum):
    """
    Enumerator class for table arithmetic.
    """

    RATIONAL = "rational"
    FLOAT = "float"


@dataclass(frozen=True)
class Variable:
    """
    Class stores a named discrete variable.
    """

    name: str
    card: int

    def __post_init__(self) -> None:
        if self.card < 1:
            raise DistributionError(f"variable {self.name} needs cardinality >= 1, got {self.card}")


@dataclass(frozen=True)
class StateSpace:
    """
    Class stores an ordered product of finite variable ranges.
    """

    variables: tuple[Variable, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(self.variables))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise DistributionError(f"duplicate variable names in {names}")

    @classmethod
    def of(cls, cards: Mapping[str, int] | Iterable[tuple[str, int]]) -> "StateSpace":
        items = cards.items() if isinstance(cards, Mapping) else cards
        return cls(tuple(Variable(name, int(card)) for name, card in items))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def cards(self) -> tuple[int, ...]:
        return tuple(v.card for v in self.variables)

    @property
    def size(self) -> int:
        return math.prod(self.cards)

    def card(self, name: str) -> int:
        return self.cards[self.axis(name)]

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DistributionError(f"unknown variable: {name}") from None

    def sub(self, names: Iterable[str]) -> "StateSpace":
        """
        Method restricts the space to names, keeping this space's order.
        :param names: variables to keep
        :return: smaller state space
        """
        wanted = frozenset(names)
        for name in wanted:
            self.axis(name)
        return StateSpace(tuple(v for v in self.variables if v.name in wanted))

    def extended(self, variable: Variable) -> "StateSpace":
        return StateSpace(self.variables + (variable,))

    def assignments(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(*(range(c) for c in self.cards))

    def check_cap(self) -> None:
        if self.size > Settings.state_space_cap:
            raise StateSpaceTooLarge(
                f"state space of {self.size} cells exceeds the cap of {Settings.state_space_cap}"
            )


def as_fraction(value: Any) -> Fraction:
    """
    Function converts ints, "p/q" strings and fractions to Fraction.
    :param value: value to convert
    :return: Fraction
    """
    if isinstance(value, float):
        raise DistributionError(f"float {value!r} in a rational table, use strings 'p/q'")
    try:
        return Fraction(value)
    except (ValueError, TypeError, ZeroDivisionError) as e:
        raise DistributionError(f"not a rational number: {value!r}") from e


def _is_zero(x: Any) -> bool:
    return x == 0


class JointTable:
    """
    Class stores a normalized joint probability table over a state space.
    """

    def __init__(
        self,
        space: StateSpace,
        values: Any,
        mode: ArithmeticMode = ArithmeticMode.RATIONAL,
        validate: bool = True,
        tol: float | None = None,
    ) -> None:
        space.check_cap()
        self.space: StateSpace = space
        self.mode: ArithmeticMode = mode
        raw = np.asarray(values, dtype=object)
        if raw.size != space.size:
            raise DistributionError(f"table has {raw.size} entries, the space needs {space.size}")
        if mode is ArithmeticMode.RATIONAL:
            flat = [as_fraction(x) for x in raw.reshape(-1)]
            array = np.empty(len(flat), dtype=object)
            array[:] = flat
        else:
            array = raw.reshape(-1).astype(np.float64)
        self.values: np.ndarray = array.reshape(space.cards)
        self.values.flags.writeable = False
        if validate:
            self._validate(Settings.normalization_tolerance if tol is None else tol)

    def _validate(self, tol: float) -> None:
        """
        Method checks nonnegativity and normalization.
        :param tol: float-mode tolerance on the total
        :return: Nothing, raises DistributionError
        """
        if any(x < 0 for x in self.values.reshape(-1)):
            raise DistributionError("table has negative entries")
        total = self.values.sum()
        if self.mode is ArithmeticMode.RATIONAL:
            if total != 1:
                raise DistributionError(f"rational table sums to {total}, not 1")
        elif abs(float(total) - 1.0) > tol:
            raise DistributionError(f"float table sums to {float(total)!r}, not 1")

    @classmethod
    def uniform(cls, space: StateSpace, mode: ArithmeticMode = ArithmeticMode.RATIONAL) -> "JointTable":
        value: Any = Fraction(1, space.size) if mode is ArithmeticMode.RATIONAL else 1.0 / space.size
        return cls(space, [value] * space.size, mode)

    @property
    def names(self) -> tuple[str, ...]:
        return self.space.names

    def flat(self) -> list[Any]:
        return list(self.values.reshape(-1))

    def prob(self, assignment: Mapping[str, int]) -> Any:
        """
        Method returns the probability of a full assignment.
        :param assignment: value for every variable
        :return: cell value
        """
        return self.values[tuple(assignment[n] for n in self.names)]

    def to_float(self) -> "JointTable":
        return JointTable(self.space, [float(x) for x in self.flat()], ArithmeticMode.FLOAT, validate=False)

    def __repr__(self) -> str:
        return f"JointTable({list(self.names)}, mode={self.mode.value})"


# region Marginals and comparisons


def marginal_values(t: JointTable, keep: Iterable[str], keepdims: bool = False) -> np.ndarray:
    """
    Function sums out every variable not in keep.
    :param t: table
    :param keep: variables to keep
    :param keepdims: keep summed axes with length one for broadcasting
    :return: array in the table's variable order
    """
    wanted = frozenset(keep)
    for name in wanted:
        t.space.axis(name)
    axes = tuple(i for i, n in enumerate(t.names) if n not in wanted)
    if not axes:
        return np.array(t.values, dtype=t.values.dtype)
    return np.asarray(t.values.sum(axis=axes, keepdims=keepdims), dtype=t.values.dtype)


def marginal(t: JointTable, keep: Iterable[str]) -> JointTable:
    """
    Function returns the marginal table over keep.
    :param t: table
    :param keep: variables to keep
    :return: table over keep in the original order, same arithmetic mode
    """
    keep_set = frozenset(keep)
    space = t.space.sub(keep_set)
    return JointTable(space, marginal_values(t, keep_set), t.mode, validate=False)


def reorder(t: JointTable, names: Iterable[str]) -> JointTable:
    """
    Function permutes the variables of t.
    :param t: table
    :param names: all variable names in the new order
    :return: permuted table
    """
    order = tuple(names)
    if sorted(order) != sorted(t.names):
        raise DistributionError(f"reorder needs a permutation of {list(t.names)}")
    axes = [t.space.axis(n) for n in order]
    space = StateSpace(tuple(t.space.variables[i] for i in axes))
    return JointTable(space, np.transpose(t.values, axes), t.mode, validate=False)


def conditional(t: JointTable, target: Iterable[str], given: Iterable[str] = ()) -> "Kernel":
    """
    Function returns p(target | given) as a kernel indexed by the given variables.
    Slices where p(given) vanishes are undefined.
    :param t: table
    :param target: nonempty target variables
    :param given: conditioning variables, disjoint from target
    :return: kernel with given as fixed variables
    """
    target_set, given_set = frozenset(target), frozenset(given)
    if not target_set or target_set & given_set:
        raise QueryError("target must be nonempty and disjoint from the conditioning set")
    joint = marginal(t, target_set | given_set)
    fixed_space = t.space.sub(given_set)
    remaining = t.space.sub(target_set)
    target_axes = [joint.space.axis(n) for n in remaining.names]
    given_axes = [joint.space.axis(n) for n in fixed_space.names]
    arranged = np.transpose(joint.values, given_axes + target_axes)
    tol = Settings.tolerance if t.mode is ArithmeticMode.FLOAT else None
    tables: dict[tuple[int, ...], JointTable | None] = {}
    for key in fixed_space.assignments():
        block = arranged[key]
        total = block.sum()
        tables[key] = None if _is_zero(total) else JointTable(remaining, block / total, t.mode, tol=tol)
    return Kernel(fixed_space, remaining, tables, t.mode)


def gap(a: Any, b: Any) -> float:
    return float(abs(a - b))


def same_value(a: Any, b: Any, mode: ArithmeticMode, tol: float | None = None) -> bool:
    if mode is ArithmeticMode.RATIONAL:
        return a == b
    return gap(a, b) <= (Settings.tolerance if tol is None else tol)


def tables_equal(a: JointTable, b: JointTable, tol: float | None = None) -> bool:
    """
    Function compares two tables over the same variables, aligning variable order.
    :param a: first table
    :param b: second table
    :param tol: float-mode tolerance
    :return: True iff every cell agrees
    """
    if a.mode is not b.mode:
        raise DistributionError(f"arithmetic-mode mismatch: {a.mode.value} vs {b.mode.value}")
    if sorted(a.names) != sorted(b.names) or any(a.space.card(n) != b.space.card(n) for n in a.names):
        return False
    aligned = reorder(b, a.names)
    return all(same_value(x, y, a.mode, tol) for x, y in zip(a.values.reshape(-1), aligned.values.reshape(-1)))


def at(arr: np.ndarray, index: tuple[int, ...]) -> Any:
    """
    Function reads a keepdims array at a full-table index, collapsed axes read at 0.
    """
    return arr[tuple(0 if size == 1 else i for i, size in zip(index, arr.shape))]


def _cell(index: tuple[int, ...], collapsed: Iterable[int]) -> tuple[int, ...]:
    zero = frozenset(collapsed)
    return tuple(0 if axis in zero else x for axis, x in enumerate(index))


# endregion

# region Conditional independence


@dataclass(frozen=True)
class CiWitness:
    """
    Class stores the worst cell found while testing an independence.
    """

    magnitude: float
    assignment: dict[str, int] = field(default_factory=dict)


def ci_violation(t: JointTable, q: SeparationQuery, tol: float | None = None) -> CiWitness | None:
    """
    Function tests J _||_ K | L on a table cell by cell.
    :param t: table
    :param q: query over variable names
    :param tol: float-mode tolerance, defaults to Settings.tolerance
    :return: worst violating cell, or None when the independence holds
    """
    tol = Settings.tolerance if tol is None else tol
    involved = q.J | q.K | q.L
    sub = marginal(t, involved)
    arr = sub.values
    axes = {n: i for i, n in enumerate(sub.names)}
    j_axes = [axes[n] for n in q.J]
    k_axes = [axes[n] for n in q.K]
    p_jl = arr.sum(axis=tuple(k_axes), keepdims=True)
    p_kl = arr.sum(axis=tuple(j_axes), keepdims=True)
    p_l = arr.sum(axis=tuple(j_axes + k_axes), keepdims=True)

    worst: CiWitness | None = None
    for index in np.ndindex(*arr.shape):
        denominator = p_l[_cell(index, j_axes + k_axes)]
        if _is_zero(denominator):
            continue
        lhs = arr[index] / denominator
        rhs = (p_jl[_cell(index, k_axes)] / denominator) * (p_kl[_cell(index, j_axes)] / denominator)
        if same_value(lhs, rhs, t.mode, tol):
            continue
        size = gap(lhs, rhs)
        if worst is None or size > worst.magnitude:
            worst = CiWitness(size, dict(zip(sub.names, (int(x) for x in index))))
    return worst


def ci_holds(t: JointTable, q: SeparationQuery, tol: float | None = None) -> bool:
    """
    Function checks p(j, k | l) = p(j | l) p(k | l) wherever p(l) > 0.
    :param t: table
    :param q: query over variable names
    :param tol: float-mode tolerance
    :return: True iff the independence holds
    """
    return ci_violation(t, q, tol) is None


# endregion

# region Kernels and fixing


class Kernel:
    """
    Class stores one table over the remaining variables per assignment of the fixed variables.
    A slice set to None is undefined (its fixing division hit a zero).
    """

    def __init__(
        self,
        fixed_space: StateSpace,
        remaining: StateSpace,
        tables: dict[tuple[int, ...], JointTable | None],
        mode: ArithmeticMode,
    ) -> None:
        expected = set(fixed_space.assignments())
        if set(tables) != expected:
            raise DistributionError("kernel needs exactly one slice per fixed assignment")
        self.fixed_space: StateSpace = fixed_space
        self.remaining: StateSpace = remaining
        self.tables: dict[tuple[int, ...], JointTable | None] = tables
        self.mode: ArithmeticMode = mode

    @classmethod
    def from_joint(cls, t: JointTable) -> "Kernel":
        return cls(StateSpace(), t.space, {(): t}, t.mode)

    @property
    def fixed_names(self) -> tuple[str, ...]:
        return self.fixed_space.names

    @property
    def undefined_count(self) -> int:
        return sum(1 for table in self.tables.values() if table is None)

    def defined(self) -> Iterator[tuple[tuple[int, ...], JointTable]]:
        for key in sorted(self.tables):
            table = self.tables[key]
            if table is not None:
                yield key, table

    def slice(self, assignment: Mapping[str, int]) -> JointTable | None:
        """
        Method returns the table for a fixed-variable assignment.
        :param assignment: value for every fixed variable (extra keys ignored)
        :return: table or None when undefined
        """
        return self.tables[tuple(int(assignment[n]) for n in self.fixed_names)]


def _fix_slice(q: JointTable, v: str, background: list[str], fixed_var: Variable) -> list[JointTable | None]:
    arr = q.values
    axis = q.space.axis(v)
    keep = set(background) | {v}
    others = tuple(i for i, n in enumerate(q.names) if n not in keep)
    p_vm = arr.sum(axis=others, keepdims=True) if others else arr
    p_m = p_vm.sum(axis=axis, keepdims=True)
    remaining = StateSpace(tuple(var for var in q.space.variables if var.name != v))
    tol = Settings.tolerance if q.mode is ArithmeticMode.FLOAT else None

    result: list[JointTable | None] = []
    for x in range(fixed_var.card):
        p_vm_x = np.take(p_vm, [x], axis=axis)
        if any(_is_zero(p) for p in p_vm_x.reshape(-1)):
            result.append(None)
            continue
        conditional = p_vm_x / p_m
        image = np.take(arr, [x], axis=axis) / conditional
        result.append(JointTable(remaining, np.squeeze(image, axis=axis), q.mode, tol=tol))
    return result


def fix_dist(k: Kernel, c: CondADMG, v: str) -> Kernel:
    """
    Function fixes v in the kernel: every slice is divided by p(v | Markov background of v in c).
    Slices where that conditional vanishes anywhere become undefined.
    :param k: kernel matching c
    :param c: conditional graph in which v is fixable
    :param v: vertex to fix
    :return: kernel with v moved to the fixed variables
    """
    if set(k.remaining.names) != set(c.random) or set(k.fixed_names) != set(c.fixed):
        raise DistributionError("kernel variables do not match the conditional graph")
    if not is_fixable(c, v):
        raise NotFixableError(f"{v} is not fixable")
    background = [n for n in k.remaining.names if n in markov_background(c, v)]
    fixed_var = Variable(v, k.remaining.card(v))
    fixed_space = k.fixed_space.extended(fixed_var)
    remaining = StateSpace(tuple(var for var in k.remaining.variables if var.name != v))

    tables: dict[tuple[int, ...], JointTable | None] = {}
    for key, table in k.tables.items():
        if table is None:
            images: list[JointTable | None] = [None] * fixed_var.card
        else:
            images = _fix_slice(table, v, background, fixed_var)
        for x, image in enumerate(images):
            tables[key + (x,)] = image
    result = Kernel(fixed_space, remaining, tables, k.mode)
    logger.debug("fixed %s given %s, %d undefined slices", v, format_set(background), result.undefined_count)
    return result


def fix_sequence(t: JointTable | Kernel, g: AnyGraph, order: Iterable[str]) -> tuple[Kernel, CondADMG]:
    """
    Function fixes the vertices of order one after another on both the kernel and the graph.
    :param t: joint table or kernel
    :param g: graph or conditional graph matching t
    :param order: fixable sequence
    :return: resulting kernel and conditional graph
    """
    c = g if isinstance(g, CondADMG) else CondADMG.from_graph(g)
    kernel = Kernel.from_joint(t) if isinstance(t, JointTable) else t
    for v in order:
        kernel = fix_dist(kernel, c, v)
        c = fix_graph(c, v)
    return kernel, c


def kernels_equal(a: Kernel, b: Kernel, tol: float | None = None) -> bool:
    """
    Function compares two kernels slice by slice, aligning the fixed-variable order.
    Slices undefined in either kernel are skipped.
    :param a: first kernel
    :param b: second kernel
    :param tol: float-mode tolerance
    :return: True iff every slice defined in both agrees
    """
    if a.mode is not b.mode:
        raise DistributionError(f"arithmetic-mode mismatch: {a.mode.value} vs {b.mode.value}")
    if set(a.fixed_names) != set(b.fixed_names) or set(a.remaining.names) != set(b.remaining.names):
        return False
    for key, table in a.defined():
        other = b.slice(dict(zip(a.fixed_names, key)))
        if other is not None and not tables_equal(table, other, tol):
            return False
    return True


def extended_ci_violation(
    k: Kernel,
    K: Iterable[str],
    L: Iterable[str],
    M: Iterable[str] = (),
    tol: float | None = None,
) -> CiWitness | None:
    """
    Function tests K _||_ L | M on a kernel.

    The conditional of K given the random part of L and M must be a function of the K and M values
    only: constant across random values in L and across fixed values in L. Fixed variables in M,
    or outside the query, index independent contexts. When K holds fixed variables the roles of K
    and L are swapped.
    :param k: kernel
    :param K: first set
    :param L: second set
    :param M: conditioning set
    :param tol: float-mode tolerance
    :return: worst violation or None
    """
    tol = Settings.tolerance if tol is None else tol
    K_set, L_set, M_set = frozenset(K), frozenset(L), frozenset(M)
    if not K_set or not L_set:
        raise QueryError("K and L must be nonempty")
    if K_set & L_set or K_set & M_set or L_set & M_set:
        raise QueryError("K, L and M must be disjoint")
    fixed = frozenset(k.fixed_names)
    everything = fixed | set(k.remaining.names)
    if not (K_set | L_set | M_set) <= everything:
        raise DistributionError(f"unknown variables in query: {sorted((K_set | L_set | M_set) - everything)}")
    if K_set & fixed and L_set & fixed:
        raise QueryError("K and L both contain fixed variables")
    if K_set & fixed:
        K_set, L_set = L_set, K_set

    given = (L_set | M_set) - fixed
    context = [i for i, n in enumerate(k.fixed_names) if n not in L_set]
    reference: dict[tuple, tuple[Any, dict[str, int]]] = {}
    worst: CiWitness | None = None

    for key, table in k.defined():
        involved = K_set | given
        sub = marginal(table, involved)
        arr = sub.values
        k_axes = [i for i, n in enumerate(sub.names) if n in K_set]
        m_axes = [i for i, n in enumerate(sub.names) if n in M_set]
        p_given = arr.sum(axis=tuple(k_axes), keepdims=True)
        for index in np.ndindex(*arr.shape):
            denominator = p_given[_cell(index, k_axes)]
            if _is_zero(denominator):
                continue
            value = arr[index] / denominator
            group = (
                tuple(index[i] for i in k_axes),
                tuple(index[i] for i in m_axes),
                tuple(key[i] for i in context),
            )
            witness = dict(zip(k.fixed_names, (int(x) for x in key)))
            witness.update(zip(sub.names, (int(x) for x in index)))
            if group not in reference:
                reference[group] = (value, witness)
                continue
            first, first_witness = reference[group]
            if same_value(value, first, k.mode, tol):
                continue
            size = gap(value, first)
            if worst is None or size > worst.magnitude:
                worst = CiWitness(size, witness)
                logger.debug("extended independence broken between %s and %s", first_witness, witness)
    return worst


def extended_ci_holds(
    k: Kernel, K: Iterable[str], L: Iterable[str], M: Iterable[str] = (), tol: float | None = None
) -> bool:
    return extended_ci_violation(k, K, L, M, tol) is None


# endregion
