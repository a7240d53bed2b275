"""Core ABAC data model and the attribute-expression algebra.

An attribute expression is a conjunction of constraints, each mapping an
attribute name to a finite set of allowed values; an entity matches when
every constrained attribute carries one of the allowed values.  Rules pair
a user expression and a resource expression with an operation set and a
permit/deny decision.

All types here are immutable and hashable, and every operation is a pure
function of its inputs, so evaluation is safe to parallelize without any
coordination.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple

from .errors import MissingRangeError, UnknownEntityError

PERMIT = "permit"
DENY = "deny"
DECISIONS = (PERMIT, DENY)

USER = "user"
RESOURCE = "resource"
SIDES = (USER, RESOURCE)

# Rule provenance origins.
ORIGIN_SOURCE = "source"
ORIGIN_LOCAL = "local"
ORIGIN_ADAPTED = "adapted"
ORIGINS = (ORIGIN_SOURCE, ORIGIN_LOCAL, ORIGIN_ADAPTED)


def value_sort_key(value):
    """Deterministic ordering key for attribute values of mixed types."""
    return (value.__class__.__name__, value)


def sorted_values(values: Iterable) -> list:
    return sorted(values, key=value_sort_key)


class AttributeExpression:
    """Conjunction of attribute -> allowed-value-set constraints.

    The empty mapping is the universal expression and matches every entity.
    A constraint with an empty value set collapses the whole conjunction to
    the distinguished empty expression, which matches nothing.
    """

    __slots__ = ("_items",)

    def __init__(self, constraints: Mapping | None = None):
        if constraints is None:
            constraints = {}
        items = []
        collapsed = False
        for attr in sorted(constraints):
            values = frozenset(constraints[attr])
            if not values:
                collapsed = True
                break
            items.append((attr, values))
        # _items is None exactly for the empty (unsatisfiable) expression.
        self._items = None if collapsed else tuple(items)

    @classmethod
    def empty(cls) -> "AttributeExpression":
        expr = cls.__new__(cls)
        expr._items = None
        return expr

    @classmethod
    def universal(cls) -> "AttributeExpression":
        return cls({})

    @property
    def is_empty(self) -> bool:
        return self._items is None

    @property
    def is_universal(self) -> bool:
        return self._items == ()

    @property
    def attrs(self) -> tuple[str, ...]:
        if self._items is None:
            return ()
        return tuple(attr for attr, _ in self._items)

    def get(self, attr: str):
        """Value set constraining ``attr``, or None when unconstrained."""
        if self._items is None:
            return None
        for name, values in self._items:
            if name == attr:
                return values
        return None

    def items(self) -> tuple:
        return self._items or ()

    @property
    def constraints(self) -> dict:
        return {attr: set(values) for attr, values in self.items()}

    def __eq__(self, other):
        if not isinstance(other, AttributeExpression):
            return NotImplemented
        return self._items == other._items

    def __hash__(self):
        return hash(self._items)

    def __repr__(self):
        if self.is_empty:
            return "AttributeExpression(<empty>)"
        if self.is_universal:
            return "AttributeExpression(<universal>)"
        parts = ", ".join(
            "%s in {%s}" % (attr, ", ".join(repr(v) for v in sorted_values(values)))
            for attr, values in self._items
        )
        return f"AttributeExpression({parts})"


EMPTY_EXPRESSION = AttributeExpression.empty()
UNIVERSAL_EXPRESSION = AttributeExpression.universal()


@dataclass(frozen=True)
class Provenance:
    """Where a rule came from: its origin plus fingerprints of its ancestors."""

    origin: str
    parents: tuple[str, ...] = ()

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown provenance origin: {self.origin!r}")
        object.__setattr__(self, "parents", tuple(self.parents))


@dataclass(frozen=True)
class Rule:
    """An ABAC rule: user expression, resource expression, operations, decision.

    Equality and hashing ignore provenance and support, so structurally
    identical rules deduplicate regardless of lineage.
    """

    user_expr: AttributeExpression
    resource_expr: AttributeExpression
    ops: frozenset
    decision: str
    provenance: Provenance | None = field(default=None, compare=False)
    support: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ops", frozenset(self.ops))
        if not self.ops:
            raise ValueError("rule operation set must be non-empty")
        if self.decision not in DECISIONS:
            raise ValueError(f"rule decision must be one of {DECISIONS}, got {self.decision!r}")
        for expr in (self.user_expr, self.resource_expr):
            if not isinstance(expr, AttributeExpression):
                raise TypeError("rule expressions must be AttributeExpression instances")
            if expr.is_empty:
                raise ValueError("rule expressions must be satisfiable (non-empty)")

    def fingerprint(self) -> str:
        """Stable short hash of the rule's structural content."""
        key = (
            _expr_key(self.user_expr),
            _expr_key(self.resource_expr),
            tuple(sorted(self.ops)),
            self.decision,
        )
        return hashlib.sha1(repr(key).encode("utf-8")).hexdigest()[:12]

    def __repr__(self):
        ops = ",".join(sorted(self.ops))
        return f"Rule({self.user_expr!r}, {self.resource_expr!r}, {{{ops}}}, {self.decision})"


def _expr_key(expr: AttributeExpression):
    if expr.is_empty:
        return None
    return tuple((attr, tuple(sorted_values(values))) for attr, values in expr.items())


@dataclass(frozen=True)
class DecisionExample:
    """A logged access decision with the user/resource attribute expressions."""

    user: str
    user_expr: AttributeExpression
    resource: str
    resource_expr: AttributeExpression
    op: str
    decision: str

    def __post_init__(self):
        if self.decision not in DECISIONS:
            raise ValueError(f"example decision must be one of {DECISIONS}, got {self.decision!r}")


class AccessRequest(NamedTuple):
    user: str
    resource: str
    op: str


@dataclass(frozen=True)
class DomainContext:
    """Finite universes, attribute schemas, and attribute assignments.

    ``user_assignment`` and ``resource_assignment`` map ``(entity, attr)``
    pairs to values; a missing pair means the attribute is absent for that
    entity.
    """

    users: frozenset
    resources: frozenset
    operations: frozenset
    user_attrs: frozenset
    resource_attrs: frozenset
    user_value_range: Mapping
    resource_value_range: Mapping
    user_assignment: Mapping
    resource_assignment: Mapping

    def __post_init__(self):
        for name in ("users", "resources", "operations", "user_attrs", "resource_attrs"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))

    def entities(self, side: str) -> frozenset:
        _check_side(side)
        return self.users if side == USER else self.resources

    def attr_names(self, side: str) -> frozenset:
        _check_side(side)
        return self.user_attrs if side == USER else self.resource_attrs

    def range_of(self, attr: str, side: str) -> frozenset:
        _check_side(side)
        ranges = self.user_value_range if side == USER else self.resource_value_range
        if attr not in ranges:
            raise MissingRangeError(f"no declared value range for {side} attribute {attr!r}")
        return frozenset(ranges[attr])

    def value_of(self, entity, attr: str, side: str):
        """Assigned value of ``attr`` for ``entity``, or None when absent."""
        _check_side(side)
        assignment = self.user_assignment if side == USER else self.resource_assignment
        return assignment.get((entity, attr))

    def requests(self) -> Iterator[AccessRequest]:
        """All (user, resource, op) triples, in deterministic order."""
        for u in sorted_values(self.users):
            for r in sorted_values(self.resources):
                for o in sorted_values(self.operations):
                    yield AccessRequest(u, r, o)

    def validate(self) -> None:
        """Raise ValueError when the context breaks its own invariants."""
        overlap = self.user_attrs & self.resource_attrs
        if overlap:
            raise ValueError(f"user and resource attribute names must be disjoint: {sorted(overlap)}")
        for (entity, attr), value in self.user_assignment.items():
            if entity not in self.users:
                raise ValueError(f"assignment references unknown user {entity!r}")
            if attr not in self.user_attrs:
                raise ValueError(f"assignment references undeclared user attribute {attr!r}")
            if value not in self.range_of(attr, USER):
                raise ValueError(f"user {entity!r} has out-of-range value {value!r} for {attr!r}")
        for (entity, attr), value in self.resource_assignment.items():
            if entity not in self.resources:
                raise ValueError(f"assignment references unknown resource {entity!r}")
            if attr not in self.resource_attrs:
                raise ValueError(f"assignment references undeclared resource attribute {attr!r}")
            if value not in self.range_of(attr, RESOURCE):
                raise ValueError(f"resource {entity!r} has out-of-range value {value!r} for {attr!r}")

    def validate_expression(self, expr: AttributeExpression, side: str) -> None:
        """Raise ValueError when ``expr`` escapes the declared attribute ranges."""
        for attr, values in expr.items():
            if attr not in self.attr_names(side):
                raise ValueError(f"expression constrains undeclared {side} attribute {attr!r}")
            extra = values - self.range_of(attr, side)
            if extra:
                raise ValueError(
                    f"expression values {sorted_values(extra)} outside range of {side} attribute {attr!r}"
                )

    def validate_example(self, example: DecisionExample) -> None:
        """Check the Definition-1 invariant: the entities satisfy their expressions."""
        if not satisfies(example.user, example.user_expr, USER, self):
            raise ValueError(f"user {example.user!r} does not satisfy the example's user expression")
        if not satisfies(example.resource, example.resource_expr, RESOURCE, self):
            raise ValueError(
                f"resource {example.resource!r} does not satisfy the example's resource expression"
            )
        if example.op not in self.operations:
            raise ValueError(f"example operation {example.op!r} not declared in context")


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")


def satisfies(entity, expr: AttributeExpression, side: str, ctx: DomainContext) -> bool:
    """True iff the entity's assigned values meet every constraint in ``expr``.

    An entity missing a constrained attribute does not satisfy the
    expression; an unknown entity id is an error.
    """
    _check_side(side)
    if entity not in ctx.entities(side):
        raise UnknownEntityError(f"unknown {side} id: {entity!r}")
    if expr.is_empty:
        return False
    for attr, allowed in expr.items():
        value = ctx.value_of(entity, attr, side)
        if value is None or value not in allowed:
            return False
    return True


def matched_entities(expr: AttributeExpression, side: str, ctx: DomainContext) -> frozenset:
    """The set of entities in the context that satisfy ``expr``."""
    return frozenset(e for e in ctx.entities(side) if satisfies(e, expr, side, ctx))


def expr_subset(
    e1: AttributeExpression,
    e2: AttributeExpression,
    side: str | None = None,
    ctx: DomainContext | None = None,
    *,
    extensional: bool = False,
) -> bool:
    """True iff every entity matching ``e1`` also matches ``e2``.

    The default check is intensional and needs no context: every attribute
    constrained in ``e2`` must be constrained in ``e1`` with a value subset.
    With ``extensional=True`` the entity sets are enumerated instead (side
    and ctx required).  The intensional check is sound, and complete when
    the context realizes every value combination.
    """
    if extensional:
        if side is None or ctx is None:
            raise ValueError("extensional subset check requires side and ctx")
        return matched_entities(e1, side, ctx) <= matched_entities(e2, side, ctx)
    if e1.is_empty:
        return True
    if e2.is_empty:
        return False
    for attr, allowed in e2.items():
        ours = e1.get(attr)
        if ours is None or not ours <= allowed:
            return False
    return True


def expr_intersect(e1: AttributeExpression, e2: AttributeExpression) -> AttributeExpression:
    """Conjunction of two expressions; empty when some attribute has no common value."""
    if e1.is_empty or e2.is_empty:
        return EMPTY_EXPRESSION
    merged = {}
    for attr, values in e1.items():
        merged[attr] = values
    for attr, values in e2.items():
        if attr in merged:
            common = merged[attr] & values
            if not common:
                return EMPTY_EXPRESSION
            merged[attr] = common
        else:
            merged[attr] = values
    return AttributeExpression(merged)


def expr_overlaps(e1: AttributeExpression, e2: AttributeExpression) -> bool:
    """True iff the two expressions have a non-empty conjunction."""
    return not expr_intersect(e1, e2).is_empty


def expr_difference(
    e1: AttributeExpression,
    e2: AttributeExpression,
    side: str,
    ctx: DomainContext,
) -> list[AttributeExpression]:
    """Decompose ``e1`` minus ``e2`` into disjoint conjunctive expressions.

    Walks the attributes constrained by ``e2`` (those shared with ``e1``
    first, then the rest); at each one it emits a copy of ``e1`` restricted
    to the values ``e2`` excludes, with previously processed attributes
    pinned to the values both expressions allow.  Attributes ``e2``
    constrains but ``e1`` does not take the declared range as their base,
    which is why a context is required.  The union of the matched entity
    sets of the result equals matched(e1) minus matched(e2), and the pieces
    are pairwise disjoint.
    """
    if e1.is_empty:
        return []
    if e2.is_empty:
        return [e1]
    shared = sorted(set(e1.attrs) & set(e2.attrs))
    only_e2 = sorted(set(e2.attrs) - set(e1.attrs))
    pieces: list[AttributeExpression] = []
    pinned: dict = {}
    for attr in shared + only_e2:
        excluded = e2.get(attr)
        base = e1.get(attr)
        if base is None:
            base = ctx.range_of(attr, side)
        remainder = base - excluded
        if remainder:
            constraints = dict(e1.constraints)
            constraints.update(pinned)
            constraints[attr] = remainder
            pieces.append(AttributeExpression(constraints))
        overlap = base & excluded
        if not overlap:
            # e1 and e2 are disjoint on this attribute; nothing further to remove.
            break
        pinned[attr] = overlap
    return pieces


def rule_applies(rule: Rule, request: AccessRequest, ctx: DomainContext) -> bool:
    """True iff the rule covers the request (both expressions and the op set)."""
    if request.op not in ctx.operations:
        raise UnknownEntityError(f"unknown operation: {request.op!r}")
    return (
        request.op in rule.ops
        and satisfies(request.user, rule.user_expr, USER, ctx)
        and satisfies(request.resource, rule.resource_expr, RESOURCE, ctx)
    )
