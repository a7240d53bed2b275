"""Similarity and consistency predicates between rules and decision examples.

Two rules are similar when their user scopes, resource scopes, and operation
sets all overlap; an example is similar to a rule when its entities or
expressions fall inside the rule's scope and its operation belongs to the
rule.  Consistency adds "same decision" on top of similarity, so an
inconsistent similar pair is exactly a conflict.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import (
    DecisionExample,
    DomainContext,
    RESOURCE,
    Rule,
    USER,
    expr_overlaps,
    expr_subset,
    satisfies,
)

# rule_similar modes: "overlap" treats any non-empty mutual region as similar,
# "subset" requires expression containment in at least one direction per side.
OVERLAP = "overlap"
SUBSET = "subset"
SIMILARITY_MODES = (OVERLAP, SUBSET)


@dataclass(frozen=True)
class ConflictGroup:
    """Partition of candidates similar to a pivot rule, by decision agreement."""

    pivot: Rule
    similar_consistent: tuple
    similar_inconsistent: tuple


def example_similar(example: DecisionExample, rule: Rule, ctx: DomainContext) -> bool:
    """True iff the example falls inside the rule's user/resource/op scope."""
    if example.op not in rule.ops:
        return False
    if not (
        satisfies(example.user, rule.user_expr, USER, ctx)
        or expr_subset(example.user_expr, rule.user_expr)
    ):
        return False
    return satisfies(example.resource, rule.resource_expr, RESOURCE, ctx) or expr_subset(
        example.resource_expr, rule.resource_expr
    )


def example_consistent(example: DecisionExample, rule: Rule, ctx: DomainContext) -> bool:
    """Similar and carrying the same decision."""
    return example_similar(example, rule, ctx) and example.decision == rule.decision


def rule_similar(
    a: Rule,
    b: Rule,
    ctx: DomainContext | None = None,
    mode: str = OVERLAP,
) -> bool:
    """True iff the two rules' scopes meet on every dimension.

    Overlap mode (the default) asks for a non-empty mutual region per
    dimension, which is exactly the condition under which adaptation can
    produce a mutual rule.  Subset mode is stricter: the user and resource
    expressions must be contained one way or the other.
    """
    if mode not in SIMILARITY_MODES:
        raise ValueError(f"mode must be one of {SIMILARITY_MODES}, got {mode!r}")
    if not a.ops & b.ops:
        return False
    if mode == SUBSET:
        user_ok = expr_subset(a.user_expr, b.user_expr) or expr_subset(b.user_expr, a.user_expr)
        res_ok = expr_subset(a.resource_expr, b.resource_expr) or expr_subset(
            b.resource_expr, a.resource_expr
        )
        return user_ok and res_ok
    return expr_overlaps(a.user_expr, b.user_expr) and expr_overlaps(
        a.resource_expr, b.resource_expr
    )


def rule_consistent(
    a: Rule,
    b: Rule,
    ctx: DomainContext | None = None,
    mode: str = OVERLAP,
) -> bool:
    """Similar and carrying the same decision.

    Non-similar rules are NOT consistent under this predicate; callers must
    treat "not similar" as "no conflict" rather than as agreement.
    """
    return rule_similar(a, b, ctx, mode) and a.decision == b.decision


def find_conflicts(
    pivot: Rule,
    candidates: Iterable,
    ctx: DomainContext,
    mode: str = OVERLAP,
) -> ConflictGroup:
    """Partition rules or examples similar to ``pivot`` by decision agreement.

    Non-similar candidates are excluded entirely.  Candidate order is
    preserved inside each partition.
    """
    consistent = []
    inconsistent = []
    for candidate in candidates:
        if isinstance(candidate, DecisionExample):
            similar = example_similar(candidate, pivot, ctx)
        else:
            similar = rule_similar(pivot, candidate, ctx, mode)
        if not similar:
            continue
        if candidate.decision == pivot.decision:
            consistent.append(candidate)
        else:
            inconsistent.append(candidate)
    return ConflictGroup(pivot, tuple(consistent), tuple(inconsistent))


def inconsistent_pairs(
    rules: Sequence[Rule],
    ctx: DomainContext | None = None,
    mode: str = OVERLAP,
) -> list[tuple[Rule, Rule]]:
    """All similar-but-inconsistent pairs in ``rules``, in stable scan order."""
    pairs = []
    for i, a in enumerate(rules):
        for b in rules[i + 1 :]:
            if a.decision != b.decision and rule_similar(a, b, ctx, mode):
                pairs.append((a, b))
    return pairs
