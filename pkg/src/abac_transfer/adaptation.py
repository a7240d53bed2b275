"""Conflict resolution between inconsistent rules.

A conflicting pair is rewritten into (a) one rule over the mutual region,
whose decision is chosen by counting consistent log examples (ties fall to
deny), and (b) residual rules that keep each original decision on the parts
of its scope the other rule does not touch.  Group adaptation subtracts all
mutual regions from the pivot and re-runs pairwise adaptation until the
output is conflict-free.

Everything is pure; group adaptations over disjoint pivots can run in
parallel, while the fixed-point loop inside one group is sequential.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import AdaptationError, ConvergenceError
from .matching import OVERLAP, rule_similar
from .model import (
    AttributeExpression,
    DecisionExample,
    DENY,
    DomainContext,
    ORIGIN_ADAPTED,
    PERMIT,
    Provenance,
    RESOURCE,
    Rule,
    USER,
    expr_difference,
    expr_intersect,
    expr_subset,
    satisfies,
)

# Fixed-point passes allowed before giving up; spec'd diagnostic limit.
MAX_RESOLUTION_PASSES = 100


@dataclass
class AdaptationStats:
    """Counters accumulated across adaptation calls (optional, mutable)."""

    dropped_empty: int = 0


@dataclass(frozen=True)
class PredicateSplit:
    """Mutual and per-side non-mutual predicates of a rule pair.

    Residue fields hold the (possibly several) disjoint expressions left of
    one rule's scope after removing the other's; ops residues are plain set
    differences.
    """

    mutual_user: AttributeExpression
    mutual_resource: AttributeExpression
    mutual_ops: frozenset
    user_residue_left: tuple[AttributeExpression, ...]
    user_residue_right: tuple[AttributeExpression, ...]
    resource_residue_left: tuple[AttributeExpression, ...]
    resource_residue_right: tuple[AttributeExpression, ...]
    ops_residue_left: frozenset
    ops_residue_right: frozenset


def split_predicates(left: Rule, right: Rule, ctx: DomainContext) -> PredicateSplit:
    """Compute mutual intersections and per-side differences of a rule pair.

    Raises AdaptationError when the pair has no mutual region on some
    dimension; callers should gate on overlap-mode similarity first.
    """
    mutual_user = expr_intersect(left.user_expr, right.user_expr)
    mutual_resource = expr_intersect(left.resource_expr, right.resource_expr)
    mutual_ops = left.ops & right.ops
    if mutual_user.is_empty or mutual_resource.is_empty or not mutual_ops:
        raise AdaptationError("rule pair has no mutual region; nothing to split")
    return PredicateSplit(
        mutual_user=mutual_user,
        mutual_resource=mutual_resource,
        mutual_ops=frozenset(mutual_ops),
        user_residue_left=tuple(expr_difference(left.user_expr, right.user_expr, USER, ctx)),
        user_residue_right=tuple(expr_difference(right.user_expr, left.user_expr, USER, ctx)),
        resource_residue_left=tuple(
            expr_difference(left.resource_expr, right.resource_expr, RESOURCE, ctx)
        ),
        resource_residue_right=tuple(
            expr_difference(right.resource_expr, left.resource_expr, RESOURCE, ctx)
        ),
        ops_residue_left=frozenset(left.ops - right.ops),
        ops_residue_right=frozenset(right.ops - left.ops),
    )


def choose_paradigm(
    examples: Sequence[DecisionExample],
    user_expr: AttributeExpression,
    resource_expr: AttributeExpression,
    ops: frozenset,
    ctx: DomainContext,
) -> str:
    """Pick permit or deny for a contested region by counting log support.

    Returns permit only when strictly more examples inside the region carry
    permit than deny; the tie (including an empty log) falls to deny, the
    fail-safe default.
    """
    permits = 0
    denies = 0
    for example in examples:
        if example.op not in ops:
            continue
        if not (
            satisfies(example.user, user_expr, USER, ctx)
            or expr_subset(example.user_expr, user_expr)
        ):
            continue
        if not (
            satisfies(example.resource, resource_expr, RESOURCE, ctx)
            or expr_subset(example.resource_expr, resource_expr)
        ):
            continue
        if example.decision == PERMIT:
            permits += 1
        else:
            denies += 1
    return PERMIT if permits > denies else DENY


def _adapted(rule_args, parents) -> Rule:
    user_expr, resource_expr, ops, decision = rule_args
    prov = Provenance(ORIGIN_ADAPTED, tuple(p.fingerprint() for p in parents))
    return Rule(user_expr, resource_expr, frozenset(ops), decision, provenance=prov)


def dedup_rules(rules) -> list[Rule]:
    """Drop structurally identical rules, keeping first occurrences in order."""
    seen = set()
    out = []
    for rule in rules:
        if rule not in seen:
            seen.add(rule)
            out.append(rule)
    return out


def adapt_two_rules(
    examples: Sequence[DecisionExample],
    left: Rule,
    right: Rule,
    ctx: DomainContext,
    stats: AdaptationStats | None = None,
) -> list[Rule]:
    """Resolve one inconsistent pair into a mutual rule plus residuals.

    The mutual rule covers the intersection of the two scopes and takes the
    paradigm decision; user-, resource-, and operation-based residuals keep
    each original decision with the other dimensions unchanged.  Residuals
    whose differenced dimension comes back empty are dropped.  With
    single-attribute expressions this yields at most seven rules.
    """
    if left.decision == right.decision or not rule_similar(left, right, ctx, OVERLAP):
        raise AdaptationError("adapt_two_rules requires a similar pair with differing decisions")
    split = split_predicates(left, right, ctx)
    decision = choose_paradigm(examples, split.mutual_user, split.mutual_resource, split.mutual_ops, ctx)
    parents = (left, right)
    out = [_adapted((split.mutual_user, split.mutual_resource, split.mutual_ops, decision), parents)]
    for piece in split.user_residue_left:
        out.append(_adapted((piece, left.resource_expr, left.ops, left.decision), parents))
    for piece in split.user_residue_right:
        out.append(_adapted((piece, right.resource_expr, right.ops, right.decision), parents))
    for piece in split.resource_residue_left:
        out.append(_adapted((left.user_expr, piece, left.ops, left.decision), parents))
    for piece in split.resource_residue_right:
        out.append(_adapted((right.user_expr, piece, right.ops, right.decision), parents))
    if split.ops_residue_left:
        out.append(_adapted((left.user_expr, left.resource_expr, split.ops_residue_left, left.decision), parents))
    if split.ops_residue_right:
        out.append(_adapted((right.user_expr, right.resource_expr, split.ops_residue_right, right.decision), parents))
    if stats is not None:
        for residue in (
            split.user_residue_left,
            split.user_residue_right,
            split.resource_residue_left,
            split.resource_residue_right,
        ):
            if not residue:
                stats.dropped_empty += 1
        if not split.ops_residue_left:
            stats.dropped_empty += 1
        if not split.ops_residue_right:
            stats.dropped_empty += 1
    return dedup_rules(out)


def _subtract_box(
    rule: Rule,
    cover_user: AttributeExpression,
    cover_resource: AttributeExpression,
    cover_ops: frozenset,
    ctx: DomainContext,
    parents,
) -> list[Rule]:
    """Remove one (user, resource, ops) box from a rule's request space.

    Emits disjoint residual rules carrying the rule's own decision: the user
    slices outside the box, then (with users pinned to the overlap) the
    resource slices, then (with both pinned) the leftover operations.
    """
    mutual_user = expr_intersect(rule.user_expr, cover_user)
    mutual_resource = expr_intersect(rule.resource_expr, cover_resource)
    mutual_ops = rule.ops & cover_ops
    if mutual_user.is_empty or mutual_resource.is_empty or not mutual_ops:
        return [rule]
    out = []
    for piece in expr_difference(rule.user_expr, cover_user, USER, ctx):
        out.append(_adapted((piece, rule.resource_expr, rule.ops, rule.decision), parents))
    for piece in expr_difference(rule.resource_expr, cover_resource, RESOURCE, ctx):
        out.append(_adapted((mutual_user, piece, rule.ops, rule.decision), parents))
    leftover_ops = rule.ops - cover_ops
    if leftover_ops:
        out.append(_adapted((mutual_user, mutual_resource, leftover_ops, rule.decision), parents))
    return out


def subtract_rule(
    rule: Rule,
    covers: Sequence[Rule],
    ctx: DomainContext,
    stats: AdaptationStats | None = None,
) -> list[Rule]:
    """Residual rules covering ``rule``'s request space minus all of ``covers``.

    Every residual keeps the original decision.  An empty ``covers`` returns
    the rule unchanged; the result is empty when the rule is fully covered.
    """
    if not covers:
        return [rule]
    working = [rule]
    for cover in covers:
        next_working = []
        for candidate in working:
            next_working.extend(
                _subtract_box(
                    candidate,
                    cover.user_expr,
                    cover.resource_expr,
                    cover.ops,
                    ctx,
                    (rule, cover),
                )
            )
        working = next_working
        if not working:
            break
    if stats is not None and not working:
        stats.dropped_empty += 1
    return dedup_rules(working)


def adapt_group(
    examples: Sequence[DecisionExample],
    pivot: Rule,
    conflicts: Sequence[Rule],
    ctx: DomainContext,
    stats: AdaptationStats | None = None,
    max_passes: int = MAX_RESOLUTION_PASSES,
) -> list[Rule]:
    """Resolve a pivot rule against a whole group of conflicting rules.

    Subtracts every mutual region from the pivot, subtracts each member's
    own mutual region from that member, decides each mutual region by
    paradigm counting, then re-adapts the combined output until no
    similar-inconsistent pair remains.
    """
    for rule in conflicts:
        if rule.decision == pivot.decision or not rule_similar(pivot, rule, ctx, OVERLAP):
            raise AdaptationError(
                "adapt_group requires every group member to be similar to the pivot "
                "with a differing decision"
            )
    regions = []
    for rule in conflicts:
        regions.append(
            (
                expr_intersect(pivot.user_expr, rule.user_expr),
                expr_intersect(pivot.resource_expr, rule.resource_expr),
                pivot.ops & rule.ops,
                rule,
            )
        )
    out: list[Rule] = []
    # Pivot minus every mutual region.
    working = [pivot]
    for user_expr, resource_expr, ops, member in regions:
        next_working = []
        for candidate in working:
            next_working.extend(
                _subtract_box(candidate, user_expr, resource_expr, ops, ctx, (pivot, member))
            )
        working = next_working
    if stats is not None and not working:
        stats.dropped_empty += 1
    out.extend(working)
    # Each member minus its own mutual region with the pivot.
    for user_expr, resource_expr, ops, member in regions:
        residuals = _subtract_box(member, user_expr, resource_expr, ops, ctx, (member, pivot))
        if stats is not None and not residuals:
            stats.dropped_empty += 1
        out.extend(residuals)
    # One paradigm-decided rule per mutual region.
    for user_expr, resource_expr, ops, member in regions:
        decision = choose_paradigm(examples, user_expr, resource_expr, ops, ctx)
        out.append(_adapted((user_expr, resource_expr, ops, decision), (pivot, member)))
    return resolve_conflicts(examples, out, ctx, stats=stats, max_passes=max_passes)


def resolve_conflicts(
    examples: Sequence[DecisionExample],
    rules: Sequence[Rule],
    ctx: DomainContext,
    stats: AdaptationStats | None = None,
    max_passes: int = MAX_RESOLUTION_PASSES,
) -> list[Rule]:
    """Re-adapt a rule set until no similar-inconsistent pair remains.

    Each pass resolves a maximal set of disjoint conflicting pairs in stable
    scan order, replacing both members with their pairwise adaptation.
    Raises ConvergenceError after ``max_passes`` passes, rather than
    silently truncating.
    """
    working = dedup_rules(rules)
    for _ in range(max_passes):
        consumed: set[int] = set()
        replacements: list[Rule] = []
        for i in range(len(working)):
            if i in consumed:
                continue
            for j in range(i + 1, len(working)):
                if j in consumed:
                    continue
                a, b = working[i], working[j]
                if a.decision != b.decision and rule_similar(a, b, ctx, OVERLAP):
                    consumed.update((i, j))
                    replacements.extend(adapt_two_rules(examples, a, b, ctx, stats=stats))
                    break
        if not consumed:
            return working
        survivors = [rule for k, rule in enumerate(working) if k not in consumed]
        working = dedup_rules(survivors + replacements)
    raise ConvergenceError(f"conflict resolution did not converge within {max_passes} passes")
