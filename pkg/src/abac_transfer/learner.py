"""Staged policy learner: mine, generalize, restrict, augment.

The learner is a pipeline of pure stages, each mapping (examples, rules-in)
to rules-out, so transfer strategies can interleave conflict adaptation
between stages.  Mining emits one most-specific rule per distinct example
signature; generalization drops attribute constraints that do not disturb
the observed decision distribution; restriction pins unconstrained
attributes of permit rules to supporter-observed values; augmentation
covers leftover examples with nearest-neighbour majority rules.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .adaptation import dedup_rules
from .errors import PipelineError
from .model import (
    AccessRequest,
    AttributeExpression,
    DecisionExample,
    DENY,
    DomainContext,
    ORIGIN_LOCAL,
    PERMIT,
    Provenance,
    RESOURCE,
    Rule,
    USER,
    rule_applies,
)


@dataclass(frozen=True)
class LearnerConfig:
    """Thresholds shared by the stages.

    ``generalize_stability`` is the bar a constraint drop must strictly
    exceed (1.0 therefore disables generalization); ``neighbor_count`` is
    the k used by the augmentation majority vote.
    """

    generalize_stability: float = 0.95
    neighbor_count: int = 3
    restrict_deny_rules: bool = False


@dataclass(frozen=True)
class LearnerStage:
    name: str
    apply: Callable


@dataclass(frozen=True)
class LearnerPipeline:
    stages: tuple[LearnerStage, ...]
    config: LearnerConfig = field(default_factory=LearnerConfig)

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise PipelineError("learner pipeline must have at least one stage")


def _covers(rule: Rule, example: DecisionExample, ctx: DomainContext) -> bool:
    return rule_applies(rule, AccessRequest(example.user, example.resource, example.op), ctx)


def _covered_by_any(rules, example, ctx) -> bool:
    return any(_covers(rule, example, ctx) for rule in rules)


def stage_mine(
    examples: Sequence[DecisionExample],
    rules_in: Sequence[Rule],
    ctx: DomainContext,
    config: LearnerConfig,
) -> tuple[Rule, ...]:
    """One most-specific rule per distinct (e_U, e_R, op, decision) signature.

    Incoming rules pass through unchanged ahead of the mined ones, so a
    mining stage composes with pipelines that already carry rules.
    """
    if not examples:
        raise PipelineError("stage_mine requires a non-empty example log")
    counts: dict = {}
    for example in examples:
        signature = (example.user_expr, example.resource_expr, example.op, example.decision)
        counts[signature] = counts.get(signature, 0) + 1
    mined = [
        Rule(
            user_expr,
            resource_expr,
            frozenset([op]),
            decision,
            provenance=Provenance(ORIGIN_LOCAL),
            support=count,
        )
        for (user_expr, resource_expr, op, decision), count in counts.items()
    ]
    return tuple(dedup_rules(list(rules_in) + mined))


def _decision_profile(rule: Rule, covered) -> float | None:
    """Fraction of covered examples that permit; None when nothing is covered."""
    if not covered:
        return None
    permits = sum(1 for example in covered if example.decision == PERMIT)
    return permits / len(covered)


def _drop_constraint(expr: AttributeExpression, attr: str) -> AttributeExpression:
    constraints = expr.constraints
    del constraints[attr]
    return AttributeExpression(constraints)


def stage_generalize(
    examples: Sequence[DecisionExample],
    rules_in: Sequence[Rule],
    ctx: DomainContext,
    config: LearnerConfig,
) -> tuple[Rule, ...]:
    """Drop attribute constraints that leave the covered decisions stable.

    A drop must (a) not newly cover any example carrying the opposite
    decision and (b) keep the permit fraction of the covered examples
    within ``1 - generalize_stability``; the stability bar is strict, so a
    threshold of 1.0 blocks every drop.
    """
    tau = config.generalize_stability
    out = []
    for rule in rules_in:
        current = rule
        covered = [l for l in examples if _covers(current, l, ctx)]
        covered_ids = set(id(l) for l in covered)
        profile = _decision_profile(current, covered)
        for side, expr_attr in ((USER, "user_expr"), (RESOURCE, "resource_expr")):
            for attr in getattr(current, expr_attr).attrs:
                widened_expr = _drop_constraint(getattr(current, expr_attr), attr)
                widened = replace(current, **{expr_attr: widened_expr})
                wide_covered = [l for l in examples if _covers(widened, l, ctx)]
                newly = [l for l in wide_covered if id(l) not in covered_ids]
                if any(l.decision != current.decision for l in newly):
                    continue
                wide_profile = _decision_profile(widened, wide_covered)
                if profile is not None and wide_profile is not None:
                    stability = 1.0 - abs(wide_profile - profile)
                else:
                    stability = 1.0
                if stability > tau:
                    current = widened
                    covered = wide_covered
                    covered_ids = set(id(l) for l in covered)
                    profile = _decision_profile(current, covered)
        out.append(current)
    return tuple(dedup_rules(out))


def stage_restrict(
    examples: Sequence[DecisionExample],
    rules_in: Sequence[Rule],
    ctx: DomainContext,
    config: LearnerConfig,
) -> tuple[Rule, ...]:
    """Pin unconstrained attributes of permit rules to supporter-observed values.

    A supporter is a covered example with the rule's own decision.  Deny
    rules pass through unchanged unless ``restrict_deny_rules`` is set; the
    fail-safe bias is to narrow only what grants access.
    """
    out = []
    for rule in rules_in:
        if rule.decision == DENY and not config.restrict_deny_rules:
            out.append(rule)
            continue
        supporters = [
            l for l in examples if l.decision == rule.decision and _covers(rule, l, ctx)
        ]
        if not supporters:
            out.append(rule)
            continue
        current = rule
        for side, expr_attr, entity_attr in (
            (USER, "user_expr", "user"),
            (RESOURCE, "resource_expr", "resource"),
        ):
            expr = getattr(current, expr_attr)
            for attr in sorted(ctx.attr_names(side)):
                if expr.get(attr) is not None:
                    continue
                observed = set()
                for l in supporters:
                    value = ctx.value_of(getattr(l, entity_attr), attr, side)
                    if value is not None:
                        observed.add(value)
                if observed:
                    constraints = expr.constraints
                    constraints[attr] = observed
                    expr = AttributeExpression(constraints)
            current = replace(current, **{expr_attr: expr})
        out.append(current)
    return tuple(dedup_rules(out))


def _example_affinity(a: DecisionExample, b: DecisionExample) -> int:
    """Count of attribute constraints (and the operation) two examples share."""
    score = 0
    for attr, values in a.user_expr.items():
        if b.user_expr.get(attr) == values:
            score += 1
    for attr, values in a.resource_expr.items():
        if b.resource_expr.get(attr) == values:
            score += 1
    if a.op == b.op:
        score += 1
    return score


def stage_augment(
    examples: Sequence[DecisionExample],
    rules_in: Sequence[Rule],
    ctx: DomainContext,
    config: LearnerConfig,
) -> tuple[Rule, ...]:
    """Cover every leftover example with a nearest-neighbour majority rule.

    For each example no rule applies to, the k most-similar examples
    (including itself) vote on the decision and a most-specific rule over
    the example is emitted; ties fall to deny.
    """
    out = list(rules_in)
    for index, example in enumerate(examples):
        if _covered_by_any(out, example, ctx):
            continue
        ranked = sorted(
            range(len(examples)),
            key=lambda j: (-_example_affinity(example, examples[j]), j),
        )
        top = [examples[j] for j in ranked[: max(1, config.neighbor_count)]]
        permits = sum(1 for l in top if l.decision == PERMIT)
        decision = PERMIT if permits > len(top) - permits else DENY
        out.append(
            Rule(
                example.user_expr,
                example.resource_expr,
                frozenset([example.op]),
                decision,
                provenance=Provenance(ORIGIN_LOCAL),
                support=1,
            )
        )
    return tuple(dedup_rules(out))


STANDARD_STAGES = {
    "mine": stage_mine,
    "generalize": stage_generalize,
    "restrict": stage_restrict,
    "augment": stage_augment,
}

DEFAULT_STAGE_ORDER = ("mine", "generalize", "restrict", "augment")


def default_pipeline(config: LearnerConfig | None = None) -> LearnerPipeline:
    config = config or LearnerConfig()
    stages = tuple(LearnerStage(name, STANDARD_STAGES[name]) for name in DEFAULT_STAGE_ORDER)
    return LearnerPipeline(stages, config)


def pipeline_from_dict(doc: dict) -> LearnerPipeline:
    """Build a pipeline from its JSON form: {"stages": [...], "tau_g": .., "k": ..}."""
    names = doc.get("stages", list(DEFAULT_STAGE_ORDER))
    stages = []
    for name in names:
        if name not in STANDARD_STAGES:
            raise PipelineError(
                f"unknown learner stage {name!r}; expected one of {sorted(STANDARD_STAGES)}"
            )
        stages.append(LearnerStage(name, STANDARD_STAGES[name]))
    config = LearnerConfig(
        generalize_stability=float(doc.get("tau_g", LearnerConfig.generalize_stability)),
        neighbor_count=int(doc.get("k", LearnerConfig.neighbor_count)),
        restrict_deny_rules=bool(doc.get("restrict_deny_rules", False)),
    )
    return LearnerPipeline(tuple(stages), config)


def load_pipeline_config(path) -> LearnerPipeline:
    with open(path, "r", encoding="utf-8") as handle:
        return pipeline_from_dict(json.load(handle))


def run_pipeline(
    pipeline: LearnerPipeline,
    examples: Sequence[DecisionExample],
    ctx: DomainContext,
    rules_in: Sequence[Rule] = (),
) -> tuple[Rule, ...]:
    """Fold the stages over the example log, threading the rule set through."""
    rules = tuple(rules_in)
    for stage in pipeline.stages:
        rules = tuple(stage.apply(examples, rules, ctx, pipeline.config))
    return rules
