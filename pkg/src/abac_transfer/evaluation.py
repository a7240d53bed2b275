"""Policy decision point and precision/recall/F1 computation.

Requests are replayed against a rule set under a selectable combining
algorithm; metrics treat permit as the positive class, and requests no rule
covers are denied by default (configurable).  Replays are independent per
request, so evaluation is a pure, order-insensitive fold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .model import (
    AccessRequest,
    DecisionExample,
    DENY,
    DomainContext,
    PERMIT,
    Rule,
    rule_applies,
)

NOT_APPLICABLE = "not_applicable"

DENY_OVERRIDES = "deny_overrides"
PERMIT_OVERRIDES = "permit_overrides"
FIRST_APPLICABLE = "first_applicable"
COMBINING_ALGORITHMS = (DENY_OVERRIDES, PERMIT_OVERRIDES, FIRST_APPLICABLE)

NA_DENY = "deny"
NA_EXCLUDE = "exclude"
NA_POLICIES = (NA_DENY, NA_EXCLUDE)


def decide(
    rules: Sequence[Rule],
    request: AccessRequest,
    ctx: DomainContext,
    combining: str = DENY_OVERRIDES,
) -> str:
    """Evaluate one request: permit, deny, or not_applicable.

    deny_overrides and permit_overrides are order-insensitive;
    first_applicable honors the given rule order.
    """
    if combining not in COMBINING_ALGORITHMS:
        raise ValueError(f"combining must be one of {COMBINING_ALGORITHMS}, got {combining!r}")
    applicable = [rule for rule in rules if rule_applies(rule, request, ctx)]
    if not applicable:
        return NOT_APPLICABLE
    if combining == FIRST_APPLICABLE:
        return applicable[0].decision
    if combining == DENY_OVERRIDES:
        return DENY if any(rule.decision == DENY for rule in applicable) else PERMIT
    return PERMIT if any(rule.decision == PERMIT for rule in applicable) else DENY


@dataclass(frozen=True)
class MetricsReport:
    """Confusion counts plus derived ratios for one replay run.

    ``undefined`` names the ratios that hit a zero denominator and were
    reported as 0 by convention; ``excluded`` counts uncovered requests
    that were left out under the exclude policy.
    """

    tp: int
    fp: int
    fn: int
    tn: int
    coverage: float
    precision: float
    recall: float
    f1: float
    undefined: tuple[str, ...] = ()
    excluded: int = 0

    def to_json_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "coverage": self.coverage,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "undefined": sorted(self.undefined),
            "excluded": self.excluded,
        }

    def format_table(self) -> str:
        rows = [
            ("tp", str(self.tp)),
            ("fp", str(self.fp)),
            ("fn", str(self.fn)),
            ("tn", str(self.tn)),
            ("coverage", f"{self.coverage:.4f}"),
            ("precision", f"{self.precision:.4f}"),
            ("recall", f"{self.recall:.4f}"),
            ("f1", f"{self.f1:.4f}"),
        ]
        width = max(len(name) for name, _ in rows)
        lines = [f"{name.ljust(width)}  {value}" for name, value in rows]
        if self.undefined:
            lines.append(f"{'undefined'.ljust(width)}  {','.join(sorted(self.undefined))}")
        if self.excluded:
            lines.append(f"{'excluded'.ljust(width)}  {self.excluded}")
        return "\n".join(lines)


def _ratio(numerator: int, denominator: int, name: str, undefined: list) -> float:
    if denominator == 0:
        undefined.append(name)
        return 0.0
    return numerator / denominator


def evaluate(
    rules: Sequence[Rule],
    test_examples: Sequence[DecisionExample],
    ctx: DomainContext,
    na_policy: str = NA_DENY,
    combining: str = DENY_OVERRIDES,
) -> MetricsReport:
    """Replay a test log against a rule set and score it, permit-positive.

    With the default policy, uncovered requests count as deny predictions
    (fail-safe); under ``exclude`` they are dropped from the confusion
    matrix but still reflected in coverage.
    """
    if not test_examples:
        raise ValueError("evaluate requires a non-empty test log")
    if na_policy not in NA_POLICIES:
        raise ValueError(f"na_policy must be one of {NA_POLICIES}, got {na_policy!r}")
    tp = fp = fn = tn = matched = excluded = 0
    for example in test_examples:
        request = AccessRequest(example.user, example.resource, example.op)
        predicted = decide(rules, request, ctx, combining)
        if predicted == NOT_APPLICABLE:
            if na_policy == NA_EXCLUDE:
                excluded += 1
                continue
            predicted = DENY
        else:
            matched += 1
        if predicted == PERMIT and example.decision == PERMIT:
            tp += 1
        elif predicted == PERMIT:
            fp += 1
        elif example.decision == PERMIT:
            fn += 1
        else:
            tn += 1
    undefined: list[str] = []
    precision = _ratio(tp, tp + fp, "precision", undefined)
    recall = _ratio(tp, tp + fn, "recall", undefined)
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        undefined.append("f1")
        f1 = 0.0
    return MetricsReport(
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        coverage=matched / len(test_examples),
        precision=precision,
        recall=recall,
        f1=f1,
        undefined=tuple(undefined),
        excluded=excluded,
    )


def request_outcomes(
    rules: Sequence[Rule],
    test_examples: Sequence[DecisionExample],
    ctx: DomainContext,
    combining: str = DENY_OVERRIDES,
) -> list[dict]:
    """Per-request replay rows (for the debugging CSV)."""
    rows = []
    for example in test_examples:
        request = AccessRequest(example.user, example.resource, example.op)
        predicted = decide(rules, request, ctx, combining)
        rows.append(
            {
                "user": example.user,
                "resource": example.resource,
                "op": example.op,
                "actual": example.decision,
                "predicted": predicted,
            }
        )
    return rows
