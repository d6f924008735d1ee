"""Fusing per-model predictions by majority or weighted voting.

Majority voting treats every member equally (two of three models
agreeing decides the label); the weighted rule counts each vote by its
member's weight, typically the eval macro-F1. Ties are broken either by
member priority (earliest-listed member among the tied labels) or by
lowest label code.
"""

from __future__ import annotations

from dataclasses import dataclass

from .classify import Prediction
from .errors import CoverageError, MissingReport, SpecError
from .evaluate import EvalReport


@dataclass(frozen=True)
class EnsembleSpec:
    members: tuple[tuple[str, float], ...]
    rule: str = "majority"
    tie_break: str = "member_priority"

    def __post_init__(self):
        if len(self.members) < 2:
            raise SpecError("ensemble needs at least 2 members")
        names = [name for name, _ in self.members]
        if len(set(names)) != len(names):
            raise SpecError(f"duplicate member names: {names}")
        if self.rule not in ("majority", "weighted"):
            raise SpecError(f"unknown rule {self.rule!r}")
        if self.tie_break not in ("member_priority", "lowest_code"):
            raise SpecError(f"unknown tie_break {self.tie_break!r}")
        if any(w <= 0 for _, w in self.members):
            raise SpecError("member weights must be positive")

    @property
    def member_names(self) -> list[str]:
        return [name for name, _ in self.members]


def fuse(
    per_model: dict[str, list[Prediction]], spec: EnsembleSpec
) -> list[Prediction]:
    """Per instance: score(label) = sum of weights voting it; argmax wins.

    Output order follows the first member's prediction list; fused
    predictions carry model_name "ensemble".
    """
    for name in spec.member_names:
        if name not in per_model:
            raise CoverageError(f"no predictions for member {name!r}")
    by_member = {
        name: {p.instance_id: p for p in per_model[name]}
        for name in spec.member_names
    }
    id_sets = {name: set(preds) for name, preds in by_member.items()}
    first = spec.member_names[0]
    for name, ids in id_sets.items():
        if ids != id_sets[first]:
            raise CoverageError(
                f"member {name!r} covers a different instance set than {first!r}"
            )

    weights = {
        name: (1.0 if spec.rule == "majority" else weight)
        for name, weight in spec.members
    }
    fused = []
    for pred in per_model[first]:
        inst_id = pred.instance_id
        votes = {name: by_member[name][inst_id].label for name in spec.member_names}
        scores: dict[int, float] = {}
        for name, label in votes.items():
            scores[label] = scores.get(label, 0.0) + weights[name]
        best = max(scores.values())
        # relative tolerance so summation order / weight scaling can't
        # split or fabricate a tie
        tied = sorted(
            label for label, s in scores.items() if best - s <= 1e-9 * best
        )
        if len(tied) == 1 or spec.tie_break == "lowest_code":
            label = tied[0]
        else:
            label = next(
                votes[name] for name in spec.member_names if votes[name] in tied
            )
        fused.append(
            Prediction(instance_id=inst_id, label=label, model_name="ensemble")
        )
    return fused


def derive_weights(
    eval_reports: dict[str, EvalReport], member_names: list[str]
) -> tuple[tuple[str, float], ...]:
    """Member weight = eval macro-F1; members keep their given order."""
    members = []
    for name in member_names:
        if name not in eval_reports:
            raise MissingReport(f"no eval report for member {name!r}")
        f1 = eval_reports[name].macro_f1
        if f1 <= 0:
            raise MissingReport(
                f"member {name!r} has non-positive eval F1 ({f1}); cannot weight"
            )
        members.append((name, f1))
    return tuple(members)
