"""Classification metrics, confusion matrices, and report rendering.

Macro-F1 is the headline metric; weighted-F1 is always computed
alongside. Zero-division convention: precision/recall/F1 are 0 when
their denominator is 0, and the affected classes are flagged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .classify import Prediction
from .corpus import Dataset, LabelScheme, SCHEME_A, SCHEME_B
from .errors import CoverageError, UnknownFormat, UnlabeledGold


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    scheme_task: str
    n: int
    macro_f1: float
    weighted_f1: float
    per_class: dict[str, ClassMetrics]
    confusion: list[list[int]]
    zero_division_classes: list[str] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        diag = sum(self.confusion[i][i] for i in range(len(self.confusion)))
        return diag / self.n if self.n else 0.0

    def to_dict(self) -> dict:
        return {
            "scheme_task": self.scheme_task,
            "n": self.n,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "per_class": {
                name: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for name, m in self.per_class.items()
            },
            "confusion": self.confusion,
            "zero_division_classes": self.zero_division_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            scheme_task=d["scheme_task"],
            n=d["n"],
            macro_f1=d["macro_f1"],
            weighted_f1=d["weighted_f1"],
            per_class={
                name: ClassMetrics(**m) for name, m in d["per_class"].items()
            },
            confusion=[list(row) for row in d["confusion"]],
            zero_division_classes=list(d.get("zero_division_classes", [])),
        )


def _scheme_for(task: str) -> LabelScheme:
    return SCHEME_A if task == "A" else SCHEME_B


def _gold_pairs(predictions: list[Prediction], gold: Dataset, split):
    gold_instances = (
        gold.split_instances(split) if split else list(gold.instances)
    )
    gold_labeled = {i.id: i for i in gold_instances if i.label is not None}
    unlabeled = [i.id for i in gold_instances if i.label is None]
    if unlabeled:
        raise UnlabeledGold(
            f"{len(unlabeled)} gold instance(s) unlabeled (first: {unlabeled[0]})"
        )
    pred_ids = {p.instance_id for p in predictions}
    if pred_ids != set(gold_labeled):
        missing = set(gold_labeled) - pred_ids
        extra = pred_ids - set(gold_labeled)
        raise CoverageError(
            f"prediction/gold id mismatch: missing={sorted(missing)[:5]} "
            f"extra={sorted(extra)[:5]}"
        )
    if len(predictions) != len(pred_ids):
        raise CoverageError("duplicate prediction ids")
    return [(gold_labeled[p.instance_id].label, p.label) for p in predictions]


def confusion_matrix(
    predictions: list[Prediction], gold: Dataset, split=None
) -> list[list[int]]:
    """cell[g][p] = count of instances with gold label g predicted as p."""
    k = len(gold.scheme.codes)
    matrix = [[0] * k for _ in range(k)]
    for g, p in _gold_pairs(predictions, gold, split):
        matrix[g][p] += 1
    return matrix


def score(predictions: list[Prediction], gold: Dataset, split=None) -> EvalReport:
    """Full evaluation report over a gold split.

    macro_f1 is the unweighted mean of per-class F1; weighted_f1 weights
    by class support. F1 = 2PR/(P+R) with 0/0 defined as 0.
    """
    scheme = gold.scheme
    matrix = confusion_matrix(predictions, gold, split)
    k = len(scheme.codes)
    n = sum(sum(row) for row in matrix)
    per_class: dict[str, ClassMetrics] = {}
    zero_div = []
    for c in range(k):
        tp = matrix[c][c]
        support = sum(matrix[c])
        pred_total = sum(matrix[g][c] for g in range(k))
        if pred_total == 0 or support == 0:
            zero_div.append(scheme.name_of(c))
        precision = tp / pred_total if pred_total else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[scheme.name_of(c)] = ClassMetrics(precision, recall, f1, support)
    metrics = list(per_class.values())
    macro_f1 = sum(m.f1 for m in metrics) / k
    weighted_f1 = (
        sum(m.f1 * m.support for m in metrics) / n if n else 0.0
    )
    return EvalReport(
        scheme_task=scheme.task_id,
        n=n,
        macro_f1=macro_f1,
        weighted_f1=weighted_f1,
        per_class=per_class,
        confusion=matrix,
        zero_division_classes=zero_div,
    )


def render_report(reports: dict[str, EvalReport], fmt: str, out_dir=None):
    """Render reports as a text table, JSON, or confusion heatmap images.

    text_table mirrors the two-column Eval/Test layout: rows are run
    names, best test score is marked with '*'. Runs named "<name>/eval"
    and "<name>/test" are paired into one row; unpaired runs get a
    single-column row.
    """
    if not reports:
        raise ValueError("no reports to render")
    if fmt == "json":
        payload = json.dumps(
            {name: r.to_dict() for name, r in reports.items()},
            sort_keys=True,
            indent=2,
        )
        if out_dir:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "reports.json").write_text(payload, encoding="utf-8")
        return payload
    if fmt == "text_table":
        return _render_text_table(reports, out_dir)
    if fmt == "plot":
        return _render_heatmaps(reports, out_dir)
    raise UnknownFormat(f"unknown report format {fmt!r}")


def _pair_rows(reports: dict[str, EvalReport]):
    rows: dict[str, dict] = {}
    for name, report in reports.items():
        if name.endswith("/eval") or name.endswith("/test"):
            base, _, phase = name.rpartition("/")
        else:
            base, phase = name, "test"
        rows.setdefault(base, {})[phase] = report
    return rows


def _render_text_table(reports, out_dir):
    rows = _pair_rows(reports)
    best_name, best_f1 = None, -1.0
    for base, phases in rows.items():
        test = phases.get("test")
        if test is not None and test.macro_f1 > best_f1:
            best_name, best_f1 = base, test.macro_f1
    width = max(len(b) for b in rows) + 2
    lines = [f"{'Model':<{width}} {'Eval F1':>8} {'Test F1':>8}"]
    lines.append("-" * (width + 18))
    for base, phases in rows.items():
        ev = phases.get("eval")
        te = phases.get("test")
        ev_s = f"{ev.macro_f1:.2f}" if ev else "--"
        te_s = f"{te.macro_f1:.2f}" if te else "--"
        marker = " *" if base == best_name else ""
        lines.append(f"{base:<{width}} {ev_s:>8} {te_s:>8}{marker}")
    lines.append("* best test F1")
    table = "\n".join(lines)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.txt").write_text(table + "\n", encoding="utf-8")
    return table


def _render_heatmaps(reports, out_dir):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir) if out_dir else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, report in reports.items():
        scheme = _scheme_for(report.scheme_task)
        fig, ax = plt.subplots(figsize=(4, 4))
        ax.imshow(report.confusion, cmap="Blues")
        ax.set_xticks(range(len(scheme.names)), scheme.names, rotation=45)
        ax.set_yticks(range(len(scheme.names)), scheme.names)
        ax.set_xlabel("Predicted")
        ax.set_ylabel("Gold")
        ax.set_title(name)
        for g, row in enumerate(report.confusion):
            for p, v in enumerate(row):
                ax.text(p, g, str(v), ha="center", va="center")
        fig.tight_layout()
        path = out / f"confusion_{name.replace('/', '_')}.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(str(path))
    return written
