import json
import random

import numpy as np
import pytest
from sklearn.metrics import f1_score, precision_recall_fscore_support

from hatepipe.classify import Prediction
from hatepipe.corpus import SCHEME_A, SCHEME_B, Dataset, Instance
from hatepipe.errors import CoverageError, UnknownFormat, UnlabeledGold
from hatepipe.evaluate import (
    EvalReport,
    confusion_matrix,
    render_report,
    score,
)


def gold_and_preds(scheme, pairs, split="eval"):
    """pairs: list of (gold, predicted)."""
    instances = [
        Instance(id=f"i{k}", text="t", label=g, split=split)
        for k, (g, _) in enumerate(pairs)
    ]
    preds = [
        Prediction(instance_id=f"i{k}", label=p, model_name="m")
        for k, (_, p) in enumerate(pairs)
    ]
    return Dataset(scheme=scheme, instances=instances), preds


class TestScore:
    def test_perfect_predictions(self):
        gold, preds = gold_and_preds(SCHEME_A, [(0, 0), (1, 1), (0, 0), (1, 1)])
        report = score(preds, gold, split="eval")
        assert report.macro_f1 == 1.0
        assert report.weighted_f1 == 1.0
        assert report.confusion == [[2, 0], [0, 2]]

    def test_constant_hate_on_balanced_set(self):
        # 5 HATE / 5 NO-HATE, everything predicted HATE:
        # HATE P=0.5 R=1 F1=2/3; NO-HATE F1=0; macro = 1/3
        pairs = [(1, 1)] * 5 + [(0, 1)] * 5
        gold, preds = gold_and_preds(SCHEME_A, pairs)
        report = score(preds, gold, split="eval")
        assert report.per_class["HATE"].precision == pytest.approx(0.5)
        assert report.per_class["HATE"].recall == pytest.approx(1.0)
        assert report.per_class["HATE"].f1 == pytest.approx(2 / 3)
        assert report.per_class["NO-HATE"].f1 == 0.0
        assert report.macro_f1 == pytest.approx(1 / 3)
        assert "NO-HATE" in report.zero_division_classes

    def test_matches_sklearn_on_random_sets(self):
        rng = random.Random(99)
        for _ in range(50):
            k = rng.choice([2, 3])
            scheme = SCHEME_A if k == 2 else SCHEME_B
            n = rng.randint(1, 200)
            pairs = [(rng.randrange(k), rng.randrange(k)) for _ in range(n)]
            gold, preds = gold_and_preds(scheme, pairs)
            report = score(preds, gold, split="eval")
            y_true = [g for g, _ in pairs]
            y_pred = [p for _, p in pairs]
            labels = list(range(k))
            assert report.macro_f1 == pytest.approx(
                f1_score(y_true, y_pred, labels=labels, average="macro",
                         zero_division=0),
                abs=1e-9,
            )
            assert report.weighted_f1 == pytest.approx(
                f1_score(y_true, y_pred, labels=labels, average="weighted",
                         zero_division=0),
                abs=1e-9,
            )
            precision, recall, f1, support = precision_recall_fscore_support(
                y_true, y_pred, labels=labels, zero_division=0
            )
            for c in labels:
                m = report.per_class[scheme.name_of(c)]
                assert m.precision == pytest.approx(precision[c], abs=1e-9)
                assert m.recall == pytest.approx(recall[c], abs=1e-9)
                assert m.f1 == pytest.approx(f1[c], abs=1e-9)
                assert m.support == support[c]

    def test_coverage_error(self):
        gold, preds = gold_and_preds(SCHEME_A, [(0, 0), (1, 1)])
        with pytest.raises(CoverageError):
            score(preds[:1], gold, split="eval")

    def test_unlabeled_gold(self):
        gold = Dataset(
            scheme=SCHEME_A,
            instances=[Instance(id="i0", text="t", label=None, split="eval")],
        )
        preds = [Prediction(instance_id="i0", label=0, model_name="m")]
        with pytest.raises(UnlabeledGold):
            score(preds, gold, split="eval")


class TestConfusionMatrix:
    def test_empty_input(self):
        gold = Dataset(scheme=SCHEME_A, instances=[])
        assert confusion_matrix([], gold) == [[0, 0], [0, 0]]

    def test_single_cell(self):
        gold, preds = gold_and_preds(SCHEME_B, [(1, 2)])
        matrix = confusion_matrix(preds, gold, split="eval")
        assert matrix[1][2] == 1
        assert sum(sum(r) for r in matrix) == 1

    def test_transpose_symmetry(self):
        rng = random.Random(7)
        pairs = [(rng.randrange(3), rng.randrange(3)) for _ in range(60)]
        gold, preds = gold_and_preds(SCHEME_B, pairs)
        matrix = confusion_matrix(preds, gold, split="eval")
        swapped_gold, swapped_preds = gold_and_preds(
            SCHEME_B, [(p, g) for g, p in pairs]
        )
        swapped = confusion_matrix(swapped_preds, swapped_gold, split="eval")
        assert np.array_equal(np.array(matrix).T, np.array(swapped))

    def test_invariants(self):
        rng = random.Random(11)
        pairs = [(rng.randrange(3), rng.randrange(3)) for _ in range(80)]
        gold, preds = gold_and_preds(SCHEME_B, pairs)
        report = score(preds, gold, split="eval")
        assert sum(sum(r) for r in report.confusion) == report.n
        for c, name in enumerate(SCHEME_B.names):
            assert sum(report.confusion[c]) == report.per_class[name].support
        diag = sum(report.confusion[i][i] for i in range(3))
        assert report.accuracy == pytest.approx(diag / report.n)


def subtask_a_result_fixtures():
    """Sub-task A result fixtures (eval/test macro-F1 pairs)."""
    rows = {
        "GPT3.5 (Zero Shot)": (None, 0.73),
        "GPT3.5 (Few Shot)": (None, 0.77),
        "GPT3.5 (FineTuned)": (0.86, 0.82),
        "BERT-base": (0.81, 0.75),
        "BERTweet-large": (0.89, 0.81),
        "XLM-R": (0.95, 0.83),
    }
    reports = {}
    for name, (ev, te) in rows.items():
        if ev is not None:
            reports[f"{name}/eval"] = _fixed_report("A", ev)
        reports[f"{name}/test"] = _fixed_report("A", te)
    return reports


def subtask_b_result_fixtures():
    rows = {
        "GPT3.5 (Zero Shot)": (None, 0.53),
        "GPT3.5 (Few Shot)": (None, 0.57),
        "GPT3.5 (FineTuned)": (0.65, 0.63),
        "BERT-base": (0.61, 0.60),
        "XLM-R": (0.63, 0.61),
        "BERTweet-large": (0.68, 0.64),
        "Ensemble": (0.69, 0.65),
        "BERT-base (Aug.)": (0.63, 0.61),
        "XLM-R (Aug.)": (0.65, 0.64),
        "BERTweet-large (Aug.)": (0.70, 0.66),
        "Ensemble (Aug.)": (0.71, 0.67),
    }
    reports = {}
    for name, (ev, te) in rows.items():
        if ev is not None:
            reports[f"{name}/eval"] = _fixed_report("B", ev)
        reports[f"{name}/test"] = _fixed_report("B", te)
    return reports


def _fixed_report(task, f1):
    k = 2 if task == "A" else 3
    return EvalReport(
        scheme_task=task,
        n=100,
        macro_f1=f1,
        weighted_f1=f1,
        per_class={},
        confusion=[[0] * k for _ in range(k)],
    )


class TestRenderReport:
    def test_singleton_marked_best(self):
        table = render_report({"only/test": _fixed_report("A", 0.5)}, "text_table")
        assert "only" in table
        assert "*" in table

    def test_subtask_a_best_row(self):
        table = render_report(subtask_a_result_fixtures(), "text_table")
        best_line = next(l for l in table.splitlines() if l.rstrip().endswith("*"))
        assert "XLM-R" in best_line
        assert "0.83" in best_line

    def test_subtask_b_best_row(self):
        table = render_report(subtask_b_result_fixtures(), "text_table")
        best_line = next(l for l in table.splitlines() if l.rstrip().endswith("*"))
        assert "Ensemble (Aug.)" in best_line
        assert "0.67" in best_line

    def test_json_round_trip(self):
        gold, preds = gold_and_preds(SCHEME_B, [(0, 0), (1, 2), (2, 2)])
        report = score(preds, gold, split="eval")
        payload = render_report({"run/eval": report}, "json")
        parsed = EvalReport.from_dict(json.loads(payload)["run/eval"])
        assert parsed == report

    def test_plot_writes_heatmaps(self, tmp_path):
        gold, preds = gold_and_preds(SCHEME_A, [(0, 0), (1, 1)])
        report = score(preds, gold, split="eval")
        written = render_report({"run/eval": report}, "plot", tmp_path)
        assert len(written) == 1
        assert (tmp_path / "confusion_run_eval.png").exists()

    def test_unknown_format(self):
        with pytest.raises(UnknownFormat):
            render_report({"x/test": _fixed_report("A", 0.5)}, "yaml")

    def test_empty_reports_rejected(self):
        with pytest.raises(ValueError):
            render_report({}, "json")
