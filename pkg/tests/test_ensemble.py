import itertools
import random

import pytest
from hypothesis import given, strategies as st

from hatepipe.classify import Prediction
from hatepipe.ensemble import EnsembleSpec, derive_weights, fuse
from hatepipe.errors import CoverageError, MissingReport, SpecError
from hatepipe.evaluate import EvalReport


def oracle_fuse(votes, weights, tie_break):
    """Brute-force mode-with-tie-break, independent of the implementation.

    votes: per-member labels in member order; weights aligned with votes.
    """
    totals = {}
    for label, weight in zip(votes, weights):
        totals[label] = totals.get(label, 0.0) + weight
    best = max(totals.values())
    # same relative tie tolerance as the implementation's contract
    tied = sorted(label for label, total in totals.items() if best - total <= 1e-9 * best)
    if tie_break == "lowest_code":
        return tied[0]
    for label in votes:  # earliest-listed member among tied labels
        if label in tied:
            return label
    raise AssertionError("unreachable")


def preds_for(votes, names, instance_id="x"):
    return {
        name: [Prediction(instance_id=instance_id, label=label, model_name=name)]
        for name, label in zip(names, votes)
    }


NAMES3 = ["m1", "m2", "m3"]
MAJORITY3 = EnsembleSpec(members=(("m1", 1.0), ("m2", 1.0), ("m3", 1.0)))


class TestEnsembleSpec:
    def test_needs_two_members(self):
        with pytest.raises(SpecError):
            EnsembleSpec(members=(("only", 1.0),))

    def test_distinct_names(self):
        with pytest.raises(SpecError):
            EnsembleSpec(members=(("m", 1.0), ("m", 2.0)))

    def test_positive_weights(self):
        with pytest.raises(SpecError):
            EnsembleSpec(members=(("a", 1.0), ("b", 0.0)))

    def test_unknown_rule(self):
        with pytest.raises(SpecError):
            EnsembleSpec(members=(("a", 1.0), ("b", 1.0)), rule="stacking")


class TestFuse:
    def test_two_of_three_majority(self):
        per_model = preds_for([1, 1, 0], NAMES3)
        assert fuse(per_model, MAJORITY3)[0].label == 1

    def test_three_way_tie_member_priority(self):
        per_model = preds_for([0, 1, 2], NAMES3)
        assert fuse(per_model, MAJORITY3)[0].label == 0

    def test_three_way_tie_lowest_code(self):
        spec = EnsembleSpec(
            members=(("m1", 1.0), ("m2", 1.0), ("m3", 1.0)), tie_break="lowest_code"
        )
        per_model = preds_for([2, 1, 0], NAMES3)
        assert fuse(per_model, spec)[0].label == 0

    def test_output_model_name(self):
        fused = fuse(preds_for([1, 1, 1], NAMES3), MAJORITY3)
        assert fused[0].model_name == "ensemble"

    def test_all_27_combinations_match_oracle(self):
        for tie_break in ("member_priority", "lowest_code"):
            spec = EnsembleSpec(
                members=(("m1", 1.0), ("m2", 1.0), ("m3", 1.0)), tie_break=tie_break
            )
            for votes in itertools.product(range(3), repeat=3):
                got = fuse(preds_for(list(votes), NAMES3), spec)[0].label
                assert got == oracle_fuse(list(votes), [1.0] * 3, tie_break), votes

    def test_majority_ignores_weights(self):
        spec = EnsembleSpec(
            members=(("m1", 100.0), ("m2", 1.0), ("m3", 1.0)), rule="majority"
        )
        per_model = preds_for([0, 1, 1], NAMES3)
        assert fuse(per_model, spec)[0].label == 1

    def test_weighted_rule_uses_weights(self):
        spec = EnsembleSpec(
            members=(("m1", 3.0), ("m2", 1.0), ("m3", 1.0)), rule="weighted"
        )
        per_model = preds_for([0, 1, 1], NAMES3)
        assert fuse(per_model, spec)[0].label == 0

    def test_coverage_error_missing_member(self):
        per_model = preds_for([1, 1], ["m1", "m2"])
        with pytest.raises(CoverageError):
            fuse(per_model, MAJORITY3)

    def test_coverage_error_mismatched_ids(self):
        per_model = preds_for([1, 1, 1], NAMES3)
        per_model["m3"] = [Prediction(instance_id="y", label=1, model_name="m3")]
        with pytest.raises(CoverageError):
            fuse(per_model, MAJORITY3)

    def test_multi_instance_order_follows_first_member(self):
        per_model = {
            name: [
                Prediction(instance_id=f"i{k}", label=(k + j) % 2, model_name=name)
                for k in range(5)
            ]
            for j, name in enumerate(NAMES3)
        }
        fused = fuse(per_model, MAJORITY3)
        assert [p.instance_id for p in fused] == [f"i{k}" for k in range(5)]


class TestFuseProperties:
    @given(
        st.lists(st.integers(0, 2), min_size=2, max_size=4),
        st.sampled_from(["member_priority", "lowest_code"]),
    )
    def test_unanimity(self, labels, tie_break):
        label = labels[0]
        names = [f"m{i}" for i in range(len(labels))]
        spec = EnsembleSpec(
            members=tuple((n, 1.0) for n in names), tie_break=tie_break
        )
        per_model = preds_for([label] * len(labels), names)
        assert fuse(per_model, spec)[0].label == label

    @given(
        st.lists(st.integers(0, 2), min_size=3, max_size=4),
        st.floats(min_value=0.1, max_value=100.0),
    )
    def test_weight_scale_invariance(self, votes, scale):
        names = [f"m{i}" for i in range(len(votes))]
        base = [0.7, 0.5, 0.9, 0.3][: len(votes)]
        spec1 = EnsembleSpec(
            members=tuple(zip(names, base)), rule="weighted"
        )
        spec2 = EnsembleSpec(
            members=tuple((n, w * scale) for n, w in zip(names, base)),
            rule="weighted",
        )
        per_model = preds_for(votes, names)
        assert fuse(per_model, spec1)[0].label == fuse(per_model, spec2)[0].label

    @given(st.lists(st.integers(0, 2), min_size=3, max_size=3), st.permutations([0, 1, 2]))
    def test_member_order_irrelevant_without_ties(self, votes, perm):
        totals = {}
        for v in votes:
            totals[v] = totals.get(v, 0) + 1
        best = max(totals.values())
        if sum(1 for t in totals.values() if t == best) > 1:
            return  # tied instance; order may matter by design
        names = ["m1", "m2", "m3"]
        spec1 = EnsembleSpec(members=tuple((n, 1.0) for n in names))
        permuted_names = [names[i] for i in perm]
        spec2 = EnsembleSpec(members=tuple((n, 1.0) for n in permuted_names))
        per_model = preds_for(votes, names)
        assert fuse(per_model, spec1)[0].label == fuse(per_model, spec2)[0].label

    def test_random_4_member_cases_match_oracle(self):
        rng = random.Random(1234)
        for _ in range(1000):
            votes = [rng.randrange(3) for _ in range(4)]
            weights = [round(rng.uniform(0.1, 1.0), 3) for _ in range(4)]
            tie_break = rng.choice(["member_priority", "lowest_code"])
            rule = rng.choice(["majority", "weighted"])
            names = [f"m{i}" for i in range(4)]
            spec = EnsembleSpec(
                members=tuple(zip(names, weights)), rule=rule, tie_break=tie_break
            )
            effective = weights if rule == "weighted" else [1.0] * 4
            got = fuse(preds_for(votes, names), spec)[0].label
            assert got == oracle_fuse(votes, effective, tie_break)


def report_with_f1(f1):
    return EvalReport(
        scheme_task="B",
        n=10,
        macro_f1=f1,
        weighted_f1=f1,
        per_class={},
        confusion=[[0] * 3 for _ in range(3)],
    )


class TestDeriveWeights:
    def test_weights_equal_eval_f1(self):
        reports = {
            "bert-base": report_with_f1(0.61),
            "xlm-r": report_with_f1(0.63),
            "bertweet-large": report_with_f1(0.68),
        }
        members = derive_weights(reports, ["xlm-r", "bert-base", "bertweet-large"])
        assert members == (("xlm-r", 0.63), ("bert-base", 0.61), ("bertweet-large", 0.68))

    def test_equal_f1_reduces_to_majority(self):
        reports = {n: report_with_f1(0.5) for n in NAMES3}
        members = derive_weights(reports, NAMES3)
        spec_w = EnsembleSpec(members=members, rule="weighted")
        for votes in itertools.product(range(3), repeat=3):
            per_model = preds_for(list(votes), NAMES3)
            assert (
                fuse(per_model, spec_w)[0].label
                == fuse(per_model, MAJORITY3)[0].label
            )

    def test_missing_report(self):
        with pytest.raises(MissingReport):
            derive_weights({"m1": report_with_f1(0.5)}, ["m1", "m2"])
