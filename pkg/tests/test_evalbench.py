import random
from fractions import Fraction

import pytest

from cswbench.corpus import AR, EN, BenchmarkItem, ParallelPair
from cswbench.evalbench import (
    AccuracyReport,
    BenchmarkScore,
    EvalRecord,
    GenerationResources,
    ModelRef,
    accuracy,
    accuracy_delta,
    build_csw_benchmark,
    evaluate,
    parse_label,
    stub_rule,
    summarize,
    weighted_accuracy,
    with_deltas,
)
from conftest import alignment

ARABIC_NOUNS = {
    "house": "بيت", "tree": "شجرة", "water": "ماء", "book": "كتاب", "dog": "كلب",
}


def mmlu_item(item_id, question, gold="A"):
    return BenchmarkItem("mmlu", item_id, {
        "question": question,
        "option_a": "yes", "option_b": "no", "option_c": "maybe", "option_d": "never",
    }, gold)


def ar_mmlu_fixture(n_items, link_noun=True):
    """MMLU items whose questions carry one switchable noun with an Arabic
    counterpart; link_noun=False yields empty plans (identity benchmark)."""
    nouns = list(ARABIC_NOUNS)
    items = []
    field_pairs = {}
    alignments = {}
    for k in range(n_items):
        noun = nouns[k % len(nouns)]
        question = f"The {noun} is red ."
        items.append(mmlu_item(f"q{k}", question))
        key = f"q{k}/question"
        field_pairs[key] = ParallelPair(
            key, EN, question, {"ar": f"{ARABIC_NOUNS[noun]} أحمر ."}
        )
        links = [(1, 0)] if link_noun else []
        alignments[key] = {"ar": alignment(key, AR, links)}
    resources = GenerationResources(field_pairs=field_pairs, alignments=alignments)
    return items, resources


class TestBuildCswBenchmark:
    def test_mmlu_question_switched_options_untouched(self):
        items, resources = ar_mmlu_fixture(5)
        bench = build_csw_benchmark(items, EN, [AR], "noun_token", resources)
        assert len(bench.items) == 5
        for original, switched in bench.items:
            assert switched.fields["question"] != original.fields["question"]
            assert not switched.fields["question"].isascii()
            for label in ("a", "b", "c", "d"):
                assert switched.fields[f"option_{label}"] == original.fields[f"option_{label}"]
            assert switched.gold == original.gold
            assert switched.item_id == original.item_id

    def test_xnli_both_fields_switched(self):
        item = BenchmarkItem("xnli", "x1", {
            "premise": "The house is red .",
            "hypothesis": "The dog is old .",
        }, "0")
        field_pairs = {
            "x1/premise": ParallelPair("x1/premise", EN, "The house is red .",
                                       {"ar": "بيت أحمر ."}),
            "x1/hypothesis": ParallelPair("x1/hypothesis", EN, "The dog is old .",
                                          {"ar": "كلب قديم ."}),
        }
        alignments = {
            "x1/premise": {"ar": alignment("x1/premise", AR, [(1, 0)])},
            "x1/hypothesis": {"ar": alignment("x1/hypothesis", AR, [(1, 0)])},
        }
        resources = GenerationResources(field_pairs=field_pairs, alignments=alignments)
        bench = build_csw_benchmark([item], EN, [AR], "noun_token", resources)
        _, switched = bench.items[0]
        assert "بيت" in switched.fields["premise"]
        assert "كلب" in switched.fields["hypothesis"]

    def test_belebele_passage_and_question_switched(self):
        item = BenchmarkItem("belebele", "b1", {
            "passage": "The house is red .",
            "question": "The dog is old .",
            "option_a": "1", "option_b": "2", "option_c": "3", "option_d": "4",
        }, "D")
        field_pairs = {
            "b1/passage": ParallelPair("b1/passage", EN, "The house is red .",
                                       {"ar": "بيت أحمر ."}),
            "b1/question": ParallelPair("b1/question", EN, "The dog is old .",
                                        {"ar": "كلب قديم ."}),
        }
        alignments = {
            "b1/passage": {"ar": alignment("b1/passage", AR, [(1, 0)])},
            "b1/question": {"ar": alignment("b1/question", AR, [(1, 0)])},
        }
        resources = GenerationResources(field_pairs=field_pairs, alignments=alignments)
        bench = build_csw_benchmark([item], EN, [AR], "noun_token", resources)
        original, switched = bench.items[0]
        assert "بيت" in switched.fields["passage"]
        assert "كلب" in switched.fields["question"]
        for label in ("a", "b", "c", "d"):
            assert switched.fields[f"option_{label}"] == original.fields[f"option_{label}"]
        assert switched.gold == "D"

    def test_missing_translation_goes_to_skip_report(self):
        items, resources = ar_mmlu_fixture(3)
        items.append(mmlu_item("q_missing", "The cat is old ."))
        bench = build_csw_benchmark(items, EN, [AR], "noun_token", resources)
        assert len(bench.items) == 3
        assert [s.item_id for s in bench.skipped] == ["q_missing"]
        assert "no parallel data" in bench.skipped[0].reason

    def test_gold_multiset_preserved(self):
        items, resources = ar_mmlu_fixture(8)
        bench = build_csw_benchmark(items, EN, [AR], "noun_token", resources)
        assert sorted(i.gold for i in bench.originals()) == sorted(
            i.gold for i in bench.switched()
        )

    def test_empty_item_list_rejected(self):
        _, resources = ar_mmlu_fixture(1)
        with pytest.raises(ValueError, match="no benchmark items"):
            build_csw_benchmark([], EN, [AR], "noun_token", resources)


class TestEvaluate:
    def test_always_gold_stub(self):
        items = [mmlu_item(f"q{k}", "The house is red .") for k in range(10)]
        records = evaluate(ModelRef("always_gold", "stub"), items)
        assert all(r.correct for r in records)

    def test_ascii_stub_wrong_exactly_on_switched_items(self):
        items, resources = ar_mmlu_fixture(6)
        bench = build_csw_benchmark(items, EN, [AR], "noun_token", resources)
        model = ModelRef("ascii_only", "stub")
        base_records = evaluate(model, bench.originals())
        csw_records = evaluate(model, bench.switched())
        assert all(r.correct for r in base_records)
        assert not any(r.correct for r in csw_records)

    def test_score_adapter_tie_breaks_to_lowest_label(self):
        class Scores:
            def score(self, prompt, choice):
                return {"yes": 0.1, "no": 0.9, "maybe": 0.9, "never": 0.2}[choice]

        records = evaluate(
            ModelRef("scorer", "score_choices"),
            [mmlu_item("q1", "The house is red .", gold="B")],
            Scores(),
        )
        assert records[0].predicted == "B"
        assert records[0].correct

    def test_generate_adapter_parses_first_standalone_label(self):
        class Chatty:
            def generate(self, prompt):
                return "I believe the answer is C. Final answer: C"

        records = evaluate(
            ModelRef("chatty", "generate"),
            [mmlu_item("q1", "The house is red .", gold="C")],
            Chatty(),
        )
        assert records[0].predicted == "C"

    def test_generate_adapter_invalid_after_retries(self):
        calls = {"n": 0}

        class Mumbling:
            def generate(self, prompt):
                calls["n"] += 1
                return "hmm, not sure about this one"

        records = evaluate(
            ModelRef("mumbling", "generate"),
            [mmlu_item("q1", "The house is red .")],
            Mumbling(),
            max_retries=2,
        )
        assert records[0].predicted == "invalid"
        assert records[0].correct is False
        assert calls["n"] == 3

    def test_mitigation_prepended_for_generate_adapters(self):
        prompts = []

        class Recorder:
            def generate(self, prompt):
                prompts.append(prompt)
                return "A"

        evaluate(
            ModelRef("rec", "generate"),
            [mmlu_item("q1", "The house is red .")],
            Recorder(),
            mitigation_lang=AR,
        )
        assert prompts[0].startswith("You are an expert in understanding code-switched text.")
        assert "English and Arabic" in prompts[0]

    def test_empty_items_rejected(self):
        with pytest.raises(ValueError, match="no items"):
            evaluate(ModelRef("always_gold", "stub"), [])

    def test_unknown_stub_rule_rejected(self):
        with pytest.raises(ValueError, match="unknown stub rule"):
            stub_rule("nonsense")


class TestParseLabel:
    def test_xnli_digits(self):
        assert parse_label("the label is 2", "xnli") == "2"

    def test_case_insensitive(self):
        assert parse_label("b", "mmlu") == "B"

    def test_no_label(self):
        assert parse_label("nothing here", "mmlu") is None

    def test_embedded_letters_not_matched(self):
        assert parse_label("cab dab", "mmlu") is None


class TestMetrics:
    def test_accuracy_three_of_four(self):
        records = [EvalRecord("mmlu", str(k), "A" if k < 3 else "B", "A") for k in range(4)]
        assert accuracy(records) == 0.75

    def test_accuracy_all_correct(self):
        records = [EvalRecord("mmlu", str(k), "A", "A") for k in range(5)]
        assert accuracy(records) == 1.0

    def test_accuracy_none_correct(self):
        records = [EvalRecord("mmlu", str(k), "B", "A") for k in range(5)]
        assert accuracy(records) == 0.0

    def test_accuracy_empty_rejected(self):
        with pytest.raises(ValueError, match="zero records"):
            accuracy([])

    def test_weighted_simple(self):
        assert weighted_accuracy([(100, 0.5), (300, 0.7)]) == pytest.approx(0.65)

    def test_weighted_single_benchmark_identity(self):
        assert weighted_accuracy([(42, 0.37)]) == pytest.approx(0.37)

    def test_weighted_triple_against_rational_oracle(self):
        # Exact rational arithmetic as the independent route.
        sizes_and_accs = [(900, Fraction(6, 10)), (14042, Fraction(68, 100)),
                          (5010, Fraction(55, 100))]
        oracle = sum(n * a for n, a in sizes_and_accs) / sum(n for n, _ in sizes_and_accs)
        got = weighted_accuracy([(n, float(a)) for n, a in sizes_and_accs])
        assert got == pytest.approx(float(oracle), abs=1e-12)
        assert float(oracle) == pytest.approx(0.6437479951884523, abs=1e-12)

    def test_weighted_empty_rejected(self):
        with pytest.raises(ValueError, match="zero benchmarks"):
            weighted_accuracy([])

    def test_weighted_matches_pooled_mean_on_random_fixtures(self):
        rng = random.Random(7)
        for _ in range(50):
            per = []
            total_n = total_correct = 0
            for _ in range(rng.randint(1, 5)):
                n = rng.randint(1, 200)
                correct = rng.randint(0, n)
                per.append((n, correct / n))
                total_n += n
                total_correct += correct
            assert weighted_accuracy(per) == pytest.approx(total_correct / total_n, abs=1e-12)


def report_from_aggregates(aggregates):
    per = {bid: BenchmarkScore(n, acc) for bid, (n, acc) in aggregates.items()}
    return AccuracyReport(
        per_benchmark=per,
        weighted_accuracy=weighted_accuracy([(s.n, s.accuracy) for s in per.values()]),
    )


class TestDeltas:
    def test_weighted_delta_four_point_drop(self):
        csw = report_from_aggregates({"all": (100, 0.66)})
        base = report_from_aggregates({"all": (100, 0.70)})
        combined = with_deltas(csw, base)
        assert combined.weighted_delta == pytest.approx(-0.04, abs=1e-12)

    def test_weighted_delta_eleven_point_drop(self):
        csw = report_from_aggregates({"all": (100, 0.43)})
        base = report_from_aggregates({"all": (100, 0.54)})
        combined = with_deltas(csw, base)
        assert combined.weighted_delta == pytest.approx(-0.11, abs=1e-12)

    def test_identical_reports_zero_deltas(self):
        report = report_from_aggregates({"mmlu": (10, 0.5), "xnli": (20, 0.8)})
        deltas = accuracy_delta(report, report)
        assert all(v == 0.0 for v in deltas.values())

    def test_id_mismatch_lists_missing(self):
        csw = report_from_aggregates({"mmlu": (10, 0.5)})
        base = report_from_aggregates({"xnli": (10, 0.5)})
        with pytest.raises(ValueError, match="mmlu.*xnli|xnli.*mmlu"):
            accuracy_delta(csw, base)

    def test_antisymmetry(self):
        rng = random.Random(13)
        for _ in range(20):
            a = report_from_aggregates({
                "mmlu": (rng.randint(1, 50), rng.random()),
                "xnli": (rng.randint(1, 50), rng.random()),
            })
            b = report_from_aggregates({
                "mmlu": (rng.randint(1, 50), rng.random()),
                "xnli": (rng.randint(1, 50), rng.random()),
            })
            forward = accuracy_delta(a, b)
            backward = accuracy_delta(b, a)
            for bid in forward:
                assert forward[bid] == pytest.approx(-backward[bid], abs=1e-12)

    def test_sign_sanity_end_to_end(self):
        items, resources = ar_mmlu_fixture(60)
        bench = build_csw_benchmark(items, EN, [AR], "noun_token", resources)
        model = ModelRef("ascii_only", "stub")
        base = summarize(evaluate(model, bench.originals()))
        csw = summarize(evaluate(model, bench.switched()))
        assert with_deltas(csw, base).weighted_delta < 0

    def test_identity_benchmark_zero_delta(self):
        items, resources = ar_mmlu_fixture(60, link_noun=False)
        bench = build_csw_benchmark(items, EN, [AR], "noun_token", resources)
        for original, switched in bench.items:
            assert original.fields == switched.fields
        model = ModelRef("ascii_only", "stub")
        base = summarize(evaluate(model, bench.originals()))
        csw = summarize(evaluate(model, bench.switched()))
        assert with_deltas(csw, base).weighted_delta == 0.0


class TestReportInvariants:
    def test_bounds_enforced(self):
        with pytest.raises(ValueError, match="outside"):
            BenchmarkScore(10, 1.2)

    def test_weighted_must_be_convex(self):
        with pytest.raises(ValueError, match="range"):
            AccuracyReport(
                per_benchmark={"mmlu": BenchmarkScore(10, 0.5)},
                weighted_accuracy=0.9,
            )

    def test_correctness_is_computed_not_declared(self):
        record = EvalRecord("mmlu", "q1", "A", "A")
        assert record.correct is True
        record = EvalRecord("mmlu", "q1", "B", "A")
        assert record.correct is False

    def test_model_ref_kind_validated(self):
        with pytest.raises(ValueError, match="adapter kind"):
            ModelRef("m", "telepathy")

    def test_summarize_groups_by_benchmark(self):
        records = (
            [EvalRecord("mmlu", str(k), "A", "A") for k in range(4)]
            + [EvalRecord("xnli", str(k), "0", "1") for k in range(6)]
        )
        report = summarize(records)
        assert report.per_benchmark["mmlu"].n == 4
        assert report.per_benchmark["mmlu"].accuracy == 1.0
        assert report.per_benchmark["xnli"].accuracy == 0.0
        assert report.weighted_accuracy == pytest.approx(0.4)
