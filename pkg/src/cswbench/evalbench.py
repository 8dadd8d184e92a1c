"""Build code-switched benchmark variants, run model adapters, and compute
accuracy, weighted accuracy, and accuracy deltas."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

from .align import AlignmentSet, TranslationTable
from .corpus import LABELS, BenchmarkItem, LanguageCode, ParallelPair, format_item
from .gateway import prepend_mitigation
from .switchgen import CswInstance, Method, ResourceError, generate_instance
from .tag import Pos

# Which fields get code-switched, per benchmark.
SWITCH_FIELDS = {
    "belebele": ("passage", "question"),
    "mmlu": ("question",),
    "xnli": ("premise", "hypothesis"),
}

INVALID = "invalid"


@dataclass(frozen=True)
class ModelRef:
    name: str
    adapter_kind: str  # "generate", "score_choices", or "stub"

    def __post_init__(self) -> None:
        if self.adapter_kind not in ("generate", "score_choices", "stub"):
            raise ValueError(f"unknown adapter kind {self.adapter_kind!r}")


class GenerateAdapter(Protocol):
    def generate(self, prompt: str) -> str: ...


class ScoreAdapter(Protocol):
    def score(self, prompt: str, choice: str) -> float: ...


StubRule = Callable[[BenchmarkItem], str]


@dataclass(frozen=True)
class EvalRecord:
    benchmark_id: str
    item_id: str
    predicted: str
    gold: str
    correct: bool = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "correct", self.predicted == self.gold)


@dataclass(frozen=True)
class SkipRecord:
    item_id: str
    reason: str


@dataclass(frozen=True)
class CswBenchmark:
    benchmark_id: str
    matrix_lang: LanguageCode
    embedded_langs: tuple[LanguageCode, ...]
    method: Method
    items: tuple[tuple[BenchmarkItem, BenchmarkItem], ...]
    skipped: tuple[SkipRecord, ...] = ()

    def originals(self) -> list[BenchmarkItem]:
        return [original for original, _ in self.items]

    def switched(self) -> list[BenchmarkItem]:
        return [switched for _, switched in self.items]


@dataclass
class GenerationResources:
    """Everything needed to switch benchmark fields deterministically.

    Parallel data is keyed by "item_id/field". Alignments are external
    (same keys, per embedded language code) or computed from the
    translation table. An llm_generator callable replaces the whole
    deterministic pipeline when set.
    """

    field_pairs: Mapping[str, ParallelPair]
    alignments: Mapping[str, Mapping[str, AlignmentSet]] | None = None
    tags: Mapping[str, Sequence[Pos]] | None = None
    tables: Mapping[str, TranslationTable] | None = None
    stoplist: Sequence[str] | None = None
    ratio: float = 0.2
    seed: int | None = None
    threshold: float = 0.3
    include_proper: bool = True
    llm_generator: Callable[[ParallelPair, LanguageCode], CswInstance] | None = None

    def switch_field(
        self,
        key: str,
        text: str,
        embedded_langs: Sequence[LanguageCode],
        method: Method,
    ) -> str:
        pair = self.field_pairs.get(key)
        if pair is None:
            raise ResourceError(f"no parallel data for {key!r}")
        if pair.matrix_text != text:
            raise ResourceError(f"parallel data for {key!r} does not match the field text")
        if self.llm_generator is not None:
            return self.llm_generator(pair, embedded_langs[0]).csw_text
        instance = generate_instance(
            pair,
            embedded_langs,
            method,
            alignments=None if self.alignments is None else self.alignments.get(key),
            tables=self.tables,
            tags=None if self.tags is None else self.tags.get(key),
            ratio=self.ratio,
            seed=self.seed,
            stoplist=self.stoplist,
            threshold=self.threshold,
            include_proper=self.include_proper,
        )
        return instance.csw_text


def build_csw_benchmark(
    items: Sequence[BenchmarkItem],
    matrix_lang: LanguageCode,
    embedded_langs: Sequence[LanguageCode],
    method: Method | str,
    resources: GenerationResources,
) -> CswBenchmark:
    """Switch each item's policy-designated fields; options and gold are untouched.

    Items whose switching resources are missing are skipped and reported,
    never silently dropped.
    """
    method = Method(method)
    if not items:
        raise ValueError("no benchmark items to switch")
    benchmark_id = items[0].benchmark_id
    paired: list[tuple[BenchmarkItem, BenchmarkItem]] = []
    skipped: list[SkipRecord] = []
    for item in items:
        fields = dict(item.fields)
        try:
            for field_name in SWITCH_FIELDS[item.benchmark_id]:
                key = f"{item.item_id}/{field_name}"
                fields[field_name] = resources.switch_field(
                    key, item.fields[field_name], embedded_langs, method
                )
        except ResourceError as exc:
            skipped.append(SkipRecord(item.item_id, str(exc)))
            continue
        paired.append((
            item,
            BenchmarkItem(item.benchmark_id, item.item_id, fields, item.gold),
        ))
    return CswBenchmark(
        benchmark_id=benchmark_id,
        matrix_lang=matrix_lang,
        embedded_langs=tuple(embedded_langs),
        method=method,
        items=tuple(paired),
        skipped=tuple(skipped),
    )


def parse_label(reply: str, benchmark_id: str) -> str | None:
    """First standalone valid label in a model reply, or None."""
    labels = LABELS[benchmark_id]
    pattern = "|".join(re.escape(label) for label in labels)
    match = re.search(rf"\b({pattern})\b", reply, flags=re.IGNORECASE)
    if match is None:
        return None
    return match.group(1).upper()


def _wrong_label(item: BenchmarkItem) -> str:
    labels = LABELS[item.benchmark_id]
    return labels[(labels.index(item.gold) + 1) % len(labels)]


def stub_rule(name: str) -> StubRule:
    """Built-in deterministic prediction rules for testing.

    always_gold answers correctly; ascii_only answers correctly only when
    every field is pure ASCII (so any switched non-Latin text flips it
    wrong); first_label always answers the first label; fixed:<L> always
    answers <L>.
    """
    if name == "always_gold":
        return lambda item: item.gold
    if name == "ascii_only":
        return lambda item: (
            item.gold
            if all(value.isascii() for value in item.fields.values())
            else _wrong_label(item)
        )
    if name == "first_label":
        return lambda item: LABELS[item.benchmark_id][0]
    if name.startswith("fixed:"):
        label = name.split(":", 1)[1]
        return lambda item: label
    raise ValueError(f"unknown stub rule {name!r}")


def evaluate(
    model: ModelRef,
    items: Sequence[BenchmarkItem],
    adapter: GenerateAdapter | ScoreAdapter | StubRule | None = None,
    *,
    mitigation_lang: LanguageCode | None = None,
    max_retries: int = 1,
) -> list[EvalRecord]:
    """Run one adapter over benchmark items and record predictions.

    Generate adapters see the formatted item (mitigation-prepended when a
    language is given) and the first standalone label in the reply wins;
    unparseable replies after retries record the "invalid" sentinel.
    Score adapters score each choice and the argmax wins, ties to the
    lowest label. Stub adapters predict from a deterministic rule.
    """
    if not items:
        raise ValueError("no items to evaluate")
    if adapter is None:
        if model.adapter_kind != "stub":
            raise ValueError(f"adapter required for kind {model.adapter_kind!r}")
        adapter = stub_rule(model.name)

    records = []
    for item in items:
        if model.adapter_kind == "stub":
            predicted = adapter(item)
        elif model.adapter_kind == "generate":
            prompt = (
                prepend_mitigation(item, mitigation_lang)
                if mitigation_lang is not None
                else format_item(item)
            )
            predicted = None
            for _ in range(max_retries + 1):
                predicted = parse_label(adapter.generate(prompt), item.benchmark_id)
                if predicted is not None:
                    break
            if predicted is None:
                predicted = INVALID
        else:
            prompt = format_item(item)
            best_label = None
            best_score = 0.0
            for label in LABELS[item.benchmark_id]:
                choice = item.fields.get("option_" + label.lower(), label)
                score = adapter.score(prompt, choice)
                if best_label is None or score > best_score:
                    best_label, best_score = label, score
            predicted = best_label
        records.append(EvalRecord(item.benchmark_id, item.item_id, predicted, item.gold))
    return records


@dataclass(frozen=True)
class BenchmarkScore:
    n: int
    accuracy: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("benchmark size must be >= 1")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")


@dataclass(frozen=True)
class AccuracyReport:
    per_benchmark: Mapping[str, BenchmarkScore]
    weighted_accuracy: float
    deltas: Mapping[str, float] = field(default_factory=dict)
    weighted_delta: float | None = None

    def __post_init__(self) -> None:
        if not self.per_benchmark:
            raise ValueError("report needs at least one benchmark")
        accs = [score.accuracy for score in self.per_benchmark.values()]
        if not min(accs) - 1e-12 <= self.weighted_accuracy <= max(accs) + 1e-12:
            raise ValueError("weighted accuracy outside the per-benchmark range")

    def to_dict(self) -> dict:
        return {
            "per_benchmark": {
                bid: {"n": s.n, "accuracy": s.accuracy}
                for bid, s in self.per_benchmark.items()
            },
            "weighted_accuracy": self.weighted_accuracy,
            "deltas": dict(self.deltas),
            "weighted_delta": self.weighted_delta,
        }


def accuracy(records: Sequence[EvalRecord]) -> float:
    """Mean of the correctness indicator."""
    if not records:
        raise ValueError("cannot compute accuracy over zero records")
    return sum(r.correct for r in records) / len(records)


def weighted_accuracy(per_benchmark: Sequence[tuple[int, float]]) -> float:
    """Size-weighted mean accuracy across benchmarks."""
    if not per_benchmark:
        raise ValueError("cannot compute weighted accuracy over zero benchmarks")
    for n, _ in per_benchmark:
        if n < 1:
            raise ValueError("benchmark sizes must be >= 1")
    total = sum(n for n, _ in per_benchmark)
    return sum(n * acc for n, acc in per_benchmark) / total


def summarize(records: Sequence[EvalRecord]) -> AccuracyReport:
    """Group eval records by benchmark and compute the aggregate report."""
    if not records:
        raise ValueError("cannot summarize zero records")
    grouped: dict[str, list[EvalRecord]] = {}
    for record in records:
        grouped.setdefault(record.benchmark_id, []).append(record)
    per_benchmark = {
        bid: BenchmarkScore(len(group), accuracy(group))
        for bid, group in grouped.items()
    }
    weighted = weighted_accuracy([(s.n, s.accuracy) for s in per_benchmark.values()])
    return AccuracyReport(per_benchmark=per_benchmark, weighted_accuracy=weighted)


def accuracy_delta(
    csw_report: AccuracyReport, baseline_report: AccuracyReport
) -> dict[str, float]:
    """Per-benchmark accuracy difference, code-switched minus baseline."""
    csw_ids = set(csw_report.per_benchmark)
    base_ids = set(baseline_report.per_benchmark)
    if csw_ids != base_ids:
        missing = sorted(csw_ids.symmetric_difference(base_ids))
        raise ValueError(f"reports cover different benchmarks: {missing}")
    return {
        bid: csw_report.per_benchmark[bid].accuracy
        - baseline_report.per_benchmark[bid].accuracy
        for bid in sorted(csw_ids)
    }


def with_deltas(
    csw_report: AccuracyReport, baseline_report: AccuracyReport
) -> AccuracyReport:
    """Copy the code-switched report with per-benchmark and weighted deltas filled."""
    return AccuracyReport(
        per_benchmark=dict(csw_report.per_benchmark),
        weighted_accuracy=csw_report.weighted_accuracy,
        deltas=accuracy_delta(csw_report, baseline_report),
        weighted_delta=csw_report.weighted_accuracy - baseline_report.weighted_accuracy,
    )
