"""Data model, tokenization, and JSONL ingestion for parallel corpora and benchmarks."""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Mapping, Sequence


class Script(str, Enum):
    LATIN = "latin"
    ARABIC = "arabic"
    HAN = "han"


_SCRIPT_BY_CODE = {
    "en": Script.LATIN,
    "de": Script.LATIN,
    "fr": Script.LATIN,
    "ar": Script.ARABIC,
    "zh": Script.HAN,
}

_NAME_BY_CODE = {
    "en": "English",
    "ar": "Arabic",
    "de": "German",
    "fr": "French",
    "zh": "Chinese",
}


@dataclass(frozen=True)
class LanguageCode:
    code: str
    script: Script

    def __post_init__(self) -> None:
        if self.code not in _SCRIPT_BY_CODE:
            raise ValueError(
                f"unsupported language code {self.code!r}; expected one of {sorted(_SCRIPT_BY_CODE)}"
            )
        if self.script is not _SCRIPT_BY_CODE[self.code]:
            raise ValueError(
                f"script {self.script.value!r} is inconsistent with language code {self.code!r}"
            )

    @property
    def display_name(self) -> str:
        return _NAME_BY_CODE[self.code]

    def __str__(self) -> str:
        return self.code


def language(code: str) -> LanguageCode:
    """Look up one of the five supported languages by 2-letter code."""
    if code not in _SCRIPT_BY_CODE:
        raise ValueError(
            f"unsupported language code {code!r}; expected one of {sorted(_SCRIPT_BY_CODE)}"
        )
    return LanguageCode(code, _SCRIPT_BY_CODE[code])


EN = language("en")
AR = language("ar")
DE = language("de")
FR = language("fr")
ZH = language("zh")

SUPPORTED_LANGUAGES = (EN, AR, DE, FR, ZH)


@dataclass(frozen=True)
class Token:
    surface: str
    index: int
    start: int
    end: int

    @property
    def char_span(self) -> tuple[int, int]:
        return (self.start, self.end)


def is_punct(text: str) -> bool:
    """True when every character is Unicode punctuation."""
    return bool(text) and all(unicodedata.category(ch).startswith("P") for ch in text)


def _is_punct_char(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _is_han_char(ch: str) -> bool:
    cp = ord(ch)
    return 0x3400 <= cp <= 0x4DBF or 0x4E00 <= cp <= 0x9FFF or 0xF900 <= cp <= 0xFAFF


def _chunk_spans(text: str, start: int, end: int) -> Iterator[tuple[int, int]]:
    # Peel punctuation off both ends of a whitespace chunk; interior
    # punctuation (hyphens, apostrophes) stays attached.
    s, e = start, end
    while s < e and _is_punct_char(text[s]):
        yield (s, s + 1)
        s += 1
    trailing = []
    while e > s and _is_punct_char(text[e - 1]):
        trailing.append((e - 1, e))
        e -= 1
    if s < e:
        yield (s, e)
    yield from reversed(trailing)


def _latin_spans(text: str) -> Iterator[tuple[int, int]]:
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        yield from _chunk_spans(text, i, j)
        i = j


def _han_spans(text: str) -> Iterator[tuple[int, int]]:
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif _is_han_char(ch) or _is_punct_char(ch):
            yield (i, i + 1)
            i += 1
        else:
            j = i
            while j < n and not (text[j].isspace() or _is_han_char(text[j]) or _is_punct_char(text[j])):
                j += 1
            yield (i, j)
            i = j


def tokenize(text: str, lang: LanguageCode) -> list[Token]:
    """Split text into tokens whose char spans tile the non-whitespace characters.

    Latin and Arabic scripts split on whitespace with punctuation detached
    into separate tokens. Han script yields one token per ideograph, with
    non-Han runs (ASCII words, digits) kept whole and punctuation detached.
    """
    spans = _han_spans(text) if lang.script is Script.HAN else _latin_spans(text)
    return [Token(text[s:e], i, s, e) for i, (s, e) in enumerate(spans)]


def splice_tokens(
    text: str,
    tokens: Sequence[Token],
    replacements: Mapping[int, str] | None = None,
) -> str:
    """Rebuild text from token spans, substituting replacements by token index.

    With no replacements this reconstructs the original text byte for byte,
    since spans preserve the original separators.
    """
    replacements = replacements or {}
    for idx in replacements:
        if not 0 <= idx < len(tokens):
            raise ValueError(f"replacement index {idx} out of range for {len(tokens)} tokens")
    parts = []
    prev = 0
    for tok in tokens:
        parts.append(text[prev:tok.start])
        parts.append(replacements.get(tok.index, text[tok.start:tok.end]))
        prev = tok.end
    parts.append(text[prev:])
    return "".join(parts)


@dataclass(frozen=True)
class ParallelPair:
    """One matrix-language sentence plus its embedded-language translations."""

    id: str
    matrix_lang: LanguageCode
    matrix_text: str
    translations: Mapping[str, str]

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("pair id must be non-empty")
        if not self.matrix_text:
            raise ValueError(f"pair {self.id!r}: matrix_text must be non-empty")
        for code, text in self.translations.items():
            language(code)
            if not text:
                raise ValueError(f"pair {self.id!r}: empty translation for {code!r}")
        if self.matrix_lang.code in self.translations:
            raise ValueError(
                f"pair {self.id!r}: matrix language {self.matrix_lang.code!r} listed in translations"
            )

    def translation(self, lang: LanguageCode | str) -> str:
        code = lang.code if isinstance(lang, LanguageCode) else lang
        return self.translations[code]


BENCHMARK_IDS = ("belebele", "mmlu", "xnli")

REQUIRED_FIELDS = {
    "belebele": ("passage", "question", "option_a", "option_b", "option_c", "option_d"),
    "mmlu": ("question", "option_a", "option_b", "option_c", "option_d"),
    "xnli": ("premise", "hypothesis"),
}

LABELS = {
    "belebele": ("A", "B", "C", "D"),
    "mmlu": ("A", "B", "C", "D"),
    "xnli": ("0", "1", "2"),
}


@dataclass(frozen=True)
class BenchmarkItem:
    benchmark_id: str
    item_id: str
    fields: Mapping[str, str]
    gold: str

    def __post_init__(self) -> None:
        if self.benchmark_id not in BENCHMARK_IDS:
            raise ValueError(
                f"unknown benchmark {self.benchmark_id!r}; expected one of {BENCHMARK_IDS}"
            )
        missing = [f for f in REQUIRED_FIELDS[self.benchmark_id] if f not in self.fields]
        if missing:
            raise ValueError(
                f"item {self.item_id!r}: missing required field(s) {missing} for {self.benchmark_id}"
            )
        if self.gold not in LABELS[self.benchmark_id]:
            raise ValueError(
                f"item {self.item_id!r}: gold {self.gold!r} not in {LABELS[self.benchmark_id]}"
            )


def format_item(item: BenchmarkItem) -> str:
    """Render an item as the plain-text prompt shown to generate-style adapters."""
    f = item.fields
    if item.benchmark_id == "belebele":
        lines = [f"Passage: {f['passage']}", f"Question: {f['question']}"]
    elif item.benchmark_id == "mmlu":
        lines = [f"Question: {f['question']}"]
    else:
        return f"Premise: {f['premise']}\nHypothesis: {f['hypothesis']}\nAnswer:"
    for label in LABELS[item.benchmark_id]:
        lines.append(f"{label}. {f['option_' + label.lower()]}")
    lines.append("Answer:")
    return "\n".join(lines)


def _read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ValueError(f"{path}: line {lineno}: expected a JSON object")
            yield lineno, obj


def load_parallel_corpus(path: str | Path) -> list[ParallelPair]:
    """Read a parallel corpus JSONL file, preserving order and rejecting duplicates."""
    pairs: list[ParallelPair] = []
    seen: set[str] = set()
    for lineno, obj in _read_jsonl(path):
        for key in ("id", "matrix_lang", "matrix_text", "translations"):
            if key not in obj:
                raise ValueError(f"{path}: line {lineno}: missing field {key!r}")
        try:
            pair = ParallelPair(
                id=str(obj["id"]),
                matrix_lang=language(obj["matrix_lang"]),
                matrix_text=obj["matrix_text"],
                translations=dict(obj["translations"]),
            )
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}") from exc
        if pair.id in seen:
            raise ValueError(f"{path}: line {lineno}: duplicate pair id {pair.id!r}")
        seen.add(pair.id)
        pairs.append(pair)
    return pairs


def load_benchmark(path: str | Path, benchmark_id: str) -> list[BenchmarkItem]:
    """Read benchmark items, checking the task's required fields and gold labels."""
    if benchmark_id not in BENCHMARK_IDS:
        raise ValueError(f"unknown benchmark {benchmark_id!r}; expected one of {BENCHMARK_IDS}")
    items: list[BenchmarkItem] = []
    for lineno, obj in _read_jsonl(path):
        line_bid = obj.get("benchmark_id", benchmark_id)
        if line_bid != benchmark_id:
            raise ValueError(
                f"{path}: line {lineno}: benchmark_id {line_bid!r} does not match {benchmark_id!r}"
            )
        for key in ("item_id", "fields", "gold"):
            if key not in obj:
                raise ValueError(f"{path}: line {lineno}: missing field {key!r}")
        gold = str(obj["gold"]).strip()
        if benchmark_id in ("belebele", "mmlu"):
            gold = gold.upper()
        try:
            item = BenchmarkItem(
                benchmark_id=benchmark_id,
                item_id=str(obj["item_id"]),
                fields=dict(obj["fields"]),
                gold=gold,
            )
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}") from exc
        items.append(item)
    return items
