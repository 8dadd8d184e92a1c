"""Instruction-tuning dataset builder: length filter, five instruction
templates, and the training-recipe sidecar."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .corpus import LanguageCode, ParallelPair

TEMPLATES: dict[int, str] = {
    1: '''Take this English sentence and infuse it with <LANGUAGE> code-switching:
English: "<ENGLISH_SENTENCE>"
<LANGUAGE>: "<TRANSLATION_SENTENCE>"''',
    2: '''Convert the following English line into a code-switched mix with <LANGUAGE>:
English: "<ENGLISH_SENTENCE>"
<LANGUAGE>: "<TRANSLATION_SENTENCE>"''',
    3: '''Blend English and <LANGUAGE> in the sentence below:
English text: "<ENGLISH_SENTENCE>"
<LANGUAGE> equivalent: "<TRANSLATION_SENTENCE>"''',
    4: '''Generate a code-switched rendition by swapping in <LANGUAGE>:
English original: "<ENGLISH_SENTENCE>"
<LANGUAGE> snippet: "<TRANSLATION_SENTENCE>"''',
    5: '''Switch parts of this English sentence into <LANGUAGE>:
English: "<ENGLISH_SENTENCE>"
<LANGUAGE>: "<TRANSLATION_SENTENCE>"''',
}

EMBEDDED_CODES = ("ar", "de", "fr", "zh")

# Recorded for reproducibility; training itself is out of scope here.
TRAINING_RECIPE = {
    "base_model": "instruction-tuned 8B decoder",
    "epochs": 1,
    "learning_rate": 2e-6,
    "lr_schedule": "linear_decay",
    "warmup_ratio": 0.05,
    "precision": "bf16",
    "sequence_packing": True,
    "max_seq_len": 4096,
    "batch_size": 4,
}


@dataclass(frozen=True)
class IftExample:
    template_id: int
    instruction: str
    response: str
    matrix_lang: str
    embedded_lang: str


@dataclass(frozen=True)
class IftBuild:
    examples: tuple[IftExample, ...]
    skipped: tuple[tuple[str, str], ...]  # (pair_id, missing language code)


def filter_long(pairs: Sequence[ParallelPair], min_words: int = 70) -> list[ParallelPair]:
    """Keep pairs whose matrix text has strictly more than min_words whitespace words."""
    if min_words < 1:
        raise ValueError(f"min_words must be >= 1, got {min_words}")
    return [p for p in pairs if len(p.matrix_text.split()) > min_words]


def render_instruction(
    template_id: int, language_name: str, english: str, translation: str
) -> str:
    if template_id not in TEMPLATES:
        raise ValueError(f"template_id must be 1..5, got {template_id}")
    return (
        TEMPLATES[template_id]
        .replace("<LANGUAGE>", language_name)
        .replace("<ENGLISH_SENTENCE>", english)
        .replace("<TRANSLATION_SENTENCE>", translation)
    )


def build_ift_dataset(
    pairs: Sequence[ParallelPair],
    langs: Sequence[LanguageCode],
    generator: Callable[[ParallelPair, LanguageCode], str],
    template_seed: int,
) -> IftBuild:
    """One instruction/response example per (pair, language).

    Templates are drawn uniformly by a generator seeded with template_seed,
    over tasks sorted by (pair id, language code); the output order is then
    shuffled with the same generator, so identical inputs and seed give an
    identical dataset. Pairs missing a translation are skipped and counted.
    """
    for lang in langs:
        if lang.code not in EMBEDDED_CODES:
            raise ValueError(
                f"embedded language {lang.code!r} not supported; expected {EMBEDDED_CODES}"
            )
    for pair in pairs:
        if pair.matrix_lang.code != "en":
            raise ValueError(f"pair {pair.id!r}: instruction tuning expects English matrix text")

    tasks = sorted(
        ((pair, lang) for pair in pairs for lang in langs),
        key=lambda task: (task[0].id, task[1].code),
    )
    rng = random.Random(template_seed)
    examples: list[IftExample] = []
    skipped: list[tuple[str, str]] = []
    for pair, lang in tasks:
        if lang.code not in pair.translations:
            skipped.append((pair.id, lang.code))
            continue
        template_id = rng.randint(1, 5)
        examples.append(IftExample(
            template_id=template_id,
            instruction=render_instruction(
                template_id, lang.display_name, pair.matrix_text, pair.translations[lang.code]
            ),
            response=generator(pair, lang),
            matrix_lang=pair.matrix_lang.code,
            embedded_lang=lang.code,
        ))
    rng.shuffle(examples)
    return IftBuild(examples=tuple(examples), skipped=tuple(skipped))


def write_ift_jsonl(path: str | Path, examples: Iterable[IftExample]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for ex in examples:
            handle.write(json.dumps({
                "template_id": ex.template_id,
                "instruction": ex.instruction,
                "response": ex.response,
                "matrix_lang": ex.matrix_lang,
                "embedded_lang": ex.embedded_lang,
            }, ensure_ascii=False) + "\n")


def write_training_recipe(path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(TRAINING_RECIPE, handle, indent=2, sort_keys=True)
        handle.write("\n")
