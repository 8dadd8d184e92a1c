"""Aggregate pairwise judge verdicts into preference rates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import LanguageCode
from .gateway import LlmClient, judge_pair

VERDICTS = ("A", "B", "tie")


@dataclass(frozen=True)
class PreferenceReport:
    config_a_name: str
    config_b_name: str
    embedded_lang: str | None
    n_total: int
    n_a: int
    n_b: int
    n_tie: int
    rate_a: float | None
    rate_b: float | None

    def __post_init__(self) -> None:
        if self.n_a + self.n_b + self.n_tie != self.n_total:
            raise ValueError("verdict counts do not sum to the total")
        if self.n_a + self.n_b > 0:
            if self.rate_a is None or self.rate_b is None:
                raise ValueError("rates must be set when any pair was decided")
            if abs(self.rate_a + self.rate_b - 100.0) > 0.1:
                raise ValueError("rates must sum to 100 over decided pairs")

    @property
    def rates_defined(self) -> bool:
        return self.rate_a is not None

    def to_dict(self, config_hash: str | None = None) -> dict:
        out = {
            "config_a_name": self.config_a_name,
            "config_b_name": self.config_b_name,
            "embedded_lang": self.embedded_lang,
            "n_total": self.n_total,
            "n_a": self.n_a,
            "n_b": self.n_b,
            "n_tie": self.n_tie,
            "rate_a": self.rate_a,
            "rate_b": self.rate_b,
        }
        if config_hash is not None:
            out["config_hash"] = config_hash
        return out


def aggregate_verdicts(
    verdicts: Sequence[Mapping[str, str]],
    *,
    config_a_name: str = "A",
    config_b_name: str = "B",
    embedded_lang: str | None = None,
) -> PreferenceReport:
    """Fold {"pair_id", "verdict"} records into counts and preference rates.

    Rates are percentages over decided (non-tie) pairs; with no decided
    pairs they are left unset, which callers should treat as a degenerate
    all-tie comparison.
    """
    if not verdicts:
        raise ValueError("verdict list must be non-empty")
    counts = {"A": 0, "B": 0, "tie": 0}
    for record in verdicts:
        verdict = record["verdict"]
        if verdict not in counts:
            raise ValueError(f"pair {record.get('pair_id')!r}: unknown verdict {verdict!r}")
        counts[verdict] += 1
    decided = counts["A"] + counts["B"]
    rate_a = 100.0 * counts["A"] / decided if decided else None
    rate_b = 100.0 * counts["B"] / decided if decided else None
    return PreferenceReport(
        config_a_name=config_a_name,
        config_b_name=config_b_name,
        embedded_lang=embedded_lang,
        n_total=len(verdicts),
        n_a=counts["A"],
        n_b=counts["B"],
        n_tie=counts["tie"],
        rate_a=rate_a,
        rate_b=rate_b,
    )


def judge_with_flip(
    sentence_a: str,
    sentence_b: str,
    embedded_lang: LanguageCode,
    client: LlmClient,
    **judge_kwargs,
) -> str:
    """Judge one pair in both presentation orders; disagreement counts as a tie."""
    straight = judge_pair(sentence_a, sentence_b, embedded_lang, client, flip=False, **judge_kwargs)
    flipped = judge_pair(sentence_a, sentence_b, embedded_lang, client, flip=True, **judge_kwargs)
    return straight if straight == flipped else "tie"


def run_comparison(
    dataset: Sequence[tuple[str, str]],
    embedded_lang: LanguageCode,
    client: LlmClient,
    sample_size: int,
    *,
    config_a_name: str = "A",
    config_b_name: str = "B",
    **judge_kwargs,
) -> PreferenceReport:
    """Judge the first sample_size pairs with the flip protocol and aggregate."""
    if len(dataset) < sample_size:
        raise ValueError(
            f"dataset has {len(dataset)} pairs but sample_size is {sample_size}"
        )
    verdicts = []
    for i, (sentence_a, sentence_b) in enumerate(dataset[:sample_size]):
        try:
            verdict = judge_with_flip(sentence_a, sentence_b, embedded_lang, client, **judge_kwargs)
        except RuntimeError as exc:
            raise RuntimeError(f"judging failed on pair {i}: {exc}") from exc
        verdicts.append({"pair_id": str(i), "verdict": verdict})
    return aggregate_verdicts(
        verdicts,
        config_a_name=config_a_name,
        config_b_name=config_b_name,
        embedded_lang=embedded_lang.code,
    )
