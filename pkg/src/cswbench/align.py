"""Word alignment: IBM Model 1 training, greedy link extraction, Dice scores,
and ingestion of externally computed Pharaoh-format alignments."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import LanguageCode, ParallelPair, Token, _read_jsonl, language, tokenize

DEFAULT_LINK_THRESHOLD = 0.3


@dataclass(frozen=True)
class AlignmentLink:
    matrix_index: int
    embedded_index: int
    score: float

    def __post_init__(self) -> None:
        if self.matrix_index < 0 or self.embedded_index < 0:
            raise ValueError("alignment indices must be non-negative")
        if not math.isfinite(self.score):
            raise ValueError("alignment score must be finite")


@dataclass(frozen=True)
class AlignmentSet:
    pair_id: str
    embedded_lang: LanguageCode
    links: tuple[AlignmentLink, ...]

    def __post_init__(self) -> None:
        keys = [(l.matrix_index, l.embedded_index) for l in self.links]
        if len(set(keys)) != len(keys):
            raise ValueError(f"pair {self.pair_id!r}: duplicate alignment link")
        if keys != sorted(keys):
            raise ValueError(f"pair {self.pair_id!r}: links must be sorted by matrix index")

    def links_for(self, matrix_index: int) -> tuple[AlignmentLink, ...]:
        return tuple(l for l in self.links if l.matrix_index == matrix_index)

    def matrix_indices(self) -> set[int]:
        return {l.matrix_index for l in self.links}


def _surfaces(tokens: Sequence[Token | str]) -> list[str]:
    return [t.surface if isinstance(t, Token) else t for t in tokens]


@dataclass
class TranslationTable:
    """Lexical translation probabilities p(embedded word | matrix word).

    Keys are casefolded; for each matrix word the probabilities over its
    co-occurring embedded words sum to one.
    """

    probs: dict[tuple[str, str], float]
    log_likelihoods: list[float] = field(default_factory=list)

    def prob(self, matrix_word: str, embedded_word: str) -> float:
        return self.probs.get((matrix_word.casefold(), embedded_word.casefold()), 0.0)


def train_ibm1(
    corpus: Sequence[tuple[Sequence[Token | str], Sequence[Token | str]]],
    iterations: int,
) -> TranslationTable:
    """Fit IBM Model 1 by EM over (matrix tokens, embedded tokens) pairs.

    Probabilities are initialized uniformly over each matrix word's
    co-occurring embedded vocabulary. The per-iteration corpus
    log-likelihood (uniform alignment prior) is recorded and is
    non-decreasing by the usual EM guarantee.
    """
    if not corpus:
        raise ValueError("training corpus must be non-empty")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")

    sentences: list[tuple[list[str], list[str]]] = []
    for n, (matrix, embedded) in enumerate(corpus):
        m_words = [w.casefold() for w in _surfaces(matrix)]
        e_words = [w.casefold() for w in _surfaces(embedded)]
        if not m_words or not e_words:
            raise ValueError(f"pair {n} has an empty token sequence")
        sentences.append((m_words, e_words))

    cooc: dict[str, set[str]] = defaultdict(set)
    for m_words, e_words in sentences:
        for m in set(m_words):
            cooc[m].update(e_words)
    probs = {
        (m, e): 1.0 / len(targets) for m, targets in cooc.items() for e in targets
    }

    history: list[float] = []
    for _ in range(iterations):
        counts: dict[tuple[str, str], float] = defaultdict(float)
        totals: dict[str, float] = defaultdict(float)
        log_likelihood = 0.0
        for m_words, e_words in sentences:
            for e in e_words:
                denom = sum(probs.get((m, e), 0.0) for m in m_words)
                log_likelihood += math.log(denom / len(m_words))
                for m in m_words:
                    p = probs.get((m, e), 0.0)
                    if p:
                        share = p / denom
                        counts[(m, e)] += share
                        totals[m] += share
        history.append(log_likelihood)
        probs = {(m, e): c / totals[m] for (m, e), c in counts.items()}

    return TranslationTable(probs=probs, log_likelihoods=history)


def align_pair(
    matrix_tokens: Sequence[Token | str],
    embedded_tokens: Sequence[Token | str],
    table: TranslationTable,
    *,
    pair_id: str = "",
    embedded_lang: LanguageCode,
    threshold: float = DEFAULT_LINK_THRESHOLD,
) -> AlignmentSet:
    """Link each matrix token to its argmax-probability embedded token.

    A link is emitted only when the probability exceeds the threshold;
    ties break to the lowest embedded index. Tokens with no qualifying
    candidate simply have no link.
    """
    m_words = _surfaces(matrix_tokens)
    e_words = _surfaces(embedded_tokens)
    links = []
    for i, m in enumerate(m_words):
        best_j = None
        best_p = threshold
        for j, e in enumerate(e_words):
            p = table.prob(m, e)
            if p > best_p:
                best_j, best_p = j, p
        if best_j is not None:
            links.append(AlignmentLink(i, best_j, best_p))
    return AlignmentSet(pair_id=pair_id, embedded_lang=embedded_lang, links=tuple(links))


def dice_scores(
    corpus: Sequence[tuple[Sequence[Token | str], Sequence[Token | str]]],
) -> dict[tuple[str, str], float]:
    """Sentence-level Dice coefficients 2*cooc(x,y) / (count(x) + count(y))."""
    if not corpus:
        raise ValueError("corpus must be non-empty")
    m_counts: dict[str, int] = defaultdict(int)
    e_counts: dict[str, int] = defaultdict(int)
    cooc: dict[tuple[str, str], int] = defaultdict(int)
    for matrix, embedded in corpus:
        m_set = {w.casefold() for w in _surfaces(matrix)}
        e_set = {w.casefold() for w in _surfaces(embedded)}
        for m in m_set:
            m_counts[m] += 1
        for e in e_set:
            e_counts[e] += 1
        for m in m_set:
            for e in e_set:
                cooc[(m, e)] += 1
    return {
        (m, e): 2.0 * c / (m_counts[m] + e_counts[e]) for (m, e), c in cooc.items()
    }


def parse_pharaoh(links: str) -> list[tuple[int, int]]:
    """Parse space-separated "i-j" link strings; empty input yields no links."""
    out = []
    for piece in links.split():
        left, sep, right = piece.partition("-")
        if not sep or not left.isdigit() or not right.isdigit():
            raise ValueError(f"malformed Pharaoh link {piece!r}")
        out.append((int(left), int(right)))
    return out


def load_external_alignments(
    path: str | Path,
    pairs: Mapping[str, ParallelPair] | None = None,
) -> list[AlignmentSet]:
    """Read alignment JSONL ({"pair_id", "embedded_lang", "links": "0-0 1-2"}).

    When the referenced pairs are supplied, link indices are validated
    against the token counts of the matrix text and the embedded-language
    translation.
    """
    out: list[AlignmentSet] = []
    for lineno, obj in _read_jsonl(path):
        for key in ("pair_id", "embedded_lang", "links"):
            if key not in obj:
                raise ValueError(f"{path}: line {lineno}: missing field {key!r}")
        pair_id = str(obj["pair_id"])
        lang = language(obj["embedded_lang"])
        try:
            raw = parse_pharaoh(obj["links"])
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}") from exc
        if pairs is not None and pair_id in pairs:
            pair = pairs[pair_id]
            n_matrix = len(tokenize(pair.matrix_text, pair.matrix_lang))
            if lang.code not in pair.translations:
                raise ValueError(f"pair {pair_id!r}: no {lang.code!r} translation to align against")
            n_embedded = len(tokenize(pair.translations[lang.code], lang))
            for i, j in raw:
                if i >= n_matrix or j >= n_embedded:
                    raise ValueError(
                        f"pair {pair_id!r}: link {i}-{j} out of range "
                        f"({n_matrix} matrix / {n_embedded} embedded tokens)"
                    )
        links = tuple(
            AlignmentLink(i, j, 1.0) for i, j in sorted(set(raw))
        )
        out.append(AlignmentSet(pair_id=pair_id, embedded_lang=lang, links=links))
    return out
