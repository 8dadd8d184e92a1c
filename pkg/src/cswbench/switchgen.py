"""Switch-point selection and mechanical substitution.

Three regimes are supported. The noun-token regime switches aligned nouns
only, under two mechanically testable constraints: the aligned embedded
span must be contiguous (surface-order compatibility at the switch site)
and function words never switch, so the matrix language keeps the
grammatical frame. The ratio-token regime switches a fixed fraction of
aligned tokens at random, ignoring linguistic structure. The extreme
regime borrows nouns evenly from several embedded languages at once.
"""

from __future__ import annotations

import random
import zlib
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Mapping, Sequence

from .align import AlignmentSet, TranslationTable, align_pair, DEFAULT_LINK_THRESHOLD
from .corpus import LanguageCode, ParallelPair, Script, Token, is_punct, splice_tokens, tokenize
from .tag import Pos, TaggedToken, tag_tokens

MASK = "#######"

NOUN_TAGS = frozenset({Pos.NOUN, Pos.PROPN})

EVENNESS_WAIVED = "evenness_waived"


class Method(str, Enum):
    NOUN_TOKEN = "noun_token"
    RATIO_TOKEN = "ratio_token"
    EXTREME = "extreme"


class ResourceError(ValueError):
    """A pair lacks the translation, alignment, or tags needed to switch it."""


@dataclass(frozen=True)
class SwitchPoint:
    matrix_index: int
    embedded_lang: LanguageCode
    replacement: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.replacement:
            raise ValueError(f"switch point at {self.matrix_index} has an empty replacement")

    @property
    def replacement_text(self) -> str:
        joiner = "" if self.embedded_lang.script is Script.HAN else " "
        return joiner.join(self.replacement)


@dataclass(frozen=True)
class SwitchPlan:
    pair_id: str
    method: Method
    points: tuple[SwitchPoint, ...]
    seed: int | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        indices = [p.matrix_index for p in self.points]
        if indices != sorted(indices):
            raise ValueError("switch points must be sorted by matrix index")
        if len(set(indices)) != len(indices):
            raise ValueError("switch points must have unique matrix indices")

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(p.matrix_index for p in self.points)


@dataclass(frozen=True)
class CswInstance:
    pair_id: str
    original_text: str
    csw_text: str
    plan: SwitchPlan
    generation_mode: str  # "deterministic" or "llm_filled"


_default_stoplist: tuple[str, ...] | None = None


def default_stoplist() -> tuple[str, ...]:
    global _default_stoplist
    if _default_stoplist is None:
        ref = resources.files("cswbench").joinpath("data", "stoplist.txt")
        lines = ref.read_text(encoding="utf-8").splitlines()
        _default_stoplist = tuple(
            line.strip() for line in lines if line.strip() and not line.startswith("#")
        )
    return _default_stoplist


def stoplisted_indices(tokens: Sequence[Token], stoplist: Sequence[str]) -> set[int]:
    """Indices of tokens lying inside any stoplisted multiword expression."""
    surfaces = [t.surface.casefold() for t in tokens]
    covered: set[int] = set()
    for expr in stoplist:
        expr_tokens = expr.casefold().split()
        if not expr_tokens:
            continue
        width = len(expr_tokens)
        for start in range(len(surfaces) - width + 1):
            if surfaces[start:start + width] == expr_tokens:
                covered.update(range(start, start + width))
    return covered


def _check_alignment_bounds(
    alignment: AlignmentSet, n_matrix: int, n_embedded: int
) -> None:
    for link in alignment.links:
        if link.matrix_index >= n_matrix or link.embedded_index >= n_embedded:
            raise ValueError(
                f"pair {alignment.pair_id!r}: link {link.matrix_index}-{link.embedded_index} "
                f"out of range ({n_matrix} matrix / {n_embedded} embedded tokens)"
            )


def _contiguous_replacement(
    alignment: AlignmentSet, matrix_index: int, embedded_tokens: Sequence[Token]
) -> tuple[str, ...] | None:
    """Aligned embedded span for one matrix token, or None when absent or gapped."""
    links = alignment.links_for(matrix_index)
    if not links:
        return None
    indices = sorted(l.embedded_index for l in links)
    if indices[-1] - indices[0] + 1 != len(indices):
        return None
    return tuple(embedded_tokens[j].surface for j in indices)


def _linked_replacement(
    alignment: AlignmentSet, matrix_index: int, embedded_tokens: Sequence[Token]
) -> tuple[str, ...] | None:
    links = alignment.links_for(matrix_index)
    if not links:
        return None
    return tuple(embedded_tokens[l.embedded_index].surface for l in sorted(
        links, key=lambda l: l.embedded_index
    ))


def select_noun_switch_points(
    tagged: Sequence[TaggedToken],
    alignment: AlignmentSet,
    embedded_tokens: Sequence[Token],
    stoplist: Sequence[str] | None = None,
    *,
    include_proper: bool = True,
    pair_id: str | None = None,
) -> SwitchPlan:
    """Plan noun switches: tagged NOUN (or PROPN), aligned to a contiguous
    embedded span, and not inside a stoplisted expression."""
    if stoplist is None:
        stoplist = default_stoplist()
    _check_alignment_bounds(alignment, len(tagged), len(embedded_tokens))
    eligible_tags = NOUN_TAGS if include_proper else frozenset({Pos.NOUN})
    blocked = stoplisted_indices([t.token for t in tagged], stoplist)
    points = []
    for i, tt in enumerate(tagged):
        if tt.pos not in eligible_tags or i in blocked:
            continue
        replacement = _contiguous_replacement(alignment, i, embedded_tokens)
        if replacement is None:
            continue
        points.append(SwitchPoint(i, alignment.embedded_lang, replacement))
    return SwitchPlan(
        pair_id=pair_id if pair_id is not None else alignment.pair_id,
        method=Method.NOUN_TOKEN,
        points=tuple(points),
    )


def select_ratio_switch_points(
    tokens: Sequence[Token],
    alignment: AlignmentSet,
    ratio: float,
    seed: int,
    *,
    embedded_tokens: Sequence[Token],
    pair_id: str | None = None,
) -> SwitchPlan:
    """Plan random switches over aligned, non-punctuation tokens.

    The count is max(1, round(ratio * candidates)) whenever any candidate
    exists; rounding is Python's round (half to even, which the default
    0.2 ratio never hits on integer candidate counts).
    """
    if not 0 < ratio <= 1:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    _check_alignment_bounds(alignment, len(tokens), len(embedded_tokens))
    linked = alignment.matrix_indices()
    candidates = [
        t.index for t in tokens if t.index in linked and not is_punct(t.surface)
    ]
    if not candidates:
        return SwitchPlan(
            pair_id=pair_id if pair_id is not None else alignment.pair_id,
            method=Method.RATIO_TOKEN,
            points=(),
            seed=seed,
        )
    k = max(1, round(ratio * len(candidates)))
    chosen = sorted(random.Random(seed).sample(candidates, k))
    points = tuple(
        SwitchPoint(i, alignment.embedded_lang, _linked_replacement(alignment, i, embedded_tokens))
        for i in chosen
    )
    return SwitchPlan(
        pair_id=pair_id if pair_id is not None else alignment.pair_id,
        method=Method.RATIO_TOKEN,
        points=points,
        seed=seed,
    )


def select_extreme_switch_points(
    tagged: Sequence[TaggedToken],
    alignments: Mapping[str, AlignmentSet],
    langs: Sequence[LanguageCode],
    stoplist: Sequence[str] | None = None,
    *,
    embedded_tokens: Mapping[str, Sequence[Token]],
    include_proper: bool = True,
    pair_id: str | None = None,
) -> SwitchPlan:
    """Plan noun switches borrowing evenly from several embedded languages.

    Eligible positions are walked in matrix order; each takes the eligible
    language with the lowest running count (ties to the earlier language in
    the given order), which reduces to round-robin under full eligibility.
    When fewer eligible positions than languages exist, or eligibility
    forces an imbalance beyond one, the plan is flagged instead of failing.
    """
    if len(langs) < 2:
        raise ValueError("extreme switching needs at least 2 embedded languages")
    if stoplist is None:
        stoplist = default_stoplist()
    per_lang: dict[str, dict[int, tuple[str, ...]]] = {}
    for lang in langs:
        if lang.code not in alignments:
            raise ValueError(f"no alignment provided for embedded language {lang.code!r}")
        plan = select_noun_switch_points(
            tagged,
            alignments[lang.code],
            embedded_tokens[lang.code],
            stoplist,
            include_proper=include_proper,
            pair_id=pair_id,
        )
        per_lang[lang.code] = {p.matrix_index: p.replacement for p in plan.points}

    positions = sorted({i for repl in per_lang.values() for i in repl})
    counts = {lang.code: 0 for lang in langs}
    points = []
    for i in positions:
        candidates = [lang for lang in langs if i in per_lang[lang.code]]
        chosen = min(
            candidates, key=lambda lang: (counts[lang.code], langs.index(lang))
        )
        counts[chosen.code] += 1
        points.append(SwitchPoint(i, chosen, per_lang[chosen.code][i]))

    flags: tuple[str, ...] = ()
    if positions:
        spread = max(counts.values()) - min(counts.values())
        if len(positions) < len(langs) or spread > 1:
            flags = (EVENNESS_WAIVED,)
    elif len(positions) < len(langs):
        flags = (EVENNESS_WAIVED,)
    resolved_pair_id = pair_id
    if resolved_pair_id is None:
        resolved_pair_id = alignments[langs[0].code].pair_id
    return SwitchPlan(
        pair_id=resolved_pair_id,
        method=Method.EXTREME,
        points=tuple(points),
        flags=flags,
    )


def apply_switch_plan(
    text: str, tokens: Sequence[Token], plan: SwitchPlan
) -> CswInstance:
    """Substitute planned tokens mechanically; everything else stays byte-identical."""
    for point in plan.points:
        if not 0 <= point.matrix_index < len(tokens):
            raise ValueError(
                f"switch point index {point.matrix_index} out of range for {len(tokens)} tokens"
            )
    replacements = {p.matrix_index: p.replacement_text for p in plan.points}
    return CswInstance(
        pair_id=plan.pair_id,
        original_text=text,
        csw_text=splice_tokens(text, tokens, replacements),
        plan=plan,
        generation_mode="deterministic",
    )


def mask_placeholders(text: str, tokens: Sequence[Token], plan: SwitchPlan) -> str:
    """Replace each planned token with the literal placeholder mask."""
    return splice_tokens(text, tokens, {p.matrix_index: MASK for p in plan.points})


def derive_seed(base_seed: int | None, key: str) -> int:
    """Stable per-item seed from a base seed and a string key."""
    base = 0 if base_seed is None else base_seed
    return zlib.crc32(f"{base}:{key}".encode("utf-8"))


def generate_instance(
    pair: ParallelPair,
    embedded_langs: Sequence[LanguageCode],
    method: Method | str,
    *,
    alignments: Mapping[str, AlignmentSet] | None = None,
    tables: Mapping[str, TranslationTable] | None = None,
    tags: Sequence[Pos] | None = None,
    ratio: float = 0.2,
    seed: int | None = None,
    threshold: float = DEFAULT_LINK_THRESHOLD,
    stoplist: Sequence[str] | None = None,
    include_proper: bool = True,
) -> CswInstance:
    """Run the deterministic pipeline for one pair: tokenize, tag, align, plan, apply.

    Alignments come from the supplied mapping (embedded language code to
    AlignmentSet) or, failing that, from that language's translation table.
    Tags come from the supplied list or the built-in English tagger.
    Missing translations or alignment resources raise ResourceError so
    callers can skip and report rather than fail the whole run.
    """
    method = Method(method)
    if method is Method.EXTREME:
        if len(embedded_langs) < 2:
            raise ValueError("extreme switching needs at least 2 embedded languages")
    elif len(embedded_langs) != 1:
        raise ValueError(f"{method.value} switching uses exactly one embedded language")

    tokens = tokenize(pair.matrix_text, pair.matrix_lang)

    def _alignment_for(lang: LanguageCode) -> tuple[AlignmentSet, list[Token]]:
        if lang.code not in pair.translations:
            raise ResourceError(f"pair {pair.id!r}: no {lang.code!r} translation")
        embedded = tokenize(pair.translations[lang.code], lang)
        if alignments is not None and lang.code in alignments:
            return alignments[lang.code], embedded
        if tables is not None and lang.code in tables:
            return (
                align_pair(
                    tokens, embedded, tables[lang.code],
                    pair_id=pair.id, embedded_lang=lang, threshold=threshold,
                ),
                embedded,
            )
        raise ResourceError(f"pair {pair.id!r}: no alignment available for {lang.code!r}")

    def _tagged() -> list[TaggedToken]:
        if tags is not None:
            if len(tags) != len(tokens):
                raise ValueError(
                    f"pair {pair.id!r}: {len(tags)} external tags for {len(tokens)} tokens"
                )
            return [TaggedToken(tok, pos) for tok, pos in zip(tokens, tags)]
        return tag_tokens(tokens, pair.matrix_lang)

    if method is Method.NOUN_TOKEN:
        alignment, embedded = _alignment_for(embedded_langs[0])
        plan = select_noun_switch_points(
            _tagged(), alignment, embedded, stoplist,
            include_proper=include_proper, pair_id=pair.id,
        )
    elif method is Method.RATIO_TOKEN:
        alignment, embedded = _alignment_for(embedded_langs[0])
        plan = select_ratio_switch_points(
            tokens, alignment, ratio, derive_seed(seed, pair.id),
            embedded_tokens=embedded, pair_id=pair.id,
        )
    else:
        align_map: dict[str, AlignmentSet] = {}
        embedded_map: dict[str, Sequence[Token]] = {}
        for lang in embedded_langs:
            alignment, embedded = _alignment_for(lang)
            align_map[lang.code] = alignment
            embedded_map[lang.code] = embedded
        plan = select_extreme_switch_points(
            _tagged(), align_map, list(embedded_langs), stoplist,
            embedded_tokens=embedded_map, include_proper=include_proper, pair_id=pair.id,
        )

    return apply_switch_plan(pair.matrix_text, tokens, plan)


def instance_to_dict(instance: CswInstance) -> dict:
    """JSON-ready form matching the CSW output interface."""
    return {
        "pair_id": instance.pair_id,
        "method": instance.plan.method.value,
        "original_text": instance.original_text,
        "csw_text": instance.csw_text,
        "points": [
            {"i": p.matrix_index, "lang": p.embedded_lang.code, "repl": p.replacement_text}
            for p in instance.plan.points
        ],
        "seed": instance.plan.seed,
        "mode": instance.generation_mode,
    }
