"""Part-of-speech tags for matrix-language tokens.

The built-in tagger covers English only: closed-class word lists plus a
shipped frequency lexicon and a few suffix/capitalization heuristics.
Only noun identification quality matters downstream, so unknown lowercase
words default to NOUN. Other matrix languages must supply external tags.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import LanguageCode, ParallelPair, Token, _read_jsonl, is_punct, tokenize

logger = logging.getLogger(__name__)


class Pos(str, Enum):
    NOUN = "NOUN"
    PROPN = "PROPN"
    VERB = "VERB"
    ADJ = "ADJ"
    DET = "DET"
    PRON = "PRON"
    ADP = "ADP"
    PUNCT = "PUNCT"
    NUM = "NUM"
    OTHER = "OTHER"


@dataclass(frozen=True)
class TaggedToken:
    token: Token
    pos: Pos


class UnsupportedLanguageError(ValueError):
    pass


_DETERMINERS = {
    "the", "a", "an", "this", "that", "these", "those", "each", "every",
    "some", "any", "no", "all", "both", "either", "neither", "another", "such",
}

_PRONOUNS = {
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us",
    "them", "mine", "yours", "his", "hers", "ours", "theirs", "my", "your",
    "its", "our", "their", "who", "whom", "whose", "which", "what",
    "someone", "anyone", "everyone", "nobody", "somebody", "anybody",
    "something", "anything", "everything", "nothing", "myself", "yourself",
    "himself", "herself", "itself", "ourselves", "yourselves", "themselves",
}

_ADPOSITIONS = {
    "in", "on", "at", "by", "for", "with", "about", "against", "between",
    "into", "through", "during", "before", "after", "above", "below", "to",
    "from", "up", "down", "under", "over", "of", "off", "near", "across",
    "behind", "beyond", "along", "around", "upon", "within", "without",
    "toward", "towards", "onto", "via", "per", "despite", "among", "amid",
    "beside", "besides", "outside", "inside", "until", "since",
}

_AUXILIARIES = {
    "is", "am", "are", "was", "were", "be", "been", "being", "do", "does",
    "did", "have", "has", "had", "will", "would", "can", "could", "shall",
    "should", "may", "might", "must", "ought",
}

# Conjunctions, particles, and negation fall outside the closed POS set.
_OTHER_CLOSED = {
    "and", "or", "but", "nor", "so", "yet", "because", "although", "though",
    "while", "whereas", "if", "unless", "when", "whenever", "where",
    "wherever", "than", "whether", "as", "not", "n't", "there", "then",
    "yes", "please",
}

_NUMBER_RE = re.compile(r"[0-9][0-9,.%\-/]*")

_LEXICON_FILE = "en_tags.tsv"
_builtin_lexicon: dict[str, Pos] | None = None


def load_lexicon(path: str | Path) -> dict[str, Pos]:
    """Read a word<TAB>POS lexicon file (lowercased words, closed POS set)."""
    lexicon: dict[str, Pos] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            try:
                word, pos = line.split("\t")
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: expected word<TAB>POS") from exc
            try:
                lexicon[word.casefold()] = Pos(pos)
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: unknown POS {pos!r}") from exc
    return lexicon


def _default_lexicon() -> dict[str, Pos]:
    global _builtin_lexicon
    if _builtin_lexicon is None:
        ref = resources.files("cswbench").joinpath("data", _LEXICON_FILE)
        with resources.as_file(ref) as path:
            _builtin_lexicon = load_lexicon(path)
    return _builtin_lexicon


def _tag_one(surface: str, index: int, lexicon: Mapping[str, Pos]) -> Pos:
    if is_punct(surface):
        return Pos.PUNCT
    if _NUMBER_RE.fullmatch(surface):
        return Pos.NUM
    lower = surface.casefold()
    if lower in _DETERMINERS:
        return Pos.DET
    if lower in _PRONOUNS:
        return Pos.PRON
    if lower in _ADPOSITIONS:
        return Pos.ADP
    if lower in _AUXILIARIES:
        return Pos.VERB
    if lower in _OTHER_CLOSED:
        return Pos.OTHER
    if index > 0 and surface[:1].isupper():
        return Pos.PROPN
    if lower in lexicon:
        return lexicon[lower]
    if lower.endswith(("tion", "ness", "ment")):
        return Pos.NOUN
    if lower.endswith("ly"):
        return Pos.OTHER
    if surface[:1].isupper():
        return Pos.PROPN
    return Pos.NOUN


def tag_tokens(
    tokens: Sequence[Token],
    lang: LanguageCode,
    lexicon: Mapping[str, Pos] | None = None,
) -> list[TaggedToken]:
    """Tag tokens with the built-in English tagger. Deterministic, order preserving."""
    if lang.code != "en":
        raise UnsupportedLanguageError(
            f"built-in tagging supports English only, not {lang.code!r}; "
            "supply external annotations via load_external_tags()"
        )
    if lexicon is None:
        lexicon = _default_lexicon()
    return [TaggedToken(tok, _tag_one(tok.surface, tok.index, lexicon)) for tok in tokens]


def load_external_tags(
    path: str | Path,
    pairs: Mapping[str, ParallelPair] | None = None,
) -> dict[str, list[Pos]]:
    """Read per-pair POS annotations ({"pair_id", "pos": ["DET", ...]}).

    Tags outside the closed set map to OTHER with a logged warning. When
    the referenced pairs are supplied, tag counts are validated against
    the matrix-text token counts.
    """
    out: dict[str, list[Pos]] = {}
    for lineno, obj in _read_jsonl(path):
        for key in ("pair_id", "pos"):
            if key not in obj:
                raise ValueError(f"{path}: line {lineno}: missing field {key!r}")
        pair_id = str(obj["pair_id"])
        tags = []
        for raw in obj["pos"]:
            try:
                tags.append(Pos(raw))
            except ValueError:
                logger.warning("pair %r: unknown tag %r mapped to OTHER", pair_id, raw)
                tags.append(Pos.OTHER)
        if pairs is not None and pair_id in pairs:
            pair = pairs[pair_id]
            n_tokens = len(tokenize(pair.matrix_text, pair.matrix_lang))
            if len(tags) != n_tokens:
                raise ValueError(
                    f"pair {pair_id!r}: {len(tags)} tags for {n_tokens} tokens"
                )
        out[pair_id] = tags
    return out
