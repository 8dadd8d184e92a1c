import pytest

from cswbench.align import AlignmentLink, AlignmentSet
from cswbench.corpus import EN, ParallelPair, tokenize
from cswbench.tag import Pos, TaggedToken


def toks(text, lang=EN):
    return tokenize(text, lang)


def tagged(text, tags, lang=EN):
    tokens = tokenize(text, lang)
    assert len(tokens) == len(tags), f"{len(tokens)} tokens vs {len(tags)} tags for {text!r}"
    return [TaggedToken(tok, Pos(tag)) for tok, tag in zip(tokens, tags)]


def alignment(pair_id, lang, links, score=1.0):
    return AlignmentSet(
        pair_id=pair_id,
        embedded_lang=lang,
        links=tuple(AlignmentLink(i, j, score) for i, j in sorted(links)),
    )


@pytest.fixture
def simple_pair():
    return ParallelPair(
        id="p1",
        matrix_lang=EN,
        matrix_text="The house is red .",
        translations={"fr": "la maison est rouge ."},
    )
