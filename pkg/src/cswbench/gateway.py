"""LLM service client: prompt rendering, the two-step masked generation
procedure, pairwise judging, and mitigation-prompt prepending.

The wire contract is the prevailing hosted chat shape: POST a JSON body
{model, messages, temperature, max_tokens} with a bearer token, read
choices[0].message.content. Model identity is just a config string.
"""

from __future__ import annotations

import difflib
import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol, Sequence

import requests

from .corpus import BenchmarkItem, LanguageCode, ParallelPair, format_item
from .switchgen import MASK, CswInstance, Method, SwitchPlan, SwitchPoint

logger = logging.getLogger(__name__)

API_KEY_ENV = "CSW_LLM_API_KEY"

TEMPLATES: dict[str, str] = {
    "identify_nouns": """You are an expert linguist and code-switching analyst. Based on the Equivalence
Constraint Theory and the Matrix Language Frame model, identify nouns in the
input English sentence that would serve as appropriate code-switching points.

- Input variable: text (a single English sentence)
- Task: Find every noun (as a free content morpheme) that can be switched under
  the theories above.
- Transformation: Replace each identified noun in the sentence with "#######".
- Output: Return only the transformed sentence with nouns replaced by "#######".
- The substituted words blend seamlessly into the text, following natural
  bilingual speech patterns.
- Adjust the target language words as needed (e.g., inflection, gender,
  number) so that the text remains syntactically correct.
- Ensure that nouns in common expressions are not code-switched.
- Don't return any summary or introduction, just the processed text

[English text]
{text}""",
    "fill_placeholders": """You will be given a pair of parallel texts in English and {target_language}.

Your goal is to produce a code-switched version of the English text by replacing
each of the hashtag-sequences (#######) in the English text with their
{target_language} counterparts from the {target_language} text, ensuring that:
- The substituted words blend seamlessly into the text, following natural
  bilingual speech patterns.
- The text should be grounded with the principles of the Equivalence Constraint
  Theory and the Matrix Language Frame model.
- Adjust the target language words as needed (e.g., inflection, gender, number)
  so that the text remains syntactically correct.
- The original meaning and flow of the text are maintained.
- All the hashtag-sequences (#######) have to be replaced with text from the
  {target_language} text.
- Use only the words from the {target_language} text.
- Return only the code-switched text, without any additions or explanations.

[English text with placeholders]
{placeholder_text}

[{target_language} text]
{target_text}

[Code-switched English and {target_language}]""",
    "fill_ratio": """You will be given an English sentence with placeholders (#######) and its
parallel sentence in {target_language}.
Replace each placeholder with the corresponding segment from the
{target_language} text, ensuring:
- The inserted text matches the target-language phrasing (inflections, gender,
  number).
- The final sentence reads naturally as mixed English and {target_language}.
- Preserve the original sentence order.
Return only the filled sentence, no extra comments.

[English with placeholders]
{placeholder_text}

[{target_language} parallel text]
{target_text}

[Mixed code-switched result]""",
    "judge_pairwise": """You have two code-switched sentences, A and B, each blending English (matrix language) with {second_language}. Follow these steps and then choose the better sentence (A or B):

1. Assess Fluency: check which sentence flows most naturally, like plausible bilingual speech.
2. Assess Depth of Mixing: check which sentence meaningfully integrates both languages rather than inserting isolated tokens.
3. Assess Switch Grammar: check which sentence has grammatically valid switch points under Equivalence Constraint Theory.
4. Assess Consistency: check which sentence uses English as its grammatical frame and embeds {second_language} elements appropriately under the Matrix Language Frame model.
5. Assess Overall Coherence: check which sentence remains clear and plausible as a whole despite the language mixing.

After evaluating all five criteria, return A or B with no further explanation.

Sentences:
A: {sentence_one}
B: {sentence_two}

Output:""",
    "mitigate_belebele": (
        "You are an expert in understanding code-switched text. You will be given "
        "a passage and a question in code-switched English and {language}. You "
        "have to understand them and respond to the given question with best "
        "answer: A, B, C, or D."
    ),
    "mitigate_mmlu": (
        "You are an expert in understanding code-switched text. You will be given "
        "a question in code-switched English and {language}. You have to "
        "understand it and respond to the given question with best answer: A, B, "
        "C, or D."
    ),
    "mitigate_xnli": (
        "You are an expert in understanding code-switched text. You will be given "
        "two code-switched passages that correspond to a premise and a hypothesis "
        "in code-switched English and {language} text. You have to understand "
        "them and respond with the best answer: 0, 1, or 2."
    ),
}

_SLOT_RE = re.compile(r"\{([a-z_]+)\}")


def render(template_id: str, slots: Mapping[str, str]) -> str:
    """Fill a stored template's named slots in a single pass.

    Slot values are inserted literally (brace characters inside values are
    never re-interpreted). Missing slots raise with the slot name.
    """
    if template_id not in TEMPLATES:
        raise ValueError(f"unknown template {template_id!r}; expected one of {sorted(TEMPLATES)}")

    def _sub(match: re.Match[str]) -> str:
        name = match.group(1)
        if name not in slots:
            raise ValueError(f"template {template_id!r}: missing slot {name!r}")
        return str(slots[name])

    return _SLOT_RE.sub(_sub, TEMPLATES[template_id])


@dataclass(frozen=True)
class LlmRequest:
    model: str
    prompt: str
    temperature: float = 0.0
    max_tokens: int = 1024


@dataclass(frozen=True)
class LlmResponse:
    text: str
    latency_ms: float
    attempts: int


class LlmClient(Protocol):
    def complete(self, request: LlmRequest) -> LlmResponse: ...


class TransportError(RuntimeError):
    pass


class ResidualMaskError(RuntimeError):
    """Step 2 left placeholder masks after all retries."""

    def __init__(self, message: str, step1_text: str | None, step2_text: str | None):
        super().__init__(message)
        self.step1_text = step1_text
        self.step2_text = step2_text


class InvalidVerdictError(RuntimeError):
    pass


class StubClient:
    """In-process client for tests and offline runs; responder maps request to text."""

    def __init__(self, responder: Callable[[LlmRequest], str]):
        self.responder = responder
        self.requests: list[LlmRequest] = []

    def complete(self, request: LlmRequest) -> LlmResponse:
        self.requests.append(request)
        return LlmResponse(text=self.responder(request), latency_ms=0.0, attempts=1)


class HttpChatClient:
    """Chat-completion client with bounded concurrency, backoff, and audit logging."""

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        *,
        max_retries: int = 3,
        concurrency: int = 4,
        timeout: float = 60.0,
        backoff_base: float = 0.5,
        audit_path: str | None = None,
    ):
        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.max_retries = max_retries
        self.timeout = timeout
        self.backoff_base = backoff_base
        self.audit_path = audit_path
        self._slots = threading.BoundedSemaphore(concurrency)
        self._lock = threading.Lock()
        self.requests_sent = 0

    def _try_once(self, body: dict, headers: dict) -> tuple[bool, str | Exception]:
        """One request; returns (retriable, text-or-error)."""
        try:
            resp = requests.post(
                self.endpoint, json=body, headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            return True, exc
        if resp.status_code == 429 or resp.status_code >= 500:
            # Rate limits and server errors back off and retry.
            return True, TransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            # Other client errors will not improve on retry.
            return False, TransportError(f"HTTP {resp.status_code}")
        try:
            return False, resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            return False, TransportError(f"unexpected response shape: {exc}")

    def complete(self, request: LlmRequest) -> LlmResponse:
        body = {
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        started = time.monotonic()
        with self._slots:
            for attempt in range(1, self.max_retries + 2):
                with self._lock:
                    self.requests_sent += 1
                retriable, outcome = self._try_once(body, headers)
                if not isinstance(outcome, Exception):
                    latency_ms = (time.monotonic() - started) * 1000.0
                    self._audit(request, attempts=attempt, latency_ms=latency_ms, ok=True)
                    return LlmResponse(text=outcome, latency_ms=latency_ms, attempts=attempt)
                if retriable and attempt <= self.max_retries:
                    time.sleep(self.backoff_base * (2 ** (attempt - 1)))
                    continue
                self._audit(request, attempts=attempt, latency_ms=None, ok=False)
                raise TransportError(
                    f"request failed after {attempt} attempts: {outcome}"
                ) from outcome
        raise TransportError("request failed")  # pragma: no cover

    def _audit(self, request: LlmRequest, *, attempts: int, latency_ms: float | None, ok: bool) -> None:
        if not self.audit_path:
            return
        record = {
            "model": request.model,
            "prompt_sha256": hashlib.sha256(request.prompt.encode("utf-8")).hexdigest(),
            "latency_ms": latency_ms,
            "attempts": attempts,
            "ok": ok,
        }
        with self._lock:
            with open(self.audit_path, "a", encoding="utf-8") as handle:
                handle.write(json.dumps(record) + "\n")


def normalize_generation(raw: str, original_text: str) -> str:
    """Drop preamble lines a model may emit before the actual sentence.

    Keeps everything from the first line that carries a placeholder mask or
    shares at least half of the original text's words.
    """
    lines = [line for line in raw.splitlines() if line.strip()]
    original_words = {w.casefold() for w in original_text.split()}
    for k, line in enumerate(lines):
        if MASK in line:
            return "\n".join(lines[k:]).strip()
        if original_words:
            line_words = {w.casefold() for w in line.split()}
            if len(line_words & original_words) / len(original_words) >= 0.5:
                return "\n".join(lines[k:]).strip()
    return raw.strip()


def _mask_word_positions(words: Sequence[str]) -> list[int]:
    return [k for k, w in enumerate(words) if MASK in w]


def _map_masks_to_original(masked_words: list[str], original_words: list[str]) -> dict[int, int]:
    """Masked-word position -> original-word position, via diff opcodes."""
    mapping: dict[int, int] = {}
    matcher = difflib.SequenceMatcher(None, original_words, masked_words, autojunk=False)
    for op, i1, i2, j1, j2 in matcher.get_opcodes():
        if op != "replace":
            continue
        for offset, j in enumerate(range(j1, j2)):
            if MASK in masked_words[j]:
                mapping[j] = min(i1 + offset, i2 - 1)
    return mapping


def _map_masks_to_filled(masked_words: list[str], final_words: list[str]) -> dict[int, list[str]]:
    """Masked-word position -> the words that replaced it in the final text."""
    spans: dict[int, list[str]] = {}
    matcher = difflib.SequenceMatcher(None, masked_words, final_words, autojunk=False)
    for op, i1, i2, j1, j2 in matcher.get_opcodes():
        if op != "replace":
            continue
        block_masks = [i for i in range(i1, i2) if MASK in masked_words[i]]
        if not block_masks:
            continue
        filled = final_words[j1:j2]
        if len(block_masks) == 1:
            spans[block_masks[0]] = filled
        elif len(block_masks) == len(filled):
            for i, w in zip(block_masks, filled):
                spans[i] = [w]
        else:
            # Uneven fill: hand out one word per mask while supply lasts.
            for offset, i in enumerate(block_masks):
                if offset < len(filled):
                    spans[i] = [filled[offset]]
    return spans


def recover_plan(
    original_text: str,
    masked_text: str,
    final_text: str,
    embedded_lang: LanguageCode,
    *,
    pair_id: str = "",
    method: Method = Method.NOUN_TOKEN,
) -> SwitchPlan:
    """Best-effort switch plan for LLM-filled output.

    Positions are whitespace-word indices into the original text. Masks the
    model dropped or reworded beyond recognition are skipped with a log
    message; for well-behaved outputs every mask yields one point.
    """
    masked_words = masked_text.split()
    to_original = _map_masks_to_original(masked_words, original_text.split())
    to_filled = _map_masks_to_filled(masked_words, final_text.split())
    points: list[SwitchPoint] = []
    used: set[int] = set()
    for position in _mask_word_positions(masked_words):
        origin = to_original.get(position)
        filled = to_filled.get(position)
        if origin is None or origin in used or not filled:
            logger.debug("pair %r: could not recover mask at word %d", pair_id, position)
            continue
        used.add(origin)
        points.append(SwitchPoint(origin, embedded_lang, tuple(filled)))
    points.sort(key=lambda p: p.matrix_index)
    return SwitchPlan(pair_id=pair_id, method=method, points=tuple(points))


def llm_fill_masks(
    pair: ParallelPair,
    embedded_lang: LanguageCode,
    masked_text: str,
    client: LlmClient,
    *,
    model: str = "default",
    template_id: str = "fill_ratio",
    method: Method = Method.RATIO_TOKEN,
    max_retries: int = 2,
    temperature: float = 0.0,
    max_tokens: int = 1024,
) -> CswInstance:
    """Fill pre-masked text via the service; retry until no masks remain."""
    if embedded_lang.code not in pair.translations:
        raise ValueError(f"pair {pair.id!r}: no {embedded_lang.code!r} translation")
    prompt = render(template_id, {
        "target_language": embedded_lang.display_name,
        "placeholder_text": masked_text,
        "target_text": pair.translations[embedded_lang.code],
    })
    filled = None
    for _ in range(max_retries + 1):
        response = client.complete(LlmRequest(model, prompt, temperature, max_tokens))
        filled = normalize_generation(response.text, pair.matrix_text)
        if filled and MASK not in filled:
            plan = recover_plan(
                pair.matrix_text, masked_text, filled, embedded_lang,
                pair_id=pair.id, method=method,
            )
            return CswInstance(pair.id, pair.matrix_text, filled, plan, "llm_filled")
    raise ResidualMaskError(
        f"pair {pair.id!r}: placeholder masks remained after {max_retries + 1} attempts",
        masked_text,
        filled,
    )


def llm_generate_csw(
    pair: ParallelPair,
    embedded_lang: LanguageCode,
    client: LlmClient,
    *,
    model: str = "default",
    max_retries: int = 2,
    temperature: float = 0.0,
    max_tokens: int = 1024,
) -> CswInstance:
    """Two-step generation: the service masks switchable nouns, then fills them.

    The steps are independent messages; step 2 sees only the masked text and
    the translation, never the step-1 prompt. Each retry reruns both steps,
    so the client sees at most 2 * (1 + max_retries) requests.
    """
    if embedded_lang.code not in pair.translations:
        raise ValueError(f"pair {pair.id!r}: no {embedded_lang.code!r} translation")
    target_text = pair.translations[embedded_lang.code]
    step1_text = step2_text = None
    for _ in range(max_retries + 1):
        step1 = client.complete(LlmRequest(
            model, render("identify_nouns", {"text": pair.matrix_text}),
            temperature, max_tokens,
        ))
        step1_text = normalize_generation(step1.text, pair.matrix_text)
        step2 = client.complete(LlmRequest(
            model,
            render("fill_placeholders", {
                "target_language": embedded_lang.display_name,
                "placeholder_text": step1_text,
                "target_text": target_text,
            }),
            temperature, max_tokens,
        ))
        step2_text = normalize_generation(step2.text, pair.matrix_text)
        if step2_text and MASK not in step2_text:
            plan = recover_plan(
                pair.matrix_text, step1_text, step2_text, embedded_lang,
                pair_id=pair.id, method=Method.NOUN_TOKEN,
            )
            return CswInstance(pair.id, pair.matrix_text, step2_text, plan, "llm_filled")
    raise ResidualMaskError(
        f"pair {pair.id!r}: placeholder masks remained after {max_retries + 1} attempts",
        step1_text,
        step2_text,
    )


_VERDICT_RE = re.compile(r"\b([ab])\b")


def _extract_verdict(text: str) -> str | None:
    match = _VERDICT_RE.search(text.strip().casefold())
    return match.group(1).upper() if match else None


def judge_pair(
    sentence_a: str,
    sentence_b: str,
    embedded_lang: LanguageCode,
    client: LlmClient,
    flip: bool = False,
    *,
    model: str = "default",
    max_retries: int = 2,
    max_tokens: int = 16,
) -> str:
    """Blind pairwise verdict, "A" or "B", in terms of the caller's arguments.

    With flip=True the sentences are presented in swapped positions and the
    verdict is un-swapped before returning, so callers can control for
    position bias by judging each pair both ways.
    """
    if not sentence_a or not sentence_b:
        raise ValueError("both sentences must be non-empty")
    one, two = (sentence_b, sentence_a) if flip else (sentence_a, sentence_b)
    prompt = render("judge_pairwise", {
        "second_language": embedded_lang.display_name,
        "sentence_one": one,
        "sentence_two": two,
    })
    for _ in range(max_retries + 1):
        response = client.complete(LlmRequest(model, prompt, 0.0, max_tokens))
        verdict = _extract_verdict(response.text)
        if verdict is not None:
            if flip:
                return "B" if verdict == "A" else "A"
            return verdict
    raise InvalidVerdictError(
        f"judge returned neither A nor B after {max_retries + 1} attempts"
    )


def prepend_mitigation(item: BenchmarkItem, embedded_lang: LanguageCode) -> str:
    """Return the item's formatted text with the task's mitigation instruction on top."""
    template_id = f"mitigate_{item.benchmark_id}"
    if template_id not in TEMPLATES:
        raise ValueError(f"no mitigation template for benchmark {item.benchmark_id!r}")
    header = render(template_id, {"language": embedded_lang.display_name})
    return header + "\n" + format_item(item)
