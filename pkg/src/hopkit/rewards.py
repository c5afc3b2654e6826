"""Rule-based rewards over tagged model completions.

A well-formed completion is one ``<reasoning>...</reasoning>`` block
followed by one ``<answer>...</answer>`` block whose body carries a
``Final answer:`` line and a ``Supporting passages:`` line. Scoring is
the sum of three components: an exact-match answer reward, a citation
reward (recall minus a penalty per incorrect citation), and a formatting
reward/penalty. The scorer is pure and safe to call from many threads;
training loops score whole rollout groups in parallel.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .textnorm import normalize_answer, normalize_title

# Violation kinds recorded by the parser.
MISSING_TAG = "missing_tag"
DUPLICATE_TAG = "duplicate_tag"
TAG_ORDER = "tag_order"
MISSING_FINAL_ANSWER_HEADING = "missing_final_answer_heading"
MISSING_SUPPORTING_PASSAGES_HEADING = "missing_supporting_passages_heading"
TRAILING_TEXT = "trailing_text"
EXCESSIVE_LENGTH = "excessive_length"
NON_ENGLISH_CHARS = "non_english_chars"

VIOLATIONS = frozenset({
    MISSING_TAG, DUPLICATE_TAG, TAG_ORDER, MISSING_FINAL_ANSWER_HEADING,
    MISSING_SUPPORTING_PASSAGES_HEADING, TRAILING_TEXT, EXCESSIVE_LENGTH,
    NON_ENGLISH_CHARS,
})

_FINAL_ANSWER_HEADING = "Final answer:"
_SUPPORTING_HEADING = "Supporting passages:"

# Characters outside Basic Latin, Latin-1 Supplement, and General
# Punctuation count as non-English output.
_NON_ENGLISH = re.compile("[^\\x00-\\xff\\u2000-\\u206f]")
_NON_WS = re.compile(r"\S")


@dataclass(frozen=True)
class RewardConfig:
    gamma_answer: float = 5.0
    gamma_correct: float = 5.0
    gamma_incorrect: float = 2.0
    gamma_format: float = 1.0
    penalty_p: float = 1.0
    enable_answer: bool = True
    enable_citation: bool = True
    max_completion_chars: int = 8192
    # Zero the answer/citation components whenever formatting is invalid,
    # instead of scoring the best-effort parse.
    strict_format: bool = False

    def __post_init__(self):
        for name in ("gamma_answer", "gamma_correct", "gamma_incorrect",
                     "gamma_format", "penalty_p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


DEFAULT_CONFIG = RewardConfig()

FORMATTING_ONLY_CONFIG = RewardConfig(enable_answer=False, enable_citation=False)


@dataclass(slots=True)
class ParsedCompletion:
    reasoning: str
    final_answer: str
    cited_titles: list[str]
    format_ok: bool
    violations: list[str]


@dataclass(slots=True)
class RewardBreakdown:
    answer_reward: float
    citation_reward: float
    formatting_reward: float
    total: float
    citation_recall: float
    incorrect_citations: int


def parse_completion(
    text: str,
    config: RewardConfig = DEFAULT_CONFIG,
    known_titles: Sequence[str] | None = None,
) -> ParsedCompletion:
    """Parse a completion into its reasoning, final answer, and citations.

    Never raises on malformed input; every deviation from the trained
    format is recorded in ``violations`` and the parse is best-effort.

    Cited titles are comma-separated, but passage titles themselves may
    contain commas ("Matilda of Brabant, Countess of Holland"). When
    ``known_titles`` is given, runs of comma-separated segments that
    re-join into a known title are merged back together (longest match
    wins); otherwise segments are taken as-is.
    """
    violations: list[str] = []
    if len(text) > config.max_completion_chars:
        violations.append(EXCESSIVE_LENGTH)
    if not text.isascii() and _NON_ENGLISH.search(text):
        violations.append(NON_ENGLISH_CHARS)

    r_open = text.find("<reasoning>")
    r_close = text.find("</reasoning>")
    a_open = text.find("<answer>")
    a_close = text.find("</answer>")

    positions = (r_open, r_close, a_open, a_close)
    if -1 in positions:
        violations.append(MISSING_TAG)
    for tag, pos in (("<reasoning>", r_open), ("</reasoning>", r_close),
                     ("<answer>", a_open), ("</answer>", a_close)):
        if pos != -1 and text.find(tag, pos + 1) != -1:
            violations.append(DUPLICATE_TAG)
            break
    if -1 not in positions and not r_open < r_close < a_open < a_close:
        violations.append(TAG_ORDER)

    reasoning = ""
    if r_open != -1 and r_close != -1 and r_open < r_close:
        reasoning = text[r_open + 11: r_close].strip()

    # Answer block, best effort: fall back to everything after <answer>,
    # or the whole text when no tags survive.
    if a_open != -1:
        block = text[a_open + 8: a_close] if a_close > a_open else text[a_open + 8:]
    elif a_close != -1:
        block = text[:a_close]
    else:
        block = text

    if a_close != -1 and _NON_WS.search(text, a_close + 9):
        violations.append(TRAILING_TEXT)

    final_answer = None
    cited_raw = None
    for line in block.split("\n"):
        stripped = line.strip()
        if final_answer is None and stripped.startswith(_FINAL_ANSWER_HEADING):
            final_answer = stripped[len(_FINAL_ANSWER_HEADING):].strip()
        elif cited_raw is None and stripped.startswith(_SUPPORTING_HEADING):
            cited_raw = stripped[len(_SUPPORTING_HEADING):].strip()
        if final_answer is not None and cited_raw is not None:
            break
    if final_answer is None:
        violations.append(MISSING_FINAL_ANSWER_HEADING)
        final_answer = ""
    if cited_raw is None:
        violations.append(MISSING_SUPPORTING_PASSAGES_HEADING)

    cited_titles: list[str] = []
    if cited_raw:
        segments = [s for s in (seg.strip() for seg in cited_raw.split(",")) if s]
        if known_titles:
            segments = _regroup_segments(segments, {normalize_title(t) for t in known_titles})
        seen = set()
        for title in segments:
            key = normalize_title(title)
            if key not in seen:
                seen.add(key)
                cited_titles.append(title)

    return ParsedCompletion(
        reasoning=reasoning,
        final_answer=final_answer,
        cited_titles=cited_titles,
        format_ok=not violations,
        violations=violations,
    )


def _regroup_segments(segments: list[str], known: set[str]) -> list[str]:
    out = []
    i, n = 0, len(segments)
    while i < n:
        joined = segments[i]
        match_end = i if normalize_title(joined) in known else None
        for j in range(i + 1, n):
            joined = joined + ", " + segments[j]
            if normalize_title(joined) in known:
                match_end = j
        if match_end is None or match_end == i:
            out.append(segments[i])
            i += 1
        else:
            out.append(", ".join(segments[i: match_end + 1]))
            i = match_end + 1
    return out


def render_completion(parsed: ParsedCompletion) -> str:
    """Render back to the canonical trained format."""
    return (
        "<reasoning>\n{}\n</reasoning>\n<answer>\n"
        "Final answer: {}\nSupporting passages: {}\n</answer>".format(
            parsed.reasoning, parsed.final_answer, ", ".join(parsed.cited_titles)
        )
    )


def answer_reward(parsed: ParsedCompletion, gold_answer: str,
                  config: RewardConfig = DEFAULT_CONFIG) -> float:
    """``gamma_answer`` for a normalized exact match with the gold answer."""
    if not config.enable_answer:
        return 0.0
    if normalize_answer(parsed.final_answer) == normalize_answer(gold_answer):
        return config.gamma_answer
    return 0.0


def citation_reward(
    parsed: ParsedCompletion,
    gold_titles: Sequence[str],
    config: RewardConfig = DEFAULT_CONFIG,
) -> tuple[float, float, int]:
    """Citation reward, recall, and incorrect-citation count.

    Set semantics under normalized title equality: reward is
    ``gamma_correct * recall - gamma_incorrect * |cited \\ gold|``,
    unclamped (spurious citations can push it negative).
    """
    if not gold_titles:
        raise ValueError("gold_titles must be non-empty")
    gold = {normalize_title(t) for t in gold_titles}
    cited = {normalize_title(t) for t in parsed.cited_titles}
    recall = len(cited & gold) / len(gold)
    incorrect = len(cited - gold)
    if not config.enable_citation:
        return 0.0, recall, incorrect
    return config.gamma_correct * recall - config.gamma_incorrect * incorrect, recall, incorrect


def formatting_reward(parsed: ParsedCompletion,
                      config: RewardConfig = DEFAULT_CONFIG) -> float:
    return config.gamma_format if parsed.format_ok else -config.penalty_p


def total_reward(
    completion: str,
    gold_answer: str,
    gold_titles: Sequence[str],
    config: RewardConfig = DEFAULT_CONFIG,
    known_titles: Sequence[str] | None = None,
) -> RewardBreakdown:
    """Parse and score one completion; total is the sum of the components.

    ``known_titles`` widens the comma-regrouping vocabulary beyond the
    gold titles (e.g. to all passage titles shown in the prompt).
    """
    parsed = parse_completion(completion, config,
                              known_titles if known_titles is not None else gold_titles)
    fmt = formatting_reward(parsed, config)
    if config.strict_format and not parsed.format_ok:
        ans = cit = recall = 0.0
        incorrect = 0
    else:
        ans = answer_reward(parsed, gold_answer, config)
        cit, recall, incorrect = citation_reward(parsed, gold_titles, config)
    return RewardBreakdown(
        answer_reward=ans,
        citation_reward=cit,
        formatting_reward=fmt,
        total=ans + cit + fmt,
        citation_recall=recall,
        incorrect_citations=incorrect,
    )


# ---------------------------------------------------------------------------
# batch scoring file format

def format_number(x: float) -> str:
    """Decimal rendering with up to six fractional digits."""
    s = f"{x:.6f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def breakdown_to_json(sample_id: str, b: RewardBreakdown) -> str:
    return (
        '{{"sample_id": {}, "answer_reward": {}, "citation_reward": {}, '
        '"formatting_reward": {}, "total": {}, "citation_recall": {}, '
        '"incorrect_citations": {}}}'.format(
            json.dumps(sample_id, ensure_ascii=False),
            format_number(b.answer_reward),
            format_number(b.citation_reward),
            format_number(b.formatting_reward),
            format_number(b.total),
            format_number(b.citation_recall),
            b.incorrect_citations,
        )
    )


@dataclass
class ScoreRequest:
    sample_id: str
    completion: str
    gold_answer: str
    gold_titles: list[str]
    known_titles: list[str] = field(default_factory=list)


def read_score_requests(fp) -> Iterable[ScoreRequest]:
    """Parse batch-input lines {sample_id, completion, gold_answer, gold_titles}."""
    for line in fp:
        if not line.strip():
            continue
        obj = json.loads(line)
        yield ScoreRequest(
            sample_id=str(obj["sample_id"]),
            completion=obj["completion"],
            gold_answer=obj["gold_answer"],
            gold_titles=list(obj["gold_titles"]),
            known_titles=list(obj.get("known_titles", [])),
        )


def score_batch(
    requests: Iterable[ScoreRequest],
    config: RewardConfig = DEFAULT_CONFIG,
) -> list[tuple[str, RewardBreakdown]]:
    return [
        (
            req.sample_id,
            total_reward(req.completion, req.gold_answer, req.gold_titles, config,
                         known_titles=req.known_titles or None),
        )
        for req in requests
    ]


def write_score_results(results: Iterable[tuple[str, RewardBreakdown]], fp) -> None:
    for sample_id, breakdown in results:
        fp.write(breakdown_to_json(sample_id, breakdown) + "\n")
