"""Evaluation metrics: answer/citation/joint F1 and pass@k partitioning.

Answer F1 is token-level bag overlap on normalized strings (the scoring
convention of the multi-hop QA benchmarks); citation F1 is set overlap
over normalized passage titles. Dataset-level scores average per-sample
scores, each itself averaged over that sample's generations, and joint
F1 is the harmonic mean of the two dataset-level aggregates.

Aggregation uses exactly-rounded summation (``math.fsum``) so parallel
and serial reductions agree.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .rewards import ParsedCompletion
from .textnorm import normalize_answer, normalize_title

__all__ = [
    "GenerationRecord", "EvalReport", "HopScores", "normalize_answer",
    "answer_f1", "exact_match", "citation_scores", "joint_f1",
    "evaluate_run", "partition_by_passk", "format_report",
]


@dataclass
class GenerationRecord:
    """All generations sampled for one evaluation question."""

    sample_id: str
    generations: list[ParsedCompletion]
    gold_answer: str
    gold_titles: list[str]
    num_hops: int
    aliases: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.generations:
            raise ValueError(f"sample {self.sample_id!r} has no generations")


@dataclass
class HopScores:
    answer_f1: float
    citation_f1: float
    joint_f1: float
    n_samples: int


@dataclass
class EvalReport:
    answer_f1: float  # percentages in [0, 100]
    citation_f1: float
    joint_f1: float
    per_hop: dict[int, HopScores]
    n_samples: int
    answer_em: float | None = None


def answer_f1(prediction: str, gold_answer: str,
              aliases: Sequence[str] = ()) -> float:
    """Token-level F1 between normalized prediction and gold answer.

    With aliases, the best score over gold plus aliases is returned.
    """
    best = _f1_single(prediction, gold_answer)
    for alias in aliases:
        if best == 1.0:
            break
        best = max(best, _f1_single(prediction, alias))
    return best


def _f1_single(prediction: str, gold: str) -> float:
    pred_tokens = normalize_answer(prediction).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens or not gold_tokens:
        return float(pred_tokens == gold_tokens)
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def exact_match(prediction: str, gold_answer: str,
                aliases: Sequence[str] = ()) -> float:
    pred = normalize_answer(prediction)
    if pred == normalize_answer(gold_answer):
        return 1.0
    return float(any(pred == normalize_answer(a) for a in aliases))


def citation_scores(cited: Sequence[str],
                    gold_titles: Sequence[str]) -> tuple[float, float, float]:
    """Set precision/recall/F1 over normalized titles; empty cited is all-zero."""
    if not gold_titles:
        raise ValueError("gold_titles must be non-empty")
    cited_set = {normalize_title(t) for t in cited}
    gold_set = {normalize_title(t) for t in gold_titles}
    if not cited_set:
        return 0.0, 0.0, 0.0
    overlap = len(cited_set & gold_set)
    precision = overlap / len(cited_set)
    recall = overlap / len(gold_set)
    f1 = 0.0 if overlap == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def joint_f1(answer_aggregate: float, citation_aggregate: float) -> float:
    """Harmonic mean of the answer and citation aggregates (percent scale)."""
    if answer_aggregate + citation_aggregate == 0:
        return 0.0
    return (2 * answer_aggregate * citation_aggregate
            / (answer_aggregate + citation_aggregate))


def sample_scores(record: GenerationRecord,
                  use_aliases: bool = False) -> tuple[float, float, float]:
    """(answer F1, citation F1, EM) for one sample, averaged over generations."""
    aliases = record.aliases if use_aliases else ()
    n = len(record.generations)
    ans = math.fsum(
        answer_f1(g.final_answer, record.gold_answer, aliases) for g in record.generations
    ) / n
    cit = math.fsum(
        citation_scores(g.cited_titles, record.gold_titles)[2] for g in record.generations
    ) / n
    em = math.fsum(
        exact_match(g.final_answer, record.gold_answer, aliases) for g in record.generations
    ) / n
    return ans, cit, em


def evaluate_run(
    records: Sequence[GenerationRecord],
    use_aliases: bool = False,
    include_em: bool = False,
    precomputed: Sequence[tuple[float, float, float]] | None = None,
) -> EvalReport:
    """Aggregate per-sample scores into a dataset-level report.

    ``precomputed`` accepts the output of :func:`sample_scores` for each
    record (in order), letting callers parallelize the per-sample map.
    """
    if not records:
        raise ValueError("no generation records to evaluate")
    if precomputed is None:
        precomputed = [sample_scores(r, use_aliases) for r in records]

    def aggregate(indices) -> tuple[float, float, float]:
        n = len(indices)
        ans = math.fsum(precomputed[i][0] for i in indices) / n * 100
        cit = math.fsum(precomputed[i][1] for i in indices) / n * 100
        em = math.fsum(precomputed[i][2] for i in indices) / n * 100
        return ans, cit, em

    all_idx = range(len(records))
    ans, cit, em = aggregate(all_idx)
    per_hop = {}
    for hops in sorted({r.num_hops for r in records}):
        idx = [i for i in all_idx if records[i].num_hops == hops]
        h_ans, h_cit, _ = aggregate(idx)
        per_hop[hops] = HopScores(h_ans, h_cit, joint_f1(h_ans, h_cit), len(idx))
    return EvalReport(
        answer_f1=ans,
        citation_f1=cit,
        joint_f1=joint_f1(ans, cit),
        per_hop=per_hop,
        n_samples=len(records),
        answer_em=em if include_em else None,
    )


def partition_by_passk(
    records: Sequence[GenerationRecord],
) -> tuple[list[str], list[str], list[str]]:
    """Split samples by the base model's best answer F1 across generations.

    A perfect generation (max F1 = 1) makes the sample base-answerable; a
    total miss (max F1 = 0) makes it base-unanswerable; anything in
    between belongs to neither set and is excluded from both curricula.
    """
    answerable, unanswerable, neither = [], [], []
    for record in records:
        best = max(
            answer_f1(g.final_answer, record.gold_answer) for g in record.generations
        )
        if best == 1.0:
            answerable.append(record.sample_id)
        elif best == 0.0:
            unanswerable.append(record.sample_id)
        else:
            neither.append(record.sample_id)
    return answerable, unanswerable, neither


def format_report(report: EvalReport, per_hop: bool = False) -> str:
    """Render a report as an aligned text table, optionally hop-grouped."""
    lines = []
    header = f"{'':<10}{'Answer F1':>12}{'Citation F1':>13}{'Joint F1':>11}"
    if report.answer_em is not None:
        header += f"{'EM':>9}"
    lines.append(header)
    row = (f"{'Overall':<10}{report.answer_f1:>12.2f}"
           f"{report.citation_f1:>13.2f}{report.joint_f1:>11.2f}")
    if report.answer_em is not None:
        row += f"{report.answer_em:>9.2f}"
    lines.append(row)
    lines.append(f"{'n':<10}{report.n_samples:>12d}")
    if per_hop and report.per_hop:
        lines.append("")
        lines.append(f"{'Hops':<10}{'Answer F1':>12}{'Citation F1':>13}"
                     f"{'Joint F1':>11}{'n':>7}")
        for hops, scores in report.per_hop.items():
            lines.append(
                f"{hops:<10}{scores.answer_f1:>12.2f}{scores.citation_f1:>13.2f}"
                f"{scores.joint_f1:>11.2f}{scores.n_samples:>7d}"
            )
    return "\n".join(lines) + "\n"
