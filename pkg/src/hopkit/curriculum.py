"""Training-set construction across synthetic difficulty levels.

Difficulty of a sample is the number of distractor passages mixed in with
the (always complete) gold passages: ``d = min(max(l + 2 - j, 0), k)`` for
difficulty level ``l``, hop count ``j``, and distractor pool size ``k``.
Three curricula map training index to level: constant-max, linear ramp,
and a min-max split between the easiest and hardest level.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from typing import Iterator

from .corpus import Passage, QaRecord

CURRICULUM_KINDS = ("max", "linear", "minmax")
ORDERINGS = ("by_difficulty", "shuffled", "by_hops_then_difficulty")
EVAL_KINDS = ("distractor", "ideal")

# Per-dataset defaults for the maximum difficulty level K.
DEFAULT_K = {"hotpotqa": 10, "musique": 20, "twowiki": 10}
DEFAULT_EVAL_MAX_DISTRACTORS = 18


@dataclass(frozen=True)
class CurriculumSpec:
    kind: str
    K: int
    n: int
    ordering: str = "by_difficulty"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CURRICULUM_KINDS:
            raise ValueError(f"unknown curriculum kind {self.kind!r}")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"unknown ordering {self.ordering!r}")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")


@dataclass(frozen=True)
class EvalSetting:
    kind: str
    max_distractors: int = DEFAULT_EVAL_MAX_DISTRACTORS

    def __post_init__(self):
        if self.kind not in EVAL_KINDS:
            raise ValueError(f"unknown eval setting {self.kind!r}")
        if self.max_distractors < 0:
            raise ValueError("max_distractors must be >= 0")


@dataclass
class TrainingSample:
    """A record instantiated at one difficulty level, passages shuffled.

    ``level`` is 0 for evaluation samples, which are built from an
    :class:`EvalSetting` rather than a curriculum level.
    """

    record_id: str
    level: int
    passages: list[Passage]
    shuffle_seed: int
    gold_titles: list[str]
    gold_answer: str
    question: str

    @property
    def num_distractors(self) -> int:
        return len(self.passages) - len(self.gold_titles)


def distractor_count(l: int, j: int, k: int) -> int:
    """Number of distractors shown at level ``l`` for a ``j``-hop question
    with ``k`` available distractors: ``min(max(l + 2 - j, 0), k)``."""
    if l < 1:
        raise ValueError("difficulty level must be >= 1")
    if j < 2:
        raise ValueError("hop count must be >= 2")
    if k < 0:
        raise ValueError("distractor pool size must be >= 0")
    return min(max(l + 2 - j, 0), k)


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from a tuple of values (no interpreter hash salt)."""
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")


def sample_at_level(record: QaRecord, l: int, seed: int) -> TrainingSample:
    """Instantiate ``record`` at difficulty level ``l``.

    Distractors are a seeded random subset of the pool; the combined
    gold + distractor list is then shuffled. Deterministic in
    (record.id, l, seed).
    """
    d = distractor_count(l, record.num_hops, record.num_distractors)
    shuffle_seed = derive_seed(record.id, l, seed)
    return _assemble_sample(record, l, d, shuffle_seed)


def build_eval_sample(record: QaRecord, setting: EvalSetting, seed: int) -> TrainingSample:
    """Build an evaluation sample: gold-only (ideal) or gold plus up to
    ``max_distractors`` distractors (distractor setting)."""
    if setting.kind == "ideal":
        d = 0
    else:
        d = min(record.num_distractors, setting.max_distractors)
    shuffle_seed = derive_seed(record.id, "eval", setting.kind, seed)
    return _assemble_sample(record, 0, d, shuffle_seed)


def _assemble_sample(record: QaRecord, level: int, d: int, shuffle_seed: int) -> TrainingSample:
    rng = random.Random(shuffle_seed)
    pool = list(record.distractor_passages)
    chosen = rng.sample(pool, len(pool))[:d] if pool else []
    passages = list(record.gold_passages) + chosen
    rng.shuffle(passages)
    return TrainingSample(
        record_id=record.id,
        level=level,
        passages=passages,
        shuffle_seed=shuffle_seed,
        gold_titles=list(record.gold_titles),
        gold_answer=record.gold_answer,
        question=record.question,
    )


def curriculum_level(spec: CurriculumSpec, i: int) -> int:
    """Difficulty level of training index ``i`` (1-based) under ``spec``."""
    if not 1 <= i <= spec.n:
        raise ValueError(f"index {i} out of range [1, {spec.n}]")
    if spec.kind == "max":
        return spec.K
    if spec.kind == "linear":
        return -(-spec.K * i // spec.n)  # ceil(K*i/n)
    # minmax: the first half at level 1, the rest at K; odd n puts the
    # middle sample in the easy half.
    return 1 if i <= (spec.n + 1) // 2 else spec.K


def build_training_set(records: list[QaRecord], spec: CurriculumSpec) -> list[TrainingSample]:
    """Compile the first ``spec.n`` records into a difficulty-ordered set.

    Orderings: ``by_difficulty`` sorts ascending by level (stable),
    ``shuffled`` applies a seeded permutation to the finished list, and
    ``by_hops_then_difficulty`` sorts the records by hop count before
    assigning levels by index.
    """
    if len(records) < spec.n:
        raise ValueError(f"need at least {spec.n} records, got {len(records)}")
    chosen = list(records[: spec.n])
    if spec.ordering == "by_hops_then_difficulty":
        chosen.sort(key=lambda r: r.num_hops)
    samples = [
        sample_at_level(record, curriculum_level(spec, i), spec.seed)
        for i, record in enumerate(chosen, start=1)
    ]
    if spec.ordering == "shuffled":
        rng = random.Random(derive_seed("ordering", spec.seed))
        rng.shuffle(samples)
    else:
        samples.sort(key=lambda s: s.level)  # stable: ties keep record order
    return samples


def level_histogram(samples: list[TrainingSample]) -> dict[int, int]:
    hist: dict[int, int] = {}
    for s in samples:
        hist[s.level] = hist.get(s.level, 0) + 1
    return dict(sorted(hist.items()))


# ---------------------------------------------------------------------------
# interchange format: one sample per line

def sample_to_json(sample: TrainingSample) -> str:
    obj = {
        "record_id": sample.record_id,
        "level": sample.level,
        "shuffle_seed": sample.shuffle_seed,
        "question": sample.question,
        "gold_answer": sample.gold_answer,
        "gold_titles": sample.gold_titles,
        "passages": [{"title": p.title, "body": p.body} for p in sample.passages],
    }
    return json.dumps(obj, ensure_ascii=False)


def sample_from_json(line: str) -> TrainingSample:
    obj = json.loads(line)
    return TrainingSample(
        record_id=obj["record_id"],
        level=obj["level"],
        passages=[Passage(p["title"], p["body"]) for p in obj["passages"]],
        shuffle_seed=obj["shuffle_seed"],
        gold_titles=list(obj["gold_titles"]),
        gold_answer=obj["gold_answer"],
        question=obj["question"],
    )


def write_samples(samples, fp) -> None:
    for sample in samples:
        fp.write(sample_to_json(sample) + "\n")


def read_samples(fp) -> Iterator[TrainingSample]:
    for line in fp:
        if line.strip():
            yield sample_from_json(line)
