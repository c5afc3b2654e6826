"""Ingestion of multi-hop QA datasets into a unified record model.

Supported source formats:

* ``hotpotqa`` / ``twowiki``: a single top-level JSON array of objects
  with fields ``_id``, ``question``, ``answer``, ``supporting_facts``
  (pairs of ``[title, sentence_index]``) and ``context`` (pairs of
  ``[title, list-of-sentences]``).
* ``musique``: one JSON object per line with fields ``id``,
  ``question``, ``answer``, ``answer_aliases`` and ``paragraphs``
  (objects with ``title``, ``paragraph_text``, ``is_supporting``).

Paragraphs flagged as supporting become gold passages; everything else
becomes a distractor. Parsing is incremental so 40k-record files never
need to be held in memory at once.
"""

from __future__ import annotations

import codecs
import json
from dataclasses import dataclass, field
from typing import BinaryIO, Iterator

from .textnorm import normalize_title

DATASETS = ("hotpotqa", "musique", "twowiki")
SPLITS = ("train", "validation")

# Formats sharing the HotpotQA array-of-objects schema.
_ARRAY_FORMATS = ("hotpotqa", "twowiki")


class ParseError(Exception):
    """Malformed dataset syntax. ``byte_offset`` points at the failure."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class Passage:
    """One retrieved context: a title (used as citation key) and its body."""

    title: str
    body: str

    def __post_init__(self):
        if not self.title.strip():
            raise ValueError("passage title must be non-empty")
        if not self.body:
            raise ValueError("passage body must be non-empty")


@dataclass(frozen=True)
class QaRecord:
    """A multi-hop question with its gold and distractor passages."""

    id: str
    question: str
    gold_answer: str
    answer_aliases: tuple[str, ...]
    gold_passages: tuple[Passage, ...]
    distractor_passages: tuple[Passage, ...]
    dataset: str
    split: str

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if not self.gold_answer:
            raise ValueError(f"record {self.id!r} has no answer")
        if len(self.gold_passages) < 2:
            raise ValueError(
                f"record {self.id!r} has {len(self.gold_passages)} gold "
                "passages; at least 2 hops are required"
            )
        titles = [normalize_title(p.title) for p in self.gold_passages]
        titles += [normalize_title(p.title) for p in self.distractor_passages]
        if len(set(titles)) != len(titles):
            raise ValueError(f"record {self.id!r} has duplicate passage titles")

    @property
    def num_hops(self) -> int:
        return len(self.gold_passages)

    @property
    def num_distractors(self) -> int:
        return len(self.distractor_passages)

    @property
    def gold_titles(self) -> tuple[str, ...]:
        return tuple(p.title for p in self.gold_passages)


@dataclass
class Diagnostic:
    """A per-record ingestion problem. ``error`` means the record was rejected."""

    severity: str  # "error" | "warning"
    message: str
    record_id: str | None = None
    byte_offset: int | None = None

    def to_json(self) -> str:
        obj = {"severity": self.severity, "message": self.message}
        if self.record_id is not None:
            obj["record_id"] = self.record_id
        if self.byte_offset is not None:
            obj["byte_offset"] = self.byte_offset
        return json.dumps(obj, ensure_ascii=False)


@dataclass
class IngestResult:
    records: list[QaRecord]
    diagnostics: list[Diagnostic]

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]


@dataclass
class DatasetStats:
    record_count: int
    hop_histogram: dict[int, int] = field(default_factory=dict)
    distractor_histogram: dict[int, int] = field(default_factory=dict)


def dataset_stats(records: list[QaRecord]) -> DatasetStats:
    stats = DatasetStats(record_count=len(records))
    for rec in records:
        stats.hop_histogram[rec.num_hops] = stats.hop_histogram.get(rec.num_hops, 0) + 1
        stats.distractor_histogram[rec.num_distractors] = (
            stats.distractor_histogram.get(rec.num_distractors, 0) + 1
        )
    return stats


def ingest_dataset(
    fmt: str, stream: BinaryIO, split: str = "train"
) -> IngestResult:
    """Ingest a raw dataset file, collecting per-record diagnostics.

    Malformed syntax raises :class:`ParseError`; records violating the
    record invariants are skipped and reported, never silently dropped.
    """
    diagnostics: list[Diagnostic] = []
    records = list(iter_dataset(fmt, stream, split=split, diagnostics=diagnostics))
    return IngestResult(records, diagnostics)


def iter_dataset(
    fmt: str,
    stream: BinaryIO,
    split: str = "train",
    diagnostics: list[Diagnostic] | None = None,
) -> Iterator[QaRecord]:
    """Streaming variant of :func:`ingest_dataset`; yields records as parsed."""
    if fmt not in DATASETS:
        raise ValueError(f"unknown dataset format {fmt!r}")
    if diagnostics is None:
        diagnostics = []
    if fmt in _ARRAY_FORMATS:
        raw_iter = _iter_json_array(stream)
        builder = _build_from_hotpot_style
    else:
        raw_iter = _iter_json_lines(stream)
        builder = _build_from_musique_style
    for obj, offset in raw_iter:
        if not isinstance(obj, dict):
            diagnostics.append(
                Diagnostic("error", "record is not a JSON object", byte_offset=offset)
            )
            continue
        record = builder(obj, fmt, split, offset, diagnostics)
        if record is not None:
            yield record


# ---------------------------------------------------------------------------
# record builders

def _build_from_hotpot_style(obj, fmt, split, offset, diagnostics):
    rec_id = str(obj.get("_id", ""))
    supporting = obj.get("supporting_facts", [])
    gold_keys = []
    for fact in supporting:
        key = normalize_title(str(fact[0]))
        if key not in gold_keys:
            gold_keys.append(key)
    paragraphs = []
    for entry in obj.get("context", []):
        title = str(entry[0])
        sentences = entry[1]
        body = " ".join(str(s) for s in sentences).strip()
        paragraphs.append((title, body, normalize_title(title) in gold_keys))
    present = {normalize_title(t) for t, _, _ in paragraphs}
    for key in gold_keys:
        if key not in present:
            diagnostics.append(
                Diagnostic(
                    "warning",
                    f"supporting-fact title {key!r} not found in context",
                    record_id=rec_id,
                    byte_offset=offset,
                )
            )
    return _assemble(
        rec_id=rec_id,
        question=str(obj.get("question", "")),
        answer=str(obj.get("answer", "") or ""),
        aliases=(),
        paragraphs=paragraphs,
        dataset=fmt,
        split=split,
        offset=offset,
        diagnostics=diagnostics,
    )


def _build_from_musique_style(obj, fmt, split, offset, diagnostics):
    paragraphs = [
        (
            str(p.get("title", "")),
            str(p.get("paragraph_text", "")),
            bool(p.get("is_supporting", False)),
        )
        for p in obj.get("paragraphs", [])
    ]
    aliases = tuple(str(a) for a in obj.get("answer_aliases", []))
    return _assemble(
        rec_id=str(obj.get("id", "")),
        question=str(obj.get("question", "")),
        answer=str(obj.get("answer", "") or ""),
        aliases=aliases,
        paragraphs=paragraphs,
        dataset=fmt,
        split=split,
        offset=offset,
        diagnostics=diagnostics,
    )


def _assemble(rec_id, question, answer, aliases, paragraphs, dataset, split,
              offset, diagnostics):
    # Duplicate titles break title-as-key citation scoring: keep the first
    # occurrence, report the rest.
    seen: set[str] = set()
    gold, distractors = [], []
    for title, body, is_gold in paragraphs:
        key = normalize_title(title)
        if key in seen:
            diagnostics.append(
                Diagnostic(
                    "warning",
                    f"duplicate passage title {title!r} dropped",
                    record_id=rec_id,
                    byte_offset=offset,
                )
            )
            continue
        seen.add(key)
        try:
            passage = Passage(title=title, body=body)
        except ValueError as exc:
            diagnostics.append(
                Diagnostic("warning", f"passage skipped: {exc}",
                           record_id=rec_id, byte_offset=offset)
            )
            continue
        (gold if is_gold else distractors).append(passage)
    try:
        return QaRecord(
            id=rec_id,
            question=question,
            gold_answer=answer,
            answer_aliases=aliases,
            gold_passages=tuple(gold),
            distractor_passages=tuple(distractors),
            dataset=dataset,
            split=split,
        )
    except ValueError as exc:
        diagnostics.append(
            Diagnostic("error", str(exc), record_id=rec_id, byte_offset=offset)
        )
        return None


# ---------------------------------------------------------------------------
# incremental raw parsers

_CHUNK = 1 << 16
_WS = " \t\r\n"


def _iter_json_lines(stream: BinaryIO) -> Iterator[tuple[object, int]]:
    offset = 0
    for raw_line in stream:
        line_offset = offset
        offset += len(raw_line)
        if not raw_line.strip():
            continue
        try:
            text = raw_line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("invalid UTF-8", line_offset + exc.start) from exc
        try:
            yield json.loads(text), line_offset
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line_offset + len(text[: exc.pos].encode("utf-8")))


class _ArrayScanner:
    """Incremental reader decoding UTF-8 and tracking byte offsets."""

    def __init__(self, stream: BinaryIO):
        self._stream = stream
        self._decoder = codecs.getincrementaldecoder("utf-8")()
        self.buf = ""
        self.pos = 0  # index into buf
        self.consumed_bytes = 0  # bytes of input preceding buf
        self.eof = False

    def fill(self) -> bool:
        if self.eof:
            return False
        chunk = self._stream.read(_CHUNK)
        try:
            if not chunk:
                self.eof = True
                self.buf += self._decoder.decode(b"", final=True)
                return False
            self.buf += self._decoder.decode(chunk)
        except UnicodeDecodeError as exc:
            raise ParseError("invalid UTF-8", self.byte_offset(len(self.buf))) from exc
        return True

    def compact(self):
        if self.pos:
            self.consumed_bytes += len(self.buf[: self.pos].encode("utf-8"))
            self.buf = self.buf[self.pos:]
            self.pos = 0

    def byte_offset(self, pos: int | None = None) -> int:
        if pos is None:
            pos = self.pos
        return self.consumed_bytes + len(self.buf[:pos].encode("utf-8"))

    def skip_ws(self) -> bool:
        """Advance past whitespace; False when input is exhausted first."""
        while True:
            while self.pos < len(self.buf) and self.buf[self.pos] in _WS:
                self.pos += 1
            if self.pos < len(self.buf):
                return True
            self.compact()
            if not self.fill():
                return False


def _iter_json_array(stream: BinaryIO) -> Iterator[tuple[object, int]]:
    """Yield (object, byte_offset) from a top-level JSON array, incrementally."""
    scanner = _ArrayScanner(stream)
    decoder = json.JSONDecoder()

    if not scanner.skip_ws():
        return  # empty input: vacuously no records
    if scanner.buf[scanner.pos] != "[":
        raise ParseError("expected top-level JSON array", scanner.byte_offset())
    scanner.pos += 1

    first = True
    while True:
        if not scanner.skip_ws():
            raise ParseError("unterminated JSON array", scanner.byte_offset())
        ch = scanner.buf[scanner.pos]
        if ch == "]":
            scanner.pos += 1
            if scanner.skip_ws():
                raise ParseError("trailing data after array", scanner.byte_offset())
            return
        if not first:
            if ch != ",":
                raise ParseError("expected ',' between array elements",
                                 scanner.byte_offset())
            scanner.pos += 1
            if not scanner.skip_ws():
                raise ParseError("unterminated JSON array", scanner.byte_offset())
        first = False
        # Decode one element, pulling more input while the element is
        # merely incomplete rather than malformed.
        while True:
            try:
                obj, end = decoder.raw_decode(scanner.buf, scanner.pos)
            except json.JSONDecodeError as exc:
                scanner.compact()
                if scanner.fill():
                    continue
                raise ParseError(exc.msg, scanner.byte_offset(exc.pos))
            start = scanner.byte_offset()
            scanner.pos = end
            scanner.compact()
            yield obj, start
            break


# ---------------------------------------------------------------------------
# unified interchange format (one JSON record per line)

def record_to_json(record: QaRecord) -> str:
    obj = {
        "id": record.id,
        "question": record.question,
        "gold_answer": record.gold_answer,
        "answer_aliases": list(record.answer_aliases),
        "gold_passages": [{"title": p.title, "body": p.body} for p in record.gold_passages],
        "distractor_passages": [
            {"title": p.title, "body": p.body} for p in record.distractor_passages
        ],
        "dataset": record.dataset,
        "split": record.split,
    }
    return json.dumps(obj, ensure_ascii=False)


def record_from_json(line: str) -> QaRecord:
    obj = json.loads(line)
    return QaRecord(
        id=obj["id"],
        question=obj["question"],
        gold_answer=obj["gold_answer"],
        answer_aliases=tuple(obj["answer_aliases"]),
        gold_passages=tuple(Passage(p["title"], p["body"]) for p in obj["gold_passages"]),
        distractor_passages=tuple(
            Passage(p["title"], p["body"]) for p in obj["distractor_passages"]
        ),
        dataset=obj["dataset"],
        split=obj["split"],
    )


def write_records(records, fp) -> None:
    for record in records:
        fp.write(record_to_json(record) + "\n")


def read_records(fp) -> Iterator[QaRecord]:
    for line in fp:
        if line.strip():
            yield record_from_json(line)
