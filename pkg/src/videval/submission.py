"""Submission and reference file formats.

Every parser here is a pure function over a text stream (anything that
iterates over lines, e.g. an open file or ``io.StringIO``). Parsed values are
frozen dataclasses; serializers emit the canonical byte-stable form, so that
``serialize(parse(x))`` is the canonical form of ``x`` and canonicalization is
idempotent.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, NamedTuple, Sequence

TASKS = ("AVS", "DSDI")
RUN_KINDS = ("common", "novelty")
TRAINING_TYPES = ("A", "D", "E", "F", "L", "N", "O")
DEFAULT_RANK_LIMIT = 1000


class ParseError(ValueError):
    """Malformed input; carries the line number or record locus."""

    def __init__(self, message: str, locus: str | int | None = None):
        self.locus = locus
        if isinstance(locus, int):
            message = f"line {locus}: {message}"
        elif locus is not None:
            message = f"{locus}: {message}"
        super().__init__(message)


def topic_key(topic_id: str):
    """Sort key putting numeric topic ids in numeric order before the rest."""
    return (0, int(topic_id), "") if topic_id.isdigit() else (1, 0, topic_id)


def sorted_topics(topics: Iterable[str]) -> list[str]:
    return sorted(topics, key=topic_key)


def format_number(value: float) -> str:
    # shortest repr that round-trips; integers keep a trailing ".0"
    return repr(float(value))


def _iter_lines(stream) -> Iterable[tuple[int, str]]:
    for lineno, raw in enumerate(stream, start=1):
        yield lineno, raw.rstrip("\r\n")


def _parse_float(text: str, what: str, lineno) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{what} is not a number: {text!r}", lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} must be finite: {text!r}", lineno)
    return value


def _parse_int(text: str, what: str, lineno) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{what} is not an integer: {text!r}", lineno) from None


# ---------------------------------------------------------------------------
# Ranked runs
# ---------------------------------------------------------------------------


class RankedEntry(NamedTuple):
    item_id: str
    rank: int
    score: float


@dataclass(frozen=True)
class RankedRun:
    """One system's ranked item lists per topic.

    ``entries`` maps topic id to a tuple of :class:`RankedEntry` ordered by
    rank. ``notes`` records what canonicalization changed (if anything).
    """

    run_tag: str
    entries: Mapping[str, tuple[RankedEntry, ...]]
    task: str = "AVS"
    run_kind: str = "common"
    training_type: str | None = None
    processing_time: Mapping[str, float] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @property
    def topics(self) -> list[str]:
        return sorted_topics(self.entries)

    def items(self, topic_id: str) -> list[str]:
        return [e.item_id for e in self.entries.get(topic_id, ())]

    def item_set(self, topic_id: str) -> set[str]:
        return {e.item_id for e in self.entries.get(topic_id, ())}


def canonicalize_run(run: RankedRun) -> RankedRun:
    """Order entries by rank and clamp scores to be non-increasing with rank.

    Rank order is authoritative; a score that exceeds the score above it is
    lowered to that score and a note is recorded. Idempotent.
    """
    notes = list(run.notes)
    entries = {}
    for topic in sorted_topics(run.entries):
        ordered = sorted(run.entries[topic], key=lambda e: e.rank)
        fixed = []
        clamped = 0
        ceiling = math.inf
        for e in ordered:
            if e.score > ceiling:
                clamped += 1
                e = e._replace(score=ceiling)
            ceiling = e.score
            fixed.append(e)
        if clamped:
            notes.append(
                f"topic {topic}: scores not monotone with rank; "
                f"{clamped} score(s) clamped to rank order"
            )
        entries[topic] = tuple(fixed)
    return replace(
        run,
        entries=entries,
        processing_time={t: run.processing_time[t] for t in sorted_topics(run.processing_time)},
        notes=tuple(notes),
    )


def _check_enum(value, allowed, what, lineno):
    if value not in allowed:
        raise ParseError(f"{what} must be one of {', '.join(allowed)}; got {value!r}", lineno)


def parse_retrieval_run(
    stream,
    task: str = "AVS",
    rank_limit: int = DEFAULT_RANK_LIMIT,
    topics: Iterable[str] | None = None,
) -> RankedRun:
    """Parse a ranked run file.

    Data lines are ``topic_id<TAB>item_id<TAB>rank<TAB>score<TAB>run_tag``.
    Header lines ``#meta key=value`` set ``run_tag``, ``run_kind``,
    ``training_type`` and ``processing_time`` (``topic:seconds`` pairs,
    comma separated, may repeat). Other ``#`` lines and blank lines are
    ignored.

    Parameters
    ----------
    stream : iterable of str
        Lines of the run file.
    task : {"AVS", "DSDI"}
    rank_limit : int
        Maximum rank (and so maximum list length) per topic.
    topics : iterable of str, optional
        When given, any other topic id is rejected.

    Returns
    -------
    RankedRun
        Canonical run: entries sorted by rank, scores non-increasing.

    Raises
    ------
    ParseError
        On any malformed line, duplicate item, duplicate rank, rank gap or
        rank over the limit.
    """
    _check_enum(task, TASKS, "task", None)
    allowed = set(topics) if topics is not None else None
    meta: dict[str, str] = {}
    processing: dict[str, float] = {}
    run_tag: str | None = None
    per_topic: dict[str, list[tuple[RankedEntry, int]]] = {}

    for lineno, line in _iter_lines(stream):
        if not line.strip():
            continue
        if line.startswith("#meta"):
            body = line[len("#meta"):].strip()
            if "=" not in body:
                raise ParseError("meta line must be '#meta key=value'", lineno)
            key, value = (s.strip() for s in body.split("=", 1))
            if key == "processing_time":
                for pair in filter(None, (p.strip() for p in value.split(","))):
                    topic, sep, secs = pair.partition(":")
                    if not sep:
                        raise ParseError(f"processing_time entry must be topic:seconds, got {pair!r}", lineno)
                    seconds = _parse_float(secs, "processing time", lineno)
                    if seconds < 0:
                        raise ParseError("processing time must be nonnegative", lineno)
                    processing[topic.strip()] = seconds
            elif key in ("run_tag", "run_kind", "training_type"):
                meta[key] = value
            else:
                raise ParseError(f"unknown meta key {key!r}", lineno)
            continue
        if line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise ParseError(f"expected 5 tab-separated fields, found {len(fields)}", lineno)
        topic, item, rank_text, score_text, tag = [f.strip() for f in fields]
        if not topic or not item or not tag:
            raise ParseError("empty topic, item or run tag", lineno)
        if allowed is not None and topic not in allowed:
            raise ParseError(f"unknown topic id {topic}", lineno)
        rank = _parse_int(rank_text, "rank", lineno)
        if not 1 <= rank <= rank_limit:
            if rank < 1:
                raise ParseError("rank must be ≥ 1", lineno)
            raise ParseError(f"topic {topic}: rank {rank} exceeds rank limit {rank_limit}", lineno)
        score = _parse_float(score_text, "score", lineno)
        if tag != run_tag:
            if run_tag is not None:
                raise ParseError(f"run tag {tag!r} differs from {run_tag!r}", lineno)
            run_tag = tag
        rows = per_topic.get(topic)
        if rows is None:
            rows = per_topic[topic] = []
        rows.append((RankedEntry(item, rank, score), lineno))

    if "run_tag" in meta:
        if run_tag is not None and meta["run_tag"] != run_tag:
            raise ParseError(f"meta run_tag {meta['run_tag']!r} differs from data run tag {run_tag!r}")
        run_tag = meta["run_tag"]
    if run_tag is None:
        raise ParseError("run has no entries and no '#meta run_tag='")
    run_kind = meta.get("run_kind", "common")
    _check_enum(run_kind, RUN_KINDS, "run_kind", None)
    training_type = meta.get("training_type")
    if training_type is not None:
        _check_enum(training_type, TRAINING_TYPES, "training_type", None)

    entries: dict[str, tuple[RankedEntry, ...]] = {}
    for topic, rows in per_topic.items():
        seen_items: dict[str, int] = {}
        seen_ranks: dict[int, int] = {}
        for entry, lineno in rows:
            if entry.item_id in seen_items:
                raise ParseError(
                    f"topic {topic}: duplicate item {entry.item_id} (first at line {seen_items[entry.item_id]})",
                    lineno,
                )
            if entry.rank in seen_ranks:
                raise ParseError(
                    f"topic {topic}: duplicate rank {entry.rank} (first at line {seen_ranks[entry.rank]})",
                    lineno,
                )
            seen_items[entry.item_id] = lineno
            seen_ranks[entry.rank] = lineno
        ordered = sorted(rows, key=lambda r: r[0].rank)
        for expected, (entry, lineno) in enumerate(ordered, start=1):
            if entry.rank != expected:
                raise ParseError(f"topic {topic}: rank gap, expected rank {expected} but found {entry.rank}", lineno)
        entries[topic] = tuple(e for e, _ in ordered)

    return canonicalize_run(
        RankedRun(
            run_tag=run_tag,
            entries=entries,
            task=task,
            run_kind=run_kind,
            training_type=training_type,
            processing_time=processing,
        )
    )


def serialize_run(run: RankedRun) -> str:
    """Canonical text form of a run (canonicalizes first)."""
    run = canonicalize_run(replace(run, notes=()))
    lines = [f"#meta run_tag={run.run_tag}", f"#meta run_kind={run.run_kind}"]
    if run.training_type is not None:
        lines.append(f"#meta training_type={run.training_type}")
    if run.processing_time:
        pairs = ",".join(f"{t}:{format_number(s)}" for t, s in run.processing_time.items())
        lines.append(f"#meta processing_time={pairs}")
    for topic, entries in run.entries.items():
        for e in entries:
            lines.append(f"{topic}\t{e.item_id}\t{e.rank}\t{format_number(e.score)}\t{run.run_tag}")
    return "\n".join(lines) + "\n"


def run_from_lists(
    run_tag: str,
    lists: Mapping[str, Sequence[str]],
    **kwargs,
) -> RankedRun:
    """Build a run from plain ranked item lists; scores descend from ``len``."""
    entries = {
        topic: tuple(RankedEntry(item, k, float(len(items) - k + 1)) for k, item in enumerate(items, start=1))
        for topic, items in lists.items()
    }
    return canonicalize_run(RankedRun(run_tag=run_tag, entries=entries, **kwargs))


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_run(
    run: RankedRun,
    judgments: "JudgmentSet | None" = None,
    topics: Iterable[str] | None = None,
    rank_limit: int = DEFAULT_RANK_LIMIT,
) -> ValidationReport:
    """Check a run against its invariants and the expected topic list.

    The expected topics are ``topics`` if given, else the judged topics.
    Never raises; findings are returned in a deterministic order.
    """
    errors: list[str] = []
    warnings: list[str] = list(run.notes)
    for topic in sorted_topics(run.entries):
        entries = run.entries[topic]
        ranks = [e.rank for e in entries]
        if sorted(ranks) != list(range(1, len(ranks) + 1)):
            errors.append(f"topic {topic}: ranks are not 1..{len(ranks)} without gaps or duplicates")
        items = [e.item_id for e in entries]
        if len(set(items)) != len(items):
            errors.append(f"topic {topic}: duplicate item ids")
        if len(entries) > rank_limit:
            errors.append(f"topic {topic}: {len(entries)} entries exceed rank limit {rank_limit}")
        by_rank = sorted(entries, key=lambda e: e.rank)
        if any(b.score > a.score for a, b in zip(by_rank, by_rank[1:])):
            warnings.append(f"topic {topic}: scores not monotone with rank; rank order is authoritative")
    expected = set(topics) if topics is not None else (set(judgments.topics) if judgments else set())
    for topic in sorted_topics(expected - set(run.entries)):
        warnings.append(f"missing topic {topic}")
    if topics is not None or judgments is not None:
        for topic in sorted_topics(set(run.entries) - expected):
            warnings.append(f"unexpected topic {topic}")
    return ValidationReport(tuple(errors), tuple(warnings))


# ---------------------------------------------------------------------------
# Judgments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Stratum:
    stratum_id: int
    rank_lo: int
    rank_hi: int
    sampling_rate: float

    def contains(self, rank: int) -> bool:
        return self.rank_lo <= rank <= self.rank_hi


@dataclass(frozen=True)
class Judgment:
    item_id: str
    stratum_id: int
    relevant: bool


def check_strata(strata: Sequence[Stratum], locus=None) -> None:
    """Raise ParseError unless strata are ascending, disjoint, rates in (0, 1]."""
    previous_hi = 0
    previous_id = None
    for s in strata:
        if not 0.0 < s.sampling_rate <= 1.0:
            raise ParseError(f"stratum {s.stratum_id}: sampling_rate must be in (0, 1], got {s.sampling_rate}", locus)
        if s.rank_lo < 1 or s.rank_hi < s.rank_lo:
            raise ParseError(f"stratum {s.stratum_id}: invalid rank range {s.rank_lo}-{s.rank_hi}", locus)
        if s.rank_lo <= previous_hi:
            raise ParseError(f"stratum {s.stratum_id}: rank range overlaps or precedes the previous stratum", locus)
        if previous_id is not None and s.stratum_id <= previous_id:
            raise ParseError(f"stratum ids must ascend with rank ranges; {s.stratum_id} after {previous_id}", locus)
        previous_hi = s.rank_hi
        previous_id = s.stratum_id


@dataclass(frozen=True)
class JudgmentSet:
    topics: Mapping[str, tuple[Judgment, ...]]
    strata: Mapping[int, Stratum]

    def labels(self, topic_id: str) -> dict[str, bool]:
        return {j.item_id: j.relevant for j in self.topics.get(topic_id, ())}

    def strata_of(self, topic_id: str) -> dict[str, int]:
        return {j.item_id: j.stratum_id for j in self.topics.get(topic_id, ())}

    def relevant(self, topic_id: str) -> set[str]:
        return {j.item_id for j in self.topics.get(topic_id, ()) if j.relevant}

    @property
    def rates(self) -> dict[int, float]:
        return {sid: s.sampling_rate for sid, s in self.strata.items()}


def _parse_stratum_fields(fields, lineno) -> Stratum:
    if len(fields) != 4:
        raise ParseError(f"stratum line needs 4 tab-separated fields, found {len(fields)}", lineno)
    sid = _parse_int(fields[0], "stratum_id", lineno)
    lo = _parse_int(fields[1], "rank_lo", lineno)
    hi = _parse_int(fields[2], "rank_hi", lineno)
    rate = _parse_float(fields[3], "sampling_rate", lineno)
    if not 0.0 < rate <= 1.0:
        raise ParseError(f"sampling_rate must be in (0, 1], got {fields[3]}", lineno)
    return Stratum(sid, lo, hi, rate)


def parse_strata(stream) -> dict[int, Stratum]:
    """Parse ``stratum_id<TAB>rank_lo<TAB>rank_hi<TAB>sampling_rate`` lines."""
    strata: dict[int, Stratum] = {}
    for lineno, line in _iter_lines(stream):
        if not line.strip() or line.startswith("#"):
            continue
        s = _parse_stratum_fields([f.strip() for f in line.split("\t")], lineno)
        if s.stratum_id in strata:
            raise ParseError(f"duplicate stratum id {s.stratum_id}", lineno)
        strata[s.stratum_id] = s
    ordered = sorted(strata.values(), key=lambda s: s.rank_lo)
    check_strata(ordered)
    return {s.stratum_id: s for s in ordered}


def parse_judgments(stream, strata=None) -> JudgmentSet:
    """Parse a judgments file with its strata table.

    Judgment lines are ``topic_id<TAB>stratum_id<TAB>item_id<TAB>label`` with
    label 0 or 1. The strata table comes from ``strata`` (a stream in the
    strata format, or an already parsed mapping) or from inline lines
    ``#stratum<TAB>id<TAB>rank_lo<TAB>rank_hi<TAB>rate`` in the same stream.
    """
    if strata is None:
        table: dict[int, Stratum] = {}
    elif isinstance(strata, Mapping):
        table = dict(strata)
    else:
        table = parse_strata(strata)
    raw: list[tuple[str, Judgment, int]] = []
    inline = {}
    for lineno, line in _iter_lines(stream):
        if not line.strip():
            continue
        if line.startswith("#stratum"):
            s = _parse_stratum_fields([f.strip() for f in line.split("\t")[1:]], lineno)
            if s.stratum_id in inline or table.get(s.stratum_id, s) != s:
                raise ParseError(f"duplicate stratum id {s.stratum_id}", lineno)
            inline[s.stratum_id] = s
            continue
        if line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split("\t")]
        if len(fields) != 4:
            raise ParseError(f"expected 4 tab-separated fields, found {len(fields)}", lineno)
        topic, sid_text, item, label = fields
        sid = _parse_int(sid_text, "stratum_id", lineno)
        if label not in ("0", "1"):
            raise ParseError(f"label must be 0 or 1, got {label!r}", lineno)
        raw.append((topic, Judgment(item, sid, label == "1"), lineno))
    if inline:
        table.update(inline)
        check_strata(sorted(table.values(), key=lambda s: s.rank_lo))
    table = {s.stratum_id: s for s in sorted(table.values(), key=lambda s: s.rank_lo)}

    topics: dict[str, list[Judgment]] = {}
    seen: dict[tuple[str, str], int] = {}
    for topic, judgment, lineno in raw:
        if judgment.stratum_id not in table:
            raise ParseError(f"unknown stratum id {judgment.stratum_id}", lineno)
        key = (topic, judgment.item_id)
        if key in seen:
            raise ParseError(f"duplicate judgment for topic {topic} item {judgment.item_id} (first at line {seen[key]})", lineno)
        seen[key] = lineno
        topics.setdefault(topic, []).append(judgment)
    return JudgmentSet(
        topics={t: tuple(sorted(topics[t], key=lambda j: j.item_id)) for t in sorted_topics(topics)},
        strata=table,
    )


def serialize_strata(strata: Mapping[int, Stratum]) -> str:
    return "".join(
        f"{s.stratum_id}\t{s.rank_lo}\t{s.rank_hi}\t{format_number(s.sampling_rate)}\n" for s in strata.values()
    )


def serialize_judgments(judgments: JudgmentSet, inline_strata: bool = True) -> str:
    head = ""
    if inline_strata:
        head = "".join(
            f"#stratum\t{s.stratum_id}\t{s.rank_lo}\t{s.rank_hi}\t{format_number(s.sampling_rate)}\n"
            for s in sorted(judgments.strata.values(), key=lambda s: s.rank_lo)
        )
    return head + "".join(
        f"{topic}\t{j.stratum_id}\t{j.item_id}\t{int(j.relevant)}\n"
        for topic in sorted_topics(judgments.topics)
        for j in sorted(judgments.topics[topic], key=lambda j: j.item_id)
    )


# ---------------------------------------------------------------------------
# Activity instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    x: float
    y: float
    w: float
    h: float
    conf: float = 1.0


@dataclass(frozen=True)
class ActivityInstance:
    activity: str
    video_id: str
    begin_frame: int
    end_frame: int
    confidence: float | None = None
    objects: Mapping[int, tuple[Box, ...]] | None = None

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.begin_frame + 1


@dataclass(frozen=True)
class ActivityInstanceSet:
    instances: tuple[ActivityInstance, ...]
    video_durations: Mapping[str, float]

    @property
    def activities(self) -> list[str]:
        return sorted({i.activity for i in self.instances})

    def for_activity(self, activity: str) -> "ActivityInstanceSet":
        return ActivityInstanceSet(
            tuple(i for i in self.instances if i.activity == activity), self.video_durations
        )

    @property
    def total_minutes(self) -> float:
        return math.fsum(self.video_durations[v] for v in sorted(self.video_durations))

    def __len__(self) -> int:
        return len(self.instances)


def _require(record: Mapping, key: str, locus: str):
    if key not in record:
        raise ParseError(f"missing field {key!r}", locus)
    return record[key]


def _number(value, what, locus) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ParseError(f"{what} must be a finite number, got {value!r}", locus)
    return float(value)


def _integer(value, what, locus) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{what} must be an integer, got {value!r}", locus)
    return value


def activity_set_from_document(doc, kind: str = "reference") -> ActivityInstanceSet:
    """Validate a decoded activity-set JSON document (see :func:`parse_activity_set`)."""
    if kind not in ("reference", "system"):
        raise ValueError(f"kind must be 'reference' or 'system', got {kind!r}")
    if not isinstance(doc, Mapping):
        raise ParseError("document must be a JSON object", "document")
    durations_raw = _require(doc, "videoDurations", "document")
    if not isinstance(durations_raw, Mapping):
        raise ParseError("videoDurations must be an object", "document")
    durations = {}
    for vid in sorted(durations_raw):
        minutes = _number(durations_raw[vid], "duration", f"videoDurations[{vid!r}]")
        if minutes <= 0:
            raise ParseError("duration must be positive minutes", f"videoDurations[{vid!r}]")
        durations[vid] = minutes
    records = _require(doc, "instances", "document")
    if not isinstance(records, list):
        raise ParseError("instances must be a list", "document")
    instances = []
    for idx, rec in enumerate(records):
        locus = f"instances[{idx}]"
        if not isinstance(rec, Mapping):
            raise ParseError("instance must be an object", locus)
        activity = _require(rec, "activity", locus)
        video = _require(rec, "videoId", locus)
        if not isinstance(activity, str) or not isinstance(video, str):
            raise ParseError("activity and videoId must be strings", locus)
        begin = _integer(_require(rec, "beginFrame", locus), "beginFrame", locus)
        end = _integer(_require(rec, "endFrame", locus), "endFrame", locus)
        if begin > end:
            raise ParseError(f"beginFrame {begin} > endFrame {end}", locus)
        if video not in durations:
            raise ParseError(f"video {video!r} has no duration entry", locus)
        confidence = None
        if kind == "system":
            if "confidence" not in rec:
                raise ParseError("system instance is missing confidence", locus)
            confidence = _number(rec["confidence"], "confidence", locus)
            if not 0.0 <= confidence <= 1.0:
                raise ParseError(f"confidence must be in [0, 1], got {confidence}", locus)
        objects = None
        if rec.get("objects") is not None:
            if not isinstance(rec["objects"], Mapping):
                raise ParseError("objects must map frame numbers to box lists", locus)
            objects = {}
            for frame_text, boxes in rec["objects"].items():
                try:
                    frame = int(frame_text)
                except ValueError:
                    raise ParseError(f"object frame key {frame_text!r} is not an integer", locus) from None
                if not isinstance(boxes, list):
                    raise ParseError(f"frame {frame}: boxes must be a list", locus)
                parsed = []
                for b_idx, b in enumerate(boxes):
                    b_locus = f"{locus}.objects[{frame}][{b_idx}]"
                    if not isinstance(b, Mapping):
                        raise ParseError("box must be an object", b_locus)
                    x, y, w, h = (_number(_require(b, k, b_locus), k, b_locus) for k in ("x", "y", "w", "h"))
                    if w <= 0 or h <= 0:
                        raise ParseError(f"box has nonpositive extent w={w}, h={h}", b_locus)
                    conf = _number(b.get("conf", 1.0), "conf", b_locus)
                    parsed.append(Box(x, y, w, h, conf))
                objects[frame] = tuple(parsed)
            objects = {f: objects[f] for f in sorted(objects)}
        instances.append(ActivityInstance(activity, video, begin, end, confidence, objects))
    return ActivityInstanceSet(tuple(instances), durations)


def parse_activity_set(stream, kind: str = "reference") -> ActivityInstanceSet:
    """Parse an activity-instance JSON document.

    Reference sets ignore ``confidence``; system sets require it in [0, 1].
    Errors name the offending record, e.g. ``instances[3]``.
    """
    text = stream.read() if hasattr(stream, "read") else "".join(stream)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    return activity_set_from_document(doc, kind)


def activity_set_document(aset: ActivityInstanceSet) -> dict:
    instances = []
    for inst in aset.instances:
        rec = {
            "activity": inst.activity,
            "videoId": inst.video_id,
            "beginFrame": inst.begin_frame,
            "endFrame": inst.end_frame,
        }
        if inst.confidence is not None:
            rec["confidence"] = inst.confidence
        if inst.objects is not None:
            rec["objects"] = {
                str(frame): [{"x": b.x, "y": b.y, "w": b.w, "h": b.h, "conf": b.conf} for b in boxes]
                for frame, boxes in inst.objects.items()
            }
        instances.append(rec)
    return {"videoDurations": dict(aset.video_durations), "instances": instances}


def serialize_activity_set(aset: ActivityInstanceSet) -> str:
    return json.dumps(activity_set_document(aset), sort_keys=True, separators=(",", ":")) + "\n"


# ---------------------------------------------------------------------------
# Answer sheets, DA ratings, caption metrics
# ---------------------------------------------------------------------------

KIND_CODES = {"mc": "multiple_choice", "rl": "ranked_list"}


@dataclass(frozen=True)
class Answer:
    query_id: str
    kind: str
    answer: str | tuple[str, ...]


@dataclass(frozen=True)
class AnswerSheet:
    entries: tuple[Answer, ...]

    def by_query(self) -> dict[str, Answer]:
        return {a.query_id: a for a in self.entries}


def parse_answer_sheet(stream) -> AnswerSheet:
    """Parse ``query_id<TAB>mc|rl<TAB>answer`` lines (rl answers comma separated)."""
    entries = []
    seen: dict[str, int] = {}
    for lineno, line in _iter_lines(stream):
        if not line.strip() or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split("\t")]
        if len(fields) != 3:
            raise ParseError(f"expected 3 tab-separated fields, found {len(fields)}", lineno)
        qid, code, answer = fields
        if code not in KIND_CODES:
            raise ParseError(f"kind must be mc or rl, got {code!r}", lineno)
        if qid in seen:
            raise ParseError(f"duplicate query {qid} (first at line {seen[qid]})", lineno)
        seen[qid] = lineno
        if code == "rl":
            candidates = tuple(c.strip() for c in answer.split(",") if c.strip())
            if len(set(candidates)) != len(candidates):
                raise ParseError(f"query {qid}: ranked list has duplicate candidates", lineno)
            entries.append(Answer(qid, "ranked_list", candidates))
        else:
            entries.append(Answer(qid, "multiple_choice", answer))
    return AnswerSheet(tuple(entries))


def serialize_answer_sheet(sheet: AnswerSheet) -> str:
    out = []
    for a in sheet.entries:
        if a.kind == "ranked_list":
            out.append(f"{a.query_id}\trl\t{','.join(a.answer)}\n")
        else:
            out.append(f"{a.query_id}\tmc\t{a.answer}\n")
    return "".join(out)


@dataclass(frozen=True)
class DaRating:
    worker_id: str
    system_id: str
    video_id: str
    rating: float


DA_HEADER = ["worker_id", "system_id", "video_id", "rating"]


def parse_da_ratings(stream) -> tuple[DaRating, ...]:
    """Parse the DA ratings CSV (header ``worker_id,system_id,video_id,rating``)."""
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != DA_HEADER:
        raise ParseError(f"header must be {','.join(DA_HEADER)}", 1)
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, found {len(row)}", lineno)
        worker, system, video, rating_text = (c.strip() for c in row)
        rating = _parse_float(rating_text, "rating", lineno)
        if not 0.0 <= rating <= 100.0:
            raise ParseError(f"rating must be within [0, 100], got {rating}", lineno)
        records.append(DaRating(worker, system, video, rating))
    return tuple(records)


@dataclass(frozen=True)
class CaptionScore:
    system_id: str
    video_id: str
    metric: str
    value: float


def parse_caption_metrics(stream) -> tuple[CaptionScore, ...]:
    """Parse precomputed caption-metric values, CSV ``system_id,video_id,metric,value``."""
    reader = csv.reader(stream)
    header = next(reader, None)
    expected = ["system_id", "video_id", "metric", "value"]
    if header is None or [h.strip() for h in header] != expected:
        raise ParseError(f"header must be {','.join(expected)}", 1)
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, found {len(row)}", lineno)
        system, video, metric, value = (c.strip() for c in row)
        out.append(CaptionScore(system, video, metric, _parse_float(value, "value", lineno)))
    return tuple(out)
