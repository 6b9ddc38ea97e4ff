"""Assessment pools built from submitted runs.

Each topic's candidates are the deduplicated union of items across runs. An
item belongs to the first stratum whose rank range contains one of its
submitted ranks; that stratum's rate decides whether it enters the pool.
Inclusion is a Bernoulli draw from a counter-based hash keyed by
``(seed, topic, stratum, item)``, so pool membership does not depend on the
order of runs or topics.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .rounding import percent
from .submission import (
    JudgmentSet,
    ParseError,
    RankedRun,
    Stratum,
    check_strata,
    serialize_strata,
    sorted_topics,
)

SAMPLING_MODE = "bernoulli"


@dataclass(frozen=True)
class PoolSpec:
    strata: tuple[Stratum, ...]
    chunk_size: int = 1000
    seed: int = 0

    def __post_init__(self):
        check_strata(self.strata)
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_ranges(cls, ranges: Sequence[tuple[int, int, float]], chunk_size: int = 1000, seed: int = 0):
        """``ranges`` are ``(rank_lo, rank_hi, rate)``; stratum ids are 1, 2, ..."""
        strata = tuple(Stratum(i, lo, hi, float(rate)) for i, (lo, hi, rate) in enumerate(ranges, start=1))
        return cls(strata, chunk_size, seed)


TREC_STYLE_SPEC = PoolSpec.from_ranges([(1, 300, 1.0), (301, 1000, 0.25)])


@dataclass(frozen=True)
class PoolChunk:
    topic: str
    index: int
    stratum_id: int
    items: tuple[str, ...]

    @property
    def filename(self) -> str:
        return f"pool.{self.topic}.{self.index}.txt"


@dataclass(frozen=True)
class PoolSet:
    """Pooled items per topic plus the stratum of every candidate.

    ``membership`` covers all candidates, pooled or not; scoring from sampled
    judgments needs the stratum of unjudged retrieved items.
    """

    pools: Mapping[str, tuple[tuple[str, int], ...]]
    membership: Mapping[str, Mapping[str, int]]
    chunks: tuple[PoolChunk, ...]
    spec: PoolSpec
    sampling: str = SAMPLING_MODE

    def pooled_items(self, topic: str) -> set[str]:
        return {item for item, _ in self.pools.get(topic, ())}


def inclusion_draw(seed: int, topic: str, stratum_id: int, item: str) -> float:
    """Uniform [0, 1) value derived only from its key."""
    key = f"{seed}\x1f{topic}\x1f{stratum_id}\x1f{item}".encode()
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2.0**64


def stratum_membership(runs: Sequence[RankedRun], strata: Sequence[Stratum], topic: str) -> dict[str, int]:
    """Map each candidate item of ``topic`` to its stratum id.

    Items never submitted at a rank inside any stratum are left out.
    """
    los = [s.rank_lo for s in strata]
    best: dict[str, int] = {}
    for run in runs:
        for entry in run.entries.get(topic, ()):
            i = bisect.bisect_right(los, entry.rank) - 1
            if i < 0 or not strata[i].contains(entry.rank):
                continue
            if entry.item_id not in best or i < best[entry.item_id]:
                best[entry.item_id] = i
    return {item: strata[i].stratum_id for item, i in best.items()}


def build_pools(runs: Sequence[RankedRun], spec: PoolSpec = TREC_STYLE_SPEC) -> PoolSet:
    """Deduplicate, stratify and sample the runs into assessment pools.

    Parameters
    ----------
    runs : sequence of RankedRun
        At least one validated run.
    spec : PoolSpec
        Strata (rank range and sampling rate) plus chunk size and seed.

    Returns
    -------
    PoolSet
        Pools ordered by topic id then item id, and chunk lists of at most
        ``spec.chunk_size`` lexicographically sorted items per stratum.
    """
    if not runs:
        raise ValueError("cannot build pools from an empty run set")
    rates = {s.stratum_id: s.sampling_rate for s in spec.strata}
    topics = sorted_topics({t for run in runs for t in run.entries})
    pools, membership, chunks = {}, {}, []
    for topic in topics:
        members = stratum_membership(runs, spec.strata, topic)
        membership[topic] = {item: members[item] for item in sorted(members)}
        pooled = []
        for item, sid in membership[topic].items():
            rate = rates[sid]
            if rate >= 1.0 or inclusion_draw(spec.seed, topic, sid, item) < rate:
                pooled.append((item, sid))
        pools[topic] = tuple(pooled)
        index = 1
        for s in spec.strata:
            items = [item for item, sid in pooled if sid == s.stratum_id]
            for start in range(0, len(items), spec.chunk_size):
                chunks.append(PoolChunk(topic, index, s.stratum_id, tuple(items[start:start + spec.chunk_size])))
                index += 1
    return PoolSet(pools, membership, tuple(chunks), spec)


def write_pool_files(poolset: PoolSet, outdir: str) -> list[str]:
    """Write chunk files, the membership table, strata and a manifest.

    Returns the written file names (relative to ``outdir``) in write order.
    """
    os.makedirs(outdir, exist_ok=True)
    written = []
    for chunk in poolset.chunks:
        with open(os.path.join(outdir, chunk.filename), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("".join(f"{item}\n" for item in chunk.items))
        written.append(chunk.filename)
    with open(os.path.join(outdir, "membership.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        for topic, members in poolset.membership.items():
            for item, sid in members.items():
                fh.write(f"{topic}\t{sid}\t{item}\n")
    written.append("membership.tsv")
    with open(os.path.join(outdir, "strata.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_strata({s.stratum_id: s for s in poolset.spec.strata}))
    written.append("strata.tsv")
    manifest = {
        "sampling": poolset.sampling,
        "seed": poolset.spec.seed,
        "chunk_size": poolset.spec.chunk_size,
        "strata": [
            {"stratum": s.stratum_id, "rank_lo": s.rank_lo, "rank_hi": s.rank_hi, "sampling_rate": s.sampling_rate}
            for s in poolset.spec.strata
        ],
        "membership_file": "membership.tsv",
        "strata_file": "strata.tsv",
        "chunks": [
            {"file": c.filename, "topic": c.topic, "chunk": c.index, "stratum": c.stratum_id, "count": len(c.items)}
            for c in poolset.chunks
        ],
    }
    with open(os.path.join(outdir, "manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    written.append("manifest.json")
    return written


def parse_membership(stream) -> dict[str, dict[str, int]]:
    """Read ``topic<TAB>stratum_id<TAB>item`` lines written by :func:`write_pool_files`."""
    out: dict[str, dict[str, int]] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(f"expected 3 tab-separated fields, found {len(fields)}", lineno)
        topic, sid, item = fields
        try:
            out.setdefault(topic, {})[item] = int(sid)
        except ValueError:
            raise ParseError(f"stratum id is not an integer: {sid!r}", lineno) from None
    return out


@dataclass(frozen=True)
class PoolStatsRow:
    topic: str
    total_submitted: int
    unique_submitted: int
    pct_unique: float
    judged: int
    pct_unique_judged: float
    relevant: int
    pct_judged_relevant: float


def pool_stats_row(topic: str, total: int, unique: int, judged: int, relevant: int) -> PoolStatsRow:
    return PoolStatsRow(
        topic,
        total,
        unique,
        percent(unique, total),
        judged,
        percent(judged, unique),
        relevant,
        percent(relevant, judged),
    )


def pool_stats(
    runs: Sequence[RankedRun],
    poolset: PoolSet | None,
    judgments: JudgmentSet,
) -> list[PoolStatsRow]:
    """Per-topic pooling and judging table.

    Percentages are ``100 * ratio`` rounded half-up to two decimals; an empty
    denominator reports 0.00.
    """
    topics = set(poolset.pools) if poolset is not None else {t for r in runs for t in r.entries}
    stray = set(judgments.topics) - topics
    if stray:
        raise ValueError(f"judged topics not in the pool: {', '.join(sorted_topics(stray))}")
    rows = []
    for topic in sorted_topics(topics):
        total = sum(len(r.entries.get(topic, ())) for r in runs)
        unique = len({e.item_id for r in runs for e in r.entries.get(topic, ())})
        labels = judgments.labels(topic)
        rows.append(pool_stats_row(topic, total, unique, len(labels), sum(labels.values())))
    return rows


@dataclass(frozen=True)
class UniquenessReport:
    per_topic: Mapping[str, tuple[int, int]]
    per_team: Mapping[str, int]
    per_team_topic: Mapping[str, Mapping[str, int]] = field(default_factory=dict)


def uniqueness_report(
    runs: Sequence[RankedRun],
    judgments: JudgmentSet,
    team_of: Mapping[str, str] | None = None,
) -> UniquenessReport:
    """Count relevant items found by exactly one team versus several.

    An item counts for a team if any of the team's runs submitted it for the
    topic, at any rank. Runs missing from ``team_of`` form their own team.
    """
    team_of = team_of or {}
    teams = sorted({team_of.get(r.run_tag, r.run_tag) for r in runs})
    per_topic = {}
    per_team = {t: 0 for t in teams}
    per_team_topic: dict[str, dict[str, int]] = {t: {} for t in teams}
    topics = sorted_topics(set(judgments.topics) | {t for r in runs for t in r.entries})
    for topic in topics:
        relevant = judgments.relevant(topic)
        finders: dict[str, set[str]] = {}
        for run in runs:
            team = team_of.get(run.run_tag, run.run_tag)
            for item in run.item_set(topic) & relevant:
                finders.setdefault(item, set()).add(team)
        unique = shared = 0
        for item, found_by in finders.items():
            if len(found_by) == 1:
                unique += 1
                (team,) = found_by
                per_team[team] += 1
                per_team_topic[team][topic] = per_team_topic[team].get(topic, 0) + 1
            else:
                shared += 1
        per_topic[topic] = (unique, shared)
    return UniquenessReport(per_topic, per_team, per_team_topic)
