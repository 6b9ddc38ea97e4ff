"""Ranked-retrieval and categorical scores.

Zero-denominator cases return 0.0; the structured variants (:class:`TopicScore`,
:class:`PRF`) carry a flag saying so instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .submission import AnswerSheet, JudgmentSet, RankedRun, sorted_topics

DEFAULT_EPSILON = 1e-5


@dataclass(frozen=True)
class TopicScore:
    topic_id: str
    metric: str
    value: float
    num_judged: int = 0
    num_relevant: int = 0
    num_retrieved: int = 0
    flags: tuple[str, ...] = ()


def average_precision(ranked: Sequence[str], relset: Iterable[str]) -> float:
    """Non-interpolated average precision of one ranked list.

    Items not in ``relset`` (judged or not) count as nonrelevant. Returns 0.0
    when ``relset`` is empty.

    >>> average_precision(["a", "x", "b"], {"a", "b"})  # (1/1 + 2/3) / 2
    0.8333333333333333
    """
    relset = set(relset)
    if not relset:
        return 0.0
    hits = 0
    total = 0.0
    for k, item in enumerate(ranked, start=1):
        if item in relset:
            hits += 1
            total += hits / k
    return total / len(relset)


def mean_over_topics(scores: Sequence[TopicScore | float]) -> float:
    """Arithmetic mean of per-topic values (zero-relevant topics count as 0)."""
    if not scores:
        raise ValueError("cannot average an empty set of topic scores")
    values = [s.value if isinstance(s, TopicScore) else float(s) for s in scores]
    return math.fsum(values) / len(values)


def extended_inferred_ap(
    ranked: Sequence[str],
    labels: Mapping[str, bool],
    strata_of: Mapping[str, int],
    rates: Mapping[int, float],
    epsilon: float = DEFAULT_EPSILON,
    membership: Mapping[str, int] | None = None,
) -> float:
    """Estimate average precision from stratified sampled judgments.

    Parameters
    ----------
    ranked : sequence of str
        The run's items for one topic, best first.
    labels : mapping item -> bool
        Judged items of the topic (all of them, retrieved or not).
    strata_of : mapping item -> stratum id
        Stratum of every judged item.
    rates : mapping stratum id -> sampling rate in (0, 1]
    epsilon : float
        Smoothing for the per-stratum precision estimate above each rank.
    membership : mapping item -> stratum id, optional
        Stratum of unjudged pool candidates. Retrieved items with no known
        stratum count as nonrelevant and add nothing to the estimate.

    Notes
    -----
    For a judged relevant item at rank ``k`` in stratum ``s(k)`` the
    expected precision at ``k`` is ``(1 + sum_s |D_sk| * (r_sk + eps) /
    (r_sk + n_sk + 2 eps)) / k``, where ``D_sk`` are the items above ``k``
    in stratum ``s`` and ``r_sk``/``n_sk`` count the judged relevant and
    nonrelevant among them (a 0/0 ratio is 0). Each such term is weighted by
    ``1/p_s(k)`` and the sum is divided by the estimated number of relevant
    items ``sum_s rel_s / p_s``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    for item in labels:
        if item not in strata_of:
            raise ValueError(f"judged item {item} has no stratum")
    for sid, rate in rates.items():
        if not rate > 0:
            raise ValueError(f"stratum {sid}: sampling rate must be positive, got {rate}")

    rel_by_stratum: dict[int, int] = {}
    for item, is_rel in labels.items():
        sid = strata_of[item]
        if sid not in rates:
            raise ValueError(f"judged item {item} is in stratum {sid}, which has no rate")
        if is_rel:
            rel_by_stratum[sid] = rel_by_stratum.get(sid, 0) + 1
    r_hat = math.fsum(count / rates[sid] for sid, count in sorted(rel_by_stratum.items()))
    if r_hat == 0 or not ranked:
        return 0.0

    strata_ids = sorted(rates)
    column = {sid: i for i, sid in enumerate(strata_ids)}
    n = len(ranked)
    stratum_col = np.full(n, -1, dtype=np.int64)
    judged_rel = np.zeros(n, dtype=bool)
    judged_non = np.zeros(n, dtype=bool)
    for k, item in enumerate(ranked):
        if item in labels:
            stratum_col[k] = column[strata_of[item]]
            judged_rel[k] = labels[item]
            judged_non[k] = not labels[item]
        elif membership is not None and item in membership and membership[item] in column:
            stratum_col[k] = column[membership[item]]

    above_sum = np.zeros(n)
    for c in range(len(strata_ids)):
        in_s = stratum_col == c
        # counts strictly above each rank: exclusive cumulative sums
        d = np.concatenate(([0], np.cumsum(in_s)[:-1]))
        r = np.concatenate(([0], np.cumsum(in_s & judged_rel)[:-1]))
        nr = np.concatenate(([0], np.cumsum(in_s & judged_non)[:-1]))
        denom = r + nr + 2.0 * epsilon
        frac = np.divide(r + epsilon, denom, out=np.zeros(n), where=denom > 0)
        above_sum += d * frac

    hits = np.flatnonzero(judged_rel)
    if hits.size == 0:
        return 0.0
    inv_rate = np.array([1.0 / rates[strata_ids[c]] for c in range(len(strata_ids))])
    ks = hits + 1.0
    prec = (1.0 + above_sum[hits]) / ks
    return float(np.sum(inv_rate[stratum_col[hits]] * prec) / r_hat)


def topic_xinfap(
    run: RankedRun,
    topic: str,
    judgments: JudgmentSet,
    epsilon: float = DEFAULT_EPSILON,
    membership: Mapping[str, int] | None = None,
) -> TopicScore:
    labels = judgments.labels(topic)
    ranked = run.items(topic)
    value = extended_inferred_ap(ranked, labels, judgments.strata_of(topic), judgments.rates, epsilon, membership)
    n_rel = sum(labels.values())
    flags = ("no relevant items",) if n_rel == 0 else ()
    return TopicScore(topic, "xinfAP", value, len(labels), n_rel, len(ranked), flags)


def topic_ap(run: RankedRun, topic: str, judgments: JudgmentSet) -> TopicScore:
    labels = judgments.labels(topic)
    relevant = judgments.relevant(topic)
    ranked = run.items(topic)
    flags = ("no relevant items",) if not relevant else ()
    return TopicScore(topic, "AP", average_precision(ranked, relevant), len(labels), len(relevant), len(ranked), flags)


def mrr(answers: Sequence[Sequence[str]], keys: Sequence[str]) -> float:
    """Mean reciprocal rank of each key in its ranked candidate list (0 if absent)."""
    if len(answers) != len(keys):
        raise ValueError(f"{len(answers)} answer lists for {len(keys)} keys")
    if not keys:
        raise ValueError("no queries to score")
    recips = []
    for ranked, key in zip(answers, keys):
        ranked = list(ranked)
        recips.append(1.0 / (ranked.index(key) + 1) if key in ranked else 0.0)
    return math.fsum(recips) / len(recips)


def accuracy(answers: AnswerSheet, key: AnswerSheet) -> float:
    """Fraction of the key's multiple-choice questions answered correctly.

    Unanswered questions count as wrong; a submitted query id absent from
    the key is an error.
    """
    key_map = key.by_query()
    submitted = answers.by_query()
    unknown = sorted(set(submitted) - set(key_map))
    if unknown:
        raise ValueError(f"unknown query id(s) in submission: {', '.join(unknown)}")
    questions = [a for a in key.entries if a.kind == "multiple_choice"]
    if not questions:
        raise ValueError("key has no multiple-choice questions")
    correct = 0
    for q in questions:
        sub = submitted.get(q.query_id)
        if sub is not None and sub.kind == "multiple_choice" and sub.answer == q.answer:
            correct += 1
    return correct / len(questions)


def ranked_answer_mrr(answers: AnswerSheet, key: AnswerSheet) -> float:
    """MRR over the key's ranked-list queries; the key's first candidate is correct."""
    key_map = key.by_query()
    unknown = sorted(set(answers.by_query()) - set(key_map))
    if unknown:
        raise ValueError(f"unknown query id(s) in submission: {', '.join(unknown)}")
    submitted = answers.by_query()
    lists, keys = [], []
    for q in key.entries:
        if q.kind != "ranked_list":
            continue
        sub = submitted.get(q.query_id)
        lists.append(sub.answer if sub is not None and sub.kind == "ranked_list" else ())
        keys.append(q.answer[0] if isinstance(q.answer, tuple) else q.answer)
    return mrr(lists, keys)


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float
    flags: tuple[str, ...] = ()


def prf(tp: int, fp: int, fn: int) -> PRF:
    """Precision, recall and F1 from counts; empty denominators give 0 and a flag."""
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be nonnegative")
    flags = []
    if tp + fp == 0:
        flags.append("precision undefined")
    if tp + fn == 0:
        flags.append("recall undefined")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if 2 * tp + fp + fn == 0:
        flags.append("f1 undefined")
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return PRF(precision, recall, f1, tuple(flags))


# ---------------------------------------------------------------------------
# Novelty
# ---------------------------------------------------------------------------

NOVELTY_MODES = ("unique", "all-weighted")


def retrieval_counts(runs: Sequence[RankedRun], topic: str) -> dict[str, int]:
    """How many runs retrieved each item for ``topic``."""
    counts: dict[str, int] = {}
    for run in runs:
        for item in run.item_set(topic):
            counts[item] = counts.get(item, 0) + 1
    return counts


def novelty_weights(runs: Sequence[RankedRun], topic: str) -> dict[str, float]:
    """Weight ``1 - N/M`` per item: N runs of M retrieved it."""
    m = len(runs)
    return {item: 1.0 - n / m for item, n in retrieval_counts(runs, topic).items()}


@dataclass(frozen=True)
class NoveltyResult:
    run_tag: str
    mode: str
    per_topic: Mapping[str, float]
    per_topic_max: Mapping[str, float]
    score: float
    normalized: float


def novelty(
    run: RankedRun,
    all_runs: Sequence[RankedRun],
    judgments: JudgmentSet,
    mode: str = "unique",
    topics: Iterable[str] | None = None,
    counts: Mapping[str, Mapping[str, int]] | None = None,
) -> NoveltyResult:
    """Novelty of ``run`` against the consideration set ``all_runs``.

    Per topic, ``S`` sums ``1 - N/M`` over the relevant items the run
    retrieved; in ``"unique"`` mode only items no other run retrieved count
    (N = 1). The score is the mean ``S`` over the evaluated topics (the
    judged topics unless ``topics`` is given). ``normalized`` divides each
    topic's ``S`` by the largest value any run could reach there before
    averaging, which keeps it in [0, 1].

    ``counts`` may carry precomputed :func:`retrieval_counts` per topic
    when scoring every run of the same consideration set.
    """
    if mode not in NOVELTY_MODES:
        raise ValueError(f"mode must be one of {NOVELTY_MODES}")
    m = len(all_runs)
    if m < 2:
        raise ValueError("novelty needs at least two runs in the consideration set")
    if not any(r is run or r.run_tag == run.run_tag for r in all_runs):
        raise ValueError(f"run {run.run_tag} is not in the consideration set")
    topics = sorted_topics(topics if topics is not None else judgments.topics)
    if not topics:
        raise ValueError("no evaluated topics")
    per_topic, per_max, ratios = {}, {}, []
    for topic in topics:
        relevant = judgments.relevant(topic)
        counts_t = counts[topic] if counts is not None else retrieval_counts(all_runs, topic)
        mine = run.item_set(topic) & relevant
        if mode == "unique":
            s = math.fsum(1.0 - 1.0 / m for item in sorted(mine) if counts_t[item] == 1)
            best = (1.0 - 1.0 / m) * sum(1 for item in relevant if counts_t.get(item) == 1)
        else:
            s = math.fsum(1.0 - counts_t[item] / m for item in sorted(mine))
            best = math.fsum(1.0 - counts_t[item] / m for item in sorted(relevant) if item in counts_t)
        per_topic[topic] = s
        per_max[topic] = best
        ratios.append(s / best if best > 0 else 0.0)
    return NoveltyResult(
        run.run_tag,
        mode,
        per_topic,
        per_max,
        math.fsum(per_topic.values()) / len(topics),
        math.fsum(ratios) / len(topics),
    )


def novelty_all(
    runs: Sequence[RankedRun],
    judgments: JudgmentSet,
    mode: str = "unique",
    topics: Iterable[str] | None = None,
) -> list[NoveltyResult]:
    """Novelty of every run in the consideration set ``runs``."""
    topics = sorted_topics(topics if topics is not None else judgments.topics)
    counts = {t: retrieval_counts(runs, t) for t in topics}
    return [novelty(r, runs, judgments, mode, topics, counts) for r in runs]


def novelty_score(
    run: RankedRun,
    all_runs: Sequence[RankedRun],
    judgments: JudgmentSet,
    mode: str = "unique",
) -> float:
    """Mean per-topic novelty sum ``S``; see :func:`novelty`."""
    return novelty(run, all_runs, judgments, mode).score


def novelty_consideration_set(runs: Sequence[RankedRun], team_of: Mapping[str, str]) -> list[RankedRun]:
    """Drop the other runs of every team that submitted a novelty run."""
    novelty_teams = {team_of.get(r.run_tag, r.run_tag) for r in runs if r.run_kind == "novelty"}
    return [
        r for r in runs
        if r.run_kind == "novelty" or team_of.get(r.run_tag, r.run_tag) not in novelty_teams
    ]


# ---------------------------------------------------------------------------
# Summaries (key facts and subjective ratings)
# ---------------------------------------------------------------------------


def msum_objective(correct: int, possible: int) -> float:
    """Share of possible key facts recalled."""
    if possible < 1:
        raise ValueError("possible must be at least 1")
    if correct < 0:
        raise ValueError("correct must be nonnegative")
    if correct > possible:
        raise ValueError(f"correct ({correct}) exceeds possible ({possible})")
    return correct / possible


def msum_precision(correct: int, false_claims: int) -> float:
    if correct < 0 or false_claims < 0:
        raise ValueError("counts must be nonnegative")
    total = correct + false_claims
    return correct / total if total else 0.0


def msum_subjective(tempo_or_readability: float, contextuality: float, redundancy: float) -> float:
    """Combine 1-7 ratings; redundancy is inverted (8 - r) since low is good."""
    for name, value in (("tempo_or_readability", tempo_or_readability),
                        ("contextuality", contextuality), ("redundancy", redundancy)):
        if not 1.0 <= value <= 7.0:
            raise ValueError(f"{name} rating {value} outside [1, 7]")
    return (tempo_or_readability + contextuality + (8.0 - redundancy)) / 3.0
