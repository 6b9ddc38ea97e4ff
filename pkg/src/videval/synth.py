"""Seeded synthetic fixtures for tests, demos and the ``gen`` command."""

from __future__ import annotations

import numpy as np

from .pooling import TREC_STYLE_SPEC, PoolSpec, build_pools
from .submission import (
    ActivityInstance,
    ActivityInstanceSet,
    Box,
    Judgment,
    JudgmentSet,
    RankedEntry,
    RankedRun,
    canonicalize_run,
)


def synthetic_avs(
    n_runs: int = 33,
    n_topics: int = 30,
    depth: int = 1000,
    candidates: int = 4000,
    relevant_per_topic: int = 200,
    seed: int = 0,
    first_topic: int = 1701,
    pool_spec: PoolSpec = TREC_STYLE_SPEC,
) -> tuple[list[RankedRun], JudgmentSet]:
    """Runs over a shared candidate space plus pooled, judged relevance.

    Each run ranks candidates by a noisy relevance signal whose strength
    varies by run; judgments cover exactly the sampled pool.
    """
    topics = [str(first_topic + t) for t in range(n_topics)]
    skill = np.random.default_rng([seed, 0]).uniform(0.5, 3.0, size=n_runs)
    truth: dict[str, set[str]] = {}
    per_run: list[dict[str, tuple[RankedEntry, ...]]] = [{} for _ in range(n_runs)]
    for t_idx, topic in enumerate(topics):
        rng = np.random.default_rng([seed, 1, t_idx])
        ids = np.array([f"shot{topic}_{k:05d}" for k in range(candidates)])
        rel = np.zeros(candidates, dtype=bool)
        rel[rng.choice(candidates, size=min(relevant_per_topic, candidates), replace=False)] = True
        truth[topic] = set(ids[rel])
        for r in range(n_runs):
            noise = rng.normal(size=candidates)
            score = skill[r] * rel + noise
            top = np.argsort(-score, kind="stable")[:depth]
            per_run[r][topic] = tuple(
                RankedEntry(str(ids[i]), k, round(float(score[i]), 6)) for k, i in enumerate(top, start=1)
            )
    runs = []
    for r in range(n_runs):
        rng = np.random.default_rng([seed, 2, r])
        times = {t: round(float(rng.uniform(1, 60)), 3) for t in topics}
        runs.append(
            canonicalize_run(
                RankedRun(
                    run_tag=f"run{r + 1:02d}",
                    entries=per_run[r],
                    run_kind="common",
                    training_type="D",
                    processing_time=times,
                )
            )
        )
    pools = build_pools(runs, pool_spec)
    judged = {
        topic: tuple(Judgment(item, sid, item in truth[topic]) for item, sid in pools.pools[topic])
        for topic in pools.pools
    }
    strata = {s.stratum_id: s for s in pool_spec.strata}
    return runs, JudgmentSet(judged, strata)


def _boxes_for(span: tuple[int, int], rng: np.random.Generator, every: int, jitter: float = 0.0,
               conf: float | None = None) -> dict[int, tuple[Box, ...]]:
    begin, end = span
    base_x, base_y = rng.uniform(0, 1500), rng.uniform(0, 800)
    out = {}
    for f in range(begin - begin % every + every, end + 1, every):
        dx, dy = (rng.normal(scale=jitter, size=2) if jitter else (0.0, 0.0))
        c = float(np.round(rng.uniform(0.3, 1.0), 3)) if conf is None else conf
        out[f] = (Box(round(base_x + dx, 2), round(base_y + dy, 2), 80.0, 160.0, c),)
    return out


def synthetic_actev(
    n_activities: int = 20,
    n_videos: int = 6,
    minutes_per_video: float = 5.0,
    instances_per_activity: tuple[int, int] = (4, 12),
    seed: int = 0,
    fps: float = 30.0,
    box_every: int = 30,
    miss_rate: float = 0.2,
    false_alarms: tuple[int, int] = (0, 6),
) -> tuple[ActivityInstanceSet, ActivityInstanceSet]:
    """Reference and system activity sets with per-frame boxes.

    System instances are jittered copies of most reference instances with
    higher confidences, plus unmatched false alarms with lower ones.
    """
    rng = np.random.default_rng(seed)
    videos = [f"video{v:02d}" for v in range(n_videos)]
    durations = {v: float(minutes_per_video) for v in videos}
    n_frames = int(minutes_per_video * 60 * fps)
    ref_inst, sys_inst = [], []
    for a in range(n_activities):
        activity = f"activity_{a:02d}"
        for _ in range(int(rng.integers(instances_per_activity[0], instances_per_activity[1] + 1))):
            video = videos[int(rng.integers(n_videos))]
            length = int(rng.integers(60, 600))
            begin = int(rng.integers(0, n_frames - length))
            span = (begin, begin + length - 1)
            ref_inst.append(ActivityInstance(activity, video, span[0], span[1], None, _boxes_for(span, rng, box_every)))
            if rng.uniform() < miss_rate:
                continue
            shift = int(rng.integers(-length // 4, length // 4 + 1))
            sb = max(0, span[0] + shift)
            se = min(n_frames - 1, max(sb, span[1] + shift))
            ref_boxes = ref_inst[-1].objects
            sys_boxes = {}
            for f, boxes in ref_boxes.items():
                if sb <= f <= se:
                    b = boxes[0]
                    sys_boxes[f] = (Box(round(b.x + rng.normal(scale=10), 2), round(b.y + rng.normal(scale=10), 2),
                                        b.w, b.h, float(np.round(rng.uniform(0.3, 1.0), 3))),)
            conf = float(np.round(rng.uniform(0.4, 1.0), 4))
            sys_inst.append(ActivityInstance(activity, video, sb, se, conf, sys_boxes))
        for _ in range(int(rng.integers(false_alarms[0], false_alarms[1] + 1))):
            video = videos[int(rng.integers(n_videos))]
            length = int(rng.integers(30, 300))
            begin = int(rng.integers(0, n_frames - length))
            span = (begin, begin + length - 1)
            conf = float(np.round(rng.uniform(0.0, 0.8), 4))
            sys_inst.append(ActivityInstance(activity, video, span[0], span[1], conf,
                                             _boxes_for(span, rng, box_every, jitter=5.0)))
    return ActivityInstanceSet(tuple(ref_inst), durations), ActivityInstanceSet(tuple(sys_inst), durations)
