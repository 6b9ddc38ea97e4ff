"""Activity detection scoring.

Reference and system instances of one activity are aligned once, then a
decision threshold is swept over the system confidences to produce the DET
curve (Pmiss against false alarms per minute). AOD alignment additionally
requires object-detection congruence ``1 - minMODE`` between the instances.

The alignment objective is lexicographic: first the number of matched
pairs, then the confidence ranks of the matched system instances, then a
congruence tie-break mixing temporal IoU and (AOD) object congruence. Ranking
confidence ahead of the congruence terms makes the matched system set a
greedy basis, so every threshold sees the largest achievable number of
correct detections, and a strictly increasing transform of the confidences
leaves the curve's points unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .assignment import greedy_cover, max_weight_matching
from .submission import ActivityInstance, ActivityInstanceSet, Box

MODES = ("AD", "AOD")
DEFAULT_FPS = 30.0


@dataclass(frozen=True)
class CongruenceParams:
    """Alignment and object-scoring parameters.

    temporal_threshold : minimum temporal IoU; 0 means any shared frame.
    spatial_threshold : minimum box IoU for an object match.
    cost_md, cost_fa : per-object miss and false-alarm costs in N_MODE.
    tiou_weight, congruence_weight : relative weights of the tie-break
        terms; they are rescaled so the tie-break over a whole matching can
        never outweigh one more matched pair or a better confidence rank.
    min_congruence : AOD pairs need ``1 - minMODE`` strictly above this.
    """

    temporal_threshold: float = 0.0
    spatial_threshold: float = 0.5
    cost_md: float = 1.0
    cost_fa: float = 1.0
    tiou_weight: float = 1.0
    congruence_weight: float = 1.0
    min_congruence: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.temporal_threshold <= 1.0:
            raise ValueError("temporal_threshold must be in [0, 1]")
        if not 0.0 <= self.spatial_threshold <= 1.0:
            raise ValueError("spatial_threshold must be in [0, 1]")
        if self.cost_md < 0 or self.cost_fa < 0:
            raise ValueError("costs must be nonnegative")
        if self.tiou_weight < 0 or self.congruence_weight < 0:
            raise ValueError("tie-break weights must be nonnegative")


DEFAULT_PARAMS = CongruenceParams()


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def temporal_overlap(a: ActivityInstance, b: ActivityInstance) -> int:
    """Shared frames of two inclusive spans."""
    return max(0, min(a.end_frame, b.end_frame) - max(a.begin_frame, b.begin_frame) + 1)


def temporal_iou(a: ActivityInstance, b: ActivityInstance) -> float:
    """Frame-count IoU of two inclusive spans."""
    inter = temporal_overlap(a, b)
    return inter / (a.n_frames + b.n_frames - inter)


def box_iou(a: Box, b: Box) -> float:
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union > 0 else 0.0


def _merge(spans: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    merged: list[list[int]] = []
    for b, e in sorted(spans):
        if merged and b <= merged[-1][1] + 1:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([b, e])
    return [(b, e) for b, e in merged]


def _length(spans: Sequence[tuple[int, int]]) -> int:
    return sum(e - b + 1 for b, e in spans)


def _intersection_length(a: Sequence[tuple[int, int]], b: Sequence[tuple[int, int]]) -> int:
    i = j = total = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if lo <= hi:
            total += hi - lo + 1
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return total


# ---------------------------------------------------------------------------
# Object congruence (N_MODE)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrameCounts:
    md: int
    fa: int
    cd: int


def _box_eligibility(ref_boxes: Sequence[Box], sys_boxes: Sequence[Box], threshold: float):
    iou = np.array([[box_iou(r, s) for s in sys_boxes] for r in ref_boxes], dtype=float).reshape(
        len(ref_boxes), len(sys_boxes)
    )
    return iou, iou >= threshold if threshold > 0 else iou > 0


def frame_mode(
    ref_boxes: Sequence[Box],
    sys_boxes: Sequence[Box],
    tau: float,
    params: CongruenceParams = DEFAULT_PARAMS,
) -> FrameCounts:
    """Per-frame object confusion counts at object threshold ``tau``.

    System boxes with ``conf >= tau`` are matched one-to-one to reference
    boxes (Hungarian assignment maximizing matched count, then IoU) among
    pairs with IoU at least ``params.spatial_threshold``.
    """
    kept = [b for b in sys_boxes if b.conf >= tau]
    if not ref_boxes or not kept:
        return FrameCounts(md=len(ref_boxes), fa=len(kept), cd=0)
    iou, eligible = _box_eligibility(ref_boxes, kept, params.spatial_threshold)
    bonus = min(len(ref_boxes), len(kept)) + 1.0
    cd = len(max_weight_matching(bonus + iou, eligible))
    return FrameCounts(md=len(ref_boxes) - cd, fa=len(kept) - cd, cd=cd)


def overlap_frames(ref: ActivityInstance, sys: ActivityInstance) -> list[int]:
    """Frames inside both spans that carry boxes in either instance."""
    lo = max(ref.begin_frame, sys.begin_frame)
    hi = min(ref.end_frame, sys.end_frame)
    annotated = set(ref.objects or ()) | set(sys.objects or ())
    return sorted(t for t in annotated if lo <= t <= hi)


def n_mode(
    pair: tuple[ActivityInstance, ActivityInstance],
    tau: float,
    params: CongruenceParams = DEFAULT_PARAMS,
) -> float:
    """Normalized multiple-object detection error of an instance pair.

    ``sum_t (C_MD * MD_t + C_FA * FA_t) / sum_t N_R^t`` over the frames both
    instances span. Returns NaN when those frames hold no reference boxes.
    """
    ref, sys = pair
    ref_objects = ref.objects or {}
    sys_objects = sys.objects or {}
    cost = 0.0
    n_ref = 0
    for t in overlap_frames(ref, sys):
        r = ref_objects.get(t, ())
        counts = frame_mode(r, sys_objects.get(t, ()), tau, params)
        cost += params.cost_md * counts.md + params.cost_fa * counts.fa
        n_ref += len(r)
    return cost / n_ref if n_ref else math.nan


def mode_curve(
    pair: tuple[ActivityInstance, ActivityInstance],
    params: CongruenceParams = DEFAULT_PARAMS,
) -> list[tuple[float, float]]:
    """``(tau, N_MODE(tau))`` at +inf and every distinct object confidence.

    Uses one greedy pass per frame in descending confidence order; the
    number of boxes kept among those with ``conf >= tau`` equals the
    maximum matching at ``tau``, so no per-threshold re-matching is needed.
    """
    ref, sys = pair
    ref_objects = ref.objects or {}
    sys_objects = sys.objects or {}
    frames = overlap_frames(ref, sys)
    n_ref = sum(len(ref_objects.get(t, ())) for t in frames)
    if n_ref == 0:
        return []
    confs: list[float] = []
    matched_confs: list[float] = []
    for t in frames:
        boxes = sys_objects.get(t, ())
        if not boxes:
            continue
        confs.extend(b.conf for b in boxes)
        r = ref_objects.get(t, ())
        if not r:
            continue
        _, eligible = _box_eligibility(r, boxes, params.spatial_threshold)
        adjacency = [list(np.flatnonzero(eligible[:, j])) for j in range(len(boxes))]
        order = sorted(range(len(boxes)), key=lambda j: -boxes[j].conf)
        kept = greedy_cover(adjacency, order, len(r))
        matched_confs.extend(boxes[j].conf for j in range(len(boxes)) if kept[j])
    all_confs = np.sort(np.asarray(confs))
    hit_confs = np.sort(np.asarray(matched_confs))
    curve = [(math.inf, params.cost_md)]
    for tau in sorted(set(confs), reverse=True):
        n_sys = len(all_confs) - np.searchsorted(all_confs, tau, side="left")
        cd = len(hit_confs) - np.searchsorted(hit_confs, tau, side="left")
        cost = params.cost_md * (n_ref - cd) + params.cost_fa * (n_sys - cd)
        curve.append((tau, float(cost / n_ref)))
    return curve


def min_mode(
    pair: tuple[ActivityInstance, ActivityInstance],
    params: CongruenceParams = DEFAULT_PARAMS,
) -> float:
    """Minimum N_MODE over object thresholds (NaN without reference boxes)."""
    curve = mode_curve(pair, params)
    return min(v for _, v in curve) if curve else math.nan


def object_congruence(
    pair: tuple[ActivityInstance, ActivityInstance],
    params: CongruenceParams = DEFAULT_PARAMS,
) -> float:
    """``1 - minMODE`` clamped to [0, 1]; 0 when no reference boxes overlap."""
    m = min_mode(pair, params)
    if math.isnan(m):
        return 0.0
    return 1.0 - min(max(m, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Instance alignment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatchedPair:
    ref_index: int
    sys_index: int
    temporal_iou: float
    confidence: float
    congruence: float | None = None
    min_mode: float | None = None
    kernel_value: float = 0.0


@dataclass(frozen=True)
class Alignment:
    activity: str
    mode: str
    pairs: tuple[MatchedPair, ...]
    unmatched_ref: tuple[int, ...]
    unmatched_sys: tuple[int, ...]
    sys_confidences: tuple[float, ...]

    @property
    def n_ref(self) -> int:
        return len(self.pairs) + len(self.unmatched_ref)


def _single_activity(aset: ActivityInstanceSet, what: str) -> str | None:
    labels = {i.activity for i in aset.instances}
    if len(labels) > 1:
        raise ValueError(f"{what} set mixes activity labels: {', '.join(sorted(labels))}")
    return next(iter(labels), None)


def _dense_ranks(values: Sequence[float]) -> list[int]:
    order = {v: r for r, v in enumerate(sorted(set(values)), start=1)}
    return [order[v] for v in values]


def eligible_pairs(
    ref: ActivityInstanceSet,
    sys: ActivityInstanceSet,
    params: CongruenceParams = DEFAULT_PARAMS,
    mode: str = "AD",
) -> dict[tuple[int, int], tuple[float, float | None, float | None]]:
    """Eligible ``(ref_index, sys_index)`` pairs with ``(tIoU, congruence, minMODE)``."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    out = {}
    by_video: dict[str, list[int]] = {}
    for j, s in enumerate(sys.instances):
        by_video.setdefault(s.video_id, []).append(j)
    for i, r in enumerate(ref.instances):
        for j in by_video.get(r.video_id, ()):
            s = sys.instances[j]
            if temporal_overlap(r, s) < 1:
                continue
            tiou = temporal_iou(r, s)
            if tiou < params.temporal_threshold:
                continue
            if mode == "AOD":
                mm = min_mode((r, s), params)
                cong = 0.0 if math.isnan(mm) else 1.0 - min(max(mm, 0.0), 1.0)
                if not cong > params.min_congruence:
                    continue
                out[(i, j)] = (tiou, cong, None if math.isnan(mm) else mm)
            else:
                out[(i, j)] = (tiou, None, None)
    return out


def tie_break(tiou: float, congruence: float | None, params: CongruenceParams) -> float:
    """Tie-break term in [0, 1]."""
    if congruence is None:
        return tiou
    total = params.tiou_weight + params.congruence_weight
    if total == 0:
        return 0.0
    return (params.tiou_weight * tiou + params.congruence_weight * congruence) / total


def alignment_objective(
    pairs: Iterable[tuple[int, int]],
    sys: ActivityInstanceSet,
    info: Mapping[tuple[int, int], tuple[float, float | None, float | None]],
    params: CongruenceParams = DEFAULT_PARAMS,
) -> tuple[int, int, float]:
    """Lexicographic objective ``(matched count, confidence-rank sum, tie-break sum)``.

    Confidence ranks are dense ranks over the whole system set.
    """
    ranks = _dense_ranks([s.confidence for s in sys.instances])
    pairs = list(pairs)
    return (
        len(pairs),
        sum(ranks[j] for _, j in pairs),
        math.fsum(tie_break(info[(i, j)][0], info[(i, j)][1], params) for i, j in pairs),
    )


def align_instances(
    ref: ActivityInstanceSet,
    sys: ActivityInstanceSet,
    params: CongruenceParams = DEFAULT_PARAMS,
    mode: str = "AD",
) -> Alignment:
    """Optimal one-to-one alignment of reference and system instances.

    Pairs are eligible when they share a video and at least one frame with
    temporal IoU at least ``params.temporal_threshold`` (AOD also needs
    object congruence above ``params.min_congruence``). Among eligible
    pairs the matching maximizes, in order, the number of pairs, the sum of
    the matched system confidence ranks and the tie-break sum.

    Raises
    ------
    ValueError
        If either set mixes activity labels, or a system instance lacks a
        confidence.
    """
    ref_label = _single_activity(ref, "reference")
    sys_label = _single_activity(sys, "system")
    if ref_label and sys_label and ref_label != sys_label:
        raise ValueError(f"reference activity {ref_label!r} differs from system activity {sys_label!r}")
    if any(s.confidence is None for s in sys.instances):
        raise ValueError("system instances need confidences")
    info = eligible_pairs(ref, sys, params, mode)
    confidences = tuple(float(s.confidence) for s in sys.instances)
    chosen: list[tuple[int, int]] = []
    videos = sorted({ref.instances[i].video_id for i, _ in info})
    for video in videos:
        rows = sorted({i for i, _ in info if ref.instances[i].video_id == video})
        cols = sorted({j for _, j in info if sys.instances[j].video_id == video})
        m = min(len(rows), len(cols))
        ranks = _dense_ranks([confidences[j] for j in cols])
        top_rank = max(ranks)
        rank_step = m + 1.0
        count_step = rank_step * top_rank * m + m + 1.0
        weights = np.zeros((len(rows), len(cols)))
        eligible = np.zeros((len(rows), len(cols)), dtype=bool)
        for a, i in enumerate(rows):
            for b, j in enumerate(cols):
                if (i, j) in info:
                    tiou, cong, _ = info[(i, j)]
                    weights[a, b] = count_step + rank_step * ranks[b] + tie_break(tiou, cong, params)
                    eligible[a, b] = True
        chosen.extend((rows[a], cols[b]) for a, b in max_weight_matching(weights, eligible))
    chosen.sort()
    pairs = []
    for i, j in chosen:
        tiou, cong, mm = info[(i, j)]
        pairs.append(MatchedPair(i, j, tiou, confidences[j], cong, mm, 1.0 + tie_break(tiou, cong, params)))
    matched_ref = {i for i, _ in chosen}
    matched_sys = {j for _, j in chosen}
    return Alignment(
        activity=ref_label or sys_label or "",
        mode=mode,
        pairs=tuple(pairs),
        unmatched_ref=tuple(i for i in range(len(ref.instances)) if i not in matched_ref),
        unmatched_sys=tuple(j for j in range(len(sys.instances)) if j not in matched_sys),
        sys_confidences=confidences,
    )


# ---------------------------------------------------------------------------
# Confusion counts, rates, DET curves
# ---------------------------------------------------------------------------


def confusion_counts(
    alignment: Alignment,
    tau: float,
    sys_confidences: Sequence[float] | None = None,
) -> tuple[int, int, int]:
    """``(N_CD, N_MD, N_FA)`` at decision threshold ``tau``."""
    conf = alignment.sys_confidences if sys_confidences is None else sys_confidences
    cd = sum(1 for p in alignment.pairs if conf[p.sys_index] >= tau)
    md = alignment.n_ref - cd
    fa = sum(1 for j in alignment.unmatched_sys if conf[j] >= tau)
    return cd, md, fa


def pmiss(n_md: int, n_true: int) -> float:
    if n_true < 1:
        raise ValueError("pmiss needs at least one reference instance")
    return n_md / n_true


def rfa(n_fa: int, minutes: float) -> float:
    if not minutes > 0:
        raise ValueError("video duration must be positive minutes")
    return n_fa / minutes


def tfa(
    sys: ActivityInstanceSet,
    ref: ActivityInstanceSet,
    tau: float,
    fps: float = DEFAULT_FPS,
    per_video: bool = False,
) -> float:
    """Fraction of non-target time flagged by system instances at ``tau``.

    Non-target time is each video's duration minus the frames covered by
    reference instances. By default the false-alarm and non-target frame
    counts are pooled over the corpus; ``per_video`` averages per-video
    ratios instead (videos without non-target time are skipped).
    """
    durations = dict(ref.video_durations)
    durations.update(sys.video_durations)
    fa_total = non_total = 0
    ratios = []
    for video in sorted(durations):
        n_frames = int(round(durations[video] * 60.0 * fps))
        ref_spans = _merge((r.begin_frame, r.end_frame) for r in ref.instances if r.video_id == video)
        sys_spans = _merge(
            (s.begin_frame, s.end_frame) for s in sys.instances if s.video_id == video and s.confidence >= tau
        )
        non_target = n_frames - _length(ref_spans)
        fa_frames = _length(sys_spans) - _intersection_length(sys_spans, ref_spans)
        fa_total += fa_frames
        non_total += non_target
        if non_target > 0:
            ratios.append(fa_frames / non_target)
    if per_video:
        if not ratios:
            raise ValueError("no video has non-target time")
        return math.fsum(ratios) / len(ratios)
    if non_total <= 0:
        raise ValueError("zero non-target time")
    return fa_total / non_total


@dataclass(frozen=True)
class DetPoint:
    threshold: float
    pmiss: float
    rfa: float
    tfa: float | None = None


@dataclass(frozen=True)
class DetCurve:
    activity: str
    points: tuple[DetPoint, ...]
    n_true: int
    minutes: float

    @property
    def rfas(self) -> np.ndarray:
        return np.array([p.rfa for p in self.points])

    @property
    def pmisses(self) -> np.ndarray:
        return np.array([p.pmiss for p in self.points])


def curve_from_alignment(
    alignment: Alignment,
    minutes: float,
    ref: ActivityInstanceSet | None = None,
    sys: ActivityInstanceSet | None = None,
    fps: float | None = None,
    tfa_per_video: bool = False,
) -> DetCurve:
    """Sweep thresholds over +inf and the distinct system confidences.

    Time-based false alarms are added when ``ref``, ``sys`` and ``fps`` are
    all given.
    """
    n_true = alignment.n_ref
    if n_true < 1:
        raise ValueError(f"activity {alignment.activity!r} has no reference instances")
    conf = alignment.sys_confidences
    hit = np.sort([conf[p.sys_index] for p in alignment.pairs])
    miss = np.sort([conf[j] for j in alignment.unmatched_sys])
    points = []
    for tau in [math.inf] + sorted(set(conf), reverse=True):
        cd = len(hit) - int(np.searchsorted(hit, tau, side="left"))
        fa = len(miss) - int(np.searchsorted(miss, tau, side="left"))
        t = tfa(sys, ref, tau, fps, tfa_per_video) if fps is not None and ref is not None and sys is not None else None
        points.append(DetPoint(tau, pmiss(n_true - cd, n_true), rfa(fa, minutes), t))
    return DetCurve(alignment.activity, tuple(points), n_true, minutes)


def det_curve(
    ref: ActivityInstanceSet,
    sys: ActivityInstanceSet,
    params: CongruenceParams = DEFAULT_PARAMS,
    mode: str = "AD",
    fps: float | None = None,
    tfa_per_video: bool = False,
) -> DetCurve:
    """Align once, then build the DET curve of one activity.

    The minutes denominator is the total duration of the reference video
    universe.
    """
    alignment = align_instances(ref, sys, params, mode)
    return curve_from_alignment(alignment, ref.total_minutes, ref, sys, fps, tfa_per_video)


def operating_index(curve: DetCurve, target_rfa: float) -> int | None:
    """Index of the last point with ``rfa <= target_rfa`` (None if there is none)."""
    if target_rfa < 0:
        raise ValueError("target rfa must be nonnegative")
    if not curve.points:
        raise ValueError("empty DET curve")
    idx = int(np.searchsorted(curve.rfas, target_rfa, side="right")) - 1
    return idx if idx >= 0 else None


def pmiss_at_rfa(curve: DetCurve, target_rfa: float) -> float:
    """Step-function Pmiss at a false-alarm rate (1.0 if no point qualifies)."""
    idx = operating_index(curve, target_rfa)
    return 1.0 if idx is None else curve.points[idx].pmiss


def naudc(curve: DetCurve, a: float = 0.2) -> float:
    """Normalized partial area under the DET curve on ``rfa`` in ``[0, a]``.

    ``Pmiss(x)`` is the right-continuous step function of
    :func:`pmiss_at_rfa`: 1 before the first point, constant after the last.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if not curve.points:
        raise ValueError("empty DET curve")
    rfas = curve.rfas
    inner = sorted({float(x) for x in rfas if 0 < x < a})
    edges = [0.0] + inner + [a]
    area = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        area += pmiss_at_rfa(curve, lo) * (hi - lo)
    return area / a


def matched_min_modes(alignment: Alignment, tau: float) -> list[float]:
    """minMODE of pairs detected at ``tau`` (pairs without reference boxes skipped)."""
    return [
        p.min_mode for p in alignment.pairs
        if p.min_mode is not None and alignment.sys_confidences[p.sys_index] >= tau
    ]


def mean_det_curve(curves: Sequence[DetCurve], grid: Sequence[float] | None = None) -> list[tuple[float, float]]:
    """Average the step Pmiss of several curves on a common false-alarm grid.

    The default grid is every false-alarm rate that occurs in any curve.
    """
    if not curves:
        raise ValueError("no curves to average")
    if grid is None:
        grid = sorted({float(x) for c in curves for x in c.rfas})
    return [(x, math.fsum(pmiss_at_rfa(c, x) for c in curves) / len(curves)) for x in grid]


def aggregate_activities(values: Mapping[str, float | None]) -> tuple[float, list[str]]:
    """Unweighted mean over activities; ``None`` marks an activity without
    reference instances, which is excluded and listed."""
    included = {a: v for a, v in values.items() if v is not None}
    excluded = sorted(a for a, v in values.items() if v is None)
    if not included:
        raise ValueError("every activity is empty")
    return math.fsum(included[a] for a in sorted(included)) / len(included), excluded
