"""Brute-force reference implementations used as test oracles.

Nothing here imports the scoring code under test except plain data types;
each routine is a direct, slow reading of a definition (exact fractions,
exhaustive enumeration) so it can check the fast paths independently.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction


# --- ranked retrieval -------------------------------------------------------


def ap_exact(ranked, relevant) -> Fraction:
    """AP as the mean over relevant items of precision at their rank."""
    relevant = set(relevant)
    if not relevant:
        return Fraction(0)
    total = Fraction(0)
    for k in range(1, len(ranked) + 1):
        if ranked[k - 1] in relevant:
            hits = sum(1 for x in ranked[:k] if x in relevant)
            total += Fraction(hits, k)
    return total / len(relevant)


def xinfap_exact(ranked, labels, stratum, rates, epsilon=Fraction(0)) -> Fraction:
    """Stratified inferred AP, term by term, in exact arithmetic.

    ``labels`` holds the sampled (judged) items; ``stratum`` gives the stratum
    of every ranked item (judged or not). ``rates`` are Fractions.
    """
    r_hat = sum((Fraction(1) / rates[stratum[i]] for i, rel in labels.items() if rel), Fraction(0))
    if r_hat == 0:
        return Fraction(0)
    total = Fraction(0)
    for k in range(1, len(ranked) + 1):
        item = ranked[k - 1]
        if not labels.get(item, False):
            continue
        above = ranked[: k - 1]
        inner = Fraction(0)
        for s in rates:
            d = [x for x in above if stratum.get(x) == s]
            r = sum(1 for x in d if labels.get(x) is True)
            n = sum(1 for x in d if labels.get(x) is False)
            den = r + n + 2 * epsilon
            if den:
                inner += len(d) * (r + epsilon) / den
        total += (1 + inner) / k / rates[stratum[item]]
    return total / r_hat


def bernoulli_samples(items, stratum, rates):
    """Every judged subset of ``items`` with its probability.

    Each item is judged independently with its stratum's rate; rate-1 items
    are always judged.
    """
    items = list(items)
    for mask in itertools.product((False, True), repeat=len(items)):
        p = Fraction(1)
        for item, keep in zip(items, mask):
            q = rates[stratum[item]]
            p *= q if keep else 1 - q
        if p:
            yield [i for i, keep in zip(items, mask) if keep], p


# --- activity alignment -----------------------------------------------------


def span_overlap(a, b) -> int:
    return max(0, min(a.end_frame, b.end_frame) - max(a.begin_frame, b.begin_frame) + 1)


def tiou_exact(a, b) -> Fraction:
    inter = span_overlap(a, b)
    union = a.n_frames + b.n_frames - inter
    return Fraction(inter, union)


def box_iou_float(a, b) -> float:
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union > 0 else 0.0


def max_matching_size(n_left, n_right, edge) -> int:
    """Largest one-to-one matching by trying every injection of the left side."""
    best = 0
    rights = list(range(n_right)) + [None] * n_left
    for perm in itertools.permutations(rights, n_left):
        used = [r for r in perm if r is not None]
        if len(set(used)) != len(used):
            continue
        size = sum(1 for i, r in enumerate(perm) if r is not None and edge(i, r))
        best = max(best, size)
    return best


def frame_counts_bruteforce(ref_boxes, sys_boxes, tau, threshold=0.5):
    kept = [b for b in sys_boxes if b.conf >= tau]

    def ok(i, j):
        v = box_iou_float(ref_boxes[i], kept[j])
        return v >= threshold if threshold > 0 else v > 0

    cd = max_matching_size(len(ref_boxes), len(kept), ok)
    return len(ref_boxes) - cd, len(kept) - cd, cd


def min_mode_bruteforce(ref, sys, threshold=0.5, cost_md=1.0, cost_fa=1.0):
    """Minimum over object thresholds of pooled MODE; NaN without reference boxes."""
    lo, hi = max(ref.begin_frame, sys.begin_frame), min(ref.end_frame, sys.end_frame)
    r_obj, s_obj = ref.objects or {}, sys.objects or {}
    frames = sorted(t for t in set(r_obj) | set(s_obj) if lo <= t <= hi)
    n_ref = sum(len(r_obj.get(t, ())) for t in frames)
    if n_ref == 0:
        return math.nan
    confs = {b.conf for t in frames for b in s_obj.get(t, ())}
    best = math.inf
    for tau in [math.inf] + sorted(confs):
        cost = 0.0
        for t in frames:
            md, fa, _ = frame_counts_bruteforce(r_obj.get(t, ()), s_obj.get(t, ()), tau, threshold)
            cost += cost_md * md + cost_fa * fa
        best = min(best, cost / n_ref)
    return best


def eligible_bruteforce(ref, sys, mode="AD", temporal_threshold=0.0, spatial_threshold=0.5):
    """``{(i, j): (tiou, congruence)}`` for pairs allowed to match."""
    out = {}
    for i, r in enumerate(ref.instances):
        for j, s in enumerate(sys.instances):
            if r.video_id != s.video_id or span_overlap(r, s) < 1:
                continue
            t = tiou_exact(r, s)
            if t < Fraction(temporal_threshold).limit_denominator(10**9):
                continue
            cong = None
            if mode == "AOD":
                m = min_mode_bruteforce(r, s, spatial_threshold)
                cong = 0.0 if math.isnan(m) else 1.0 - min(max(m, 0.0), 1.0)
                if not cong > 0:
                    continue
            out[(i, j)] = (float(t), cong)
    return out


def all_matchings(pairs):
    """Every set of pairs sharing no endpoint."""
    pairs = sorted(pairs)
    out = []

    def extend(start, chosen, rows, cols):
        out.append(tuple(chosen))
        for k in range(start, len(pairs)):
            i, j = pairs[k]
            if i in rows or j in cols:
                continue
            extend(k + 1, chosen + [(i, j)], rows | {i}, cols | {j})

    extend(0, [], frozenset(), frozenset())
    return out


def dense_ranks(values):
    order = {v: r for r, v in enumerate(sorted(set(values)), start=1)}
    return [order[v] for v in values]


def best_alignment_value(ref, sys, mode="AD"):
    """Largest ``(count, rank sum, tie-break sum)`` over all matchings."""
    info = eligible_bruteforce(ref, sys, mode)
    ranks = dense_ranks([s.confidence for s in sys.instances])

    def tb(i, j):
        t, c = info[(i, j)]
        return t if c is None else (t + c) / 2

    best = None
    for m in all_matchings(info):
        value = (len(m), sum(ranks[j] for _, j in m), math.fsum(tb(i, j) for i, j in m))
        if best is None or value[:2] > best[:2] or (value[:2] == best[:2] and value[2] > best[2]):
            best = value
    return best


def det_points_bruteforce(ref, sys, minutes, mode="AD"):
    """``[(tau, pmiss, rfa)]`` by re-solving a max matching at every threshold."""
    info = eligible_bruteforce(ref, sys, mode)
    conf = [s.confidence for s in sys.instances]
    n_true = len(ref.instances)
    out = []
    for tau in [math.inf] + sorted(set(conf), reverse=True):
        live = [(i, j) for (i, j) in info if conf[j] >= tau]
        cd = max(len(m) for m in all_matchings(live))
        n_sys = sum(1 for c in conf if c >= tau)
        out.append((tau, Fraction(n_true - cd, n_true), (n_sys - cd) / minutes))
    return out


# --- significance -----------------------------------------------------------


def sign_flip_p(a, b, statistic="mean"):
    """Exhaustive two-sided sign-flip p-value in exact arithmetic (mean statistic)."""
    d = [Fraction(x).limit_denominator(10**12) - Fraction(y).limit_denominator(10**12) for x, y in zip(a, b)]
    observed = abs(sum(d))
    hits = 0
    for signs in itertools.product((1, -1), repeat=len(d)):
        if abs(sum(s * x for s, x in zip(signs, d))) >= observed:
            hits += 1
    return Fraction(hits, 2 ** len(d))


# --- random small activity fixtures ------------------------------------------

CONFIDENCES = (0.1, 0.2, 0.3, 0.5, 0.7, 0.9)


def random_activity_case(rng, max_ref=5, max_sys=5, boxes=True, videos=2, frames=60):
    """Small reference/system sets on a coarse grid so ties and overlaps are common."""
    from videval.submission import ActivityInstance, ActivityInstanceSet, Box

    def objects(begin, end, max_boxes, with_conf):
        if not boxes:
            return None
        out = {}
        for t in range(begin - begin % 10, end + 1, 10):
            if t < begin:
                continue
            k = int(rng.integers(0, max_boxes + 1))
            if k:
                out[t] = tuple(
                    Box(float(rng.choice([0, 10, 20])), float(rng.choice([0, 10, 20])), 20.0, 20.0,
                        float(rng.choice(CONFIDENCES)) if with_conf else 1.0)
                    for _ in range(k)
                )
        return out

    def span():
        a, b = sorted(int(x) for x in rng.integers(0, frames, size=2))
        return a, b

    ref, sys = [], []
    for _ in range(int(rng.integers(1, max_ref + 1))):
        a, b = span()
        ref.append(ActivityInstance("act", f"v{int(rng.integers(videos))}", a, b, None, objects(a, b, 2, False)))
    for _ in range(int(rng.integers(0, max_sys + 1))):
        a, b = span()
        sys.append(ActivityInstance("act", f"v{int(rng.integers(videos))}", a, b,
                                    float(rng.choice(CONFIDENCES)), objects(a, b, 3, True)))
    durations = {f"v{v}": 1.0 for v in range(videos)}
    return ActivityInstanceSet(tuple(ref), durations), ActivityInstanceSet(tuple(sys), durations)
