"""Significance testing, correlation and direct-assessment aggregation."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .submission import DaRating

EXHAUSTIVE_LIMIT = 20
STATISTICS = ("mean", "t")
_CHUNK = 1 << 15


@dataclass(frozen=True)
class PairedScores:
    topics: tuple[str, ...]
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        if not len(self.topics) == len(self.a) == len(self.b):
            raise ValueError("paired score vectors must have equal lengths")

    @classmethod
    def from_maps(cls, a: Mapping[str, float], b: Mapping[str, float], topics: Sequence[str] | None = None):
        topics = list(topics) if topics is not None else sorted(set(a) & set(b))
        return cls(tuple(topics), tuple(float(a[t]) for t in topics), tuple(float(b[t]) for t in topics))


def _stat(signs: np.ndarray, d: np.ndarray, statistic: str) -> np.ndarray:
    n = d.size
    sums = signs @ d
    if statistic == "mean":
        return np.abs(sums) / n
    means = sums / n
    var = (np.dot(d, d) - n * means**2) / (n - 1)
    var = np.maximum(var, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.abs(means) / np.sqrt(var / n)
    return np.where(var > 0, t, np.where(means != 0, np.inf, 0.0))


def _sign_block(start: int, stop: int, n: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(n, dtype=np.int64)) & 1
    return 1.0 - 2.0 * bits


def randomization_test(
    a: Sequence[float] | PairedScores,
    b: Sequence[float] | None = None,
    iterations: int = 100_000,
    seed: int = 0,
    statistic: str = "mean",
    jobs: int = 1,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
) -> float:
    """Two-sided paired randomization (sign-flip) test.

    With ``n <= exhaustive_limit`` topics all ``2**n`` sign assignments of the
    per-topic differences are enumerated; otherwise ``iterations`` random
    assignments are drawn in fixed-size chunks, each from its own generator
    keyed by ``(seed, chunk index)``, so the result does not depend on
    ``jobs``. The observed assignment always counts, so ``p > 0``.

    Parameters
    ----------
    a, b : sequences of float, or a PairedScores as ``a``
    statistic : {"mean", "t"}
        Absolute mean difference, or absolute paired t statistic.

    Returns
    -------
    float
        ``#{assignments with statistic >= observed} / #assignments``
        (Monte Carlo: ``(1 + hits) / (1 + iterations)``).
    """
    if isinstance(a, PairedScores):
        a, b = a.a, a.b
    if b is None or len(a) != len(b):
        raise ValueError("score vectors must have equal lengths")
    if len(a) < 2:
        raise ValueError("randomization test needs at least two topics")
    if statistic not in STATISTICS:
        raise ValueError(f"statistic must be one of {STATISTICS}")
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    n = d.size
    observed = float(_stat(np.ones((1, n)), d, statistic)[0])
    tol = 1e-9 * max(1.0, abs(observed)) if math.isfinite(observed) else 0.0

    def hits(signs: np.ndarray) -> int:
        return int(np.count_nonzero(_stat(signs, d, statistic) >= observed - tol))

    if n <= exhaustive_limit:
        total = 1 << n
        blocks = [(s, min(s + _CHUNK, total)) for s in range(0, total, _CHUNK)]
        work = lambda blk: hits(_sign_block(blk[0], blk[1], n))  # noqa: E731
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            count = sum(pool.map(work, blocks))
        return count / total

    if iterations < 1:
        raise ValueError("iterations must be positive")
    sizes = [min(_CHUNK, iterations - s) for s in range(0, iterations, _CHUNK)]

    def draw(chunk: int) -> int:
        rng = np.random.default_rng([seed, chunk])
        signs = 1.0 - 2.0 * rng.integers(0, 2, size=(sizes[chunk], n))
        return hits(signs)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        count = sum(pool.map(draw, range(len(sizes))))
    return (1 + count) / (1 + iterations)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be equal-length vectors")
    if x.size < 2:
        raise ValueError("need at least two observations")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.dot(xc, xc))
    syy = float(np.dot(yc, yc))
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance")
    r = float(np.dot(xc, yc)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class SignificanceMatrix:
    runs: tuple[str, ...]
    means: tuple[float, ...]
    pvalues: tuple[tuple[float, ...], ...]
    alpha: float

    def better(self, i: int, j: int) -> bool:
        """Row run significantly better than column run."""
        return i != j and self.means[i] > self.means[j] and self.pvalues[i][j] < self.alpha


def significance_matrix(
    scores: Mapping[str, Mapping[str, float]],
    alpha: float = 0.05,
    iterations: int = 100_000,
    seed: int = 0,
    statistic: str = "mean",
    jobs: int = 1,
    topics: Sequence[str] | None = None,
) -> SignificanceMatrix:
    """Pairwise randomization tests between runs scored on the same topics.

    ``scores`` maps run -> topic -> score; runs keep their mapping order.
    """
    runs = tuple(scores)
    if topics is None:
        common = set.intersection(*(set(v) for v in scores.values())) if scores else set()
        topics = sorted(common)
    means = tuple(math.fsum(scores[r][t] for t in topics) / len(topics) for r in runs)
    pvals = [[1.0] * len(runs) for _ in runs]
    for i in range(len(runs)):
        for j in range(i + 1, len(runs)):
            p = randomization_test(
                [scores[runs[i]][t] for t in topics],
                [scores[runs[j]][t] for t in topics],
                iterations=iterations, seed=seed, statistic=statistic, jobs=jobs,
            )
            pvals[i][j] = pvals[j][i] = p
    return SignificanceMatrix(runs, means, tuple(tuple(r) for r in pvals), alpha)


@dataclass(frozen=True)
class WorkerStats:
    mean: float
    sd: float
    n: int
    flagged: bool


@dataclass(frozen=True)
class DaTable:
    """Direct-assessment aggregates.

    ``z`` holds one standardized value per input record, in input order.
    Segment tables are keyed by ``(system, video)``.
    """

    records: tuple[DaRating, ...]
    workers: Mapping[str, WorkerStats]
    z: tuple[float, ...]
    segment_z: Mapping[tuple[str, str], float]
    system_z: Mapping[str, float]
    segment_raw: Mapping[tuple[str, str], float]
    system_raw: Mapping[str, float]

    @property
    def flagged_workers(self) -> list[str]:
        return [w for w, s in self.workers.items() if s.flagged]


def _micro_then_macro(records, values):
    seg: dict[tuple[str, str], list[float]] = {}
    for rec, v in zip(records, values):
        seg.setdefault((rec.system_id, rec.video_id), []).append(v)
    segment = {k: math.fsum(seg[k]) / len(seg[k]) for k in sorted(seg)}
    per_system: dict[str, list[float]] = {}
    for (system, _), v in segment.items():
        per_system.setdefault(system, []).append(v)
    return segment, {s: math.fsum(v) / len(v) for s, v in sorted(per_system.items())}


def da_aggregate(ratings: Iterable[DaRating], include_workers: Iterable[str] | None = None) -> DaTable:
    """Standardize ratings per worker and average per caption, then per system.

    Each rating becomes ``(rating - worker_mean) / worker_sd`` using the
    sample standard deviation. Workers with fewer than two ratings or zero
    spread are flagged and their ratings get ``z = 0``. Per (system, video)
    the z values are averaged, then the per-video means are averaged per
    system. The same aggregation is reported on raw ratings.
    """
    records = tuple(ratings)
    if include_workers is not None:
        keep = set(include_workers)
        records = tuple(r for r in records if r.worker_id in keep)
    if not records:
        raise ValueError("no ratings to aggregate")
    by_worker: dict[str, list[float]] = {}
    for r in records:
        by_worker.setdefault(r.worker_id, []).append(r.rating)
    workers = {}
    for w in sorted(by_worker):
        vals = np.asarray(by_worker[w], dtype=float)
        mean = math.fsum(vals) / vals.size
        sd = float(np.std(vals, ddof=1)) if vals.size >= 2 else 0.0
        workers[w] = WorkerStats(mean, sd, int(vals.size), not sd > 0)
    z = tuple(
        0.0 if workers[r.worker_id].flagged
        else (r.rating - workers[r.worker_id].mean) / workers[r.worker_id].sd
        for r in records
    )
    segment_z, system_z = _micro_then_macro(records, z)
    segment_raw, system_raw = _micro_then_macro(records, [r.rating for r in records])
    return DaTable(records, workers, z, segment_z, system_z, segment_raw, system_raw)
