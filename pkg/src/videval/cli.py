"""Command-line entry point: ``videval <command> [options]``.

Every command reads an optional TOML config (``--config``); keys may sit at
top level or in a table named after the command, and flags override both.
Relative paths in a config file resolve against the file's directory.
Outputs go to ``--out`` (default ``$VIDEVAL_OUT`` or ``./videval-out``).

Exit codes: 0 success, 1 internal error, 2 input validation failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Sequence

from . import __version__
from .detection import (
    CongruenceParams,
    aggregate_activities,
    align_instances,
    curve_from_alignment,
    matched_min_modes,
    mean_det_curve,
    naudc,
    operating_index,
    pmiss_at_rfa,
)
from .pooling import PoolSpec, build_pools, parse_membership, pool_stats, stratum_membership, write_pool_files
from .report import ScoreReport, config_hash, csv_text, write_text
from .retrieval import (
    DEFAULT_EPSILON,
    accuracy,
    average_precision,
    mean_over_topics,
    msum_objective,
    msum_precision,
    msum_subjective,
    novelty_all,
    novelty_consideration_set,
    prf,
    ranked_answer_mrr,
    topic_xinfap,
)
from .rounding import fixed
from .stats import da_aggregate, pearson, significance_matrix
from .submission import (
    ParseError,
    parse_activity_set,
    parse_answer_sheet,
    parse_caption_metrics,
    parse_da_ratings,
    parse_judgments,
    parse_retrieval_run,
    serialize_activity_set,
    serialize_judgments,
    serialize_run,
    serialize_strata,
    sorted_topics,
    validate_run,
)
from .svg import det_svg, significance_svg

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

OUT_ENV = "VIDEVAL_OUT"

# LADI coarse categories for disaster-scene features.
DSDI_CATEGORIES = {
    "damage": ["misc. damage", "flooding/water damage", "landslide", "road washout", "rubble/debris", "smoke/fire"],
    "environment": ["dirt", "grass", "lava", "rocks", "sand", "shrubs", "snow/ice", "trees"],
    "infrastructure": [
        "bridge", "building", "dam/levee", "pipes", "utility or power lines/electric towers", "railway",
        "wireless/radio communication towers", "water tower", "road",
    ],
    "vehicles": ["aircraft", "boat", "car", "truck"],
    "water": ["flooding", "lake/pond", "ocean", "puddle", "river/stream"],
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------


def load_config(path: str | None, command: str) -> tuple[dict, str]:
    if path is None:
        return {}, os.getcwd()
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    merged = {k: v for k, v in raw.items() if not isinstance(v, dict)}
    section = raw.get(command, {})
    if not isinstance(section, dict):
        raise ConfigError(f"[{command}] must be a table")
    merged.update(section)
    return merged, os.path.dirname(os.path.abspath(path))


class Job:
    """Resolved settings of one command: flags over config over defaults."""

    def __init__(self, args: argparse.Namespace, command: str):
        self.command = command
        config, self.base = load_config(args.config, command)
        self.values: dict[str, Any] = dict(config)
        self.flag_keys: set[str] = set()
        for key, value in vars(args).items():
            if key in ("config", "command") or value is None:
                continue
            self.values[key] = value
            self.flag_keys.add(key)
        self.values.setdefault("seed", 0)
        self.values.setdefault("jobs", 1)
        self.values.setdefault("out", os.environ.get(OUT_ENV, "videval-out"))
        self.inputs: list[str] = []

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def path(self, key: str, required: bool = True) -> str | None:
        value = self.values.get(key)
        if value is None:
            if required:
                raise ConfigError(f"missing required input '{key}'")
            return None
        return self._resolve(value, key)

    def paths(self, key: str, required: bool = True) -> list[str]:
        value = self.values.get(key)
        if value is None:
            if required:
                raise ConfigError(f"missing required input '{key}'")
            return []
        items = [value] if isinstance(value, str) else list(value)
        out = []
        for item in items:
            p = self._resolve(item, key, allow_dir=True)
            if os.path.isdir(p):
                out.extend(
                    os.path.join(p, f) for f in sorted(os.listdir(p))
                    if os.path.isfile(os.path.join(p, f)) and not f.startswith(".")
                )
            else:
                out.append(p)
        self.inputs.extend(out)
        return out

    def _resolve(self, value: str, key: str, allow_dir: bool = False) -> str:
        # flags are relative to the working directory, config entries to the file
        base = os.getcwd() if key in self.flag_keys else self.base
        p = value if os.path.isabs(value) else os.path.join(base, value)
        if not (os.path.isfile(p) or (allow_dir and os.path.isdir(p))):
            raise ConfigError(f"input '{key}' not found: {value}")
        if os.path.isfile(p):
            self.inputs.append(p)
        return p

    @property
    def out(self) -> str:
        return self.values["out"]

    @property
    def jobs(self) -> int:
        jobs = int(self.values["jobs"])
        if jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        return jobs

    @property
    def seed(self) -> int:
        seed = int(self.values["seed"])
        if not 0 <= seed < 2**64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        return seed

    def hash(self) -> str:
        return config_hash(self.values, self.inputs)


def _write_report(job: Job, report: ScoreReport, name: str) -> None:
    # stamp the hash last so every input read along the way is covered
    report.config_hash = job.hash()
    write_text(job.out, name, report.to_json())


def _open(path: str):
    return open(path, encoding="utf-8", newline="")


def _float(job: Job, key: str, default: float, lo: float | None = None, hi: float | None = None) -> float:
    value = float(job.get(key, default))
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise ConfigError(f"{key}={value} outside [{lo}, {hi}]")
    return value


def _map(jobs: int, fn, items: Sequence, initializer=None, initargs=()):
    if jobs == 1 or len(items) < 2:
        if initializer is not None:
            initializer(*initargs)
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs, initializer=initializer, initargs=initargs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# ---------------------------------------------------------------------------
# Loading helpers
# ---------------------------------------------------------------------------


def load_runs(paths: Sequence[str], task: str, rank_limit: int, topics=None):
    runs = []
    for p in paths:
        with _open(p) as fh:
            try:
                runs.append(parse_retrieval_run(fh, task=task, rank_limit=rank_limit, topics=topics))
            except ParseError as exc:
                raise ParseError(f"{p}: {exc}") from None
    tags = [r.run_tag for r in runs]
    dupes = sorted({t for t in tags if tags.count(t) > 1})
    if dupes:
        raise ConfigError(f"duplicate run tags: {', '.join(dupes)}")
    return runs


def load_judgments(job: Job):
    jpath = job.path("judgments")
    spath = job.path("strata", required=False)
    with _open(jpath) as fh:
        if spath:
            with _open(spath) as sh:
                return parse_judgments(fh, sh)
        return parse_judgments(fh)


def load_topic_list(job: Job):
    path = job.path("topics", required=False)
    if path is None:
        return None
    with _open(path) as fh:
        return [line.split("\t")[0].strip() for line in fh if line.strip() and not line.startswith("#")]


def load_pairs(path: str) -> dict[str, str]:
    out = {}
    with _open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ParseError(f"{path}: expected 2 tab-separated fields", lineno)
            out[fields[0].strip()] = fields[1].strip()
    return out


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


# ---------------------------------------------------------------------------
# pool
# ---------------------------------------------------------------------------


def cmd_pool(job: Job) -> int:
    rank_limit = int(job.get("rank_limit", 1000))
    runs = load_runs(job.paths("runs"), job.get("task", "AVS"), rank_limit)
    if not runs:
        raise ConfigError("no run files given")
    ranges = job.get("strata_ranges", [[1, 300, 1.0], [301, 1000, 0.25]])
    try:
        spec = PoolSpec.from_ranges([tuple(r) for r in ranges], int(job.get("chunk_size", 1000)), job.seed)
    except ParseError as exc:
        raise ConfigError(str(exc)) from None
    problems = []
    for run in runs:
        report = validate_run(run, rank_limit=rank_limit)
        problems.extend(f"{run.run_tag}: {e}" for e in report.errors)
    if problems:
        raise ConfigError("; ".join(problems))
    poolset = build_pools(runs, spec)
    write_pool_files(poolset, job.out)
    sizes = {t: len(p) for t, p in poolset.pools.items()}
    report = ScoreReport("pool", job.hash(), runs={r.run_tag: {"run_kind": r.run_kind} for r in runs})
    report.units = [{"topic": t, "pooled": n, "candidates": len(poolset.membership[t])} for t, n in sizes.items()]
    report.aggregates = {"pooled": sum(sizes.values()), "chunks": len(poolset.chunks)}
    _write_report(job, report, "pool_report.json")
    return 0


# ---------------------------------------------------------------------------
# score-avs
# ---------------------------------------------------------------------------

_AVS_STATE: dict = {}


def _avs_init(judgments, membership, epsilon, topics):
    _AVS_STATE.update(judgments=judgments, membership=membership, epsilon=epsilon, topics=topics)


def _avs_score_run(run):
    st = _AVS_STATE
    return [
        topic_xinfap(run, t, st["judgments"], st["epsilon"], st["membership"].get(t, {}))
        for t in st["topics"]
    ]


def cmd_score_avs(job: Job) -> int:
    topic_list = load_topic_list(job)
    runs = load_runs(job.paths("runs"), "AVS", int(job.get("rank_limit", 1000)), topic_list)
    if not runs:
        raise ConfigError("no run files given")
    judgments = load_judgments(job)
    if not judgments.strata:
        raise ConfigError("judgments have no strata table")
    epsilon = _float(job, "epsilon", DEFAULT_EPSILON, lo=0.0)
    topics = sorted_topics(topic_list if topic_list is not None else judgments.topics)
    if not topics:
        raise ConfigError("no evaluated topics")

    mpath = job.path("membership", required=False)
    if mpath:
        with _open(mpath) as fh:
            membership = parse_membership(fh)
    else:
        strata = sorted(judgments.strata.values(), key=lambda s: s.rank_lo)
        membership = {t: stratum_membership(runs, strata, t) for t in topics}

    per_run = _map(job.jobs, _avs_score_run, runs, _avs_init, (judgments, membership, epsilon, topics))
    rows, run_rows, topic_scores = [], [], {}
    report = ScoreReport("avs", job.hash())
    for run, scores in zip(runs, per_run):
        mean = mean_over_topics(scores)
        times = [run.processing_time[t] for t in topics if t in run.processing_time]
        mean_time = math.fsum(times) / len(times) if times else None
        topic_scores[run.run_tag] = {s.topic_id: s.value for s in scores}
        for s in scores:
            rows.append((run.run_tag, s.topic_id, s.value, s.num_judged, s.num_relevant, s.num_retrieved))
        run_rows.append((run.run_tag, run.run_kind, run.training_type, mean, mean_time))
        report.runs[run.run_tag] = {
            "run_kind": run.run_kind,
            "training_type": run.training_type,
            "notes": list(run.notes),
            "warnings": list(validate_run(run, judgments, topics).warnings),
        }
        report.aggregates[run.run_tag] = {"mean_xinfAP": mean, "mean_processing_time": mean_time}
    report.units = [
        {"run_tag": r[0], "topic": r[1], "xinfAP": r[2], "num_judged": r[3], "num_relevant": r[4], "num_retrieved": r[5]}
        for r in rows
    ]
    write_text(job.out, "avs_topic_scores.csv",
               csv_text(["run_tag", "topic", "xinfAP", "num_judged", "num_relevant", "num_retrieved"], rows))
    write_text(job.out, "avs_run_scores.csv",
               csv_text(["run_tag", "run_kind", "training_type", "mean_xinfAP", "mean_processing_time"], run_rows))
    write_text(job.out, "avs_time_vs_score.csv",
               csv_text(["run_tag", "mean_processing_time", "mean_xinfAP"],
                        [(r[0], r[4], r[3]) for r in run_rows if r[4] is not None]))
    stats_rows = pool_stats(runs, None, judgments)
    write_text(job.out, "avs_pool_stats.csv", csv_text(
        ["topic", "total_submitted", "unique_submitted", "pct_unique", "judged", "pct_unique_judged",
         "relevant", "pct_judged_relevant"],
        [(r.topic, r.total_submitted, r.unique_submitted, fixed(r.pct_unique, 2), r.judged,
          fixed(r.pct_unique_judged, 2), r.relevant, fixed(r.pct_judged_relevant, 2)) for r in stats_rows],
    ))
    per_topic = {t: sorted(topic_scores[r][t] for r in topic_scores) for t in topics}
    report.sections["topic_summary"] = {
        t: {"min": v[0], "median": statistics.median(v), "max": v[-1]} for t, v in per_topic.items()
    }

    if job.get("novelty", False):
        mode = job.get("novelty_mode", "unique")
        teams_path = job.path("teams", required=False)
        team_of = load_pairs(teams_path) if teams_path else {}
        considered = novelty_consideration_set(runs, team_of)
        results = novelty_all(considered, judgments, mode, topics)
        write_text(job.out, "avs_novelty.csv", csv_text(
            ["run_tag", "run_kind", "mode", "novelty", "novelty_normalized"],
            [(res.run_tag, r.run_kind, mode, res.score, res.normalized) for r, res in zip(considered, results)],
        ))
        report.sections["novelty"] = {
            "mode": mode,
            "consideration_set": [r.run_tag for r in considered],
            "runs": {res.run_tag: {"score": res.score, "normalized": res.normalized, "per_topic": dict(res.per_topic)}
                     for res in results},
        }
    _write_report(job, report, "avs_report.json")
    return 0


# ---------------------------------------------------------------------------
# score-actev
# ---------------------------------------------------------------------------

_ACTEV_STATE: dict = {}


def _actev_init(ref, systems, params, modes, targets, audc_limit, fps, tfa_per_video):
    _ACTEV_STATE.update(ref=ref, systems=systems, params=params, modes=modes, targets=targets,
                        audc_limit=audc_limit, fps=fps, tfa_per_video=tfa_per_video)


def _actev_score(task):
    name, mode, activity = task
    st = _ACTEV_STATE
    ref = st["ref"].for_activity(activity)
    sys_set = st["systems"][name].for_activity(activity)
    if not ref.instances:
        return None
    alignment = align_instances(ref, sys_set, st["params"], mode)
    curve = curve_from_alignment(alignment, st["ref"].total_minutes, ref, sys_set, st["fps"],
                                 st["tfa_per_video"])
    row = {"n_true": curve.n_true, "n_sys": len(sys_set.instances)}
    for target in st["targets"]:
        row[f"pmiss@{target:g}rfa"] = pmiss_at_rfa(curve, target)
    row[f"naudc@{st['audc_limit']:g}rfa"] = naudc(curve, st["audc_limit"])
    if mode == "AOD":
        idx = operating_index(curve, st["targets"][0])
        modes = matched_min_modes(alignment, curve.points[idx].threshold) if idx is not None else []
        row[f"nmode@{st['targets'][0]:g}rfa"] = math.fsum(modes) / len(modes) if modes else None
    return row, curve


def _curve_csv(curve) -> str:
    with_tfa = any(p.tfa is not None for p in curve.points)
    header = ["threshold", "pmiss", "rfa"] + (["tfa"] if with_tfa else [])
    return csv_text(header, [
        (p.threshold, p.pmiss, p.rfa) + ((p.tfa,) if with_tfa else ()) for p in curve.points
    ])


def cmd_score_actev(job: Job) -> int:
    with _open(job.path("reference")) as fh:
        ref = parse_activity_set(fh, "reference")
    systems = {}
    for p in job.paths("system"):
        with _open(p) as fh:
            try:
                systems[_stem(p)] = parse_activity_set(fh, "system")
            except ParseError as exc:
                raise ParseError(f"{p}: {exc}") from None
    mode_opt = str(job.get("mode", "both")).upper()
    modes = ["AD", "AOD"] if mode_opt == "BOTH" else [mode_opt]
    if any(m not in ("AD", "AOD") for m in modes):
        raise ConfigError("mode must be AD, AOD or both")
    params = CongruenceParams(
        temporal_threshold=_float(job, "temporal_threshold", 0.0, 0.0, 1.0),
        spatial_threshold=_float(job, "spatial_threshold", 0.5, 0.0, 1.0),
        cost_md=_float(job, "cost_md", 1.0, 0.0),
        cost_fa=_float(job, "cost_fa", 1.0, 0.0),
    )
    targets = [float(x) for x in job.get("rfa_targets", [0.1])]
    if not targets or any(t < 0 for t in targets):
        raise ConfigError("rfa_targets must be nonnegative")
    audc_limit = _float(job, "naudc_limit", 0.2, lo=1e-12)
    fps = _float(job, "fps", 30.0, lo=1e-9) if job.get("tfa", False) else None
    tfa_per_video = bool(job.get("tfa_per_video", False))
    for name, s in systems.items():
        missing = sorted(set(s.video_durations) - set(ref.video_durations))
        if missing:
            raise ConfigError(f"system {name} refers to videos outside the reference: {', '.join(missing)}")

    activities = sorted(set(ref.activities) | {a for s in systems.values() for a in s.activities})
    tasks = [(name, mode, a) for name in systems for mode in modes for a in activities]
    results = _map(job.jobs, _actev_score, tasks, _actev_init,
                   (ref, systems, params, modes, targets, audc_limit, fps, tfa_per_video))
    report = ScoreReport("actev", job.hash())
    rows, summary_rows = [], []
    metric_names = [f"pmiss@{t:g}rfa" for t in targets] + [f"naudc@{audc_limit:g}rfa"]
    det_dir = os.path.join(job.out, "det")
    by_key = dict(zip(tasks, results))
    for name in systems:
        report.runs[name] = {"modes": modes}
        for mode in modes:
            names = metric_names + ([f"nmode@{targets[0]:g}rfa"] if mode == "AOD" else [])
            per_activity = {a: by_key[(name, mode, a)] for a in activities}
            summary = {"system": name, "mode": mode}
            for m in names:
                vals = {a: (r[0][m] if r is not None else None) for a, r in per_activity.items()}
                if m.startswith("nmode"):
                    present = [v for v in vals.values() if v is not None]
                    summary[f"mean_{m}"] = math.fsum(present) / len(present) if present else None
                else:
                    summary[f"mean_{m}"], excluded = aggregate_activities(vals)
                    summary["excluded_activities"] = excluded
            summary_rows.append(summary)
            curves = []
            for a, r in per_activity.items():
                if r is None:
                    continue
                row, curve = r
                curves.append(curve)
                rows.append([name, mode, a, row["n_true"], row["n_sys"]] + [row.get(m) for m in names[:len(metric_names)]]
                            + [row.get(f"nmode@{targets[0]:g}rfa")])
                report.units.append({"system": name, "mode": mode, "activity": a, **row})
                stem = f"{name}.{mode}.{a}"
                write_text(det_dir, f"{stem}.csv", _curve_csv(curve))
                write_text(det_dir, f"{stem}.svg", det_svg(
                    [(a, [(p.rfa, p.pmiss) for p in curve.points])], title=f"{name} {mode} {a}",
                    log_x=bool(job.get("log_x", False))))
            mean = mean_det_curve(curves)
            write_text(det_dir, f"{name}.{mode}.mean.csv", csv_text(["rfa", "pmiss"], mean))
            write_text(det_dir, f"{name}.{mode}.mean.svg", det_svg(
                [("mean", mean)], title=f"{name} {mode} mean over activities", log_x=bool(job.get("log_x", False))))
            report.aggregates[f"{name}.{mode}"] = {k: v for k, v in summary.items() if k not in ("system", "mode")}
    header = ["system", "mode", "activity", "n_true", "n_sys"] + metric_names + [f"nmode@{targets[0]:g}rfa"]
    write_text(job.out, "actev_activity_scores.csv", csv_text(header, rows))
    sheader = ["system", "mode"] + [f"mean_{m}" for m in metric_names] + [f"mean_nmode@{targets[0]:g}rfa"]
    write_text(job.out, "actev_summary.csv", csv_text(sheader, [[s.get(h) for h in sheader] for s in summary_rows]))
    report.sections["params"] = {
        "temporal_threshold": params.temporal_threshold, "spatial_threshold": params.spatial_threshold,
        "cost_md": params.cost_md, "cost_fa": params.cost_fa, "rfa_targets": targets, "naudc_limit": audc_limit,
    }
    _write_report(job, report, "actev_report.json")
    return 0


# ---------------------------------------------------------------------------
# score-dvu / score-dsdi / score-msum
# ---------------------------------------------------------------------------


def cmd_score_dvu(job: Job) -> int:
    with _open(job.path("key")) as fh:
        key = parse_answer_sheet(fh)
    has_mc = any(a.kind == "multiple_choice" for a in key.entries)
    has_rl = any(a.kind == "ranked_list" for a in key.entries)
    rows = []
    report = ScoreReport("dvu", job.hash())
    for p in job.paths("submissions"):
        with _open(p) as fh:
            sub = parse_answer_sheet(fh)
        acc = accuracy(sub, key) if has_mc else None
        rr = ranked_answer_mrr(sub, key) if has_rl else None
        rows.append((_stem(p), acc, rr))
        report.aggregates[_stem(p)] = {"accuracy": acc, "mrr": rr}
    write_text(job.out, "dvu_scores.csv", csv_text(["submission", "accuracy", "mrr"], rows))
    _write_report(job, report, "dvu_report.json")
    return 0


def _category_map(job: Job) -> dict[str, str]:
    path = job.path("categories", required=False)
    if path:
        return load_pairs(path)
    return {f: c for c, feats in DSDI_CATEGORIES.items() for f in feats}


def cmd_score_dsdi(job: Job) -> int:
    runs = load_runs(job.paths("runs"), "DSDI", int(job.get("rank_limit", 1000)))
    judgments = load_judgments(job)
    excluded = set(job.get("excluded_features", []))
    features = [f for f in sorted_topics(judgments.topics) if f not in excluded]
    if not features:
        raise ConfigError("no features left to score")
    categories = _category_map(job)
    collection = job.get("collection_size")
    rows, run_rows, per_feature = [], [], {f: [] for f in features}
    report = ScoreReport("dsdi", job.hash())
    for run in runs:
        aps = []
        for f in features:
            relevant = judgments.relevant(f)
            retrieved = run.items(f)
            ap = average_precision(retrieved, relevant)
            tp = len(set(retrieved) & relevant)
            fp = len(retrieved) - tp
            fn = len(relevant) - tp
            tn = int(collection) - tp - fp - fn if collection is not None else None
            scores = prf(tp, fp, fn)
            rows.append((run.run_tag, f, categories.get(f.lower(), categories.get(f, "")), ap, tp, fp, fn, tn,
                         scores.precision, scores.recall, scores.f1))
            aps.append(ap)
            per_feature[f].append(ap)
        cat_means = {}
        for f, ap in zip(features, aps):
            cat = categories.get(f.lower(), categories.get(f))
            if cat:
                cat_means.setdefault(cat, []).append(ap)
        map_ = mean_over_topics(aps)
        run_rows.append((run.run_tag, run.training_type, map_))
        report.aggregates[run.run_tag] = {
            "MAP": map_, "categories": {c: math.fsum(v) / len(v) for c, v in sorted(cat_means.items())},
        }
        report.runs[run.run_tag] = {"training_type": run.training_type}
    report.sections["excluded_features"] = sorted(excluded)
    write_text(job.out, "dsdi_feature_scores.csv", csv_text(
        ["run_tag", "feature", "category", "AP", "TP", "FP", "FN", "TN", "precision", "recall", "f1"], rows))
    write_text(job.out, "dsdi_run_scores.csv", csv_text(["run_tag", "training_type", "MAP"], run_rows))
    write_text(job.out, "dsdi_feature_spread.csv", csv_text(
        ["feature", "min_AP", "median_AP", "max_AP"],
        [(f, min(v), statistics.median(v), max(v)) for f, v in per_feature.items() if v]))
    cat_rows = [
        (run_tag, cat, value)
        for run_tag, agg in report.aggregates.items() for cat, value in agg["categories"].items()
    ]
    write_text(job.out, "dsdi_category_scores.csv", csv_text(["run_tag", "category", "mean_AP"], cat_rows))
    _write_report(job, report, "dsdi_report.json")
    return 0


MSUM_HEADER = ["run_id", "summary_id", "correct", "possible", "false_claims",
               "tempo_or_readability", "contextuality", "redundancy"]


def cmd_score_msum(job: Job) -> int:
    import csv

    rows, per_run = [], {}
    path = job.path("sheet")
    with _open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MSUM_HEADER:
            raise ParseError(f"{path}: header must be {','.join(MSUM_HEADER)}", 1)
        for lineno, raw in enumerate(reader, start=2):
            if not any(c.strip() for c in raw):
                continue
            if len(raw) != len(MSUM_HEADER):
                raise ParseError(f"{path}: expected {len(MSUM_HEADER)} fields", lineno)
            rec = dict(zip(MSUM_HEADER, (c.strip() for c in raw)))
            try:
                correct, possible = int(rec["correct"]), int(rec["possible"])
                false = int(rec["false_claims"] or 0)
                objective = msum_objective(correct, possible)
                precision = msum_precision(correct, false)
                subj = None
                if rec["tempo_or_readability"]:
                    subj = msum_subjective(float(rec["tempo_or_readability"]), float(rec["contextuality"]),
                                           float(rec["redundancy"]))
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", lineno) from None
            rows.append((rec["run_id"], rec["summary_id"], fixed(objective, 3), fixed(precision, 3),
                         fixed(subj, 3) if subj is not None else None))
            per_run.setdefault(rec["run_id"], []).append((objective, precision, subj))
    report = ScoreReport("msum", job.hash())
    run_rows = []
    for run, vals in per_run.items():
        obj = math.fsum(v[0] for v in vals) / len(vals)
        prec = math.fsum(v[1] for v in vals) / len(vals)
        subj_vals = [v[2] for v in vals if v[2] is not None]
        subj = math.fsum(subj_vals) / len(subj_vals) if subj_vals else None
        run_rows.append((run, fixed(obj, 3), fixed(prec, 3), fixed(subj, 3) if subj is not None else None))
        report.aggregates[run] = {"objective_all": obj, "precision": prec, "subjective_all": subj}
    write_text(job.out, "msum_summary_scores.csv",
               csv_text(["run_id", "summary_id", "objective_all", "precision", "subjective_all"], rows))
    write_text(job.out, "msum_run_scores.csv",
               csv_text(["run_id", "objective_all", "precision", "subjective_all"], run_rows))
    _write_report(job, report, "msum_report.json")
    return 0


# ---------------------------------------------------------------------------
# da / compare / det-plot / gen
# ---------------------------------------------------------------------------


def cmd_da(job: Job) -> int:
    with _open(job.path("ratings")) as fh:
        ratings = parse_da_ratings(fh)
    wpath = job.path("workers", required=False)
    include = None
    if wpath:
        with _open(wpath) as fh:
            include = [line.strip() for line in fh if line.strip() and not line.startswith("#")]
    table = da_aggregate(ratings, include)
    report = ScoreReport("da", job.hash())
    write_text(job.out, "da_workers.csv", csv_text(
        ["worker_id", "n", "mean", "sd", "flagged"],
        [(w, s.n, s.mean, s.sd, s.flagged) for w, s in table.workers.items()]))
    write_text(job.out, "da_segments.csv", csv_text(
        ["system_id", "video_id", "mean_z", "mean_raw"],
        [(s, v, z, table.segment_raw[(s, v)]) for (s, v), z in table.segment_z.items()]))
    write_text(job.out, "da_systems.csv", csv_text(
        ["system_id", "da_z", "da_raw"], [(s, z, table.system_raw[s]) for s, z in table.system_z.items()]))
    report.aggregates = {s: {"da_z": z, "da_raw": table.system_raw[s]} for s, z in table.system_z.items()}
    report.sections["flagged_workers"] = table.flagged_workers

    mpath = job.path("caption_metrics", required=False)
    if mpath:
        with _open(mpath) as fh:
            scores = parse_caption_metrics(fh)
        per_metric: dict[str, dict[str, list[float]]] = {}
        for s in scores:
            per_metric.setdefault(s.metric, {}).setdefault(s.system_id, []).append(s.value)
        system_metric = {
            m: {sys_id: math.fsum(v) / len(v) for sys_id, v in sorted(d.items())} for m, d in sorted(per_metric.items())
        }
        corr_rows = []
        names = list(system_metric) + ["DA_Z", "DA_raw"]
        vectors = dict(system_metric)
        vectors["DA_Z"] = dict(table.system_z)
        vectors["DA_raw"] = dict(table.system_raw)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                common = sorted(set(vectors[a]) & set(vectors[b]))
                try:
                    r = pearson([vectors[a][s] for s in common], [vectors[b][s] for s in common])
                except ValueError:
                    r = None
                corr_rows.append((a, b, len(common), r))
        write_text(job.out, "da_correlations.csv", csv_text(["metric_a", "metric_b", "n_systems", "pearson"], corr_rows))
        report.sections["correlations"] = [
            {"a": a, "b": b, "n": n, "pearson": r} for a, b, n, r in corr_rows
        ]
    if job.get("significance", False):
        by_system: dict[str, dict[str, float]] = {}
        for (s, v), z in table.segment_z.items():
            by_system.setdefault(s, {})[v] = z
        matrix = significance_matrix(
            by_system, alpha=_float(job, "alpha", 0.05, 0.0, 1.0), iterations=int(job.get("iterations", 100_000)),
            seed=job.seed, jobs=job.jobs,
        )
        _write_significance(job, matrix, "da_significance")
    _write_report(job, report, "da_report.json")
    return 0


def _write_significance(job: Job, matrix, stem: str) -> None:
    rows = [
        (matrix.runs[i], matrix.runs[j], matrix.pvalues[i][j], matrix.better(i, j))
        for i in range(len(matrix.runs)) for j in range(len(matrix.runs)) if i != j
    ]
    write_text(job.out, f"{stem}.csv", csv_text(["row_run", "col_run", "p_value", "row_significantly_better"], rows))
    better = [[matrix.better(i, j) for j in range(len(matrix.runs))] for i in range(len(matrix.runs))]
    write_text(job.out, f"{stem}.svg", significance_svg(matrix.runs, better, title=stem))


def cmd_compare(job: Job) -> int:
    import csv

    path = job.path("scores")
    run_col = job.get("run_column", "run_tag")
    unit_col = job.get("unit_column", "topic")
    score_col = job.get("score_column", "xinfAP")
    scores: dict[str, dict[str, float]] = {}
    with _open(path) as fh:
        reader = csv.DictReader(fh)
        for col in (run_col, unit_col, score_col):
            if reader.fieldnames is None or col not in reader.fieldnames:
                raise ParseError(f"{path}: missing column {col!r}", 1)
        for lineno, rec in enumerate(reader, start=2):
            try:
                scores.setdefault(rec[run_col], {})[rec[unit_col]] = float(rec[score_col])
            except ValueError:
                raise ParseError(f"{path}: score is not a number", lineno) from None
    if len(scores) < 2:
        raise ConfigError("need at least two runs to compare")
    units = sorted_topics(set.intersection(*(set(v) for v in scores.values())))
    if len(units) < 2:
        raise ConfigError("runs share fewer than two scored units")
    ranked = sorted(scores, key=lambda r: (-math.fsum(scores[r][u] for u in units), r))
    top = job.get("top")
    if top is not None:
        ranked = ranked[: int(top)]
    matrix = significance_matrix(
        {r: scores[r] for r in ranked}, alpha=_float(job, "alpha", 0.05, 0.0, 1.0),
        iterations=int(job.get("iterations", 100_000)), seed=job.seed,
        statistic=job.get("statistic", "mean"), jobs=job.jobs, topics=units,
    )
    _write_significance(job, matrix, "significance")
    report = ScoreReport("compare", job.hash())
    report.aggregates = {r: {"mean": m} for r, m in zip(matrix.runs, matrix.means)}
    report.sections["pvalues"] = {
        matrix.runs[i]: {matrix.runs[j]: matrix.pvalues[i][j] for j in range(len(matrix.runs)) if j != i}
        for i in range(len(matrix.runs))
    }
    _write_report(job, report, "compare_report.json")
    return 0


def cmd_det_plot(job: Job) -> int:
    import csv

    axis = job.get("x_axis", "rfa")
    series = []
    for p in job.paths("curves"):
        with _open(p) as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or axis not in reader.fieldnames or "pmiss" not in reader.fieldnames:
                raise ParseError(f"{p}: needs columns pmiss and {axis}", 1)
            pts = sorted((float(r[axis]), float(r["pmiss"])) for r in reader)
            # equal x: keep the lowest pmiss last so the step reaches it
            pts.sort(key=lambda xy: (xy[0], -xy[1]))
        series.append((_stem(p), pts))
    x_max = job.get("x_max")
    svg = det_svg(series, title=job.get("title", "DET curves"), x_max=float(x_max) if x_max is not None else None,
                  log_x=bool(job.get("log_x", False)),
                  x_label="false alarms per minute" if axis == "rfa" else "time-based false alarm")
    write_text(job.out, job.get("name", "det.svg"), svg)
    return 0


def cmd_gen(job: Job) -> int:
    from .synth import synthetic_actev, synthetic_avs

    kind = job.get("kind", "avs")
    if kind == "avs":
        runs, judgments = synthetic_avs(
            n_runs=int(job.get("n_runs", 33)), n_topics=int(job.get("n_topics", 30)),
            depth=int(job.get("depth", 1000)), candidates=int(job.get("candidates", 4000)), seed=job.seed)
        for run in runs:
            write_text(os.path.join(job.out, "runs"), f"{run.run_tag}.txt", serialize_run(run))
        write_text(job.out, "judgments.txt", serialize_judgments(judgments))
        write_text(job.out, "strata.tsv", serialize_strata(judgments.strata))
        write_text(job.out, "topics.txt", "".join(f"{t}\n" for t in sorted_topics(judgments.topics)))
    elif kind == "actev":
        ref, sys_set = synthetic_actev(n_activities=int(job.get("n_activities", 20)), seed=job.seed)
        write_text(job.out, "reference.json", serialize_activity_set(ref))
        write_text(job.out, "system.json", serialize_activity_set(sys_set))
    else:
        raise ConfigError(f"unknown fixture kind {kind!r}; use avs or actev")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

COMMANDS = {
    "pool": cmd_pool,
    "score-avs": cmd_score_avs,
    "score-actev": cmd_score_actev,
    "score-dvu": cmd_score_dvu,
    "score-dsdi": cmd_score_dsdi,
    "score-msum": cmd_score_msum,
    "da": cmd_da,
    "compare": cmd_compare,
    "det-plot": cmd_det_plot,
    "gen": cmd_gen,
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--seed", type=int, help="random seed (64-bit unsigned)")
    p.add_argument("--jobs", type=int, help="parallel workers; results do not depend on it")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./videval-out)")


def _flag(p, name, **kw):
    p.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="videval", description="Video evaluation campaign scoring toolkit")
    parser.add_argument("--version", action="version", version=f"videval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pool", help="build stratified assessment pools from runs")
    _common(p)
    _flag(p, "runs", nargs="+", help="run files or directories")
    _flag(p, "chunk_size", type=int)
    _flag(p, "rank_limit", type=int)
    _flag(p, "task", choices=["AVS", "DSDI"])

    p = sub.add_parser("score-avs", help="xinfAP, novelty and pool statistics for ad-hoc search runs")
    _common(p)
    _flag(p, "runs", nargs="+")
    _flag(p, "judgments")
    _flag(p, "strata")
    _flag(p, "membership", help="membership.tsv from the pool command")
    _flag(p, "topics", help="file listing evaluated topic ids")
    _flag(p, "epsilon", type=float)
    p.add_argument("--novelty", action="store_true", default=None)
    _flag(p, "novelty_mode", choices=["unique", "all-weighted"])
    _flag(p, "teams", help="run_tag<TAB>team file")
    _flag(p, "rank_limit", type=int)

    p = sub.add_parser("score-actev", help="activity detection DET curves, Pmiss@RFA, nAUDC, nMODE")
    _common(p)
    _flag(p, "reference")
    _flag(p, "system", nargs="+")
    _flag(p, "mode", choices=["AD", "AOD", "both"])
    _flag(p, "temporal_threshold", type=float)
    _flag(p, "spatial_threshold", type=float)
    _flag(p, "cost_md", type=float)
    _flag(p, "cost_fa", type=float)
    _flag(p, "rfa_targets", type=float, nargs="+")
    _flag(p, "naudc_limit", type=float)
    p.add_argument("--tfa", action="store_true", default=None, help="add time-based false alarms to curves")
    _flag(p, "fps", type=float)
    p.add_argument("--tfa-per-video", dest="tfa_per_video", action="store_true", default=None,
                   help="average time-based false alarms per video instead of pooling over the corpus")
    p.add_argument("--log-x", dest="log_x", action="store_true", default=None)

    p = sub.add_parser("score-dvu", help="accuracy and MRR of answer sheets")
    _common(p)
    _flag(p, "key")
    _flag(p, "submissions", nargs="+")

    p = sub.add_parser("score-dsdi", help="per-feature AP, MAP, categories, P/R/F")
    _common(p)
    _flag(p, "runs", nargs="+")
    _flag(p, "judgments")
    _flag(p, "strata")
    _flag(p, "excluded_features", nargs="+")
    _flag(p, "categories", help="feature<TAB>category file")
    _flag(p, "collection_size", type=int)
    _flag(p, "rank_limit", type=int)

    p = sub.add_parser("score-msum", help="key-fact and subjective summary scores")
    _common(p)
    _flag(p, "sheet", help=f"CSV with header {','.join(MSUM_HEADER)}")

    p = sub.add_parser("da", help="direct-assessment standardization and correlations")
    _common(p)
    _flag(p, "ratings")
    _flag(p, "workers", help="file of worker ids to keep")
    _flag(p, "caption_metrics", help="CSV system_id,video_id,metric,value")
    p.add_argument("--significance", action="store_true", default=None)
    _flag(p, "alpha", type=float)
    _flag(p, "iterations", type=int)

    p = sub.add_parser("compare", help="pairwise randomization tests between runs")
    _common(p)
    _flag(p, "scores", help="per-unit score CSV")
    _flag(p, "run_column")
    _flag(p, "unit_column")
    _flag(p, "score_column")
    _flag(p, "top", type=int)
    _flag(p, "alpha", type=float)
    _flag(p, "iterations", type=int)
    _flag(p, "statistic", choices=["mean", "t"])

    p = sub.add_parser("det-plot", help="render DET curve CSVs as SVG")
    _common(p)
    _flag(p, "curves", nargs="+")
    _flag(p, "x_axis", choices=["rfa", "tfa"])
    _flag(p, "x_max", type=float)
    _flag(p, "title")
    _flag(p, "name", help="output file name")
    p.add_argument("--log-x", dest="log_x", action="store_true", default=None)

    p = sub.add_parser("gen", help="write seeded synthetic fixtures")
    _common(p)
    _flag(p, "kind", choices=["avs", "actev"])
    _flag(p, "n_runs", type=int)
    _flag(p, "n_topics", type=int)
    _flag(p, "depth", type=int)
    _flag(p, "candidates", type=int)
    _flag(p, "n_activities", type=int)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        job = Job(args, args.command)
        return COMMANDS[args.command](job)
    except (ConfigError, ParseError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"videval {args.command}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"videval {args.command}: invalid input: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"videval {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
