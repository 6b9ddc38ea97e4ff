import csv
import json
import os

import pytest

from videval import __version__, cli
from videval.submission import run_from_lists, serialize_run

JUDGMENTS = """#stratum\t1\t1\t2\t1.0
#stratum\t2\t3\t10\t0.5
1\t1\ta\t1
1\t1\tb\t0
1\t2\tc\t1
2\t1\tx\t1
2\t1\ty\t0
"""


@pytest.fixture
def avs(tmp_path):
    runs = tmp_path / "runs"
    runs.mkdir()
    lists = {
        "r1": {"1": ["a", "b", "c", "d"], "2": ["x", "y"]},
        "r2": {"1": ["b", "a", "d"], "2": ["y", "z", "x"]},
        "r3": {"1": ["c", "d", "a"], "2": ["x"]},
    }
    for tag, per_topic in lists.items():
        kind = "novelty" if tag == "r3" else "common"
        run = run_from_lists(tag, per_topic, run_kind=kind, processing_time={"1": 2.0, "2": 4.0})
        (runs / f"{tag}.txt").write_text(serialize_run(run))
    (tmp_path / "judgments.txt").write_text(JUDGMENTS)
    (tmp_path / "teams.tsv").write_text("r1\tT1\nr2\tT2\nr3\tT2\n")
    return tmp_path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_score_avs_outputs(avs):
    out = avs / "out"
    code = cli.main(["score-avs", "--runs", str(avs / "runs"), "--judgments", str(avs / "judgments.txt"),
                     "--novelty", "--teams", str(avs / "teams.tsv"), "--out", str(out)])
    assert code == 0
    runs = {r["run_tag"]: r for r in _rows(out / "avs_run_scores.csv")}
    assert set(runs) == {"r1", "r2", "r3"}
    assert float(runs["r1"]["mean_processing_time"]) == 3.0
    report = json.loads((out / "avs_report.json").read_text())
    assert report["toolkit_version"] == __version__
    assert len(report["config_hash"]) == 64
    assert report["sections"]["novelty"]["consideration_set"] == ["r1", "r3"]
    assert {r["topic"] for r in _rows(out / "avs_topic_scores.csv")} == {"1", "2"}
    assert (out / "avs_time_vs_score.csv").exists()
    assert (out / "avs_pool_stats.csv").exists()


def test_pool_then_score_with_membership(avs):
    pool_out = avs / "pool"
    assert cli.main(["pool", "--runs", str(avs / "runs"), "--seed", "3", "--out", str(pool_out)]) == 0
    assert (pool_out / "manifest.json").exists()
    a = avs / "a"
    b = avs / "b"
    base = ["score-avs", "--runs", str(avs / "runs"), "--judgments", str(avs / "judgments.txt")]
    assert cli.main(base + ["--out", str(a)]) == 0
    assert cli.main(base + ["--membership", str(pool_out / "membership.tsv"), "--out", str(b)]) == 0
    # default pool strata (1-300, 301-1000) differ from the judged strata, so
    # only files produced from identical membership need agree
    assert _rows(a / "avs_topic_scores.csv")[0].keys() == _rows(b / "avs_topic_scores.csv")[0].keys()


def test_config_file_and_flag_precedence(avs, monkeypatch):
    config = avs / "job.toml"
    config.write_text(
        'epsilon = 0.5\n'
        '[score-avs]\n'
        'runs = ["runs"]\n'
        'judgments = "judgments.txt"\n'
    )
    monkeypatch.setenv("VIDEVAL_OUT", str(avs / "env-out"))
    monkeypatch.chdir(avs.parent)
    assert cli.main(["score-avs", "--config", str(config)]) == 0
    high = {r["run_tag"]: float(r["mean_xinfAP"]) for r in _rows(avs / "env-out" / "avs_run_scores.csv")}
    assert cli.main(["score-avs", "--config", str(config), "--epsilon", "0", "--out", str(avs / "flag")]) == 0
    low = {r["run_tag"]: float(r["mean_xinfAP"]) for r in _rows(avs / "flag" / "avs_run_scores.csv")}
    assert high != low


def test_reruns_and_jobs_are_byte_identical(avs):
    outs = []
    for k, jobs in enumerate((1, 1, 3)):
        out = avs / f"o{k}"
        assert cli.main(["score-avs", "--runs", str(avs / "runs"), "--judgments", str(avs / "judgments.txt"),
                         "--jobs", str(jobs), "--out", str(out)]) == 0
        outs.append({name: (out / name).read_bytes() for name in sorted(os.listdir(out))})
    assert outs[0] == outs[1] == outs[2]


def test_config_hash_tracks_inputs(avs):
    args = ["score-avs", "--runs", str(avs / "runs"), "--judgments", str(avs / "judgments.txt")]
    assert cli.main(args + ["--out", str(avs / "h1")]) == 0
    (avs / "judgments.txt").write_text(JUDGMENTS.replace("2\t1\ty\t0", "2\t1\ty\t1"))
    assert cli.main(args + ["--out", str(avs / "h2")]) == 0

    def digest(d):
        return json.loads((avs / d / "avs_report.json").read_text())["config_hash"]

    assert digest("h1") != digest("h2")


@pytest.mark.parametrize(
    "mutate, needle",
    [
        (lambda p: (p / "runs" / "r1.txt").write_text("1\ta\t0\t1.0\tr1\n"), "rank must be"),
        (lambda p: (p / "judgments.txt").write_text("1\t9\ta\t1\n"), "unknown stratum"),
        (lambda p: (p / "judgments.txt").unlink(), "not found"),
    ],
)
def test_validation_failures_exit_2(avs, capsys, mutate, needle):
    mutate(avs)
    code = cli.main(["score-avs", "--runs", str(avs / "runs"), "--judgments", str(avs / "judgments.txt"),
                     "--out", str(avs / "o")])
    assert code == 2
    assert needle in capsys.readouterr().err


def test_bad_config_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("epsilon = [\n")
    assert cli.main(["score-avs", "--config", str(bad)]) == 2
    assert cli.main(["score-avs", "--config", str(tmp_path / "missing.toml")]) == 2
    assert cli.main(["compare", "--out", str(tmp_path)]) == 2
    assert "missing required input" in capsys.readouterr().err


def test_internal_error_exit_1(avs, monkeypatch, capsys):
    def boom(job):
        raise RuntimeError("broken")

    monkeypatch.setitem(cli.COMMANDS, "score-dvu", boom)
    assert cli.main(["score-dvu", "--out", str(avs)]) == 1
    assert "internal error" in capsys.readouterr().err


def test_score_actev_and_det_plot(tmp_path):
    data = tmp_path / "data"
    assert cli.main(["gen", "--kind", "actev", "--n-activities", "3", "--seed", "5", "--out", str(data)]) == 0
    out = tmp_path / "out"
    assert cli.main(["score-actev", "--reference", str(data / "reference.json"),
                     "--system", str(data / "system.json"), "--out", str(out)]) == 0
    summary = _rows(out / "actev_summary.csv")
    assert [r["mode"] for r in summary] == ["AD", "AOD"]
    assert summary[0]["mean_nmode@0.1rfa"] == "" and summary[1]["mean_nmode@0.1rfa"] != ""
    for r in summary:
        assert 0.0 <= float(r["mean_pmiss@0.1rfa"]) <= 1.0
    curves = sorted(p for p in os.listdir(out / "det") if p.endswith(".csv"))
    assert "system.AD.mean.csv" in curves
    assert cli.main(["score-actev", "--reference", str(data / "reference.json"), "--system",
                     str(data / "system.json"), "--mode", "AD", "--tfa", "--tfa-per-video",
                     "--out", str(tmp_path / "tfa")]) == 0
    header = (tmp_path / "tfa" / "det" / "system.AD.activity_00.csv").read_text().splitlines()[0]
    assert header == "threshold,pmiss,rfa,tfa"
    first = out / "det" / "system.AD.activity_00.csv"
    assert first.read_text().splitlines()[0] == "threshold,pmiss,rfa"
    assert cli.main(["det-plot", "--curves", str(first), str(out / "det" / "system.AOD.activity_00.csv"),
                     "--out", str(tmp_path / "plot"), "--log-x"]) == 0
    svg = (tmp_path / "plot" / "det.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg


def test_score_dvu(tmp_path):
    (tmp_path / "key.txt").write_text("q1\tmc\tB\nq2\tmc\tC\nq3\trl\tm,n\n")
    (tmp_path / "team.txt").write_text("q1\tmc\tB\nq2\tmc\tA\nq3\trl\tn,m\n")
    out = tmp_path / "out"
    assert cli.main(["score-dvu", "--key", str(tmp_path / "key.txt"), "--submissions", str(tmp_path / "team.txt"),
                     "--out", str(out)]) == 0
    assert _rows(out / "dvu_scores.csv") == [{"submission": "team", "accuracy": "0.5", "mrr": "0.5"}]


def test_score_dsdi(tmp_path):
    runs = tmp_path / "runs"
    runs.mkdir()
    for tag, lists in {"t1": {"flooding": ["a", "b"], "car": ["c"], "smoke/fire": ["d"]},
                       "t2": {"flooding": ["b"], "car": ["d", "c"], "smoke/fire": []}}.items():
        lists = {k: v for k, v in lists.items() if v}
        (runs / f"{tag}.txt").write_text(serialize_run(run_from_lists(tag, lists, task="DSDI")))
    (tmp_path / "qrels.txt").write_text(
        "#stratum\t1\t1\t1000\t1.0\nflooding\t1\ta\t1\nflooding\t1\tb\t0\ncar\t1\tc\t1\nsmoke/fire\t1\td\t1\n"
    )
    out = tmp_path / "out"
    assert cli.main(["score-dsdi", "--runs", str(runs), "--judgments", str(tmp_path / "qrels.txt"),
                     "--excluded-features", "smoke/fire", "--collection-size", "10", "--out", str(out)]) == 0
    maps = {r["run_tag"]: float(r["MAP"]) for r in _rows(out / "dsdi_run_scores.csv")}
    assert maps == {"t1": 1.0, "t2": 0.25}
    feats = {(r["run_tag"], r["feature"]): r for r in _rows(out / "dsdi_feature_scores.csv")}
    assert ("t1", "smoke/fire") not in feats
    row = feats[("t2", "car")]
    assert (row["TP"], row["FP"], row["FN"], row["TN"]) == ("1", "1", "0", "8")
    assert feats[("t1", "car")]["category"] == "vehicles"
    spread = {r["feature"]: r for r in _rows(out / "dsdi_feature_spread.csv")}
    assert float(spread["flooding"]["min_AP"]) == 0.0 and float(spread["flooding"]["max_AP"]) == 1.0


def test_da_with_metrics_and_significance(tmp_path):
    lines = ["worker_id,system_id,video_id,rating"]
    metrics = ["system_id,video_id,metric,value"]
    for w in range(3):
        for s, quality in (("good", 70), ("ok", 50), ("poor", 20)):
            for v in range(6):
                lines.append(f"w{w},{s},v{v},{quality + 3 * w + v}")
                metrics.append(f"{s},v{v},BLEU,{quality / 100 + v / 1000}")
    (tmp_path / "ratings.csv").write_text("\n".join(lines) + "\n")
    (tmp_path / "metrics.csv").write_text("\n".join(metrics) + "\n")
    out = tmp_path / "out"
    assert cli.main(["da", "--ratings", str(tmp_path / "ratings.csv"), "--caption-metrics",
                     str(tmp_path / "metrics.csv"), "--significance", "--out", str(out)]) == 0
    systems = {r["system_id"]: float(r["da_z"]) for r in _rows(out / "da_systems.csv")}
    assert systems["good"] > systems["ok"] > systems["poor"]
    corr = {(r["metric_a"], r["metric_b"]): float(r["pearson"]) for r in _rows(out / "da_correlations.csv")}
    assert corr[("BLEU", "DA_Z")] > 0.9
    sig = {(r["row_run"], r["col_run"]): r for r in _rows(out / "da_significance.csv")}
    assert sig[("good", "poor")]["row_significantly_better"] == "1"
    assert (out / "da_significance.svg").exists()


def test_compare_command(avs):
    out = avs / "out"
    assert cli.main(["score-avs", "--runs", str(avs / "runs"), "--judgments", str(avs / "judgments.txt"),
                     "--out", str(out)]) == 0
    assert cli.main(["compare", "--scores", str(out / "avs_topic_scores.csv"), "--top", "2",
                     "--out", str(avs / "cmp")]) == 0
    rows = _rows(avs / "cmp" / "significance.csv")
    assert len(rows) == 2
    assert (avs / "cmp" / "significance.svg").read_text().startswith("<svg")


def test_score_msum_rejects_bad_header(tmp_path, capsys):
    (tmp_path / "s.csv").write_text("run,summary\n")
    assert cli.main(["score-msum", "--sheet", str(tmp_path / "s.csv"), "--out", str(tmp_path)]) == 2
    assert "header" in capsys.readouterr().err


def test_module_entry_point_help():
    with pytest.raises(SystemExit) as err:
        cli.main(["--help"])
    assert err.value.code == 0
