"""Command-line interface: exit codes, outputs and reproducibility."""
import csv
import json
from datetime import datetime, timedelta

import numpy as np
import pytest

from rgcopula.cli import main


def _bars(path, days, seed):
    rng = np.random.default_rng(seed)
    with open(path, "w") as fh:
        fh.write("timestamp,price\n")
        for d in days:
            price = 100.0
            t = datetime.fromisoformat(d) + timedelta(hours=9)
            for _ in range(20):
                fh.write(f"{t.isoformat()},{price:.6f}\n")
                price *= float(np.exp(0.001 * rng.standard_normal()))
                t += timedelta(minutes=5)


def _run(*args):
    return main(list(args))


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    """Simulated panel plus constant and GAS fits shared by the slower checks."""
    d = tmp_path_factory.mktemp("cli")
    panel = d / "panel.csv"
    assert _run("--seed", "3", "simulate", "--T", "360", "--out", str(panel)) == 0
    with open(panel) as fh:
        dates = [r["date"] for r in csv.DictReader(fh)]
    split = dates[299]
    fit = d / "fit.json"
    code = _run("--seed", "3", "fit", "--panel", str(panel), "--out", str(fit), "--split-date", split,
                "--n-starts", "1", "--ar1", "0", "--ar2", "0")
    assert code == 0
    return {"dir": d, "panel": panel, "fit": fit, "split": split}


# --- ingest -----------------------------------------------------------------


def test_ingest_aligns_common_days(tmp_path):
    a, b, out = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "p.csv"
    _bars(a, ["2015-03-02", "2015-03-03", "2015-03-04", "2015-03-05"], 1)
    _bars(b, ["2015-03-03", "2015-03-04", "2015-03-05", "2015-03-06"], 2)
    assert _run("ingest", "--asset1", str(a), "--asset2", str(b), "--out", str(out)) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert [r["date"] for r in rows] == ["2015-03-03", "2015-03-04", "2015-03-05"]
    assert list(rows[0]) == ["date", "ret1", "rv1", "ret2", "rv2"]
    summary = json.loads((tmp_path / "p.csv.summary.json").read_text())
    assert summary["T"] == 3


def test_ingest_respects_holidays(tmp_path):
    a, b, out, hol = (tmp_path / n for n in ("a.csv", "b.csv", "p.csv", "h.txt"))
    days = ["2015-03-02", "2015-03-03", "2015-03-04"]
    _bars(a, days, 1)
    _bars(b, days, 2)
    hol.write_text("2015-03-03\n")
    assert _run("ingest", "--asset1", str(a), "--asset2", str(b), "--holidays", str(hol),
                "--out", str(out)) == 0
    with open(out) as fh:
        assert [r["date"] for r in csv.DictReader(fh)] == ["2015-03-02", "2015-03-04"]


def test_ingest_missing_holiday_file_is_input_error(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    _bars(a, ["2015-03-02"], 1)
    _bars(b, ["2015-03-02"], 2)
    code = _run("ingest", "--asset1", str(a), "--asset2", str(b),
                "--holidays", str(tmp_path / "nope.txt"), "--out", str(tmp_path / "p.csv"))
    assert code == 1


def test_ingest_too_few_days_is_input_error(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    _bars(a, ["2015-03-02", "2015-03-03"], 1)
    _bars(b, ["2015-03-02", "2015-03-03"], 2)
    code = _run("ingest", "--asset1", str(a), "--asset2", str(b), "--min-length", "5",
                "--out", str(tmp_path / "p.csv"))
    assert code == 1


def test_ingest_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    _bars(a, ["2015-03-02", "2015-03-03", "2015-03-04"], 1)
    _bars(b, ["2015-03-02", "2015-03-03", "2015-03-04"], 2)
    outs = []
    for k in range(2):
        out = tmp_path / f"p{k}.csv"
        assert _run("ingest", "--asset1", str(a), "--asset2", str(b), "--out", str(out)) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


# --- simulate ---------------------------------------------------------------


def test_simulate_is_byte_identical_per_seed(tmp_path):
    blobs = []
    for k, seed in enumerate((5, 5, 6)):
        out, truth = tmp_path / f"s{k}.csv", tmp_path / f"t{k}.csv"
        assert _run("--seed", str(seed), "simulate", "--T", "80", "--out", str(out),
                    "--truth", str(truth)) == 0
        blobs.append(out.read_bytes() + truth.read_bytes())
    assert blobs[0] == blobs[1]
    assert blobs[0] != blobs[2]


def test_simulate_rejects_short_horizon(tmp_path):
    assert _run("simulate", "--T", "10", "--out", str(tmp_path / "s.csv")) == 1


def test_unknown_option_is_input_error():
    assert _run("fit", "--bogus") == 1


def test_config_file_supplies_seed(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("seed = 5\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert _run("--config", str(cfg), "simulate", "--T", "70", "--out", str(a)) == 0
    assert _run("--seed", "5", "simulate", "--T", "70", "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()


# --- fit --------------------------------------------------------------------


def test_fit_report_contents(work):
    rep = json.loads(work["fit"].read_text())
    tags = [m["tag"] for m in rep["models"]]
    assert len(tags) == 2
    const, gas = rep["models"]
    assert gas["copula"]["loglik"] >= const["copula"]["loglik"] - 1e-6
    assert rep["in_sample"]["T"] == 300
    assert rep["in_sample"]["end"] == work["split"]


def test_fit_is_byte_identical(work):
    again = work["dir"] / "fit_again.json"
    assert _run("--seed", "3", "fit", "--panel", str(work["panel"]), "--out", str(again),
                "--split-date", work["split"], "--n-starts", "1", "--ar1", "0", "--ar2", "0") == 0
    assert again.read_bytes() == work["fit"].read_bytes()


def test_fit_semiparametric_reports_copula_loglik_only(work):
    out = work["dir"] / "semi.json"
    assert _run("fit", "--panel", str(work["panel"]), "--out", str(out), "--split-date",
                work["split"], "--margin-mode", "semiparametric", "--dynamics", "constant",
                "--n-starts", "1", "--ar1", "0", "--ar2", "0") == 0
    m = json.loads(out.read_text())["models"][0]
    assert m["loglik_total"] == pytest.approx(m["copula"]["loglik"], rel=1e-12)


def test_fit_bootstrap_below_minimum_is_rejected(work):
    out = work["dir"] / "b.json"
    assert _run("fit", "--panel", str(work["panel"]), "--out", str(out), "--bootstrap", "50") == 1


def test_fit_split_outside_sample_is_rejected(work):
    out = work["dir"] / "b.json"
    assert _run("fit", "--panel", str(work["panel"]), "--out", str(out),
                "--split-date", "1990-01-01") == 1


# --- evaluate ---------------------------------------------------------------


def _evaluate(work, name):
    out = work["dir"] / name
    code = _run("--seed", "4", "evaluate", "--panel", str(work["panel"]), "--models",
                str(work["fit"]), "--out", str(out), "--draws", "1000", "--dq-sims", "100")
    return code, out


def test_evaluate_outputs(work, capsys):
    code, out = _evaluate(work, "eval.json")
    assert code == 0
    table = capsys.readouterr().out
    for label in ("1%", "5%", "10%", "90%", "95%", "99%"):
        assert label in table
    rep = json.loads(out.read_text())
    assert rep["out_of_sample"]["T"] == 60
    bench = rep["benchmark"]
    for res in rep["dm"][bench].values():
        assert res["statistic"] == 0.0
    for tag, m in rep["models"].items():
        for row in m["var"].values():
            assert 0.0 <= row["dq_p"] <= 1.0
            assert 0.0 <= row["coverage"] <= 1.0
    for t1, row in rep["cpa"].items():
        for res in row.values():
            assert 0.0 <= res["p_value"] <= 1.0
    for t, row in rep["dm"].items():
        for res in row.values():
            assert 0.0 <= res["p_value"] <= 1.0


def test_evaluate_is_byte_identical(work):
    _, a = _evaluate(work, "e1.json")
    _, b = _evaluate(work, "e2.json")
    assert a.read_bytes() == b.read_bytes()


def test_evaluate_unknown_benchmark(work):
    code = _run("evaluate", "--panel", str(work["panel"]), "--models", str(work["fit"]),
                "--out", str(work["dir"] / "x.json"), "--benchmark", "nope", "--draws", "1000")
    assert code == 1


# --- cdb --------------------------------------------------------------------


def _cdb(work, name):
    out = work["dir"] / name
    code = _run("--seed", "4", "cdb", "--panel", str(work["panel"]), "--models", str(work["fit"]),
                "--out", str(out), "--draws", "1000", "--n-boot", "200")
    return code, out


def test_cdb_outputs(work):
    code, out = _cdb(work, "cdb.csv")
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 60
    vals = np.array([float(r["cdb"]) for r in rows])
    assert np.all((vals >= 0.0) & (vals <= 1.0))
    band = json.loads((work["dir"] / "cdb.csv.band.json").read_text())
    assert band["lo90"] < band["mean"] < band["hi90"]
    assert 0.0 <= band["fraction_outside"] <= 1.0


def test_cdb_is_byte_identical(work):
    _, a = _cdb(work, "c1.csv")
    _, b = _cdb(work, "c2.csv")
    assert a.read_bytes() == b.read_bytes()
    assert (work["dir"] / "c1.csv.band.json").read_bytes() == \
        (work["dir"] / "c2.csv.band.json").read_bytes()


def test_cdb_rejects_bad_alpha(work):
    code = _run("cdb", "--panel", str(work["panel"]), "--models", str(work["fit"]),
                "--out", str(work["dir"] / "x.csv"), "--alpha", "1.5", "--n-boot", "200")
    assert code == 1
