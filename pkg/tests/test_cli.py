import csv
import filecmp
import hashlib
import json

import numpy as np
import pytest

from pcglm.cli import main
from pcglm.pipeline import SIGNIFICANCE_LEVELS, load_model

SPEC = {"n_tracts": 600, "true_beta": [1.2, -1.0, 0.9, 0.0, 0.8], "intercept": -0.5, "seed": 4}


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    (d / "spec.json").write_text(json.dumps(SPEC))
    assert main(["synth", "--spec", str(d / "spec.json"), "--out", str(d)]) == 0
    return d


@pytest.fixture(scope="module")
def model_path(synth_dir):
    out = synth_dir / "model.json"
    rc = main([
        "fit", "--income", str(synth_dir / "tract_income.csv"), "--employment",
        str(synth_dir / "tract_employment.csv"), "--labels", str(synth_dir / "labels.csv"), "--out", str(out),
    ])
    assert rc == 0
    return out


def tract_args(d):
    return ["--income", str(d / "tract_income.csv"), "--employment", str(d / "tract_employment.csv")]


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def err_json(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_fit_then_reload_predicts_identically(synth_dir, model_path, tmp_path):
    out = tmp_path / "pred.csv"
    assert main(["predict", "--model", str(model_path), *tract_args(synth_dir), "--out", str(out)]) == 0
    rows = read_rows(out)
    assert rows[0] == ["geoid", "level", "probability", "lo", "hi", "class"]
    from pcglm import ingest

    ds, _ = ingest.join(ingest.load_csv(synth_dir / "tract_income.csv"), ingest.load_csv(synth_dir / "tract_employment.csv"))
    p = load_model(model_path).predict_proba(ds.columns(load_model(model_path).feature_names))
    assert [float(r[2]) for r in rows[1:]] == p.tolist()


def test_missing_labels_is_usage_error(synth_dir, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit", *tract_args(synth_dir), "--out", str(tmp_path / "m.json")])
    assert exc.value.code == 2
    payload = err_json(capsys)
    assert payload["code"] == "usage" and "--labels" in payload["message"]


def test_one_class_labels(synth_dir, tmp_path, capsys):
    lab = tmp_path / "ones.csv"
    rows = read_rows(synth_dir / "labels.csv")
    lab.write_text("geoid,dac\n" + "".join(f"{g},1\n" for g, _ in rows[1:]))
    rc = main(["fit", *tract_args(synth_dir), "--labels", str(lab), "--out", str(tmp_path / "m.json")])
    assert rc == 4
    payload = err_json(capsys)
    assert payload["code"] == "separation" and "advice" in payload["context"]


def test_summary_formats_agree(model_path, tmp_path):
    main(["summary", "--model", str(model_path), "--format", "csv", "--out", str(tmp_path / "s.csv")])
    main(["summary", "--model", str(model_path), "--format", "text", "--out", str(tmp_path / "s.txt")])
    csv_rows = read_rows(tmp_path / "s.csv")[1:]
    text_rows = [line.split() for line in (tmp_path / "s.txt").read_text().splitlines()[1:]]
    assert csv_rows == text_rows
    assert {r[-1] for r in csv_rows} <= set(SIGNIFICANCE_LEVELS)


def test_planted_positive_features_flagged(model_path, tmp_path):
    main(["summary", "--model", str(model_path), "--format", "csv", "--out", str(tmp_path / "s.csv")])
    flags = {r[0]: r[-1] for r in read_rows(tmp_path / "s.csv")[1:]}
    assert flags["x1"] == flags["x3"] == flags["x5"] == "positive"
    assert flags["x2"] == "negative"


def test_summary_not_estimable_row(synth_dir, tmp_path):
    inc = read_rows(synth_dir / "tract_income.csv")
    inc[0].append("flat")
    for r in inc[1:]:
        r.append("5")
    path = tmp_path / "inc.csv"
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(inc)
    m = tmp_path / "m.json"
    assert main(["fit", "--income", str(path), "--employment", str(synth_dir / "tract_employment.csv"),
                 "--labels", str(synth_dir / "labels.csv"), "--out", str(m)]) == 0
    main(["summary", "--model", str(m), "--format", "csv", "--out", str(tmp_path / "s.csv")])
    (row,) = [r for r in read_rows(tmp_path / "s.csv") if r[0] == "flat"]
    assert row == ["flat", "", "", "", "not-estimable"]


def test_corrupt_model_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["summary", "--model", str(bad)]) == 5
    assert err_json(capsys)["code"] == "io_error"


def test_cv_deterministic(synth_dir, tmp_path):
    for name in ("a.json", "b.json"):
        assert main(["cv", *tract_args(synth_dir), "--labels", str(synth_dir / "labels.csv"), "--seed", "3",
                     "--out", str(tmp_path / name)]) == 0
    assert filecmp.cmp(tmp_path / "a.json", tmp_path / "b.json", shallow=False)
    doc = json.loads((tmp_path / "a.json").read_text())
    assert doc["k"] == 5 and doc["seed"] == 3


def test_backcast_equals_predict(synth_dir, model_path, tmp_path):
    main(["predict", "--model", str(model_path), *tract_args(synth_dir), "--out", str(tmp_path / "p.csv")])
    paths = f"{synth_dir / 'tract_income.csv'},{synth_dir / 'tract_employment.csv'}"
    assert main(["backcast", "--model", str(model_path), "--year-data", f"2019={paths}",
                 "--out", str(tmp_path / "bc")]) == 0
    assert read_rows(tmp_path / "bc" / "predictions_2019.csv") == read_rows(tmp_path / "p.csv")
    shares = read_rows(tmp_path / "bc" / "shares.csv")
    assert shares[0] == ["year", "n", "dac_share", "error"] and shares[1][0] == "2019"


def test_backcast_bad_year_spec(model_path, tmp_path, capsys):
    assert main(["backcast", "--model", str(model_path), "--year-data", "nineteen", "--out", str(tmp_path)]) == 2
    assert err_json(capsys)["code"] == "usage"


def test_downscale_runs(synth_dir, model_path, tmp_path, capsys):
    rc = main(["downscale", "--model", str(model_path), "--income", str(synth_dir / "bg_income.csv"),
               "--employment", str(synth_dir / "bg_employment.csv"), "--labels", str(synth_dir / "labels.csv"),
               "--out", str(tmp_path / "bg.csv"), "--consensus-out", str(tmp_path / "tr.csv")])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["tracts"] == SPEC["n_tracts"] and summary["unmatched_block_groups"] == []
    bg = read_rows(tmp_path / "bg.csv")
    assert all(r[1] == "block_group" for r in bg[1:])
    assert read_rows(tmp_path / "tr.csv")[0] == ["geoid", "level", "probability", "lo", "hi", "class"]


def test_inputs_not_mutated(synth_dir, model_path, tmp_path):
    files = sorted(p for p in synth_dir.iterdir() if p.suffix == ".csv")
    before = {p: hashlib.sha256(p.read_bytes()).hexdigest() for p in files}
    main(["predict", "--model", str(model_path), *tract_args(synth_dir), "--out", str(tmp_path / "p.csv")])
    main(["cv", *tract_args(synth_dir), "--labels", str(synth_dir / "labels.csv"), "--out", str(tmp_path / "c.json")])
    assert before == {p: hashlib.sha256(p.read_bytes()).hexdigest() for p in files}


def test_unknown_config_key(synth_dir, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"alpha": 0.1, "bogus": 1}))
    rc = main(["fit", *tract_args(synth_dir), "--labels", str(synth_dir / "labels.csv"), "--config", str(cfg),
               "--out", str(tmp_path / "m.json")])
    assert rc == 3
    payload = err_json(capsys)
    assert set(payload) == {"code", "message", "context"} and payload["code"] == "config_error"


def test_flags_override_config(synth_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"alpha": 0.2, "ridge": 0.5}))
    m = tmp_path / "m.json"
    assert main(["fit", *tract_args(synth_dir), "--labels", str(synth_dir / "labels.csv"), "--config", str(cfg),
                 "--alpha", "0.01", "--out", str(m)]) == 0
    conf = load_model(m).config
    assert conf["alpha"] == 0.01 and conf["ridge"] == 0.5


def test_missing_input_file(tmp_path, capsys):
    rc = main(["fit", "--income", str(tmp_path / "no.csv"), "--employment", str(tmp_path / "no.csv"),
               "--labels", str(tmp_path / "no.csv"), "--out", str(tmp_path / "m.json")])
    assert rc == 5
    err_json(capsys)


def test_synth_seed_override(tmp_path):
    (tmp_path / "spec.json").write_text(json.dumps({"n_tracts": 20}))
    main(["synth", "--spec", str(tmp_path / "spec.json"), "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["synth", "--spec", str(tmp_path / "spec.json"), "--out", str(tmp_path / "b"), "--seed", "2"])
    truth_a = json.loads((tmp_path / "a" / "truth.json").read_text())
    truth_b = json.loads((tmp_path / "b" / "truth.json").read_text())
    assert truth_a["tract_means"] != truth_b["tract_means"]
    assert np.isfinite(truth_a["intercept"])
