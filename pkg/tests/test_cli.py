import csv
import json
import subprocess
import sys

import pytest

from gbtwin.cli import RunConfig, run_cli
from gbtwin.evaluation import reduced_grid

TABLE = """dataset,gb,tk,ts
a,89.58,87.72,84.88
b,90.74,84.34,69.73
c,91.04,88.66,80.68
d,76.74,69.99,62.45
e,52.44,54.13,51.17
f,99.34,97.31,95.33
g,90.13,89.01,77.03
h,97.61,93.81,89.98
i,74.38,67.33,64.67
"""


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def blob_csv(tmp_path, three_blobs):
    path = tmp_path / "blobs.csv"
    names = ["setosa", "versicolor", "virginica"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "species"])
        for row, label in zip(three_blobs.features, three_blobs.labels):
            w.writerow([*row, names[label]])
    return str(path)


class TestStats:
    def test_table_values(self, tmp_path, capsys):
        path = tmp_path / "acc.csv"
        path.write_text(TABLE)
        out = tmp_path / "stats.json"
        assert run_cli(["stats", str(path), "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "gb vs tk: t=3.347, p=0.0101; W=2.00, p=0.0117" in text
        assert "gb vs ts: t=4.737, p=0.0015; W=0.00, p=0.0039" in text
        assert "tk vs ts: t=4.116, p=0.0034; W=0.00, p=0.0039" in text
        assert "gb: mean=84.67 std=13.83" in text
        saved = json.loads(out.read_text())
        assert len(saved["comparisons"]) == 3

    def test_column_selection(self, tmp_path, capsys):
        path = tmp_path / "acc.csv"
        path.write_text(TABLE)
        assert run_cli(["stats", str(path), "--columns", "gb", "ts"]) == 0
        text = capsys.readouterr().out
        assert "gb vs ts" in text and "tk" not in text
        assert run_cli(["stats", str(path), "--columns", "gb", "zz"]) == 1


class TestTrainPredict:
    def test_round_trip(self, tmp_path, blob_csv, capsys):
        model = tmp_path / "m.json"
        preds = tmp_path / "p.csv"
        assert run_cli(["train", blob_csv, "--mode", "gb-twksvc", "--min-points", "1", "--out", str(model)]) == 0
        assert "training accuracy 100.00%" in capsys.readouterr().out
        assert run_cli(["predict", str(model), blob_csv, "--out", str(preds)]) == 0
        assert "accuracy 100.00% on 90 rows" in capsys.readouterr().out
        rows = read_csv(preds)
        assert rows[0] == ["predicted"] and rows[1] == ["setosa"] and len(rows) == 91

    def test_predict_without_labels(self, tmp_path, blob_csv, capsys):
        model = tmp_path / "m.json"
        run_cli(["train", blob_csv, "--mode", "twin-ksvc", "--out", str(model)])
        feats = tmp_path / "f.csv"
        feats.write_text("x,y\n0,0\n4,0\n0,4\n")
        preds = tmp_path / "p.csv"
        assert run_cli(["predict", str(model), str(feats), "--no-labels", "--out", str(preds)]) == 0
        assert [r[0] for r in read_csv(preds)[1:]] == ["setosa", "versicolor", "virginica"]


class TestErrors:
    def test_usage_error_is_2(self, capsys):
        assert run_cli(["train"]) == 2
        assert run_cli(["nope"]) == 2
        assert run_cli(["cv", "x.csv", "--mode", "svm"]) == 2

    def test_runtime_error_is_1(self, tmp_path, capsys):
        assert run_cli(["cv", str(tmp_path / "missing.csv")]) == 1
        bad = tmp_path / "bad.csv"
        bad.write_text("a,label\n1,x\nfoo,y\n")
        assert run_cli(["cv", str(bad)]) == 1
        err = capsys.readouterr().err
        assert "gbtwin cv: error:" in err and "row 3" in err

    def test_config_rejects_unknown_keys(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"c1": 2.0, "colour": "red"}))
        with pytest.raises(ValueError):
            RunConfig.from_file(cfg)

    def test_stats_path_skips_training_stack(self):
        code = "import sys, gbtwin.cli; print('numba' in sys.modules, 'gbtwin.numerics' in sys.modules)"
        proc = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
        assert proc.stdout.split() == ["False", "False"]

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "gbtwin", "stats"], capture_output=True, text=True)
        assert proc.returncode == 2


class TestSeedsAndDeterminism:
    def _cv(self, tmp_path, blob_csv, name, extra=()):
        out = tmp_path / name
        assert run_cli(["cv", blob_csv, "--folds", "3", "--out", str(out), *extra]) == 0
        return json.loads(out.read_text())

    def test_env_seed_and_flag_precedence(self, tmp_path, blob_csv, monkeypatch, capsys):
        monkeypatch.setenv("GBTWIN_SEED", "11")
        assert self._cv(tmp_path, blob_csv, "a.json")["extras"]["seed"] == 11
        assert self._cv(tmp_path, blob_csv, "b.json", ["--seed", "5"])["extras"]["seed"] == 5
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"seed": 3}))
        # environment beats the config file, flags beat both
        assert self._cv(tmp_path, blob_csv, "c.json", ["--config", str(cfg)])["extras"]["seed"] == 11

    def test_cv_is_reproducible(self, tmp_path, blob_csv, capsys):
        a = self._cv(tmp_path, blob_csv, "a.json", ["--seed", "4"])
        b = self._cv(tmp_path, blob_csv, "b.json", ["--seed", "4"])
        a.pop("train_time_seconds")
        b.pop("train_time_seconds")
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_holdout(self, tmp_path, blob_csv, capsys):
        rep = self._cv(tmp_path, blob_csv, "h.json", ["--holdout", "0.2"])
        assert rep["extras"]["holdout_accuracy"] == 100.0


class TestOutputs:
    def test_gen_balls_columns(self, tmp_path, blob_csv, capsys):
        out = tmp_path / "balls.csv"
        assert run_cli(["gen-balls", blob_csv, "--min-points", "3", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == ["label", "radius", "member_count", "c0", "c1"]
        assert {r[0] for r in rows[1:]} == {"setosa", "versicolor", "virginica"}
        assert all(int(r[2]) >= 3 and float(r[1]) >= 0 for r in rows[1:])

    def test_bench_header(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        assert run_cli(["bench", "--datasets", "iris", "--models", "ovr-tsvm", "--folds", "3", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert rows[0] == ["dataset", "model", "mean_accuracy", "std_accuracy", "mean_time_s"]
        assert rows[1][:2] == ["iris", "1-versus-rest TSVM"]
        assert 0 <= float(rows[1][2]) <= 100

    def test_grid_output(self, tmp_path, blob_csv, capsys):
        out = tmp_path / "g.json"
        assert run_cli(["grid", blob_csv, "--mode", "twin-ksvc", "--folds", "3", "--out", str(out)]) == 0
        res = json.loads(out.read_text())
        assert res["report"]["mean_accuracy"] == 100.0
        assert res["report"]["extras"]["configurations"] == len(list(reduced_grid().hyperparams("twin-ksvc")))
        assert set(res["best"]) >= {"hyperparams"}

    def test_sensitivity_csv(self, tmp_path, blob_csv, capsys):
        out = tmp_path / "s.csv"
        argv = ["sensitivity", blob_csv, "--nums", "2", "3", "--purs", "0.9", "1.0", "--folds", "3", "--out", str(out)]
        assert run_cli(argv) == 0
        rows = read_csv(out)
        assert rows[0] == ["num", "pur", "accuracy"]
        assert [(r[0], r[1]) for r in rows[1:]] == [("2", "0.9"), ("2", "1.0"), ("3", "0.9"), ("3", "1.0")]
