import csv
import json

import pytest

from sswarm.cli import EXIT_ERROR, EXIT_OK, EXIT_PARTIAL, main


@pytest.fixture
def toy(tmp_path):
    rows = ["shade,w,h,kind"]
    for i in range(40):
        c = i % 2
        rows.append(f"{'dark' if c else 'light'},{0.2 + 0.6 * c + 0.01 * (i % 5)},{1 + 3 * c + 0.1 * (i % 3)},{'k' + str(c)}")
    p = tmp_path / "toy.csv"
    p.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return p


def test_run_writes_report(toy, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--dataset", str(toy), "--label-col", "kind", "--categorical", "shade",
                 "--algo", "knn", "--algo", "sspso", "--label-frac", "0.1:0.2", "--runs", "2",
                 "--seed", "3", "--out", str(out), "--K", "3"])
    assert code == EXIT_OK
    with open(out / "rows.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4 and {r["algorithm"] for r in rows} == {"knn", "sspso"}
    assert "toy" in capsys.readouterr().out


def test_bench_from_config(toy, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "datasets": [{"name": "toy", "path": "toy.csv", "label_column": "kind", "categorical_columns": ["shade"]}],
        "algorithms": ["dtree"],
        "ranges": [[0.2, 0.2]],
        "runs_per_range": 1,
        "output_dir": "res",
    }))
    assert main(["bench", "--config", str(cfg)]) == EXIT_OK
    assert (tmp_path / "res" / "table_20-20.csv").exists()


def test_fit_predict_round_trip(toy, tmp_path):
    model = tmp_path / "m.txt"
    assert main(["fit", "--dataset", str(toy), "--label-col", "kind", "--categorical", "shade",
                 "--label-frac", "0.25", "--model", str(model)]) == EXIT_OK
    pred = tmp_path / "p.csv"
    assert main(["predict", "--model", str(model), "--input", str(toy), "--out", str(pred)]) == EXIT_OK
    with open(pred, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["row", "predicted", "score_k0", "score_k1"]
    truth = [f"k{i % 2}" for i in range(40)]
    assert [r["predicted"] for r in rows] == truth


def test_psc_fit_predict(toy, tmp_path):
    model = tmp_path / "m.txt"
    assert main(["fit", "--algo", "psc", "--variant", "psi1", "--dataset", str(toy), "--label-col", "kind",
                 "--categorical", "shade", "--model", str(model)]) == EXIT_OK
    assert main(["predict", "--model", str(model), "--input", str(toy)]) == EXIT_OK


def test_predict_unknown_category(toy, tmp_path):
    model = tmp_path / "m.txt"
    main(["fit", "--dataset", str(toy), "--label-col", "kind", "--categorical", "shade", "--model", str(model)])
    bad = tmp_path / "bad.csv"
    bad.write_text("shade,w,h\npurple,0.1,1\n")
    assert main(["predict", "--model", str(model), "--input", str(bad)]) == EXIT_ERROR


def test_data_errors_exit_one(tmp_path):
    assert main(["run", "--dataset", str(tmp_path / "none.csv"), "--algo", "knn",
                 "--label-frac", "0.1", "--out", str(tmp_path / "o")]) == EXIT_ERROR
    assert main(["bench", "--config", str(tmp_path / "none.json")]) == EXIT_ERROR


def test_bad_fraction_is_usage_error(toy, tmp_path):
    with pytest.raises(SystemExit):
        main(["run", "--dataset", str(toy), "--algo", "knn", "--label-frac", "0.5:0.2", "--out", str(tmp_path)])


def test_partial_failure_exit_two(toy, tmp_path, monkeypatch):
    from sswarm import harness

    def broken(*a, **k):
        raise RuntimeError("nope")

    monkeypatch.setattr(harness, "transductive", broken)
    code = main(["run", "--dataset", str(toy), "--label-col", "kind", "--categorical", "shade",
                 "--algo", "knn", "--label-frac", "0.2", "--runs", "1", "--out", str(tmp_path / "o")])
    assert code == EXIT_PARTIAL
