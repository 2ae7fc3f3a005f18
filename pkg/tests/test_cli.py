import json
import logging
import os
from pathlib import Path

import numpy as np
import pytest

from main import build_parser, main
from src.regression.utils import configure_logging

LOG_KEYS = ("PENREG_LOG_LEVEL", "PENREG_LOG_FILE")


@pytest.fixture(autouse=True)
def _restore_logging():
    yield
    configure_logging()


@pytest.fixture
def env_file(tmp_path, monkeypatch):
    """在临时目录中运行命令，返回该目录下的 .env 路径；结束时清掉 .env 写入的变量。"""

    monkeypatch.chdir(tmp_path)
    for key in LOG_KEYS:
        monkeypatch.delenv(key, raising=False)
    yield tmp_path / ".env"
    for key in LOG_KEYS:
        os.environ.pop(key, None)


@pytest.fixture
def train_csv(tmp_path, make_regression, write_csv):
    x, y = make_regression(300, 4, seed=41, beta=[2.0, 0.0, -1.0, 0.0])
    return write_csv(tmp_path / "train.csv", x, y)


def _train(train_csv, output, *extra):
    return main(
        ["train", "--input", str(train_csv), "--response", "y", "--n-lambdas", "20", "--output", str(output), *extra]
    )


def test_parser_defaults():
    args = build_parser().parse_args(["train", "--input", "a.csv", "--response", "y"])
    assert args.penalty == "lasso"
    assert args.k is None
    assert args.seed == 0
    assert args.output.name == "model.json"


def test_train_smoke(train_csv, tmp_path, capsys):
    output = tmp_path / "model.json"
    assert _train(train_csv, output) == 0
    assert "训练完成" in capsys.readouterr().out
    payload = json.loads(output.read_text(encoding="utf-8"))
    assert payload["penalty"] == {"family": "lasso", "mix": 1.0}
    assert [entry["name"] for entry in payload["coefficients"]] == ["x0", "x1", "x2", "x3"]
    assert output.read_text(encoding="utf-8").endswith("}\n")


def test_train_with_user_lambdas(train_csv, tmp_path):
    output = tmp_path / "model.json"
    code = main(
        ["train", "--input", str(train_csv), "--response", "y", "--lambdas", "1,4,2", "--output", str(output)]
    )
    assert code == 0
    payload = json.loads(output.read_text(encoding="utf-8"))
    assert payload["lambdas"] == [4.0, 2.0, 1.0]
    assert payload["grid"]["source"] == "user"


def test_elastic_net_without_intercept(train_csv, tmp_path):
    output = tmp_path / "model.json"
    assert _train(train_csv, output, "--penalty", "elastic-net", "--mix", "0.3", "--no-intercept") == 0
    payload = json.loads(output.read_text(encoding="utf-8"))
    assert payload["intercept"] == 0.0
    assert payload["penalty"] == {"family": "elastic_net", "mix": 0.3}
    assert payload["standardization"]["fit_intercept"] is False


def test_predict_matches_in_sample_mse(train_csv, tmp_path, capsys):
    model = tmp_path / "model.json"
    _train(train_csv, model)
    predictions = tmp_path / "pred.txt"
    capsys.readouterr()
    code = main(["predict", "--model", str(model), "--input", str(train_csv), "--output", str(predictions)])
    assert code == 0
    assert "MSE" in capsys.readouterr().err

    payload = json.loads(model.read_text(encoding="utf-8"))
    data = np.loadtxt(train_csv, delimiter=",", skiprows=1)
    values = np.array([float(line) for line in predictions.read_text(encoding="utf-8").splitlines()])
    mse = float(np.mean((data[:, -1] - values) ** 2))
    assert mse == pytest.approx(payload["in_sample_mse"], rel=1e-9)


def test_predict_constant_model(tmp_path, write_csv, capsys):
    x = np.full((40, 2), 1.5)
    y = np.arange(40.0)
    source = write_csv(tmp_path / "flat.csv", x, y)
    model = tmp_path / "model.json"
    assert _train(source, model) == 0
    capsys.readouterr()
    assert main(["predict", "--model", str(model), "--input", str(source)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 40
    assert all(float(line) == pytest.approx(y.mean()) for line in lines)


def test_predict_append_mode(train_csv, tmp_path):
    model = tmp_path / "model.json"
    _train(train_csv, model)
    output = tmp_path / "scored.csv"
    assert main(["predict", "--model", str(model), "--input", str(train_csv), "--output", str(output), "--append"]) == 0
    lines = output.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x0,x1,x2,x3,y,prediction"
    assert len(lines) == 301
    assert lines[1].count(",") == 5


def test_predict_malformed_row_gives_empty_prediction(train_csv, tmp_path, capsys):
    model = tmp_path / "model.json"
    _train(train_csv, model)
    rows = train_csv.read_text(encoding="utf-8").splitlines()
    rows.insert(5, "1.0,2.0")
    source = tmp_path / "broken.csv"
    source.write_text("\n".join(rows) + "\n", encoding="utf-8")
    capsys.readouterr()
    assert main(["predict", "--model", str(model), "--input", str(source), "--rejection-cap", "0.05"]) == 0
    lines = capsys.readouterr().out.split("\n")
    assert lines[4] == ""
    assert len(lines) == 302


def test_predict_schema_mismatch(train_csv, tmp_path, write_csv):
    model = tmp_path / "model.json"
    _train(train_csv, model)
    other = write_csv(tmp_path / "other.csv", np.ones((3, 2)), np.ones(3), names=["a", "b", "y"])
    assert main(["predict", "--model", str(model), "--input", str(other)]) == 5


def test_predict_missing_model_is_usage_error(train_csv, tmp_path):
    assert main(["predict", "--model", str(tmp_path / "none.json"), "--input", str(train_csv)]) == 2


def test_stats_then_train_from_stats(train_csv, tmp_path, capsys):
    stats = tmp_path / "stats.json"
    assert main(["stats", "--input", str(train_csv), "--response", "y", "--seed", "3", "--output", str(stats)]) == 0
    assert "折统计量" in capsys.readouterr().out

    direct = tmp_path / "direct.json"
    resumed = tmp_path / "resumed.json"
    assert _train(train_csv, direct, "--seed", "3") == 0
    assert main(["train", "--from-stats", str(stats), "--n-lambdas", "20", "--output", str(resumed)]) == 0
    assert resumed.read_bytes() == direct.read_bytes()

    assert main(["train", "--from-stats", str(stats), "--k", "10", "--output", str(resumed)]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["train", "--penalty", "group"],
        ["train", "--input", "a.csv"],
        ["train", "--input", "a.csv", "--response", "y", "--lambdas", "1,2", "--n-lambdas", "5"],
        ["train", "--input", "a.csv", "--response", "y", "--penalty", "ridge", "--mix", "0.3"],
        ["train", "--input", "a.csv", "--response", "y", "--k", "1"],
        ["predict", "--model", "m.json"],
        ["unknown"],
    ],
)
def test_bad_arguments_exit_with_usage_code(argv):
    assert main(argv) == 2


def test_missing_input_is_ingest_failure(tmp_path):
    assert main(["train", "--input", str(tmp_path / "missing.csv"), "--response", "y"]) == 3
    assert main(["stats", "--input", str(tmp_path / "missing.csv"), "--response", "y"]) == 3


def test_env_file_configures_logging(train_csv, env_file, tmp_path):
    log_file = tmp_path / "logs" / "run.log"
    env_file.write_text(f"PENREG_LOG_LEVEL=WARNING\nPENREG_LOG_FILE={log_file}\n", encoding="utf-8")
    assert _train(train_csv, tmp_path / "model.json") == 0

    root = logging.getLogger()
    assert root.level == logging.WARNING
    files = [Path(handler.baseFilename) for handler in root.handlers if isinstance(handler, logging.FileHandler)]
    assert files == [log_file]
    assert log_file.exists()

    argv = ["--verbose", "train", "--input", str(train_csv), "--response", "y", "--n-lambdas", "20"]
    assert main([*argv, "--output", str(tmp_path / "again.json")]) == 0
    assert logging.getLogger().level == logging.DEBUG
