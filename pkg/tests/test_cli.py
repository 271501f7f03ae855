import json

import pytest
from hypothesis import given, strategies as st

from clusterp3s.cli import (
    EXIT_FAILURE,
    EXIT_OK,
    EXIT_USAGE,
    RunConfig,
    SpecMismatch,
    cmd_eval,
    enumerate_lines,
    main,
    resolve_config,
)
from clusterp3s.datasets import planted_oracle
from clusterp3s.tabular import write_csv

FAST = ["--outer-iters", "3", "--inner-iters", "3", "--ae-epochs", "10", "--pretrain-epochs", "10", "--folds", "5"]


@pytest.fixture
def data(tmp_path):
    path = tmp_path / "d.csv"
    write_csv(planted_oracle(n_rows=80, seed=2), path)
    return path


def search(data, out, *extra):
    return main(["search", "--data", str(data), "--target", "y", "--out-dir", str(out), *FAST, *extra])


def test_enumerate(capsys):
    assert main(["enumerate"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 48
    assert lines == enumerate_lines()
    assert any('"imputer": "None", "encoder": "None", "scaler": "None"' in l for l in lines)
    assert lines[0].split()[0] == "0" and lines[-1].split()[0] == "47"


def test_heuristic_search_writes_one_trial(data, tmp_path):
    out = tmp_path / "h"
    assert search(data, out, "--method", "heuristic") == EXIT_OK
    doc = json.loads((out / "result.json").read_text())
    assert doc["n_trials"] == 1
    assert len((out / "trials.jsonl").read_text().splitlines()) == 1
    assert doc["run_config"]["method"] == "heuristic"
    assert doc["suite"]["mean_accuracy"] > 0


def test_missing_target_is_usage_error(data, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["search", "--data", str(data)])
    assert exc.value.code == EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_bad_target_is_runtime_failure(data, capsys):
    assert main(["search", "--data", str(data), "--target", "nope", "--method", "heuristic"]) == EXIT_FAILURE
    assert "nope" in capsys.readouterr().err


def test_reruns_byte_identical(data, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert search(data, a, "--method", "clusterp3s", "--k", "5", "--seed", "7") == EXIT_OK
    assert search(data, b, "--method", "clusterp3s", "--k", "5", "--seed", "7") == EXIT_OK
    assert (a / "result.json").read_bytes() == (b / "result.json").read_bytes()


def test_eval_replays_best_score(data, tmp_path, capsys):
    out = tmp_path / "r"
    assert search(data, out, "--method", "randcluster", "--seed", "3") == EXIT_OK
    doc = json.loads((out / "result.json").read_text())
    assert main(["eval", "--spec", str(out / "result.json"), "--data", str(data), "--target", "y",
                 "--folds", "5", "--seed", "3"]) == EXIT_OK
    ev = json.loads((out / "eval.json").read_text())
    tree = next(r for r in ev["learners"] if r["learner"]["kind"] == "DecisionTree")
    assert tree["mean_accuracy"] == doc["best"]["score"]
    assert all(len(r["per_fold"]) == 5 for r in ev["learners"])
    assert len(ev["learners"]) == 3


def test_eval_spec_mismatch(data, tmp_path):
    spec = tmp_path / "spec.json"
    triple = {"imputer": "None", "encoder": "Ordinal", "scaler": "None"}
    spec.write_text(json.dumps({"a": triple, "b": triple, "c": triple, "zzz": triple}))
    with pytest.raises(SpecMismatch, match="zzz"):
        cmd_eval(str(spec), str(data), "y", 5, 0)
    assert main(["eval", "--spec", str(spec), "--data", str(data), "--target", "y"]) == EXIT_FAILURE


def test_report(data, tmp_path, capsys):
    out = tmp_path / "h"
    search(data, out, "--method", "heuristic")
    capsys.readouterr()
    assert main(["report", str(out)]) == EXIT_OK
    assert "iterations: 1" in capsys.readouterr().out


def test_report_curve_monotone(data, tmp_path, capsys):
    out = tmp_path / "c"
    search(data, out, "--method", "clusterp3s")
    capsys.readouterr()
    main(["report", str(out)])
    text = capsys.readouterr().out
    rows = text.split("outer_iter")[1].split("pipelines:")[0].split("\n")[1:]
    scores = [float(r.split()[1]) for r in rows if r.strip() and r.split()[1] != "-"]
    assert scores and scores == sorted(scores)


def test_report_corrupted_trials(data, tmp_path, capsys):
    out = tmp_path / "c"
    search(data, out, "--method", "randcluster")
    lines = (out / "trials.jsonl").read_text().splitlines()
    lines[4] = "{not json"
    (out / "trials.jsonl").write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["report", str(out)]) == EXIT_FAILURE
    assert "line 5" in capsys.readouterr().err


def test_config_file_and_env(data, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"data_path": str(data), "target_name": "y", "method": "heuristic", "folds": 4}))
    monkeypatch.setenv("P3S_SEED", "11")
    out = tmp_path / "o"
    assert main(["search", "--config", str(cfg), "--out-dir", str(out)]) == EXIT_OK
    doc = json.loads((out / "result.json").read_text())
    assert doc["run_config"]["seed"] == 11
    assert doc["run_config"]["folds"] == 4
    assert main(["search", "--config", str(cfg), "--out-dir", str(out), "--seed", "2"]) == EXIT_OK
    assert json.loads((out / "result.json").read_text())["run_config"]["seed"] == 2


def test_dump_embedding(data, tmp_path):
    emb = tmp_path / "emb.csv"
    assert search(data, tmp_path / "e", "--dump-embedding", str(emb)) == EXIT_OK
    lines = emb.read_text().splitlines()
    assert len(lines) == 4
    assert len(lines[1].split(",")) == 129


def test_unknown_config_key_is_usage_error(data, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(SystemExit) as exc:
        main(["search", "--config", str(cfg), "--data", str(data), "--target", "y"])
    assert exc.value.code == EXIT_USAGE


# precedence: flags > config file > P3S_SEED > defaults

FIELDS = {
    "K": st.integers(1, 20),
    "outer_iters": st.integers(0, 100),
    "inner_iters": st.integers(1, 30),
    "seed": st.integers(0, 10_000),
    "folds": st.integers(2, 20),
    "onehot_cap": st.integers(1, 200),
    "method": st.sampled_from(["clusterp3s", "heuristic", "randcluster", "kmeans-variant"]),
    "reward_learner": st.sampled_from(["LogisticSGD", "DecisionTree", "RandomForestLite"]),
}


@st.composite
def layers(draw):
    keys = st.sampled_from(sorted(FIELDS))
    flags = {k: draw(FIELDS[k]) for k in draw(st.sets(keys))}
    file_values = {k: draw(FIELDS[k]) for k in draw(st.sets(keys))}
    env = draw(st.one_of(st.none(), st.integers(0, 10_000)))
    return flags, file_values, env


@given(layers())
def test_precedence(layer):
    flags, file_values, env = layer
    env_map = {} if env is None else {"P3S_SEED": str(env)}
    cfg = resolve_config(flags, file_values, env_map)
    defaults = RunConfig()
    for name in FIELDS:
        if name in flags:
            expected = flags[name]
        elif name in file_values:
            expected = file_values[name]
        elif name == "seed" and env is not None:
            expected = env
        else:
            expected = getattr(defaults, name)
        assert getattr(cfg, name) == expected


def test_defaults():
    cfg = RunConfig()
    assert (cfg.K, cfg.outer_iters, cfg.inner_iters, cfg.folds, cfg.seed) == (5, 50, 10, 10, 0)
    assert resolve_config({}, {"eval_learners": "LogisticSGD, DecisionTree"}, {}).eval_learners == (
        "LogisticSGD",
        "DecisionTree",
    )
