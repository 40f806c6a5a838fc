import json
import random

import pytest

from streamprune.config import (
    ExperimentConfig,
    apply_overrides,
    load_experiment,
    parse_experiment,
    save_experiment,
)
from streamprune.errors import ConfigError
from streamprune.models import PruneScheme

BASE = {
    "stream": {"origin": "moving-squares", "seed": 7, "total_instances": 5_000},
    "learner": {"kind": "naive-bayes"},
    "ensemble": {"kind": "awe", "max_size": 6, "chunk_size": 500},
    "prune": {"size": 4, "scheme": "ccrp"},
}


def with_changes(**sections):
    data = json.loads(json.dumps(BASE))
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key].update(value)
        else:
            data[key] = value
    return data


def test_defaults():
    config = parse_experiment({"stream": {"origin": "moving-rbf", "total_instances": 100}})
    assert config.learner.kind == "hoeffding-tree"
    assert config.learner.grace_period == 200
    assert config.learner.delta == 1e-7
    assert config.learner.tie_threshold == 0.05
    assert config.learner.leaf_prediction == "nb"
    assert config.ensemble.max_size == 20
    assert config.ensemble.chunk_size == 1_000
    assert config.eval.window == 1_000
    assert config.prune is None
    assert config.label == "awe-none"


def test_goowe_default_size():
    config = parse_experiment(with_changes(ensemble={"kind": "goowe", "max_size": None}, prune="none"))
    assert config.ensemble.max_size == 30


def test_prune_none_string():
    for value in ("none", "None", " NONE "):
        assert parse_experiment(with_changes(prune=value)).prune is None


def test_label_from_scheme():
    config = parse_experiment(with_changes(prune={"scheme": "regular-borda"}))
    assert config.prune.scheme is PruneScheme.regular_borda
    assert config.label == "awe-regular-borda"
    assert parse_experiment(with_changes(eval={"label": "mine"})).label == "mine"


@pytest.mark.parametrize("size", [6, 7, 100])
def test_prune_size_must_be_below_max_size(size):
    with pytest.raises(ConfigError, match="phi"):
        parse_experiment(with_changes(prune={"size": size}))


@pytest.mark.parametrize(
    "changes",
    [
        {"stream": {"origin": "sea"}},
        {"stream": {"seed": -1}},
        {"stream": {"seed": 2**64}},
        {"stream": {"total_instances": -5}},
        {"stream": {"params": {"drift_speed": 0.1}}},
        {"stream": {"params": {"speed": -1.0}}},
        {"stream": {"origin": "transient-chessboard", "params": {"segment_length": 2.5}}},
        {"stream": {"origin": "moving-rbf", "params": {"sigma": 0}}},
        {"stream": {"origin": "csv-file"}},
        {"learner": {"kind": "svm"}},
        {"learner": {"grace_period": 0}},
        {"learner": {"delta": 0}},
        {"learner": {"leaf_prediction": "vote"}},
        {"ensemble": {"kind": "bagging"}},
        {"ensemble": {"chunk_size": 0}},
        {"ensemble": {"max_size": 0}},
        {"prune": {"size": 0}},
        {"prune": {"scheme": "random"}},
        {"prune": {"window": 0}},
        {"prune": {"record_mode": "fuzzy"}},
        {"eval": {"window": 0}},
        {"schemes": ["ccrp", "best"]},
        {"colour": "blue"},
        {"prune": {"phi": 3}},
    ],
)
def test_invalid_configs_are_rejected(changes):
    with pytest.raises(ConfigError, match="Invalid experiment config"):
        parse_experiment(with_changes(**changes))


def test_missing_total_instances_for_generator():
    with pytest.raises(ConfigError, match="total_instances"):
        parse_experiment({"stream": {"origin": "moving-squares"}})


def test_schemes_need_a_prune_table():
    with pytest.raises(ConfigError, match="schemes"):
        parse_experiment(with_changes(prune="none", schemes=["ccrp", "weight-based"]))


def test_csv_stream_config(tmp_path):
    config = parse_experiment({"stream": {"origin": "csv-file", "path": str(tmp_path / "data.csv")}})
    assert config.stream.path == tmp_path / "data.csv"
    with pytest.raises(ConfigError):
        parse_experiment({"stream": {"origin": "csv-file", "path": "x.csv", "params": {"speed": 1.0}}})


def test_learner_hyperparameters():
    tree = parse_experiment(with_changes(learner={"kind": "hoeffding-tree", "grace_period": 50}))
    assert tree.learner.hyperparameters() == {
        "grace_period": 50,
        "delta": 1e-7,
        "tie_threshold": 0.05,
        "leaf_prediction": "nb",
    }
    assert parse_experiment(BASE).learner.hyperparameters() == {}


def test_prune_spec_to_config():
    config = parse_experiment(with_changes(prune={"paired": False, "window": 300}))
    prune = config.prune.to_config()
    assert prune.size == 4 and prune.window == 300
    assert not hasattr(prune, "paired")


def test_load_json_and_toml(tmp_path):
    json_path = tmp_path / "exp.json"
    json_path.write_text(json.dumps(BASE))
    toml_path = tmp_path / "exp.toml"
    toml_path.write_text(
        '[stream]\norigin = "moving-squares"\nseed = 7\ntotal_instances = 5000\n'
        '[learner]\nkind = "naive-bayes"\n'
        '[ensemble]\nkind = "awe"\nmax_size = 6\nchunk_size = 500\n'
        '[prune]\nsize = 4\nscheme = "ccrp"\n'
    )
    assert load_experiment(json_path) == load_experiment(toml_path)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_experiment(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="Cannot parse"):
        load_experiment(bad)
    yaml = tmp_path / "exp.yaml"
    yaml.write_text("stream: {}")
    with pytest.raises(ConfigError, match="Unsupported"):
        load_experiment(yaml)


def test_save_then_load(tmp_path):
    config = parse_experiment(with_changes(schemes=["ccrp", "weight-based"]))
    path = tmp_path / "nested" / "saved.json"
    save_experiment(config, path)
    assert load_experiment(path) == config


def test_apply_overrides(tmp_path):
    config = apply_overrides(parse_experiment(BASE), seed=99, out_dir=tmp_path)
    assert config.stream.seed == 99
    assert config.eval.out_dir == tmp_path
    assert apply_overrides(config) == config


def test_config_error_exit_code():
    with pytest.raises(ConfigError) as excinfo:
        parse_experiment({})
    assert excinfo.value.exit_code == 1
    assert isinstance(parse_experiment(BASE), ExperimentConfig)


INVALID_FIELDS = [
    ("stream", "origin", "hyperplane"),
    ("stream", "seed", -3),
    ("stream", "seed", 2**64 + 1),
    ("stream", "total_instances", -1),
    ("stream", "params", {"speed": -0.5}),
    ("stream", "params", {"sigma": 1.0}),
    ("stream", "surprise", 1),
    ("learner", "kind", "knn"),
    ("learner", "grace_period", -10),
    ("learner", "delta", 2.0),
    ("learner", "tie_threshold", -0.1),
    ("ensemble", "kind", "oza"),
    ("ensemble", "max_size", 0),
    ("ensemble", "chunk_size", -100),
    ("prune", "size", 0),
    ("prune", "size", 6),
    ("prune", "window", -1),
    ("prune", "scheme", "greedy"),
    ("prune", "record_mode", "hard"),
    ("eval", "window", 0),
    ("eval", "extra", True),
]


def test_random_invalid_configs_are_all_rejected():
    rng = random.Random(1234)
    for _ in range(1_000):
        data = json.loads(json.dumps(BASE))
        data["eval"] = {}
        for section, key, value in rng.sample(INVALID_FIELDS, rng.randint(1, 3)):
            data[section][key] = value
        with pytest.raises(ConfigError):
            parse_experiment(data)
