import csv
import json

import numpy as np
import pytest

from knowtrace.cli import main
from knowtrace.config import ConfigValidationError, load_config, parse_model_line
from knowtrace.data import load_dataset
from knowtrace.decoder import ConfigError
from knowtrace.experiment import import_parameter_tables
from knowtrace.training import load_checkpoint


def _write_spec(path, **kw):
    path.write_text("".join(f"{k} = {v}\n" for k, v in kw.items()))
    return path


@pytest.fixture
def generated(tmp_path):
    spec = _write_spec(tmp_path / "gen.txt", kind="pfa", num_students=30, num_items=8, num_skills=3,
                       min_length=5, max_length=10, multi_skill_prob=0.3, seed=1)
    data = tmp_path / "data.csv"
    assert main(["generate", "--spec", str(spec), "--out", str(data)]) == 0
    return data


def _config(tmp_path, data, models, extra=""):
    lines = [f"dataset = {data.name}", "folds = 3", "epochs = 2", "minibatch_count = 4", extra]
    lines += [f"model = {m}" for m in models]
    path = tmp_path / "exp.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


GRID = ["PFA | none | swf d'=1", "Ours | GRU d=2 | iswf d'=1", "DKT | GRU d=2 | s d'=1 | skills=combined"]


def test_model_line_options():
    spec = parse_model_line("DKT | GRU d=4 | s d'=4 | skills=combined | action=skill")
    assert (spec.name, spec.d, spec.combined_skills, spec.action) == ("DKT", 4, True, "skill")
    with pytest.raises(ConfigError):
        parse_model_line("x | none | iswf d'=1 | colour=red")
    with pytest.raises(ConfigError):
        parse_model_line("none | iswf d'=1")


def test_empty_grid_rejected(tmp_path, generated, capsys):
    path = _config(tmp_path, generated, [])
    with pytest.raises(ConfigValidationError, match="grid is empty"):
        load_config(path)
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "grid is empty" in capsys.readouterr().err


def test_config_collects_every_problem(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("dataset = missing.csv\nfolds = 1\nepochs = -3\nmodel = a | none | iswf d'=2\n")
    with pytest.raises(ConfigValidationError) as err:
        load_config(path)
    text = str(err.value)
    for fragment in ("does not exist", "folds", "epochs", "line 4"):
        assert fragment in text


def test_wide_format_needs_qmatrix(tmp_path, generated):
    path = _config(tmp_path, generated, GRID[:1], extra="format = wide")
    with pytest.raises(ConfigValidationError, match="qmatrix"):
        load_config(path)


def test_run_end_to_end(tmp_path, generated, capsys):
    cfg = _config(tmp_path, generated, GRID)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    table = capsys.readouterr().out.splitlines()
    assert table[0].split() == ["Model", "Encoder", "Decoder", "ACC", "AUC"]
    assert [line.split()[0] for line in table[1:]] == ["PFA", "Ours", "DKT"]
    with open(out / "results.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 3 * 4
    means = [r for r in rows if r["fold"] == "mean"]
    for m in means:
        folds = [float(r["auc"]) for r in rows if r["model"] == m["model"] and r["fold"] != "mean"]
        assert float(m["auc"]) == pytest.approx(np.mean(folds), abs=1e-6)
        assert 0 <= float(m["acc"]) <= 1
    assert len(list((out / "checkpoints").glob("*.npz"))) == 9
    assert json.loads((out / "report.json").read_text())["folds"] == 3


def test_rerun_is_byte_identical(tmp_path, generated):
    cfg = _config(tmp_path, generated, GRID[:2])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "b")])
    for name in ("results.csv", "results.txt", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_failed_entry_sets_exit_status(tmp_path, generated):
    # 's' dot decoder over raw multi-skill items is rejected inside every fold
    cfg = _config(tmp_path, generated, ["PFA | none | swf d'=1", "bad | GRU d=2 | s d'=2"])
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["models"][0]["auc"] is not None and report["models"][1]["errors"]


def test_generate_irt_zero_parameters(tmp_path):
    spec = _write_spec(tmp_path / "s.txt", kind="irt", num_students=400, num_items=10, num_skills=2,
                       min_length=25, max_length=25, ability_sd=0.0, easiness_sd=0.0, seed=5)
    out = tmp_path / "irt.csv"
    main(["generate", "--spec", str(spec), "--out", str(out)])
    ds = load_dataset(out)
    outcomes = np.concatenate([s.outcomes for s in ds.sequences])
    n = outcomes.size
    assert abs(outcomes.mean() - 0.5) < 3 * np.sqrt(0.25 / n)
    truth = json.loads(out.with_suffix(".truth.json").read_text())
    assert set(truth["easiness"].values()) == {0.0}


def test_generate_pfa_learning_only_is_monotone(tmp_path):
    from knowtrace.synthetic import SyntheticSpec, generate, true_probabilities
    ds, truth = generate(SyntheticSpec(kind="pfa", num_students=20, num_items=6, num_skills=3, min_length=15,
                                       max_length=15, gamma_low=0.1, gamma_high=0.3, delta_low=0.0,
                                       delta_high=0.0, seed=2))
    for seq, p in zip(ds.sequences, true_probabilities(ds, truth)):
        for k in range(3):
            steps = [t for t, j in enumerate(seq.items) if ds.qmatrix.rows[j] == (k,)]
            assert all(p[a] <= p[b] for a, b in zip(steps, steps[1:]))


def test_export_round_trip(tmp_path, generated):
    cfg = _config(tmp_path, generated, GRID[1:2])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    ckpt = sorted((tmp_path / "o" / "checkpoints").glob("*.npz"))[0]
    dest = tmp_path / "params"
    assert main(["export", "--checkpoint", str(ckpt), "--out", str(dest)]) == 0
    model, _, vocab = load_checkpoint(ckpt)
    tables = import_parameter_tables(dest)
    for name in ("w", "beta", "gamma", "delta", "A", "b"):
        assert np.array_equal(tables[name], model.params[name])
    with open(dest / "items.csv") as f:
        assert [r["item"] for r in csv.DictReader(f)] == vocab["items"]


def test_export_item_dot_table(tmp_path, generated):
    cfg = _config(tmp_path, generated, ["DKT-i | GRU d=2 | i d'=2"])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    ckpt = sorted((tmp_path / "o" / "checkpoints").glob("*.npz"))[0]
    main(["export", "--checkpoint", str(ckpt), "--out", str(tmp_path / "p")])
    with open(tmp_path / "p" / "items.csv") as f:
        header = next(csv.reader(f))
    assert header == ["item", "w", "v_1", "v_2"]
    assert not (tmp_path / "p" / "projection.csv").exists()


def test_unseen_item_exports_zero_bias(tmp_path):
    from knowtrace.model import ModelSpec
    from knowtrace.training import TrainConfig, fit, save_checkpoint
    from conftest import long_csv
    from knowtrace.data import parse_interactions
    ds = parse_interactions(long_csv([("a", "X", 1, "k"), ("a", "Y", 0, "k"), ("b", "Z", 1, "k")]))
    train = ds.subset([0])
    model, _ = fit(ModelSpec.parse("none", "iswf d'=1"), train, TrainConfig(epochs=5, minibatch_count=1))
    path = tmp_path / "m.npz"
    save_checkpoint(path, model, TrainConfig(), {"items": list(ds.items.names)})
    main(["export", "--checkpoint", str(path), "--out", str(tmp_path / "p")])
    with open(tmp_path / "p" / "items.csv") as f:
        rows = {r["item"]: float(r["w"]) for r in csv.DictReader(f)}
    assert rows["Z"] == 0.0 and rows["X"] != 0.0


def test_fresh_model_exports_zero_biases(tmp_path):
    from knowtrace.model import Model, ModelSpec
    from knowtrace.training import TrainConfig, save_checkpoint
    from knowtrace.synthetic import SyntheticSpec, generate
    ds, _ = generate(SyntheticSpec(num_students=3, num_items=4, num_skills=2, min_length=2, max_length=2))
    model = Model.build(ModelSpec.parse("GRU d=2", "iswf d'=1"), ds, 0)
    save_checkpoint(tmp_path / "m.npz", model, TrainConfig())
    main(["export", "--checkpoint", str(tmp_path / "m.npz"), "--out", str(tmp_path / "p")])
    tables = import_parameter_tables(tmp_path / "p")
    for name in ("w", "beta", "gamma", "delta", "b"):
        assert not tables[name].any()


def test_export_rejects_foreign_checkpoint(tmp_path, capsys):
    path = tmp_path / "x.npz"
    np.savez(path, __meta__=np.array(json.dumps({"format": "knowtrace-checkpoint/0"})))
    assert main(["export", "--checkpoint", str(path), "--out", str(tmp_path / "p")]) == 2
    assert "format" in capsys.readouterr().err


def test_metrics_subcommand(tmp_path, generated, capsys):
    cfg = _config(tmp_path, generated, GRID[:1])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    capsys.readouterr()
    pred = next((tmp_path / "o" / "predictions").glob("*.csv"))
    assert main(["metrics", "--predictions", str(pred)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4 and lines[-1].strip().startswith("pooled")
    with open(tmp_path / "o" / "results.csv") as f:
        fold0 = next(r for r in csv.DictReader(f) if r["fold"] == "0")
    assert f"AUC {fold0['auc']}" in lines[0]


def test_features_subcommand(tmp_path, generated):
    out = tmp_path / "x.csv"
    assert main(["features", "--data", str(generated), "--metadata", "swf", "--out", str(out)]) == 0
    with open(out) as f:
        rows = list(csv.DictReader(f))
    ds = load_dataset(generated)
    assert max(int(r["row"]) for r in rows) == ds.num_interactions - 1
    assert all(float(r["value"]) > 0 for r in rows)
