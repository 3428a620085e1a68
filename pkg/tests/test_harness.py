import csv
import os

import numpy as np
import pytest

from optionrl.exceptions import ConfigurationError, UsageError
from optionrl.harness import cli
from optionrl.harness.config import build_config, load_config, parse_lines, parse_value
from optionrl.harness.oracle_check import run_suite
from optionrl.harness.scores import (format_table, normalize, parse_env_tag, random_baseline,
                                     score_table)
from optionrl.harness.train import run_paths, train

TINY = {"n_steps": 64, "batch_size": 32, "n_epochs": 1, "hidden_sizes": (8,), "steps": 128,
        "eval_episodes": 5}


@pytest.mark.parametrize("text, value", [
    ("3e-4", 3e-4), ("10", 10), ("true", True), ("Off", False), ("64, 64", (64, 64)),
    ("0-4", (0, 1, 2, 3, 4)), ("soap", "soap"), ("-1", -1), ("1e-3", 1e-3),
])
def test_parse_value(text, value):
    assert parse_value(text) == value


def test_parse_lines_comments_and_errors():
    entries = parse_lines(["# header", "", "algo = ppo  # trailing", "env.length=10"])
    assert entries == {"algo": "ppo", "env.length": 10}
    with pytest.raises(ConfigurationError):
        parse_lines(["no equals sign"])


def test_config_file_with_overrides(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("env = corridor\nenv.length = 10\nalgo = soap\nseeds = 0-2\n"
                    "steps = 40000\nn_steps = 256\nhidden_sizes = 32, 32\n")
    cfg = load_config(path, {"algo": "ppoem", "seeds": (7,)})
    assert cfg.algo == "ppoem" and cfg.seeds == (7,)
    assert cfg.env_params == {"length": 10} and cfg.env_tag == "corridor-length10"
    assert cfg.agent_params["hidden_sizes"] == (32, 32)
    assert load_config(None, parse_lines(cfg.to_text().splitlines())) == cfg


@pytest.mark.parametrize("entries", [
    {"algo": "dqn"}, {"env": "atari"}, {"bogus": 1}, {"steps": 100, "n_steps": 256},
    {"seeds": ()}, {"learning_rat": 0.1},
])
def test_invalid_configs(entries):
    with pytest.raises(ConfigurationError):
        build_config(entries)


def _cfg(tmp_path, **kw):
    return build_config(dict(TINY, out=str(tmp_path), **kw))


def test_train_writes_csv_checkpoint_and_summary(tmp_path):
    rows = train(_cfg(tmp_path, algo="soap", seeds=(0, 1)), log=lambda *_: None)
    assert [r["seed"] for r in rows] == [0, 1]
    for seed in (0, 1):
        csv_path, ckpt = run_paths(_cfg(tmp_path, algo="soap"), seed)
        assert os.path.exists(ckpt)
        with open(csv_path) as fh:
            lines = fh.read().splitlines()
        assert lines[0] == "step,return_mean,return_min,return_max,loss_policy,loss_value,entropy,clip_frac,wall_s"
        assert len(lines) == 3
        assert all(line.endswith(",") for line in lines[1:])  # wall_s left empty
    with open(tmp_path / "summary_soap.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2


def test_identical_config_and_seed_give_identical_csv(tmp_path):
    outs = []
    for sub in ("a", "b"):
        cfg = _cfg(tmp_path / sub, algo="ppoem", seeds=(3,))
        train(cfg, log=lambda *_: None)
        outs.append((tmp_path / sub / "ppoem_seed3.csv").read_bytes())
    assert outs[0] == outs[1]


def test_seed_isolation(tmp_path):
    train(_cfg(tmp_path / "solo", algo="soap", seeds=(2,)), log=lambda *_: None)
    train(_cfg(tmp_path / "pair", algo="soap", seeds=(1, 2)), log=lambda *_: None)
    assert (tmp_path / "solo" / "soap_seed2.csv").read_bytes() == \
        (tmp_path / "pair" / "soap_seed2.csv").read_bytes()


def test_wall_clock_flag_fills_column(tmp_path):
    train(_cfg(tmp_path, algo="ppo", wall_clock=True), log=lambda *_: None)
    with open(tmp_path / "ppo_seed0.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert all(float(r["wall_s"]) >= 0 for r in rows)


def test_process_pool_matches_sequential(tmp_path):
    train(_cfg(tmp_path / "seq", algo="ppoc", seeds=(0, 1)), log=lambda *_: None)
    train(_cfg(tmp_path / "par", algo="ppoc", seeds=(0, 1), workers=2), log=lambda *_: None)
    for s in (0, 1):
        assert (tmp_path / "seq" / f"ppoc_seed{s}.csv").read_bytes() == \
            (tmp_path / "par" / f"ppoc_seed{s}.csv").read_bytes()


def test_normalize_examples():
    assert normalize(5.0, 1.0, 5.0) == 1.0
    assert normalize(1.0, 1.0, 5.0) == 0.0
    assert normalize(0.0, 1.0, 5.0) == -0.25
    assert normalize(3.0, 2.0, 2.0) is None


def test_score_table_skips_degenerate_env():
    results = {("corridor-length3", "soap"): 1.0, ("corridor-length3", "ppo"): 0.0,
               ("cartpole", "ppo"): 20.0}
    rows = score_table(results, {"corridor-length3": 0.0, "cartpole": 20.0})
    by = {(e, a): s for e, a, *_, s in rows}
    assert by[("corridor-length3", "soap")] == 1.0 and by[("corridor-length3", "ppo")] == 0.0
    assert by[("cartpole", "ppo")] is None
    assert "skipped" in format_table(rows)


def test_env_tag_roundtrip():
    assert parse_env_tag("corridor-length20") == ("corridor", {"length": 20})
    assert parse_env_tag("cartpole") == ("cartpole", {})


def test_random_baselines():
    assert abs(random_baseline("corridor", {"length": 3}, 1000)) <= 0.1
    # a random cart-pole policy survives roughly 20 steps
    assert 15 <= random_baseline("cartpole", None, 300) <= 30


def test_oracle_suites_pass_and_unknown_suite_errors():
    lines = []
    assert run_suite("mlp-grad", log=lines.append)
    assert lines[-1].endswith("all checks passed")
    with pytest.raises(UsageError):
        run_suite("nope")


def test_cli_end_to_end(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("env = corridor\nenv.length = 3\nn_steps = 64\nbatch_size = 32\n"
                   "n_epochs = 1\nhidden_sizes = 8\nsteps = 128\neval_episodes = 5\n")
    out = str(tmp_path / "runs")
    for algo in ("soap", "ppo"):
        assert cli.main(["train", "--config", str(cfg), "--algo", algo, "--seed", "0",
                         "--seed", "1", "--out", out]) == 0
    assert cli.main(["eval", "--checkpoint", os.path.join(out, "soap_seed0.ckpt"),
                     "--env", "corridor", "--episodes", "10"]) == 0
    assert "mean" in capsys.readouterr().out
    assert cli.main(["scores", "--in", out, "--random-episodes", "200"]) == 0
    assert os.path.exists(os.path.join(out, "scores.csv"))
    svg = tmp_path / "curves.svg"
    assert cli.main(["plot", "--in", out, "--out", str(svg)]) == 0
    assert svg.read_text().lstrip().startswith("<?xml")
    assert cli.main(["eval", "--checkpoint", os.path.join(out, "soap_seed0.ckpt"),
                     "--env", "cartpole", "--episodes", "1"]) == 2
    assert cli.main(["train", "--config", str(cfg), "--steps", "10", "--out", out]) == 2
    assert cli.main(["oracle-check", "unknown"]) == 2
