"""Training orchestration: one metrics CSV and one checkpoint per seed, then a summary."""
import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..agents import METRIC_FIELDS, make_agent
from ..envs import make_env
from ..exceptions import NumericalDegeneracyError

SUMMARY_FIELDS = ("env", "algo", "seed", "steps", "eval_mean", "eval_min", "eval_max")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def env_rngs(seed):
    """Independent generators for the training and evaluation environments of a seed."""
    train, evaluation = np.random.SeedSequence([int(seed), 0x5EED]).spawn(2)
    return np.random.default_rng(train), np.random.default_rng(evaluation)


def run_paths(cfg, seed):
    stem = os.path.join(cfg.out, f"{cfg.algo}_seed{seed}")
    return stem + ".csv", stem + ".ckpt"


def run_seed(cfg, seed):
    """Train one seed; rows are flushed as they arrive so partial metrics survive a crash.

    Returns a summary row dict. A non-finite loss aborts the run and re-raises after the
    partial CSV has been written.
    """
    os.makedirs(cfg.out, exist_ok=True)
    csv_path, ckpt_path = run_paths(cfg, seed)
    train_rng, eval_rng = env_rngs(seed)
    env = make_env(cfg.env, train_rng, **cfg.env_params)
    agent = make_agent(cfg.algo, random_state=seed, **cfg.agent_kwargs())
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_FIELDS)

        def emit(row):
            writer.writerow([_cell(row[k]) for k in METRIC_FIELDS])
            fh.flush()

        try:
            agent.fit(env, callback=emit, record_wall_clock=cfg.wall_clock)
        except NumericalDegeneracyError as err:
            raise NumericalDegeneracyError(f"seed {seed}: {err} (partial metrics in {csv_path})") from err
    agent.save(ckpt_path)
    ev = agent.evaluate(make_env(cfg.env, eval_rng, **cfg.env_params), cfg.eval_episodes,
                        deterministic=not cfg.eval_stochastic, rng=np.random.default_rng(seed))
    return dict(env=cfg.env_tag, algo=cfg.algo, seed=seed, steps=agent.n_steps_seen_,
                eval_mean=ev["mean"], eval_min=ev["min"], eval_max=ev["max"])


def _run_seed_args(args):
    return run_seed(*args)


def train(cfg, log=print):
    """Run every seed in ``cfg`` (in worker processes when ``cfg.workers > 1``) and write
    ``summary_<algo>.csv`` plus a copy of the resolved config to ``cfg.out``."""
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, f"config_{cfg.algo}.txt"), "w") as fh:
        fh.write(cfg.to_text())
    jobs = [(cfg, s) for s in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
            rows = list(pool.map(_run_seed_args, jobs))
    else:
        rows = [run_seed(*job) for job in jobs]
    for r in rows:
        log(f"{r['env']} {r['algo']} seed {r['seed']}: eval mean {r['eval_mean']:.4f} "
            f"(min {r['eval_min']:.4f}, max {r['eval_max']:.4f})")
    write_summary(os.path.join(cfg.out, f"summary_{cfg.algo}.csv"), rows)
    return rows


def write_summary(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_FIELDS)
        for r in rows:
            writer.writerow([_cell(r[k]) for k in SUMMARY_FIELDS])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
