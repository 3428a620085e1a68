"""Normalized score tables: 0 is a uniform-random agent, 1 is the best algorithm per env."""
import csv
import glob
import os

import numpy as np

from ..envs import make_env
from .train import read_csv


def random_baseline(env_name, env_params=None, episodes=1000, seed=0):
    """Mean return of a uniform-random policy over ``episodes`` episodes."""
    rng = np.random.default_rng(seed)
    env = make_env(env_name, rng, **(env_params or {}))
    total = 0.0
    for _ in range(episodes):
        env.reset()
        while True:
            res = env.step(int(rng.integers(env.n_actions)))
            total += res.reward
            if res.done or res.truncated:
                break
    return total / episodes


def parse_env_tag(tag):
    """Inverse of ``ExperimentConfig.env_tag`` for the built-in environments."""
    name, *rest = tag.split("-")
    params = {}
    for part in rest:
        key = part.rstrip("0123456789")
        params[key] = int(part[len(key):])
    return name, params


def normalize(x, random, best):
    """(x - random) / (best - random); ``None`` when the range is degenerate."""
    span = best - random
    if not np.isfinite(span) or abs(span) < 1e-12:
        return None
    return (x - random) / span


def collect_results(directory):
    """Mean evaluation return per (env, algo) from every ``summary_*.csv`` under ``directory``."""
    table = {}
    for path in sorted(glob.glob(os.path.join(directory, "**", "summary_*.csv"), recursive=True)):
        for row in read_csv(path):
            table.setdefault((row["env"], row["algo"]), []).append(float(row["eval_mean"]))
    return {k: float(np.mean(v)) for k, v in table.items()}


def score_table(results, baselines):
    """Rows of (env, algo, raw, random, best, score); degenerate envs yield score None."""
    rows = []
    for env in sorted({e for e, _ in results}):
        algos = sorted(a for e, a in results if e == env)
        best = max(results[(env, a)] for a in algos)
        rnd = baselines[env]
        for a in algos:
            raw = results[(env, a)]
            rows.append((env, a, raw, rnd, best, normalize(raw, rnd, best)))
    return rows


def format_table(rows):
    header = ("env", "algo", "return", "random", "best", "score")
    body = [(e, a, f"{raw:.3f}", f"{rnd:.3f}", f"{best:.3f}", "skipped" if s is None else f"{s:.3f}")
            for e, a, raw, rnd, best, s in rows]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header, *body]]
    return "\n".join(lines)


def write_scores(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("env", "algo", "return", "random", "best", "score"))
        for e, a, raw, rnd, best, s in rows:
            if s is not None:
                w.writerow((e, a, repr(raw), repr(rnd), repr(best), repr(s)))


def scores(directory, episodes=1000, log=print):
    results = collect_results(directory)
    if not results:
        log(f"no summary_*.csv files under {directory}")
        return []
    baselines = {}
    for env in sorted({e for e, _ in results}):
        name, params = parse_env_tag(env)
        baselines[env] = random_baseline(name, params, episodes)
    rows = score_table(results, baselines)
    for e, a, *_, s in rows:
        if s is None:
            log(f"warning: {e}/{a}: best equals random baseline, row skipped")
    log(format_table(rows))
    write_scores(os.path.join(directory, "scores.csv"), rows)
    return rows
