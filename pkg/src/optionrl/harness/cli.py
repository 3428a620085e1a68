"""``optionrl`` command line: train, eval, scores, oracle-check, plot."""
import argparse
import sys

import numpy as np

from ..agents import load_agent
from ..envs import make_env
from ..exceptions import ConfigurationError, NumericalDegeneracyError, UsageError
from .config import load_config, parse_value


def _kv(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def build_parser():
    p = argparse.ArgumentParser(prog="optionrl", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one algorithm over one or more seeds")
    t.add_argument("--config", help="key = value config file")
    t.add_argument("--seed", type=int, action="append", help="seed (repeatable); overrides seeds")
    t.add_argument("--algo")
    t.add_argument("--env")
    t.add_argument("--steps", type=int)
    t.add_argument("--out")
    t.add_argument("--workers", type=int, help="worker processes (1 = sequential)")
    t.add_argument("--wall-clock", action="store_true", help="fill the wall_s column")
    t.add_argument("--set", type=_kv, action="append", default=[], metavar="KEY=VALUE",
                   help="override any config entry, e.g. --set env.length=10")

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--env", required=True)
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--env-param", type=_kv, action="append", default=[], metavar="KEY=VALUE")
    e.add_argument("--stochastic", action="store_true", help="sample actions instead of argmax")
    e.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("scores", help="normalized score table from training summaries")
    s.add_argument("--in", dest="directory", required=True)
    s.add_argument("--random-episodes", type=int, default=1000)

    o = sub.add_parser("oracle-check", help="run a brute-force oracle suite")
    o.add_argument("suite", help="fb-enum, goa-grad or mlp-grad")

    pl = sub.add_parser("plot", help="SVG learning curves")
    pl.add_argument("--in", dest="directory", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--title")
    return p


def _train(args):
    from .train import train

    overrides = {k: parse_value(v) for k, v in args.set}
    for key in ("algo", "env", "steps", "out", "workers"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    if args.seed:
        overrides["seeds"] = tuple(args.seed)
    if args.wall_clock:
        overrides["wall_clock"] = True
    train(load_config(args.config, overrides))
    return 0


def _eval(args):
    agent = load_agent(args.checkpoint)
    params = {k: parse_value(v) for k, v in args.env_param}
    env = make_env(args.env, np.random.default_rng(args.seed), **params)
    res = agent.evaluate(env, args.episodes, deterministic=not args.stochastic,
                         rng=np.random.default_rng(args.seed))
    print(f"episodes {args.episodes}  mean {res['mean']:.4f}  min {res['min']:.4f}  max {res['max']:.4f}")
    return 0


def _scores(args):
    from .scores import scores

    scores(args.directory, episodes=args.random_episodes)
    return 0


def _oracle(args):
    from .oracle_check import run_suite

    return 0 if run_suite(args.suite) else 1


def _plot(args):
    from .plot import plot

    print(plot(args.directory, args.out, args.title))
    return 0


COMMANDS = {"train": _train, "eval": _eval, "scores": _scores, "oracle-check": _oracle,
            "plot": _plot}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, UsageError, FileNotFoundError) as err:
        print(f"optionrl {args.command}: error: {err}", file=sys.stderr)
        return 2
    except NumericalDegeneracyError as err:
        print(f"optionrl {args.command}: numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
