"""Experiment configuration files.

Grammar, one entry per line::

    # comment
    key = value

Blank lines and ``#`` comments are ignored. Keys prefixed with ``env.`` are passed to
the environment constructor (``env.length = 10``). Values are Python literals
(``3e-4``, ``true``, ``64, 64``, ``0-4`` for an inclusive seed range) or bare words.
Later lines and command-line overrides win over earlier ones.
"""
import ast
from dataclasses import dataclass, field, fields

from ..agents import AGENTS
from ..algorithms import ALGORITHMS
from ..envs import ENVS
from ..exceptions import ConfigurationError

AGENT_KEYS = ("n_options", "n_steps", "batch_size", "n_epochs", "learning_rate", "gamma",
              "gae_lambda", "clip_range", "ent_coef", "vf_coef", "max_grad_norm",
              "normalize_advantage", "hidden_sizes", "policy_init_gain",
              "option_stay_init")


@dataclass
class ExperimentConfig:
    env: str = "corridor"
    env_params: dict = field(default_factory=dict)
    algo: str = "soap"
    agent_params: dict = field(default_factory=dict)
    seeds: tuple = (0,)
    steps: int = 8192
    eval_episodes: int = 100
    eval_stochastic: bool = False
    wall_clock: bool = False
    workers: int = 1
    out: str = "runs"

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ConfigurationError(f"unknown algo {self.algo!r}; choose from {ALGORITHMS}")
        if self.env not in ENVS:
            raise ConfigurationError(f"unknown env {self.env!r}; choose from {sorted(ENVS)}")
        unknown = set(self.agent_params) - set(AGENT_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown hyperparameters {sorted(unknown)}")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        n_steps = self.agent_params.get("n_steps", AGENTS[self.algo]().n_steps)
        if self.steps < n_steps:
            raise ConfigurationError(f"steps={self.steps} is less than one rollout horizon ({n_steps})")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    @property
    def env_tag(self):
        """Short label such as ``corridor-length10`` used to group results."""
        extra = "".join(f"-{k}{v}" for k, v in sorted(self.env_params.items()))
        return self.env + extra

    def agent_kwargs(self):
        """Constructor arguments; option-only settings are dropped for plain PPO."""
        accepted = AGENTS[self.algo]._get_param_names()
        kw = {k: v for k, v in self.agent_params.items() if k in accepted}
        return dict(kw, total_steps=self.steps)

    def to_text(self):
        lines = [f"env = {self.env}", f"algo = {self.algo}"]
        lines += [f"env.{k} = {v!r}" for k, v in sorted(self.env_params.items())]
        lines += [f"{k} = {_format(v)}" for k, v in sorted(self.agent_params.items())]
        for f in fields(self):
            if f.name not in ("env", "algo", "env_params", "agent_params"):
                lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ", ".join(str(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def parse_value(text):
    text = text.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if "-" in text[1:] and all(p.strip().isdigit() for p in text.split("-")):
        lo, hi = (int(p) for p in text.split("-"))
        return tuple(range(lo, hi + 1))
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_lines(lines, source="<config>"):
    """Parse ``key = value`` lines into an ordered dict of raw values."""
    out = {}
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{no}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{source}:{no}: empty key")
        out[key] = parse_value(value)
    return out


_TOP_KEYS = {f.name for f in fields(ExperimentConfig)} - {"env_params", "agent_params"}


def build_config(entries):
    kw, env_params, agent_params = {}, {}, {}
    for key, value in entries.items():
        if key.startswith("env."):
            env_params[key[4:]] = value
        elif key in AGENT_KEYS:
            agent_params[key] = tuple(value) if key == "hidden_sizes" and isinstance(value, (list, tuple)) else value
        elif key in _TOP_KEYS:
            kw[key] = value
        else:
            raise ConfigurationError(f"unknown config key {key!r}")
    if "seeds" in kw and isinstance(kw["seeds"], int):
        kw["seeds"] = (kw["seeds"],)
    if "hidden_sizes" in agent_params and isinstance(agent_params["hidden_sizes"], int):
        agent_params["hidden_sizes"] = (agent_params["hidden_sizes"],)
    return ExperimentConfig(env_params=env_params, agent_params=agent_params, **kw)


def load_config(path=None, overrides=None):
    """Read a config file (optional) and apply ``overrides`` (a dict of raw entries)."""
    entries = {}
    if path is not None:
        with open(path) as fh:
            entries.update(parse_lines(fh, str(path)))
    entries.update(overrides or {})
    return build_config(entries)
