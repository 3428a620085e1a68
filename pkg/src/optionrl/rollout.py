"""Environment interaction: records everything the option losses need.

Two collectors exist. `Collector` tracks the option distribution analytically and samples
actions from the option-marginal policy (PPO, PPOEM, SOAP). `OptionSamplingCollector`
samples one option per step with termination and an inter-option policy (PPOC).

Buffers can be dumped with `RolloutBuffer.save`, which writes an uncompressed ``.npz``
archive with one array per field name (see `RolloutBuffer` for the fields).
"""
from dataclasses import dataclass, field, fields

import numpy as np

from .inference import forward_joint, init_zeta


def _sample(probs, rng):
    c = np.cumsum(probs)
    return int(min(np.searchsorted(c, rng.random() * c[-1], side="right"), len(probs) - 1))


@dataclass
class RolloutBuffer:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray  # last step of an episode segment (terminal, truncated or cut)
    terminals: np.ndarray  # true termination: no value bootstrap
    starts: np.ndarray  # first step of an episode (zeta uniform)
    episode_ids: np.ndarray
    values: np.ndarray  # (T, n) old V(s_t, .)
    next_values: np.ndarray  # (T, n) old V(s_{t+1}, .), bootstrap at cuts
    zetas: np.ndarray = None  # (T, n)
    alphas: np.ndarray = None  # (T,)
    sub_policy: np.ndarray = None  # (T, n, A) old pi(a|s, z)
    transition: np.ndarray = None  # (T, n, n) old pi(z'|s, a_t, z)
    joints: np.ndarray = None  # (T, n, n) old p(a_t, z'|s, z)
    options: np.ndarray = None  # (T,) sampled option (PPOC)
    next_options: np.ndarray = None  # (T,) option in force at s_{t+1} (PPOC)
    fresh: np.ndarray = None  # (T,) option drawn from the inter-option policy at t (PPOC)
    action_probs: np.ndarray = None  # (T,) old pi(a_t | s_t, z_t) (PPOC)
    episode_returns: list = field(default_factory=list)

    def __len__(self):
        return len(self.actions)

    def save(self, path):
        arrays = {f.name: getattr(self, f.name) for f in fields(self)
                  if getattr(self, f.name) is not None}
        arrays["episode_returns"] = np.asarray(self.episode_returns, dtype=np.float64)
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            kwargs = {k: data[k] for k in data.files}
        kwargs["episode_returns"] = list(kwargs["episode_returns"])
        return cls(**kwargs)


class _Recorder:
    def __init__(self):
        self.cols = {}

    def add(self, **kw):
        for k, v in kw.items():
            self.cols.setdefault(k, []).append(v)

    def arrays(self):
        return {k: np.array(v) for k, v in self.cols.items()}


class Collector:
    """Runs an `OptionNets` agent, carrying the episode and zeta across calls."""

    def __init__(self, env, nets, rng, greedy=False):
        self.env = env
        self.nets = nets
        self.rng = rng
        self.greedy = greedy
        self.obs = None
        self.zeta = None
        self.episode = -1
        self.ep_return = 0.0

    def _reset(self):
        self.obs = self.env.reset()
        self.zeta = init_zeta(self.nets.n_options)
        self.episode += 1
        self.ep_return = 0.0

    def collect(self, horizon, complete_episodes=False):
        """Collect ``horizon`` steps; with ``complete_episodes`` keep going until the
        episode in progress at the horizon has ended."""
        nets = self.nets
        rec = _Recorder()
        returns = []
        t = 0
        while True:
            if t >= horizon and (not complete_episodes or self.obs is None):
                break
            start = self.obs is None
            if start:
                self._reset()
            obs, zeta = self.obs, self.zeta
            pi = nets.sub_policy_probs(obs)[0]
            marginal = zeta @ pi
            a = int(np.argmax(marginal)) if self.greedy else _sample(marginal, self.rng)
            tr = nets.option_policy_probs(obs, [a])[0]
            joint = pi[:, a, None] * tr
            alpha, zeta_next = forward_joint(zeta, joint, t)
            values = nets.values(obs)[0]
            res = self.env.step(a)
            self.ep_return += res.reward
            ended = res.done or res.truncated
            rec.add(obs=obs, actions=a, rewards=res.reward, dones=ended, terminals=res.done,
                    starts=start, episode_ids=self.episode, values=values, zetas=zeta,
                    alphas=alpha, sub_policy=pi, transition=tr, joints=joint)
            if ended:
                boot = np.zeros(nets.n_options) if res.done else nets.values(res.observation)[0]
                rec.add(boot=boot)
                returns.append(self.ep_return)
                self.obs = None
            else:
                rec.add(boot=None)
                self.obs, self.zeta = res.observation, zeta_next
            t += 1
        return self._finish(rec, returns)

    def _finish(self, rec, returns):
        boots = rec.cols.pop("boot")
        cols = rec.arrays()
        T = len(cols["actions"])
        dones = cols["dones"].astype(bool)
        if self.obs is not None:  # segment cut mid-episode
            dones[-1] = True
            boots[-1] = self.nets.values(self.obs)[0]
        next_values = np.empty_like(cols["values"])
        for t in range(T):
            next_values[t] = cols["values"][t + 1] if boots[t] is None else boots[t]
        cols["dones"] = dones
        cols["terminals"] = cols["terminals"].astype(bool)
        cols["starts"] = cols["starts"].astype(bool)
        return RolloutBuffer(next_values=next_values, episode_returns=returns, **cols)


def collect(env, nets, rng, horizon, complete_episodes=False):
    """One-shot collection starting from a fresh episode."""
    return Collector(env, nets, rng).collect(horizon, complete_episodes)


class OptionSamplingCollector:
    """Runs a `PPOCNets` agent: options are sampled, terminated and re-drawn per step."""

    def __init__(self, env, nets, rng, greedy=False):
        self.env = env
        self.nets = nets
        self.rng = rng
        self.greedy = greedy
        self.obs = None
        self.option = None
        self.fresh = False
        self.episode = -1
        self.ep_return = 0.0

    def _draw(self, probs):
        return int(np.argmax(probs)) if self.greedy else _sample(probs, self.rng)

    def collect(self, horizon):
        nets = self.nets
        n = nets.n_options
        rec = _Recorder()
        returns = []
        for t in range(horizon):
            start = self.obs is None
            if start:
                self.obs = self.env.reset()
                self.option = self._draw(nets.inter_option_probs(self.obs)[0])
                self.fresh = True
                self.episode += 1
                self.ep_return = 0.0
            obs, z = self.obs, self.option
            pi = nets.sub_policy_probs(obs)[0, z]
            a = self._draw(pi)
            values = nets.values(obs)[0]
            res = self.env.step(a)
            self.ep_return += res.reward
            ended = res.done or res.truncated
            rec.add(obs=obs, actions=a, rewards=res.reward, dones=ended, terminals=res.done,
                    starts=start, episode_ids=self.episode, values=values, options=z,
                    fresh=self.fresh, action_probs=pi[a])
            if ended:
                boot = np.zeros(n) if res.done else nets.values(res.observation)[0]
                rec.add(boot=boot)
                returns.append(self.ep_return)
                self.obs = None
                continue
            self.obs = res.observation
            beta = nets.termination_probs(self.obs)[0, z]
            if self.rng.random() < beta:
                self.option = self._draw(nets.inter_option_probs(self.obs)[0])
                self.fresh = True
            else:
                self.fresh = False
            rec.add(boot=None)
        return self._finish(rec, returns)

    def _finish(self, rec, returns):
        boots = rec.cols.pop("boot")
        cols = rec.arrays()
        T = len(cols["actions"])
        dones = cols["dones"].astype(bool)
        if self.obs is not None:
            dones[-1] = True
            boots[-1] = self.nets.values(self.obs)[0]
        next_values = np.empty_like(cols["values"])
        next_options = np.empty(T, dtype=int)
        for t in range(T):
            if boots[t] is None:
                next_values[t] = cols["values"][t + 1]
                next_options[t] = cols["options"][t + 1]
            else:
                next_values[t] = boots[t]
                next_options[t] = self.option if self.obs is not None and t == T - 1 else cols["options"][t]
        cols["dones"] = dones
        cols["terminals"] = cols["terminals"].astype(bool)
        cols["starts"] = cols["starts"].astype(bool)
        cols["fresh"] = cols["fresh"].astype(bool)
        return RolloutBuffer(next_values=next_values, next_options=next_options,
                             episode_returns=returns, **cols)


def collect_ppoc(env, nets, rng, horizon):
    return OptionSamplingCollector(env, nets, rng).collect(horizon)
