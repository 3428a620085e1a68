"""Estimator-style agents: hyperparameters in ``__init__``, ``fit(env)`` trains,
``predict`` acts greedily on an episode's observation sequence."""
import math
import time

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_observations, check_positive_int
from .algorithms import HyperParams, Optimizers, prepare_batch, update_epoch
from .exceptions import ConfigurationError
from .inference import forward_joint, init_zeta
from .nets import OptionNets, PPOCNets
from .nn import load_checkpoint, save_checkpoint
from .rollout import Collector, OptionSamplingCollector

METRIC_FIELDS = ("step", "return_mean", "return_min", "return_max", "loss_policy",
                 "loss_value", "entropy", "clip_frac", "wall_s")


class BaseAgent(BaseEstimator):
    algo = None

    def __init__(self, n_options=4, total_steps=100_000, n_steps=2048, batch_size=64,
                 n_epochs=10, learning_rate=3e-4, gamma=0.99, gae_lambda=0.95,
                 clip_range=0.2, ent_coef=0.01, vf_coef=0.5, max_grad_norm=0.5,
                 normalize_advantage=False, hidden_sizes=(64, 64), policy_init_gain=0.01,
                 option_stay_init=None, random_state=None):
        self.n_options = n_options
        self.total_steps = total_steps
        self.n_steps = n_steps
        self.batch_size = batch_size
        self.n_epochs = n_epochs
        self.learning_rate = learning_rate
        self.gamma = gamma
        self.gae_lambda = gae_lambda
        self.clip_range = clip_range
        self.ent_coef = ent_coef
        self.vf_coef = vf_coef
        self.max_grad_norm = max_grad_norm
        self.normalize_advantage = normalize_advantage
        self.hidden_sizes = hidden_sizes
        self.policy_init_gain = policy_init_gain
        self.option_stay_init = option_stay_init
        self.random_state = random_state

    def hyperparams(self):
        return HyperParams(
            clip_eps=self.clip_range, lr=self.learning_rate, n_epochs=self.n_epochs,
            batch_size=self.batch_size, n_steps=self.n_steps, gamma=self.gamma,
            gae_lambda=self.gae_lambda, n_options=self.n_options, ent_coef=self.ent_coef,
            vf_coef=self.vf_coef, max_grad_norm=self.max_grad_norm,
            normalize_advantage=self.normalize_advantage, hidden=tuple(self.hidden_sizes),
            policy_init_gain=self.policy_init_gain, option_stay_init=self.option_stay_init,
        )

    # subclass hooks
    def _build_nets(self, obs_dim, n_actions, hp, rng):
        return OptionNets(obs_dim, n_actions, hp.n_options, hp.hidden, rng,
                          policy_gain=hp.policy_init_gain, stay_prob=hp.option_stay_init)

    def _make_collector(self, env, rng):
        return Collector(env, self.nets_, rng)

    def _collect(self, collector, horizon):
        return collector.collect(horizon)

    def _rngs(self):
        ss = np.random.SeedSequence(self.random_state)
        return [np.random.default_rng(s) for s in ss.spawn(3)]

    def fit(self, env, callback=None, record_wall_clock=False):
        """Train on ``env`` for ``total_steps`` environment steps.

        ``callback(row)`` is called after every policy update with a metrics dict keyed
        by `METRIC_FIELDS`. Rows are also kept in ``history_``.
        """
        hp = self.hyperparams()
        total = check_positive_int(self.total_steps, "total_steps")
        if total < hp.n_steps:
            raise ConfigurationError(f"total_steps={total} is less than one rollout ({hp.n_steps})")
        init_rng, sample_rng, update_rng = self._rngs()
        self.obs_dim_, self.n_actions_ = env.obs_dim, env.n_actions
        self.nets_ = self._build_nets(env.obs_dim, env.n_actions, hp, init_rng)
        self.optimizers_ = Optimizers(self.nets_, hp.lr)
        collector = self._make_collector(env, sample_rng)
        self.history_ = []
        steps = 0
        t0 = time.perf_counter()
        while steps < total:
            buf = self._collect(collector, min(hp.n_steps, total - steps))
            steps += len(buf)
            batch = prepare_batch(buf, self.algo, hp)
            stats = update_epoch(batch, self.nets_, self.optimizers_, hp, self.algo, update_rng)
            rets = buf.episode_returns
            row = dict(
                step=steps,
                return_mean=float(np.mean(rets)) if rets else math.nan,
                return_min=float(np.min(rets)) if rets else math.nan,
                return_max=float(np.max(rets)) if rets else math.nan,
                loss_policy=stats["policy_loss"], loss_value=stats["value_loss"],
                entropy=stats["entropy"], clip_frac=stats["clip_frac"],
                wall_s=time.perf_counter() - t0 if record_wall_clock else None,
            )
            self.history_.append(row)
            if callback is not None:
                callback(row)
        self.n_steps_seen_ = steps
        return self

    # acting
    def _check_env(self, env):
        check_is_fitted(self, "nets_")
        if (env.obs_dim, env.n_actions) != (self.obs_dim_, self.n_actions_):
            raise ConfigurationError(
                f"agent expects obs_dim={self.obs_dim_}, n_actions={self.n_actions_}; "
                f"{env.name} has obs_dim={env.obs_dim}, n_actions={env.n_actions}")

    def _initial_state(self):
        return init_zeta(self.nets_.n_options)

    def _action_probs(self, obs, state):
        pi = self.nets_.sub_policy_probs(obs)[0]
        return state @ pi

    def _advance(self, obs, state, action, rng):
        pi = self.nets_.sub_policy_probs(obs)[0]
        tr = self.nets_.option_policy_probs(obs, [action])[0]
        return forward_joint(state, pi[:, action, None] * tr)[1]

    def _run(self, X, rng=None):
        check_is_fitted(self, "nets_")
        X = check_observations(X, self.obs_dim_)
        state = self._initial_state()
        probs, actions = [], []
        for obs in X:
            p = self._action_probs(obs, state)
            a = int(np.argmax(p))
            probs.append(p)
            actions.append(a)
            state = self._advance(obs, state, a, rng)
        return np.array(actions), np.array(probs)

    def predict(self, X):
        """Greedy actions for consecutive observations ``X`` of a single episode."""
        return self._run(X)[0]

    def predict_proba(self, X):
        """Marginal action distributions along the greedy path through ``X``."""
        return self._run(X)[1]

    def evaluate(self, env, n_episodes=100, deterministic=True, rng=None):
        """Mean/min/max return over ``n_episodes``; greedy on the option-marginal by default."""
        self._check_env(env)
        rng = np.random.default_rng(0) if rng is None else rng
        returns = []
        for _ in range(check_positive_int(n_episodes, "n_episodes")):
            obs = env.reset()
            state = self._initial_state()
            total = 0.0
            while True:
                p = self._action_probs(obs, state)
                a = int(np.argmax(p)) if deterministic else int(rng.choice(len(p), p=p / p.sum()))
                res = env.step(a)
                total += res.reward
                if res.done or res.truncated:
                    break
                state = self._advance(obs, state, a, rng)
                obs = res.observation
            returns.append(total)
        r = np.array(returns)
        return dict(mean=float(r.mean()), min=float(r.min()), max=float(r.max()), returns=r)

    def score(self, env, n_episodes=100):
        return self.evaluate(env, n_episodes)["mean"]

    # persistence
    def save(self, path):
        check_is_fitted(self, "nets_")
        meta = dict(algo=self.algo, obs_dim=self.obs_dim_, n_actions=self.n_actions_,
                    n_options=self.nets_.n_options)
        save_checkpoint(path, self.nets_.named(), meta)


class PPOAgent(BaseAgent):
    """Memoryless PPO baseline: a single option and no option policy."""

    algo = "ppo"

    def __init__(self, total_steps=100_000, n_steps=2048, batch_size=64, n_epochs=10,
                 learning_rate=3e-4, gamma=0.99, gae_lambda=0.95, clip_range=0.2,
                 ent_coef=0.01, vf_coef=0.5, max_grad_norm=0.5, normalize_advantage=False,
                 hidden_sizes=(64, 64), policy_init_gain=0.01, random_state=None):
        super().__init__(
            n_options=1, total_steps=total_steps, n_steps=n_steps, batch_size=batch_size,
            n_epochs=n_epochs, learning_rate=learning_rate, gamma=gamma,
            gae_lambda=gae_lambda, clip_range=clip_range, ent_coef=ent_coef,
            vf_coef=vf_coef, max_grad_norm=max_grad_norm,
            normalize_advantage=normalize_advantage, hidden_sizes=hidden_sizes,
            policy_init_gain=policy_init_gain, random_state=random_state,
        )

    def _build_nets(self, obs_dim, n_actions, hp, rng):
        return OptionNets(obs_dim, n_actions, 1, hp.hidden, rng, with_transition=False,
                          policy_gain=hp.policy_init_gain)


class SOAPAgent(BaseAgent):
    """Option policy trained through the generalized option advantage (causal zeta)."""

    algo = "soap"


class PPOEMAgent(BaseAgent):
    """Option policy trained on hindsight (forward-backward) option posteriors."""

    algo = "ppoem"

    def _collect(self, collector, horizon):
        return collector.collect(horizon, complete_episodes=True)


class PPOCAgent(BaseAgent):
    """Option-critic baseline with a learned inter-option policy and PPO sub-policies."""

    algo = "ppoc"

    def _build_nets(self, obs_dim, n_actions, hp, rng):
        return PPOCNets(obs_dim, n_actions, hp.n_options, hp.hidden, rng,
                        policy_gain=hp.policy_init_gain, stay_prob=hp.option_stay_init)

    def _make_collector(self, env, rng):
        return OptionSamplingCollector(env, self.nets_, rng)

    def evaluate(self, env, n_episodes=100, deterministic=True, rng=None):
        self._check_env(env)
        rng = np.random.default_rng(0) if rng is None else rng
        nets = self.nets_
        returns = []
        for _ in range(check_positive_int(n_episodes, "n_episodes")):
            obs = env.reset()
            z = _pick(nets.inter_option_probs(obs)[0], deterministic, rng)
            total = 0.0
            while True:
                a = _pick(nets.sub_policy_probs(obs)[0, z], deterministic, rng)
                res = env.step(a)
                total += res.reward
                if res.done or res.truncated:
                    break
                obs = res.observation
                beta = nets.termination_probs(obs)[0, z]
                if (beta > 0.5) if deterministic else (rng.random() < beta):
                    z = _pick(nets.inter_option_probs(obs)[0], deterministic, rng)
            returns.append(total)
        r = np.array(returns)
        return dict(mean=float(r.mean()), min=float(r.min()), max=float(r.max()), returns=r)

    def _run(self, X, rng=None):
        check_is_fitted(self, "nets_")
        X = check_observations(X, self.obs_dim_)
        nets = self.nets_
        z = int(np.argmax(nets.inter_option_probs(X[0])[0]))
        probs, actions = [], []
        for t, obs in enumerate(X):
            if t and nets.termination_probs(obs)[0, z] > 0.5:
                z = int(np.argmax(nets.inter_option_probs(obs)[0]))
            p = nets.sub_policy_probs(obs)[0, z]
            probs.append(p)
            actions.append(int(np.argmax(p)))
        return np.array(actions), np.array(probs)


def _pick(p, deterministic, rng):
    return int(np.argmax(p)) if deterministic else int(rng.choice(len(p), p=p / p.sum()))


AGENTS = {"ppo": PPOAgent, "ppoc": PPOCAgent, "ppoem": PPOEMAgent, "soap": SOAPAgent}


def make_agent(algo, **params):
    try:
        cls = AGENTS[algo]
    except KeyError:
        raise ConfigurationError(f"unknown algorithm {algo!r}; choose from {sorted(AGENTS)}") from None
    return cls(**params)


def load_agent(path):
    """Rebuild a fitted agent from a checkpoint written by ``BaseAgent.save``."""
    nets, meta = load_checkpoint(path)
    algo = meta["algo"]
    obs_dim, n_actions, n = int(meta["obs_dim"]), int(meta["n_actions"]), int(meta["n_options"])
    hidden = tuple(nets["policy"].sizes[1:-1])
    agent = make_agent(algo, hidden_sizes=hidden) if algo == "ppo" else make_agent(
        algo, n_options=n, hidden_sizes=hidden)
    shell = agent._build_nets(obs_dim, n_actions, agent.hyperparams(), np.random.default_rng(0))
    for name, net in shell.named().items():
        if net.sizes != nets[name].sizes:
            raise ConfigurationError(f"checkpoint net {name!r} has sizes {nets[name].sizes}")
        for dst, src in zip(net.params, nets[name].params):
            dst[...] = src
    agent.nets_ = shell
    agent.obs_dim_, agent.n_actions_ = obs_dim, n_actions
    return agent
