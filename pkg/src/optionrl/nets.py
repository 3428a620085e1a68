"""Network groups for the option agents.

Each group is a separate tanh MLP. Policy-like heads use output gain ``policy_gain``
(0.01 by default, i.e. near uniform); value heads use gain 1.

``stay_prob`` optionally biases the initial option dynamics towards persistence: the
option policy's diagonal logits are raised so a uniform row would keep the current option
with that probability, and the option-critic termination head starts at ``1 - stay_prob``.
"""
import numpy as np

from .mathutil import PROB_FLOOR, floored, floored_scale, sigmoid, softmax, softmax_backward
from .exceptions import ConfigurationError
from .nn import Mlp


def _head(sizes, rng, gain):
    return Mlp(sizes, rng, hidden_gain=1.0, output_gain=gain)


def stay_logit(stay_prob, n):
    """Logit offset that turns a uniform row over ``n`` options into one keeping the
    current option with probability ``stay_prob``."""
    if not 1.0 / n <= stay_prob < 1.0:
        raise ConfigurationError(f"stay probability must lie in [1/{n}, 1), got {stay_prob}")
    return float(np.log(stay_prob * (n - 1) / (1.0 - stay_prob)))


def one_hot(actions, n):
    out = np.zeros((len(actions), n))
    out[np.arange(len(actions)), actions] = 1.0
    return out


class _Categorical:
    """Softmax over the last axis of a reshaped MLP output, with a probability floor."""

    def __init__(self, net, shape):
        self.net = net
        self.shape = shape

    def __call__(self, x):
        logits, inputs = self.net.forward_cached(x)
        raw = softmax(logits.reshape((-1,) + self.shape))
        return floored(raw), (inputs, raw)

    def probs(self, x):
        return floored(softmax(self.net.forward(x).reshape((-1,) + self.shape)))

    def backward(self, cache, grad_probs):
        inputs, raw = cache
        g = softmax_backward(raw, floored_scale(self.shape[-1]) * grad_probs)
        grads, _ = self.net.backward(inputs, g.reshape(len(g), -1))
        return grads


class OptionNets:
    """Sub-policy pi(a|s,z), option policy pi(z'|s,a,z) and option values V(s,z).

    With ``with_transition=False`` (plain PPO, one option) the option policy is the
    constant 1 and no transition network exists.
    """

    def __init__(self, obs_dim, n_actions, n_options, hidden=(64, 64), rng=None,
                 with_transition=True, policy_gain=0.01, stay_prob=None):
        rng = np.random.default_rng(0) if rng is None else rng
        h = list(hidden)
        self.obs_dim, self.n_actions, self.n_options = obs_dim, n_actions, n_options
        self.policy = _head([obs_dim, *h, n_options * n_actions], rng, policy_gain)
        self.transition = (
            _head([obs_dim + n_actions, *h, n_options * n_options], rng, policy_gain)
            if with_transition else None
        )
        self.value = _head([obs_dim, *h, n_options], rng, 1.0)
        if stay_prob is not None and self.transition is not None and n_options > 1:
            diag = self.transition.biases[-1].reshape(n_options, n_options)
            diag[np.arange(n_options), np.arange(n_options)] += stay_logit(stay_prob, n_options)
        self._pi = _Categorical(self.policy, (n_options, n_actions))
        self._tr = None if self.transition is None else _Categorical(
            self.transition, (n_options, n_options))

    def named(self):
        out = {"policy": self.policy, "value": self.value}
        if self.transition is not None:
            out["transition"] = self.transition
        return out

    def sub_policy(self, obs):
        return self._pi(obs)

    def sub_policy_probs(self, obs):
        return self._pi.probs(obs)

    def sub_policy_backward(self, cache, grad_probs):
        return self._pi.backward(cache, grad_probs)

    def _transition_input(self, obs, actions):
        obs = np.atleast_2d(obs)
        return np.concatenate([obs, one_hot(np.asarray(actions), self.n_actions)], axis=1)

    def option_policy(self, obs, actions):
        """(B, n, n) table pi(z'|s, a, z) for the given actions, plus backward cache."""
        if self._tr is None:
            return np.ones((len(np.atleast_2d(obs)), 1, 1)), None
        return self._tr(self._transition_input(obs, actions))

    def option_policy_probs(self, obs, actions):
        if self._tr is None:
            return np.ones((len(np.atleast_2d(obs)), 1, 1))
        return self._tr.probs(self._transition_input(obs, actions))

    def option_policy_backward(self, cache, grad_probs):
        if self._tr is None:
            return []
        return self._tr.backward(cache, grad_probs)

    def option_policy_all(self, obs):
        """(B, n, A, n) table over every action."""
        obs = np.atleast_2d(obs)
        tabs = [self.option_policy_probs(obs, np.full(len(obs), a)) for a in range(self.n_actions)]
        return np.stack(tabs, axis=2)

    def values(self, obs):
        return self.value.forward(np.atleast_2d(obs))

    def policy_outputs(self, obs):
        """(sub_policy (n, A), transition (n, A, n)) for a single observation."""
        return self.sub_policy_probs(obs)[0], self.option_policy_all(obs)[0]


class PPOCNets:
    """Option-critic style heads: sub-policy, termination, inter-option policy, Q(s, z)."""

    def __init__(self, obs_dim, n_actions, n_options, hidden=(64, 64), rng=None,
                 policy_gain=0.01, stay_prob=None):
        rng = np.random.default_rng(0) if rng is None else rng
        h = list(hidden)
        self.obs_dim, self.n_actions, self.n_options = obs_dim, n_actions, n_options
        self.policy = _head([obs_dim, *h, n_options * n_actions], rng, policy_gain)
        self.termination = _head([obs_dim, *h, n_options], rng, policy_gain)
        self.inter = _head([obs_dim, *h, n_options], rng, policy_gain)
        self.value = _head([obs_dim, *h, n_options], rng, 1.0)
        if stay_prob is not None and n_options > 1:
            stay_logit(stay_prob, n_options)  # validates
            self.termination.biases[-1] += float(np.log((1.0 - stay_prob) / stay_prob))
        self._pi = _Categorical(self.policy, (n_options, n_actions))
        self._inter = _Categorical(self.inter, (n_options,))

    def named(self):
        return {"policy": self.policy, "termination": self.termination,
                "inter": self.inter, "value": self.value}

    def sub_policy(self, obs):
        return self._pi(obs)

    def sub_policy_probs(self, obs):
        return self._pi.probs(obs)

    def sub_policy_backward(self, cache, grad_probs):
        return self._pi.backward(cache, grad_probs)

    def inter_option(self, obs):
        return self._inter(obs)

    def inter_option_probs(self, obs):
        return self._inter.probs(obs)

    def inter_option_backward(self, cache, grad_probs):
        return self._inter.backward(cache, grad_probs)

    def termination_probs(self, obs):
        raw = sigmoid(self.termination.forward(np.atleast_2d(obs)))
        return (1.0 - 2.0 * PROB_FLOOR) * raw + PROB_FLOOR

    def termination_forward(self, obs):
        out, inputs = self.termination.forward_cached(np.atleast_2d(obs))
        raw = sigmoid(out)
        return (1.0 - 2.0 * PROB_FLOOR) * raw + PROB_FLOOR, (inputs, raw)

    def termination_backward(self, cache, grad_probs):
        inputs, raw = cache
        g = (1.0 - 2.0 * PROB_FLOOR) * grad_probs * raw * (1.0 - raw)
        grads, _ = self.termination.backward(inputs, g)
        return grads

    def values(self, obs):
        return self.value.forward(np.atleast_2d(obs))
