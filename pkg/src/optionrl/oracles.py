"""Brute-force reference computations, deliberately independent of the fast recursions.

Used by the test-suite and by ``optionrl oracle-check``.
"""
import itertools

import numpy as np

from .gradcheck import finite_diff_grad, rel_error
from .nets import OptionNets
from .nn import Mlp


def enumerate_option_posteriors(joints):
    """Enumerate every option sequence z_0..z_T of one episode.

    ``joints[t][z, z']`` is p(a_t, z'|s_t, z) for the realized action; z_0 is uniform.
    Returns (filtered (T+1, n): p(z_t | history up to t), smoothed (T+1, n): p(z_t | episode),
    pairs (T, n, n): p(z_t, z_{t+1} | episode)).
    """
    T, n, _ = joints.shape
    seqs = list(itertools.product(range(n), repeat=T + 1))
    weight = {}
    for seq in seqs:
        w = 1.0 / n
        for t in range(T):
            w *= joints[t][seq[t], seq[t + 1]]
        weight[seq] = w
    total = sum(weight.values())
    smoothed = np.zeros((T + 1, n))
    pairs = np.zeros((T, n, n))
    for seq, w in weight.items():
        for t in range(T + 1):
            smoothed[t, seq[t]] += w / total
        for t in range(T):
            pairs[t, seq[t], seq[t + 1]] += w / total
    filtered = np.zeros((T + 1, n))
    for t in range(T + 1):
        # p(z_t, a_{0:t-1}) only involves the first t factors
        acc = np.zeros(n)
        for prefix in itertools.product(range(n), repeat=t + 1):
            w = 1.0 / n
            for k in range(t):
                w *= joints[k][prefix[k], prefix[k + 1]]
            acc[prefix[t]] += w
        filtered[t] = acc / acc.sum()
    return filtered, smoothed, pairs


def direct_gae(rewards, values, dones, gamma, lam):
    """A_t = sum_{t' >= t, same episode} (gamma*lam)^(t'-t) delta_t' by explicit double sum;
    ``values`` has T+1 entries."""
    T = len(rewards)
    delta = [rewards[t] + gamma * (1 - dones[t]) * values[t + 1] - values[t] for t in range(T)]
    adv = np.zeros(T)
    for t in range(T):
        for k in range(t, T):
            adv[t] += (gamma * lam) ** (k - t) * delta[k]
            if dones[k]:
                break
    return adv


def direct_option_gae(rewards, values, dones, weights, gamma, lam):
    """Option GAE as an expectation over option chains drawn from ``weights``.

    A_t(z) = E[sum_k (gamma lam)^k delta_{t+k}(z_{t+k}, z_{t+k+1})] with the chain starting at
    z_t = z and running to the end of the episode. ``values`` is (T+1, n).
    """
    T, n = len(rewards), values.shape[1]
    adv = np.zeros((T, n))
    for t in range(T):
        end = t
        while not dones[end] and end < T - 1:
            end += 1
        span = end - t + 1
        for z in range(n):
            for chain in itertools.product(range(n), repeat=span):
                zs = (z,) + chain
                p = 1.0
                total = 0.0
                for k in range(span):
                    s = t + k
                    p *= weights[s][zs[k], zs[k + 1]]
                    boot = 0.0 if dones[s] else values[s + 1][zs[k + 1]]
                    total += (gamma * lam) ** k * (rewards[s] + gamma * boot - values[s][zs[k]])
                adv[t, z] += p * total
    return adv


def mlp_scalar_forward(net, x):
    """Evaluate an MLP one multiply-add at a time."""
    h = [float(v) for v in x]
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        out = []
        for i in range(w.shape[0]):
            s = float(b[i])
            for j in range(w.shape[1]):
                s += float(w[i, j]) * h[j]
            out.append(np.tanh(s) if k < len(net.weights) - 1 else s)
        h = out
    return np.array(h)


def random_joints(rng, T, n, n_actions=2):
    """Random sub-policy and option-policy tables and actions for T steps."""
    subs = rng.dirichlet(np.ones(n_actions), size=(T, n))
    trans = rng.dirichlet(np.ones(n), size=(T, n, n_actions))
    actions = rng.integers(n_actions, size=T)
    joints = np.stack([subs[t][:, actions[t], None] * trans[t][:, actions[t], :] for t in range(T)])
    return subs, trans, actions, joints


class GoaInstance:
    """A small single-episode problem for checking the analytic option policy gradient."""

    def __init__(self, rng, n, T, obs_dim=3, n_actions=2, hidden=(5,)):
        self.nets = OptionNets(obs_dim, n_actions, n, hidden, rng)
        # larger head weights than the default near-uniform init exercise the curvature
        for net in (self.nets.policy, self.nets.transition):
            net.weights[-1][...] = rng.normal(scale=0.7, size=net.weights[-1].shape)
            net.biases[-1][...] = rng.normal(scale=0.3, size=net.biases[-1].shape)
        self.obs = rng.normal(size=(T, obs_dim))
        self.actions = rng.integers(n_actions, size=T)
        self.a_opt = rng.normal(size=(T, n))
        self.dones = np.zeros(T, dtype=bool)
        self.dones[-1] = True
        self.n, self.T = n, T
        joints = self.joints()
        self.zetas, self.alphas = self._unroll(joints)
        self.coef = np.sum(self.a_opt * self.zetas, axis=1)  # detached

    def joints(self):
        pi = self.nets.sub_policy_probs(self.obs)
        tr = self.nets.option_policy_probs(self.obs, self.actions)
        return pi[np.arange(self.T), :, self.actions][:, :, None] * tr

    def _unroll(self, joints):
        zeta = np.full(self.n, 1.0 / self.n)
        zetas, alphas = [], []
        for t in range(self.T):
            zetas.append(zeta)
            un = zeta @ joints[t]
            alphas.append(un.sum())
            zeta = un / un.sum()
        return np.array(zetas), np.array(alphas)

    def objective(self, _net=None):
        """sum_t c_t log alpha_t with zeta unrolled through the current parameters."""
        _, alphas = self._unroll(self.joints())
        return float(np.sum(self.coef * np.log(alphas)))

    def numeric_grad(self, h=1e-5):
        return {name: finite_diff_grad(self.objective, getattr(self.nets, name), h)
                for name in ("policy", "transition")}


def mlp_grad_instance(rng, sizes=(3, 6, 5, 2)):
    net = Mlp(sizes, rng, hidden_gain=1.0, output_gain=1.0)
    x = rng.normal(size=sizes[0])
    g = rng.normal(size=sizes[-1])
    return net, x, g


__all__ = ["enumerate_option_posteriors", "direct_gae", "direct_option_gae",
           "mlp_scalar_forward", "random_joints", "GoaInstance", "mlp_grad_instance",
           "rel_error"]
