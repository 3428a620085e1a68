"""Losses (with analytic gradients) and the PPO-style update loop for PPO, PPOC, PPOEM
and SOAP.

Each ``*_loss(batch, nets, hp)`` returns ``(loss, grads, info)`` where ``grads`` maps net
names to gradient lists aligned with ``net.params`` and ``info`` carries the loss pieces,
entropy, clip fraction and the per-sample loss vector.
"""
from dataclasses import dataclass, field

import numpy as np

from . import inference
from ._validation import check_interval, check_positive_int
from .advantage import GaeParams, goa_backward, option_gae, scalar_gae
from .exceptions import ConfigurationError, NumericalDegeneracyError
from .optim import adam_step, clip_by_global_norm

ALGORITHMS = ("ppo", "ppoc", "ppoem", "soap")


@dataclass
class HyperParams:
    clip_eps: float = 0.2
    lr: float = 3e-4
    n_epochs: int = 10
    batch_size: int = 64
    n_steps: int = 2048
    gamma: float = 0.99
    gae_lambda: float = 0.95
    n_options: int = 4
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    max_grad_norm: float = 0.5
    normalize_advantage: bool = False
    hidden: tuple = field(default=(64, 64))
    policy_init_gain: float = 0.01
    option_stay_init: float = None

    def __post_init__(self):
        check_interval(self.clip_eps, "clip_eps", 0.0, 1.0, closed_low=False, closed_high=False)
        check_positive_int(self.n_epochs, "n_epochs")
        check_positive_int(self.batch_size, "batch_size")
        check_positive_int(self.n_steps, "n_steps")
        check_positive_int(self.n_options, "n_options")
        if self.policy_init_gain <= 0:
            raise ConfigurationError(f"policy_init_gain must be positive, got {self.policy_init_gain}")
        if self.lr <= 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")
        self.hidden = tuple(int(h) for h in self.hidden)

    @property
    def gae(self):
        return GaeParams(self.gamma, self.gae_lambda)


def _clip_terms(x, lo, hi, adv):
    """min(x*adv, clip(x, lo, hi)*adv) and the mask where the unclipped branch is live."""
    s1 = x * adv
    s2 = np.clip(x, lo, hi) * adv
    return np.minimum(s1, s2), (s1 <= s2).astype(np.float64)


def _marginal_entropy(probs, zetas):
    """Entropy of sum_z zeta(z) pi(.|s, z) and its gradient wrt the sub-policy table."""
    q = np.einsum("bn,bna->ba", zetas, probs)
    logq = np.log(q)
    ent = -np.sum(q * logq, axis=1)
    dent = -(logq + 1.0)[:, None, :] * zetas[:, :, None]
    return ent, dent


def _option_value_loss(nets, obs, v_target, weights, vf_coef):
    v, inputs = nets.value.forward_cached(obs)
    err = v - v_target
    per = vf_coef * np.sum(weights * err * err, axis=1)
    grad_out = 2.0 * vf_coef * weights * err / len(obs)
    grads, _ = nets.value.backward(inputs, grad_out)
    return per, grads


def ppo_loss(batch, nets, hp):
    obs, a = batch["obs"], batch["actions"]
    B = len(a)
    idx = np.arange(B)
    probs, cache = nets.sub_policy(obs)
    p = probs[:, 0, :]
    ratio = p[idx, a] / batch["pi_old"]
    adv = batch["advantages"]
    surr, live = _clip_terms(ratio, 1 - hp.clip_eps, 1 + hp.clip_eps, adv)
    ent = -np.sum(p * np.log(p), axis=1)

    g = np.zeros_like(probs)
    g[idx, 0, a] = -live * adv / batch["pi_old"] / B
    g[:, 0, :] += hp.ent_coef * (np.log(p) + 1.0) / B
    v_target = np.reshape(batch["v_target"], (B, 1))
    vper, vgrads = _option_value_loss(nets, obs, v_target, np.ones((B, 1)), hp.vf_coef)
    per = -surr + vper - hp.ent_coef * ent
    grads = {"policy": nets.sub_policy_backward(cache, g), "value": vgrads}
    info = dict(policy_loss=-surr.mean(), value_loss=vper.mean(), entropy=ent.mean(),
                clip_frac=float(np.mean(np.abs(ratio - 1) > hp.clip_eps)), per_sample=per)
    return float(per.mean()), grads, info


def _joint_forward(batch, nets):
    obs, a = batch["obs"], batch["actions"]
    idx = np.arange(len(a))
    probs, pcache = nets.sub_policy(obs)
    tr, tcache = nets.option_policy(obs, a)
    pa = probs[idx, :, a]
    return probs, pcache, tr, tcache, pa, pa[:, :, None] * tr


def _joint_backward(batch, nets, probs, pcache, tr, tcache, pa, g_joint, g_probs):
    idx = np.arange(len(pa))
    g_probs = g_probs.copy()
    g_probs[idx, :, batch["actions"]] += np.sum(g_joint * tr, axis=2)
    grads = {"policy": nets.sub_policy_backward(pcache, g_probs)}
    if tcache is not None:
        grads["transition"] = nets.option_policy_backward(tcache, g_joint * pa[:, :, None])
    return grads


def soap_loss(batch, nets, hp):
    """Negated clipped objective sum_{z,z'} zeta/alpha * min(p A', clip(p, (1-e)p_old,
    (1+e)p_old) A') plus zeta-weighted value regression, minus a marginal entropy bonus."""
    B = len(batch["actions"])
    probs, pcache, tr, tcache, pa, joint = _joint_forward(batch, nets)
    old = batch["joint_old"]
    adv = batch["a_goa"][:, None, :]
    w = batch["zetas"][:, :, None] / batch["alphas"][:, None, None]
    surr, live = _clip_terms(joint, (1 - hp.clip_eps) * old, (1 + hp.clip_eps) * old, adv)
    obj = np.sum(w * surr, axis=(1, 2))
    ent, dent = _marginal_entropy(probs, batch["zetas"])

    g_joint = -w * adv * live / B
    g_probs = -hp.ent_coef * dent / B
    grads = _joint_backward(batch, nets, probs, pcache, tr, tcache, pa, g_joint, g_probs)
    vper, grads["value"] = _option_value_loss(nets, batch["obs"], batch["v_target"],
                                              batch["zetas"], hp.vf_coef)
    per = -obj + vper - hp.ent_coef * ent
    clipped = np.abs(joint / old - 1) > hp.clip_eps
    info = dict(policy_loss=-obj.mean(), value_loss=vper.mean(), entropy=ent.mean(),
                clip_frac=float(np.mean(np.sum(clipped * batch["zetas"][:, :, None] * tr, axis=(1, 2)))),
                per_sample=per)
    return float(per.mean()), grads, info


def ppoem_loss(batch, nets, hp):
    """Negated posterior-weighted clipped surrogate over option pairs plus posterior-weighted
    value regression, minus a marginal entropy bonus."""
    B = len(batch["actions"])
    probs, pcache, tr, tcache, pa, joint = _joint_forward(batch, nets)
    old = batch["joint_old"]
    post = batch["posterior"]
    adv = batch["a_pair"]
    ratio = joint / old
    surr, live = _clip_terms(ratio, 1 - hp.clip_eps, 1 + hp.clip_eps, adv)
    obj = np.sum(post * surr, axis=(1, 2))
    ent, dent = _marginal_entropy(probs, batch["zetas"])

    g_joint = -post * adv * live / old / B
    g_probs = -hp.ent_coef * dent / B
    grads = _joint_backward(batch, nets, probs, pcache, tr, tcache, pa, g_joint, g_probs)
    vper, grads["value"] = _option_value_loss(nets, batch["obs"], batch["v_target"],
                                              post.sum(axis=2), hp.vf_coef)
    per = -obj + vper - hp.ent_coef * ent
    info = dict(policy_loss=-obj.mean(), value_loss=vper.mean(), entropy=ent.mean(),
                clip_frac=float(np.mean(np.sum(post * (np.abs(ratio - 1) > hp.clip_eps), axis=(1, 2)))),
                per_sample=per)
    return float(per.mean()), grads, info


def ppoc_loss(batch, nets, hp):
    """Clipped PPO on the sampled option's sub-policy; termination descends
    d(term)/d(psi) * A; the inter-option policy ascends log pi(z|s) * A where the option
    was freshly drawn; Q(s, z) regresses to Q_old + A."""
    obs, a, z = batch["obs"], batch["actions"], batch["options"]
    B = len(a)
    idx = np.arange(B)
    adv = batch["advantages"]

    probs, pcache = nets.sub_policy(obs)
    pz = probs[idx, z]
    ratio = pz[idx, a] / batch["pi_old"]
    surr, live = _clip_terms(ratio, 1 - hp.clip_eps, 1 + hp.clip_eps, adv)
    sub_ent = -np.sum(pz * np.log(pz), axis=1)
    g_pi = np.zeros_like(probs)
    g_pi[idx, z, a] = -live * adv / batch["pi_old"] / B
    g_pi[idx, z, :] += hp.ent_coef * (np.log(pz) + 1.0) / B

    term, tcache = nets.termination_forward(obs)
    term_obj = term[idx, z] * adv
    g_term = np.zeros_like(term)
    g_term[idx, z] = adv / B

    inter, icache = nets.inter_option(obs)
    fresh = batch["fresh"].astype(np.float64)
    inter_obj = fresh * np.log(inter[idx, z]) * adv
    inter_ent = -np.sum(inter * np.log(inter), axis=1)
    g_inter = np.zeros_like(inter)
    g_inter[idx, z] = -fresh * adv / inter[idx, z] / B
    g_inter += hp.ent_coef * (np.log(inter) + 1.0) / B

    q, qinputs = nets.value.forward_cached(obs)
    err = q[idx, z] - batch["v_target"]
    g_q = np.zeros_like(q)
    g_q[idx, z] = 2.0 * hp.vf_coef * err / B
    vper = hp.vf_coef * err * err

    ent = sub_ent + inter_ent
    per = -surr + term_obj - inter_obj + vper - hp.ent_coef * ent
    grads = {
        "policy": nets.sub_policy_backward(pcache, g_pi),
        "termination": nets.termination_backward(tcache, g_term),
        "inter": nets.inter_option_backward(icache, g_inter),
        "value": nets.value.backward(qinputs, g_q)[0],
    }
    info = dict(policy_loss=float(np.mean(-surr + term_obj - inter_obj)), value_loss=vper.mean(),
                entropy=ent.mean(), clip_frac=float(np.mean(np.abs(ratio - 1) > hp.clip_eps)),
                per_sample=per)
    return float(per.mean()), grads, info


LOSSES = {"ppo": ppo_loss, "ppoc": ppoc_loss, "ppoem": ppoem_loss, "soap": soap_loss}


def _normalize(x, scalar):
    mu, sd = float(np.mean(scalar)), float(max(np.std(scalar), 1e-8))
    return (x - mu) / sd


def prepare_batch(buf, algo, hp):
    """Turn a rollout buffer into the per-step arrays the algorithm's loss consumes."""
    if algo not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {algo!r}")
    gae = hp.gae
    common = dict(obs=buf.obs, actions=buf.actions)
    if algo == "ppo":
        adv = scalar_gae(buf.rewards, buf.values[:, 0], buf.dones, gae,
                         next_values=buf.next_values[:, 0], terminals=buf.terminals)
        v_target = buf.values[:, 0] + adv
        if hp.normalize_advantage:
            adv = _normalize(adv, adv)
        pi_old = buf.sub_policy[np.arange(len(buf)), 0, buf.actions]
        return dict(common, advantages=adv, v_target=v_target, pi_old=pi_old)
    if algo == "ppoc":
        idx = np.arange(len(buf))
        q = buf.values[idx, buf.options]
        q_next = buf.next_values[idx, buf.next_options]
        adv = scalar_gae(buf.rewards, q, buf.dones, gae, next_values=q_next,
                         terminals=buf.terminals)
        v_target = q + adv
        if hp.normalize_advantage:
            adv = _normalize(adv, adv)
        return dict(common, options=buf.options, fresh=buf.fresh, pi_old=buf.action_probs,
                    advantages=adv, v_target=v_target)
    if algo == "soap":
        res = option_gae(buf.rewards, buf.values, buf.dones, buf.transition, gae,
                         next_values=buf.next_values, terminals=buf.terminals)
        a_goa, _, _ = goa_backward(res.a_opt, buf.zetas, buf.joints, buf.alphas, buf.dones)
        if hp.normalize_advantage:
            a_goa = _normalize(a_goa, np.sum(res.a_opt * buf.zetas, axis=1))
        return dict(common, zetas=buf.zetas, alphas=buf.alphas, joint_old=buf.joints,
                    a_goa=a_goa, v_target=res.v_target)
    _, beta_next = inference.backward_pass(buf.joints, buf.alphas, buf.dones)
    post = inference.joint_posterior(buf.zetas, beta_next, buf.joints, buf.alphas)
    weights = inference.option_transition_posterior(post)
    res = option_gae(buf.rewards, buf.values, buf.dones, weights, gae,
                     next_values=buf.next_values, terminals=buf.terminals)
    a_pair = res.a_pair
    if hp.normalize_advantage:
        a_pair = _normalize(a_pair, np.sum(post * a_pair, axis=(1, 2)))
    return dict(common, zetas=buf.zetas, joint_old=buf.joints, posterior=post,
                a_pair=a_pair, v_target=res.v_target)


def _take(batch, idx):
    return {k: v[idx] for k, v in batch.items()}


class Optimizers:
    """One Adam state per named network."""

    def __init__(self, nets, lr):
        from .optim import AdamState

        self.states = {name: AdamState(net.params, lr=lr) for name, net in nets.named().items()}

    @property
    def steps(self):
        return {name: s.step for name, s in self.states.items()}


def update_epoch(batch, nets, optimizers, hp, algo, rng):
    """Run ``hp.n_epochs`` passes of shuffled minibatch Adam updates.

    On a non-finite loss or gradient the parameters are restored to their state at entry
    and `NumericalDegeneracyError` is raised.
    """
    loss_fn = LOSSES[algo]
    named = nets.named()
    snapshot = {name: [p.copy() for p in net.params] for name, net in named.items()}
    N = len(batch["actions"])
    keys = ("policy_loss", "value_loss", "entropy", "clip_frac")
    sums = dict.fromkeys(keys, 0.0)
    count = 0
    try:
        for _ in range(hp.n_epochs):
            perm = rng.permutation(N)
            for lo in range(0, N, hp.batch_size):
                mb = _take(batch, perm[lo:lo + hp.batch_size])
                loss, grads, info = loss_fn(mb, nets, hp)
                if not np.isfinite(loss):
                    raise NumericalDegeneracyError(f"{algo} loss is not finite")
                names = list(grads)
                flat = [g for name in names for g in grads[name]]
                flat, _ = clip_by_global_norm(flat, hp.max_grad_norm)
                k = 0
                for name in names:
                    params = named[name].params
                    adam_step(optimizers.states[name], params, flat[k:k + len(params)])
                    k += len(params)
                for key in keys:
                    sums[key] += float(info[key])
                count += 1
    except (NumericalDegeneracyError, FloatingPointError):
        for name, net in named.items():
            for p, saved in zip(net.params, snapshot[name]):
                p[...] = saved
        raise
    return {k: v / max(count, 1) for k, v in sums.items()}
