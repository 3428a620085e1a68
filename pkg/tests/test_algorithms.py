import numpy as np
import pytest

from optionrl.algorithms import (LOSSES, HyperParams, Optimizers, _clip_terms, prepare_batch,
                                 ppo_loss, ppoem_loss, soap_loss, update_epoch)
from optionrl.envs import Corridor, CorridorConfig
from optionrl.exceptions import ConfigurationError, NumericalDegeneracyError
from optionrl.gradcheck import finite_diff_grad, rel_error
from optionrl.nets import OptionNets, PPOCNets
from optionrl.rollout import collect, collect_ppoc


def _nets(algo, rng, n=3, hidden=(6,)):
    if algo == "ppoc":
        return PPOCNets(3, 2, n, hidden, rng)
    if algo == "ppo":
        return OptionNets(3, 2, 1, hidden, rng, with_transition=False)
    return OptionNets(3, 2, n, hidden, rng)


def _batch(algo, seed, T=24, hp=None):
    rng = np.random.default_rng(seed)
    nets = _nets(algo, rng)
    env = Corridor(CorridorConfig(length=4), rng)
    buf = collect_ppoc(env, nets, rng, T) if algo == "ppoc" else collect(env, nets, rng, T)
    hp = hp or HyperParams(n_options=3)
    return prepare_batch(buf, algo, hp), nets, rng


def _perturb(nets, rng, scale):
    for net in nets.named().values():
        for p in net.params:
            p += rng.normal(scale=scale, size=p.shape)


def _flat(grads):
    return np.concatenate([np.ravel(g) for g in grads])


def test_clip_terms_worked_example():
    s, live = _clip_terms(np.array([1.5]), 0.8, 1.2, np.array([1.0]))
    assert s[0] == pytest.approx(1.2) and live[0] == 0.0
    s, live = _clip_terms(np.array([1.5]), 0.8, 1.2, np.array([-1.0]))
    assert s[0] == pytest.approx(-1.5) and live[0] == 1.0
    s, live = _clip_terms(np.array([0.5]), 0.8, 1.2, np.array([1.0]))
    assert s[0] == pytest.approx(0.5) and live[0] == 1.0


def test_ppo_loss_at_old_policy_is_minus_advantage():
    rng = np.random.default_rng(0)
    nets = _nets("ppo", rng)
    obs = rng.normal(size=(4, 3))
    a = np.array([0, 1, 1, 0])
    p = nets.sub_policy_probs(obs)[np.arange(4), 0, a]
    batch = dict(obs=obs, actions=a, pi_old=p, advantages=np.ones(4), v_target=np.zeros(4))
    hp = HyperParams(ent_coef=0.0, vf_coef=0.0)
    loss, _, info = ppo_loss(batch, nets, hp)
    assert loss == pytest.approx(-1.0, abs=1e-12)
    assert info["clip_frac"] == 0.0


def test_ppo_loss_clipped_ratio():
    rng = np.random.default_rng(0)
    nets = _nets("ppo", rng)
    obs = rng.normal(size=(1, 3))
    p = nets.sub_policy_probs(obs)[0, 0, 0]
    batch = dict(obs=obs, actions=np.array([0]), pi_old=np.array([p / 1.5]),
                 advantages=np.ones(1), v_target=np.zeros(1))
    loss, grads, info = ppo_loss(batch, nets, HyperParams(ent_coef=0.0, vf_coef=0.0))
    assert loss == pytest.approx(-1.2, abs=1e-12)
    assert info["clip_frac"] == 1.0
    assert np.all(_flat(grads["policy"]) == 0.0)


@pytest.mark.parametrize("algo", ["ppo", "ppoc", "ppoem", "soap"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_loss_gradients_match_finite_differences(algo, seed):
    batch, nets, rng = _batch(algo, seed)
    # move away from the collection point so ratios differ from one but stay unclipped
    _perturb(nets, rng, 0.02)
    hp = HyperParams(n_options=3, ent_coef=0.05, vf_coef=0.7, clip_eps=0.9)
    _, grads, _ = LOSSES[algo](batch, nets, hp)
    for name, net in nets.named().items():
        num = finite_diff_grad(lambda _n: LOSSES[algo](batch, nets, hp)[0], net, h=1e-6)
        assert name in grads
        assert rel_error(grads[name], num) < 1e-4, name


@pytest.mark.parametrize("algo", ["ppo", "ppoem", "soap"])
def test_loss_gradients_with_active_clipping(algo):
    batch, nets, rng = _batch(algo, 7)
    _perturb(nets, rng, 0.3)
    hp = HyperParams(n_options=3, ent_coef=0.01, clip_eps=0.1)
    _, grads, info = LOSSES[algo](batch, nets, hp)
    assert info["clip_frac"] > 0
    for name, net in nets.named().items():
        num = finite_diff_grad(lambda _n: LOSSES[algo](batch, nets, hp)[0], net, h=1e-7)
        assert rel_error(grads[name], num) < 1e-4, name


def test_single_option_losses_coincide():
    rng = np.random.default_rng(4)
    nets = OptionNets(3, 2, 1, (6,), rng)
    env = Corridor(CorridorConfig(length=3), rng)
    buf = collect(env, nets, rng, 30)
    hp = HyperParams(n_options=1)
    np.testing.assert_allclose(buf.alphas, buf.sub_policy[np.arange(30), 0, buf.actions], atol=1e-15)
    bp, bs, be = (prepare_batch(buf, k, hp) for k in ("ppo", "soap", "ppoem"))
    np.testing.assert_allclose(bs["a_goa"][:, 0], bp["advantages"], atol=1e-10)
    np.testing.assert_allclose(be["a_pair"][:, 0, 0], bp["advantages"], atol=1e-10)
    _perturb(nets, rng, 0.2)
    per = [loss(b, nets, hp)[2]["per_sample"] for loss, b in
           ((ppo_loss, bp), (soap_loss, bs), (ppoem_loss, be))]
    np.testing.assert_allclose(per[1], per[0], atol=1e-10)
    np.testing.assert_allclose(per[2], per[0], atol=1e-10)


def test_soap_clipping_is_relative_to_old_joint():
    batch, nets, rng = _batch("soap", 3)
    hp = HyperParams(n_options=3, clip_eps=0.2)
    loss0, _, info0 = soap_loss(batch, nets, hp)
    assert info0["clip_frac"] == 0.0
    # every joint entry scaled up 1.5x with positive advantage: objective capped at 1.2x
    b = dict(batch, joint_old=batch["joint_old"] / 1.5, a_goa=np.abs(batch["a_goa"]))
    base = dict(batch, a_goa=np.abs(batch["a_goa"]))
    hp0 = HyperParams(n_options=3, clip_eps=0.2, ent_coef=0.0, vf_coef=0.0)
    capped = soap_loss(b, nets, hp0)[0]
    plain = soap_loss(base, nets, hp0)[0]
    assert capped == pytest.approx(plain / 1.5 * 1.2, rel=1e-10)


def test_prepare_batch_unknown_algorithm():
    with pytest.raises(ConfigurationError):
        prepare_batch(None, "a2c", HyperParams())


def test_hyperparams_validation():
    with pytest.raises(ConfigurationError):
        HyperParams(clip_eps=0.0)
    with pytest.raises(ConfigurationError):
        HyperParams(lr=-1.0)
    with pytest.raises(ConfigurationError):
        HyperParams(n_options=0)


def _policy_snapshot(nets, names):
    return {k: [p.copy() for p in nets.named()[k].params] for k in names}


@pytest.mark.parametrize("algo", ["ppo", "ppoem", "soap"])
def test_zero_advantage_leaves_policy_unchanged(algo):
    batch, nets, rng = _batch(algo, 5)
    key = {"ppo": "advantages", "soap": "a_goa", "ppoem": "a_pair"}[algo]
    batch[key] = np.zeros_like(batch[key])
    hp = HyperParams(n_options=3, ent_coef=0.0, n_epochs=3, batch_size=8)
    names = [k for k in nets.named() if k != "value"]
    before = _policy_snapshot(nets, names)
    update_epoch(batch, nets, Optimizers(nets, hp.lr), hp, algo, rng)
    for k in names:
        for a, b in zip(before[k], nets.named()[k].params):
            np.testing.assert_array_equal(a, b)


def test_ppoc_zero_advantage_leaves_termination_and_inter_unchanged():
    batch, nets, rng = _batch("ppoc", 5)
    batch["advantages"] = np.zeros_like(batch["advantages"])
    hp = HyperParams(n_options=3, ent_coef=0.0, n_epochs=2, batch_size=8)
    before = _policy_snapshot(nets, ["termination", "inter", "policy"])
    update_epoch(batch, nets, Optimizers(nets, hp.lr), hp, "ppoc", rng)
    for k in before:
        for a, b in zip(before[k], nets.named()[k].params):
            np.testing.assert_array_equal(a, b)


def test_ppoc_termination_gradient_sign():
    # positive advantage should lower the termination probability of the sampled option
    batch, nets, rng = _batch("ppoc", 6)
    batch["advantages"] = np.ones_like(batch["advantages"])
    hp = HyperParams(n_options=3, ent_coef=0.0, vf_coef=0.0, lr=1e-2, n_epochs=5,
                     batch_size=len(batch["actions"]), max_grad_norm=100.0)
    idx = np.arange(len(batch["actions"]))
    before = nets.termination_probs(batch["obs"])[idx, batch["options"]].mean()
    update_epoch(batch, nets, Optimizers(nets, hp.lr), hp, "ppoc", rng)
    after = nets.termination_probs(batch["obs"])[idx, batch["options"]].mean()
    assert after < before


def test_ppoc_inter_gradient_only_on_fresh_draws():
    batch, nets, rng = _batch("ppoc", 8)
    batch["fresh"] = np.zeros_like(batch["fresh"])
    hp = HyperParams(n_options=3, ent_coef=0.0)
    _, grads, _ = LOSSES["ppoc"](batch, nets, hp)
    assert np.all(_flat(grads["inter"]) == 0.0)


def test_full_batch_single_epoch_takes_one_adam_step():
    batch, nets, rng = _batch("soap", 9)
    N = len(batch["actions"])
    hp = HyperParams(n_options=3, n_epochs=1, batch_size=N)
    opt = Optimizers(nets, hp.lr)
    update_epoch(batch, nets, opt, hp, "soap", rng)
    assert set(opt.steps.values()) == {1}
    hp2 = HyperParams(n_options=3, n_epochs=3, batch_size=5)
    update_epoch(batch, nets, opt, hp2, "soap", rng)
    assert set(opt.steps.values()) == {1 + 3 * int(np.ceil(N / 5))}


def test_update_is_deterministic_given_seed():
    outs = []
    for _ in range(2):
        batch, nets, _ = _batch("ppoem", 10)
        hp = HyperParams(n_options=3, n_epochs=2, batch_size=7)
        info = update_epoch(batch, nets, Optimizers(nets, hp.lr), hp, "ppoem",
                            np.random.default_rng(1))
        outs.append((info, _flat(nets.policy.params)))
    assert outs[0][0] == outs[1][0]
    np.testing.assert_array_equal(outs[0][1], outs[1][1])


def test_update_restores_parameters_on_nan():
    batch, nets, rng = _batch("soap", 11)
    batch["a_goa"] = batch["a_goa"].copy()
    batch["a_goa"][-1, 0] = np.nan
    hp = HyperParams(n_options=3, n_epochs=2, batch_size=4)
    before = {k: [p.copy() for p in net.params] for k, net in nets.named().items()}
    with pytest.raises(NumericalDegeneracyError):
        update_epoch(batch, nets, Optimizers(nets, hp.lr), hp, "soap", rng)
    for k, net in nets.named().items():
        for a, b in zip(before[k], net.params):
            np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("algo", ["ppo", "ppoc", "ppoem", "soap"])
def test_update_reduces_loss_on_fixed_batch(algo):
    batch, nets, rng = _batch(algo, 12, T=64)
    hp = HyperParams(n_options=3, n_epochs=1, batch_size=64, lr=1e-3)
    loss0 = LOSSES[algo](batch, nets, hp)[0]
    opt = Optimizers(nets, hp.lr)
    for _ in range(20):
        update_epoch(batch, nets, opt, hp, algo, rng)
    assert LOSSES[algo](batch, nets, hp)[0] < loss0
