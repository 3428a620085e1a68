import numpy as np
import pytest

from optionrl.envs import CartPole, Corridor, CorridorConfig
from optionrl.inference import forward_pass
from optionrl.nets import OptionNets, PPOCNets
from optionrl.rollout import Collector, OptionSamplingCollector, RolloutBuffer, collect, collect_ppoc


def _corridor(seed, L=3):
    return Corridor(CorridorConfig(length=L), np.random.default_rng(seed))


def _option_nets(seed, n=3, **kw):
    return OptionNets(3, 2, n, (8,), np.random.default_rng(seed), policy_gain=1.0, **kw)


def test_buffer_length_equals_horizon():
    for horizon in (1, 7, 50):
        buf = collect(_corridor(0), _option_nets(0), np.random.default_rng(1), horizon)
        assert len(buf) == horizon
        assert buf.obs.shape == (horizon, 3)
        assert buf.joints.shape == (horizon, 3, 3)


def test_recorded_alphas_match_recomputation():
    nets = _option_nets(2)
    buf = collect(_corridor(2, L=4), nets, np.random.default_rng(3), 64)
    sub = nets.sub_policy_probs(buf.obs)
    idx = np.arange(len(buf))
    trans = nets.option_policy_probs(buf.obs, buf.actions)
    joints = sub[idx, :, buf.actions][:, :, None] * trans
    np.testing.assert_allclose(joints, buf.joints, atol=1e-12)
    np.testing.assert_allclose(np.einsum("tn,tnm->t", buf.zetas, buf.joints), buf.alphas, atol=1e-12)


def test_zeta_replays_through_forward_pass():
    buf = collect(_corridor(4, L=5), _option_nets(4), np.random.default_rng(5), 40)
    zetas, alphas = forward_pass(buf.joints, buf.starts)
    np.testing.assert_allclose(zetas, buf.zetas, atol=1e-12)
    np.testing.assert_allclose(alphas, buf.alphas, atol=1e-12)


def test_zeta_uniform_after_every_done():
    buf = collect(_corridor(6), _option_nets(6), np.random.default_rng(7), 30)
    for t in np.flatnonzero(buf.dones[:-1]):
        np.testing.assert_array_equal(buf.zetas[t + 1], np.full(3, 1 / 3))
        assert buf.starts[t + 1]
    assert np.array_equal(buf.starts[1:], buf.dones[:-1])


def test_corridor_episodes_have_exactly_L_steps():
    buf = collect(_corridor(8, L=3), _option_nets(8), np.random.default_rng(9), 30)
    _, counts = np.unique(buf.episode_ids, return_counts=True)
    assert np.all(counts == 3)
    assert len(buf.episode_returns) == 10
    assert set(buf.episode_returns) <= {-1.0, 1.0}


def test_single_deterministic_option_gives_unit_alpha():
    nets = OptionNets(3, 2, 1, (4,), np.random.default_rng(0), with_transition=False)
    nets.policy.weights[-1][...] = 0.0
    nets.policy.biases[-1][...] = [50.0, -50.0]
    buf = collect(_corridor(0), nets, np.random.default_rng(0), 12)
    np.testing.assert_allclose(buf.alphas, 1.0, atol=1e-12)
    assert np.all(buf.actions == 0)


def test_uniform_policy_action_frequency():
    nets = _option_nets(0)
    for net in (nets.policy, nets.transition):
        net.weights[-1][...] = 0.0
        net.biases[-1][...] = 0.0
    buf = collect(_corridor(1), nets, np.random.default_rng(2), 10_000)
    # binomial(10000, 0.5): 3 sigma = 150
    assert abs(int(buf.actions.sum()) - 5000) <= 150


def test_horizon_cut_marks_done_and_bootstraps():
    nets = _option_nets(3)
    buf = collect(_corridor(3, L=5), nets, np.random.default_rng(3), 7)
    assert buf.dones[4] and buf.terminals[4]
    assert buf.dones[-1] and not buf.terminals[-1]
    np.testing.assert_array_equal(buf.next_values[4], 0.0)
    # the bootstrap at the cut is the value of the observation that follows
    assert np.all(np.isfinite(buf.next_values[-1])) and np.any(buf.next_values[-1] != 0)


def test_collector_continues_episode_across_calls():
    nets = _option_nets(5)
    col = Collector(_corridor(5, L=5), nets, np.random.default_rng(5))
    first = col.collect(3)
    second = col.collect(4)
    assert not second.starts[0]
    assert second.episode_ids[0] == first.episode_ids[-1]
    joined = np.concatenate([first.joints, second.joints])
    zetas, _ = forward_pass(joined, np.concatenate([first.starts, second.starts]))
    np.testing.assert_allclose(zetas[3:], second.zetas, atol=1e-12)


def test_complete_episodes_extends_to_termination():
    col = Collector(_corridor(5, L=5), _option_nets(5), np.random.default_rng(5))
    buf = col.collect(7, complete_episodes=True)
    assert len(buf) == 10
    assert np.array_equal(buf.dones, buf.terminals)


def test_seeded_collection_is_reproducible():
    a = collect(CartPole(np.random.default_rng(1)), OptionNets(4, 2, 2, (8,), np.random.default_rng(0)),
                np.random.default_rng(2), 100)
    b = collect(CartPole(np.random.default_rng(1)), OptionNets(4, 2, 2, (8,), np.random.default_rng(0)),
                np.random.default_rng(2), 100)
    np.testing.assert_array_equal(a.actions, b.actions)
    np.testing.assert_array_equal(a.zetas, b.zetas)


def test_buffer_save_load_roundtrip(tmp_path):
    buf = collect(_corridor(0), _option_nets(0), np.random.default_rng(0), 9)
    path = tmp_path / "buf.npz"
    buf.save(path)
    back = RolloutBuffer.load(path)
    for name in ("obs", "actions", "zetas", "alphas", "joints", "next_values", "dones"):
        np.testing.assert_array_equal(getattr(back, name), getattr(buf, name))
    assert back.episode_returns == buf.episode_returns


def _ppoc_nets(seed, term_bias):
    nets = PPOCNets(3, 2, 3, (8,), np.random.default_rng(seed), policy_gain=1.0)
    nets.termination.weights[-1][...] = 0.0
    nets.termination.biases[-1][...] = term_bias
    return nets


def test_ppoc_never_terminating_keeps_option():
    buf = collect_ppoc(_corridor(0, L=6), _ppoc_nets(0, -60.0), np.random.default_rng(0), 60)
    for ep in np.unique(buf.episode_ids):
        opts = buf.options[buf.episode_ids == ep]
        assert np.all(opts == opts[0])
    assert np.array_equal(buf.fresh, buf.starts)


def test_ppoc_always_terminating_redraws_every_step():
    buf = collect_ppoc(_corridor(0, L=6), _ppoc_nets(0, 60.0), np.random.default_rng(0), 60)
    assert np.all(buf.fresh)


def test_ppoc_next_options_follow_the_sampled_chain():
    buf = collect_ppoc(_corridor(1, L=4), _ppoc_nets(1, 0.0), np.random.default_rng(1), 41)
    inner = ~buf.dones[:-1]
    np.testing.assert_array_equal(buf.next_options[:-1][inner], buf.options[1:][inner])
    assert len(buf) == 41 and buf.dones[-1]


def test_ppoc_action_probs_recorded():
    nets = _ppoc_nets(2, 0.0)
    buf = collect_ppoc(_corridor(2), nets, np.random.default_rng(2), 20)
    idx = np.arange(20)
    want = nets.sub_policy_probs(buf.obs)[idx, buf.options, buf.actions]
    np.testing.assert_allclose(buf.action_probs, want, atol=1e-15)


def test_ppoc_collector_is_reproducible():
    runs = [OptionSamplingCollector(_corridor(3), _ppoc_nets(3, 0.0), np.random.default_rng(4)).collect(50)
            for _ in range(2)]
    np.testing.assert_array_equal(runs[0].options, runs[1].options)
    np.testing.assert_array_equal(runs[0].actions, runs[1].actions)
