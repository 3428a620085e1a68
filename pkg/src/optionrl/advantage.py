"""Advantage estimators: scalar GAE, option-conditioned GAE and the generalized option
advantage (GOA) recursion that back-propagates option policy gradients through zeta.

Two kinds of episode boundary are distinguished. ``dones[t]`` cuts every backward
recursion after step t (termination, truncation or the end of the collected segment).
``terminals[t]`` additionally zeroes the bootstrap value; it defaults to ``dones``.
"""
from dataclasses import dataclass

import numpy as np

from ._validation import check_interval
from .exceptions import ConfigurationError, NumericalDegeneracyError


@dataclass(frozen=True)
class GaeParams:
    gamma: float = 0.99
    lam: float = 0.95

    def __post_init__(self):
        check_interval(self.gamma, "gamma", 0.0, 1.0, closed_high=False)
        check_interval(self.lam, "lambda", 0.0, 1.0)


def _split_values(values, next_values, T):
    values = np.asarray(values, dtype=np.float64)
    if next_values is None:
        if values.shape[0] != T + 1:
            raise ConfigurationError(f"need {T + 1} values (bootstrap included), got {values.shape[0]}")
        return values[:T], values[1:]
    next_values = np.asarray(next_values, dtype=np.float64)
    if values.shape[0] != T or next_values.shape[0] != T:
        raise ConfigurationError("values and next_values must have one row per step")
    return values, next_values


def scalar_gae(rewards, values, dones, params=GaeParams(), *, next_values=None, terminals=None):
    rewards = np.asarray(rewards, dtype=np.float64)
    T = rewards.shape[0]
    v, nv = _split_values(values, next_values, T)
    dones = np.asarray(dones, dtype=bool)
    terminals = dones if terminals is None else np.asarray(terminals, dtype=bool)
    if dones.shape[0] != T or terminals.shape[0] != T:
        raise ConfigurationError("dones must have one entry per step")
    g, gl = params.gamma, params.gamma * params.lam
    adv = np.zeros(T)
    last = 0.0
    for t in range(T - 1, -1, -1):
        if dones[t]:
            last = 0.0
        delta = rewards[t] + g * (0.0 if terminals[t] else nv[t]) - v[t]
        last = delta + gl * last
        adv[t] = last
    return adv


@dataclass
class OptionAdvantages:
    a_pair: np.ndarray  # (T, n, n)
    a_opt: np.ndarray  # (T, n)
    v_target: np.ndarray  # (T, n)
    a_goa: np.ndarray = None  # (T, n)
    utility: np.ndarray = None  # (T, n)
    weighting: np.ndarray = None  # (T, n, n)


def option_gae(rewards, values, dones, weights, params=GaeParams(), *, next_values=None,
               terminals=None, atol=1e-6):
    """A(z, z') = r + g V'(z') - V(z) + lam g A_next(z');  A(z) = sum_z' w(z'|z) A(z, z').

    ``weights[t]`` is a row-stochastic (n, n) table: the posterior option transition for
    the hindsight (EM) variant, or the option policy itself for the causal variant.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    T = rewards.shape[0]
    v, nv = _split_values(values, next_values, T)
    weights = np.asarray(weights, dtype=np.float64)
    n = v.shape[1]
    if weights.shape != (T, n, n):
        raise ConfigurationError(f"weights shape {weights.shape} != {(T, n, n)}")
    if np.any(np.abs(weights.sum(axis=-1) - 1.0) > atol) or np.any(weights < 0):
        raise ConfigurationError("option transition weights are not row-normalized")
    dones = np.asarray(dones, dtype=bool)
    terminals = dones if terminals is None else np.asarray(terminals, dtype=bool)
    g, gl = params.gamma, params.gamma * params.lam
    a_pair = np.empty((T, n, n))
    a_opt = np.empty((T, n))
    nxt = np.zeros(n)
    for t in range(T - 1, -1, -1):
        if dones[t]:
            nxt = np.zeros(n)
        boot = np.zeros(n) if terminals[t] else nv[t]
        pair = rewards[t] + g * boot[None, :] - v[t][:, None] + gl * nxt[None, :]
        a_pair[t] = pair
        nxt = np.sum(weights[t] * pair, axis=-1)
        a_opt[t] = nxt
    return OptionAdvantages(a_pair=a_pair, a_opt=a_opt, v_target=v + a_opt)


def goa_backward(a_opt, zetas, joints, alphas, dones):
    """Generalized option advantage, option utility and policy-gradient weighting.

    Processes steps in reverse. With c_t = sum_z A_t(z) zeta_t(z):

        goa_t(z')  = c_t + (1 - d_t) [U_{t+1}(z') - sum_z'' U_{t+1}(z'') zeta_{t+1}(z'')]
        U_t(z)     = sum_z' goa_t(z') joint_t(z, z') / alpha_t
        W_t(z, z') = goa_t(z') zeta_t(z) / alpha_t

    so that sum_t c_t grad log alpha_t == sum_t sum_{z,z'} W_t(z, z') grad joint_t(z, z')
    when zeta is unrolled through the forward recursion.
    """
    a_opt = np.asarray(a_opt, dtype=np.float64)
    T, n = a_opt.shape
    a_goa = np.empty((T, n))
    utility = np.empty((T, n))
    weighting = np.empty((T, n, n))
    u_next = np.zeros(n)
    zeta_next = np.full(n, 1.0 / n)
    for t in range(T - 1, -1, -1):
        zeta, joint, alpha = zetas[t], joints[t], alphas[t]
        base = float(a_opt[t] @ zeta)
        if dones[t]:
            goa = np.full(n, base)
        else:
            goa = base + (u_next - u_next @ zeta_next)
        u = joint @ goa / alpha
        if not (np.all(np.isfinite(goa)) and np.all(np.isfinite(u))):
            raise NumericalDegeneracyError(f"non-finite option advantage at step {t}")
        a_goa[t] = goa
        utility[t] = u
        weighting[t] = np.outer(zeta, goa) / alpha
        u_next = u
        zeta_next = zeta
    return a_goa, utility, weighting
