"""Scaled forward-backward recursions over discrete options.

Notation used throughout: for a step with realized action ``a``, the *joint table* is
``joint[z, z'] = sub_policy[z, a] * transition[z, a, z']``, the probability of emitting
``a`` and moving to option ``z'`` from option ``z``. ``zeta`` is the option distribution
given the history so far, ``alpha`` the marginal probability of the realized action and
``beta`` the likelihood ratio of the remaining episode given the option.
"""
import numpy as np

from .exceptions import ConfigurationError, InternalConsistencyError, NumericalDegeneracyError

ALPHA_FLOOR = 1e-30


def init_zeta(n):
    if int(n) != n or n < 1:
        raise ConfigurationError(f"option count must be >= 1, got {n}")
    return np.full(int(n), 1.0 / n)


def joint_table(sub_policy, transition, action):
    """(n, n) table p(a, z' | s, z) for the realized action."""
    return sub_policy[:, action, None] * transition[:, action, :]


def forward_joint(zeta, joint, step=None):
    unnorm = zeta @ joint
    alpha = float(unnorm.sum())
    if not alpha > ALPHA_FLOOR:
        where = "" if step is None else f" at step {step}"
        raise NumericalDegeneracyError(f"action probability {alpha!r} below floor{where}")
    return alpha, unnorm / alpha


def forward_step(zeta, sub_policy, transition, action, step=None):
    """One step of the option forward recursion. Returns (alpha, next_zeta)."""
    return forward_joint(zeta, joint_table(sub_policy, transition, action), step)


def forward_pass(joints, starts):
    """Run the recursion over a flat sequence; ``starts[t]`` resets zeta to uniform.

    Returns (zetas (T, n), alphas (T,)), zetas[t] being the distribution *before* step t.
    """
    T, n, _ = joints.shape
    zetas = np.empty((T, n))
    alphas = np.empty(T)
    zeta = init_zeta(n)
    for t in range(T):
        if starts[t]:
            zeta = init_zeta(n)
        zetas[t] = zeta
        alphas[t], zeta = forward_joint(zeta, joints[t], t)
    return zetas, alphas


def backward_pass(joints, alphas, dones):
    """Backward feedback for every step of a flat buffer of complete episodes.

    ``dones[t]`` marks the last step of an episode (terminal or truncated); the boundary
    value after such a step is all ones. Returns (beta (T, n), beta_next (T, n)) where
    ``beta[t]`` is the feedback for the option at step t and ``beta_next[t]`` the one for
    the option entering step t + 1 (ones at episode ends).
    """
    T, n, _ = joints.shape
    beta = np.empty((T, n))
    beta_next = np.empty((T, n))
    nxt = np.ones(n)
    for t in range(T - 1, -1, -1):
        if dones[t]:
            nxt = np.ones(n)
        beta_next[t] = nxt
        cur = joints[t] @ nxt / alphas[t]
        if not np.all(np.isfinite(cur)):
            raise NumericalDegeneracyError(f"non-finite backward feedback at step {t}")
        beta[t] = cur
        nxt = cur
    return beta, beta_next


def joint_posterior(zeta, beta_next, joint, alpha, atol=1e-6):
    """p(z_t, z_{t+1} | episode) = joint * zeta[:, None] * beta_next[None, :] / alpha.

    Accepts a single step or a leading batch axis.
    """
    zeta = np.asarray(zeta)
    alpha = np.asarray(alpha, dtype=np.float64)
    post = joint * zeta[..., :, None] * beta_next[..., None, :] / alpha[..., None, None]
    total = post.sum(axis=(-2, -1))
    if np.any(np.abs(total - 1.0) > atol):
        worst = float(np.max(np.abs(total - 1.0)))
        raise InternalConsistencyError(f"joint posterior mass off by {worst:.3g}")
    return post


def option_transition_posterior(joint_post):
    """Row-normalize a joint posterior into p(z' | z, episode); empty rows become uniform."""
    joint_post = np.asarray(joint_post, dtype=np.float64)
    n = joint_post.shape[-1]
    rows = joint_post.sum(axis=-1, keepdims=True)
    empty = rows <= 0.0
    safe = np.where(empty, 1.0, rows)
    return np.where(empty, 1.0 / n, joint_post / safe)
