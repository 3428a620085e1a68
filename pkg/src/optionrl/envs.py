"""Episodic environments: a fork-at-the-end corridor POMDP and classic cart-pole."""
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, UsageError

BLUE, RED, NEUTRAL = 0, 1, 2
UP, DOWN = 0, 1
LEFT, RIGHT = 0, 1


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    truncated: bool = False


@dataclass(frozen=True)
class CorridorConfig:
    length: int = 3
    reward_good: float = 1.0
    reward_bad: float = -1.0

    def __post_init__(self):
        if isinstance(self.length, bool) or not isinstance(self.length, (int, np.integer)) \
                or self.length < 2:
            raise ConfigurationError(f"corridor length must be an integer >= 2, got {self.length}")


class Env:
    obs_dim: int
    n_actions: int
    name: str

    def __init__(self, rng=None):
        self.rng = rng if rng is not None else np.random.default_rng()
        self._active = False

    def _require_active(self):
        if not self._active:
            raise UsageError(f"{self.name}: step() called before reset() or after episode end")


class Corridor(Env):
    """The start cell is blue or red with equal probability; only the current cell's
    colour is observed. Every action moves one cell right until the last cell, where the
    action picks the top (``UP``) or bottom (``DOWN``) exit: blue rewards up, red rewards
    down. Episodes therefore last exactly ``length`` steps.
    """

    obs_dim = 3
    n_actions = 2
    name = "corridor"

    def __init__(self, config=None, rng=None, *, length=None):
        super().__init__(rng)
        if config is None:
            config = CorridorConfig(length=3 if length is None else length)
        self.config = config
        self.position = 0
        self.start_color = BLUE

    @property
    def length(self):
        return self.config.length

    @staticmethod
    def _one_hot(color):
        obs = np.zeros(3)
        obs[color] = 1.0
        return obs

    def reset(self, color=None):
        self.start_color = int(self.rng.integers(2)) if color is None else int(color)
        self.position = 0
        self._active = True
        return self._one_hot(self.start_color)

    def step(self, action):
        self._require_active()
        if action not in (UP, DOWN):
            raise ConfigurationError(f"corridor action must be 0 or 1, got {action!r}")
        if self.position < self.length - 1:
            self.position += 1
            return StepResult(self._one_hot(NEUTRAL), 0.0, False)
        self._active = False
        wanted = UP if self.start_color == BLUE else DOWN
        reward = self.config.reward_good if action == wanted else self.config.reward_bad
        return StepResult(self._one_hot(NEUTRAL), float(reward), True)


class CartPole(Env):
    """Classic cart-pole with Euler integration; +1 reward per step, capped at 500 steps."""

    obs_dim = 4
    n_actions = 2
    name = "cartpole"

    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    length = 0.5  # half the pole length
    force_mag = 10.0
    tau = 0.02
    theta_threshold = 12 * 2 * math.pi / 360
    x_threshold = 2.4
    max_steps = 500

    def __init__(self, rng=None):
        super().__init__(rng)
        self.state = np.zeros(4)
        self.steps = 0

    def reset(self, state=None):
        if state is None:
            self.state = self.rng.uniform(-0.05, 0.05, size=4)
        else:
            self.state = np.array(state, dtype=np.float64)
        self.steps = 0
        self._active = True
        return self.state.copy()

    def step(self, action):
        self._require_active()
        if action not in (LEFT, RIGHT):
            raise ConfigurationError(f"cartpole action must be 0 or 1, got {action!r}")
        x, x_dot, theta, theta_dot = self.state
        force = self.force_mag if action == RIGHT else -self.force_mag
        total_mass = self.masspole + self.masscart
        polemass_length = self.masspole * self.length
        cos, sin = math.cos(theta), math.sin(theta)
        temp = (force + polemass_length * theta_dot**2 * sin) / total_mass
        theta_acc = (self.gravity * sin - cos * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * cos**2 / total_mass)
        )
        x_acc = temp - polemass_length * theta_acc * cos / total_mass
        x = x + self.tau * x_dot
        x_dot = x_dot + self.tau * x_acc
        theta = theta + self.tau * theta_dot
        theta_dot = theta_dot + self.tau * theta_acc
        self.state = np.array([x, x_dot, theta, theta_dot])
        self.steps += 1

        failed = abs(x) > self.x_threshold or abs(theta) > self.theta_threshold
        truncated = not failed and self.steps >= self.max_steps
        if failed or truncated:
            self._active = False
        return StepResult(self.state.copy(), 1.0, failed, truncated)


ENVS = ("corridor", "cartpole")


def make_env(name, rng=None, **params):
    """Build an environment by name: ``corridor`` (takes ``length``) or ``cartpole``."""
    if name == "corridor":
        length = params.pop("length", 3)
        if params:
            raise ConfigurationError(f"corridor takes only 'length', got {sorted(params)}")
        return Corridor(CorridorConfig(length=length), rng=rng)
    if name == "cartpole":
        if params:
            raise ConfigurationError(f"cartpole takes no parameters, got {sorted(params)}")
        return CartPole(rng=rng)
    raise ConfigurationError(f"unknown environment {name!r}")
