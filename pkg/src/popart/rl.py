"""Desk-scale double Q-learning with adaptively normalized targets.

The environment is a short chain: from each state the agent can advance
toward a terminal state or stay put, and the only reward is a single
(possibly huge) payoff on entering the terminal state.  Because the
bootstrapped targets inherit the reward's magnitude, this tiny problem
already exercises the scale-robustness the normalization is for: the
same hyperparameters should learn the value function whether the
terminal reward is 1 or 10**6.

``value_iteration`` gives the exact action values, used as the oracle
for accuracy checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import Mlp
from .schedules import bias_corrected
from .stats import Normalizer
from .training import OutputLayer, popart_sgd_step, predict


@dataclass
class ChainMdp:
    """Linear chain with an absorbing terminal state at the right end.

    Action 0 advances one state, action 1 stays.  Entering the terminal
    state yields ``terminal_reward``; every other transition is free.
    """

    n_states: int = 5
    terminal_reward: float = 1000.0
    gamma: float = 0.99

    n_actions: int = 2
    ADVANCE: int = 0
    STAY: int = 1

    @property
    def terminal(self) -> int:
        return self.n_states - 1

    def step(self, s: int, a: int) -> tuple[int, float, bool]:
        if a == self.ADVANCE:
            s2 = s + 1
        else:
            s2 = s
        r = self.terminal_reward if (s2 == self.terminal and s != self.terminal) else 0.0
        return s2, r, s2 == self.terminal


def value_iteration(mdp: ChainMdp, tol: float = 1e-12) -> np.ndarray:
    """Exact Q values for the non-terminal states, shape (n_states-1, 2)."""
    n = mdp.n_states - 1
    v = np.zeros(mdp.n_states)
    while True:
        q = np.empty((n, 2))
        for s in range(n):
            s2, r, done = mdp.step(s, mdp.ADVANCE)
            q[s, mdp.ADVANCE] = r + (0.0 if done else mdp.gamma * v[s2])
            q[s, mdp.STAY] = mdp.gamma * v[s]
        v_new = np.concatenate([q.max(axis=1), [0.0]])
        if np.max(np.abs(v_new - v)) < tol:
            return q
        v = v_new


@dataclass
class EpisodeMetrics:
    steps: int
    total_reward: float
    grad_norms: list[float] = field(default_factory=list)
    normalized_errors: list[float] = field(default_factory=list)


class DoubleQAgent:
    """Online double Q-learning on a state-action one-hot encoding.

    The online network carries the adaptive normalization; the target
    network is a periodic copy (every ``copy_period`` steps exactly) used
    to evaluate the action the online network selects.
    """

    def __init__(
        self,
        mdp: ChainMdp,
        hidden=(20, 20),
        alpha: float = 3e-4,
        beta: float = 0.01,
        epsilon_greedy: float = 0.1,
        copy_period: int = 500,
        max_episode_steps: int = 100,
        seed: int = 0,
    ):
        self.mdp = mdp
        self.alpha = alpha
        self.epsilon_greedy = epsilon_greedy
        self.copy_period = copy_period
        self.max_episode_steps = max_episode_steps
        self.rng = np.random.default_rng(seed)
        n_in = mdp.n_states + mdp.n_actions
        self.net = Mlp([n_in, *hidden], rng=self.rng)
        self.layer = OutputLayer(
            1,
            hidden[-1],
            normalizer=Normalizer(k=1, schedule=bias_corrected(beta)),
            rng=self.rng,
        )
        self.target_net = self.net.copy()
        self.target_layer = self.layer.copy()
        self.step_count = 0

    def _encode(self, s: int, a: int) -> np.ndarray:
        x = np.zeros(self.mdp.n_states + self.mdp.n_actions)
        x[s] = 1.0
        x[self.mdp.n_states + a] = 1.0
        return x

    def q_values(self, s: int, target: bool = False) -> np.ndarray:
        net = self.target_net if target else self.net
        layer = self.target_layer if target else self.layer
        return np.array(
            [predict(net, layer, self._encode(s, a))[0] for a in range(self.mdp.n_actions)]
        )

    def act(self, s: int) -> int:
        if self.rng.random() < self.epsilon_greedy:
            return int(self.rng.integers(self.mdp.n_actions))
        return int(np.argmax(self.q_values(s)))

    def double_q_target(self, transition) -> float:
        """Reward plus the discounted target-network value of the action
        the online network prefers at the next state; ties go to the
        lowest action index, terminal transitions drop the bootstrap.
        """
        s, a, r, s2, done = transition
        if done:
            return float(r)
        a_star = int(np.argmax(self.q_values(s2)))
        return float(r + self.mdp.gamma * self.q_values(s2, target=True)[a_star])

    def learn_transition(self, transition, hook=None):
        s, a, r, s2, done = transition
        y = self.double_q_target(transition)
        report = popart_sgd_step(
            self.net, self.layer, self._encode(s, a), y, self.alpha, hook=hook
        )
        self.step_count += 1
        if self.step_count % self.copy_period == 0:
            self.target_net = self.net.copy()
            self.target_layer = self.layer.copy()
        return y, report

    def train_episode(self, hook=None) -> EpisodeMetrics:
        """Run one episode, one learning step per transition."""
        metrics = EpisodeMetrics(steps=0, total_reward=0.0)
        s = 0
        for _ in range(self.max_episode_steps):
            a = self.act(s)
            s2, r, done = self.mdp.step(s, a)
            _, report = self.learn_transition((s, a, r, s2, done), hook=hook)
            metrics.steps += 1
            metrics.total_reward += r
            metrics.grad_norms.append(report.gradient_norm)
            metrics.normalized_errors.append(float(np.abs(report.normalized_error).max()))
            if done:
                break
            s = s2
        return metrics

    def q_table(self) -> np.ndarray:
        """Learned Q values for the non-terminal states, shape (n-1, 2)."""
        return np.array([self.q_values(s) for s in range(self.mdp.terminal)])

    def greedy_policy(self) -> np.ndarray:
        return np.argmax(self.q_table(), axis=1)


def train(
    agent: DoubleQAgent,
    max_steps: int = 50_000,
    check_every: int = 2000,
    rel_tol: float | None = None,
    hook=None,
) -> list[EpisodeMetrics]:
    """Train for up to ``max_steps`` transitions.

    If ``rel_tol`` is given, training stops early once every learned
    state-action value is within that relative tolerance of the exact
    values from :func:`value_iteration`.
    """
    q_star = value_iteration(agent.mdp) if rel_tol is not None else None
    history: list[EpisodeMetrics] = []
    next_check = check_every
    while agent.step_count < max_steps:
        history.append(agent.train_episode(hook=hook))
        if q_star is not None and agent.step_count >= next_check:
            next_check = agent.step_count + check_every
            err = np.abs(agent.q_table() - q_star) / np.abs(q_star)
            if float(err.max()) <= rel_tol:
                break
    return history
