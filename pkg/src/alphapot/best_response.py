"""Exact best responses against fixed opponents, and exploitability."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .evaluation import exact_values
from .game import JointPolicy, MarkovGame, opponent_marginal

CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class InducedMDP:
    """Single-agent MDP faced by one player when opponents are held fixed."""

    rewards: np.ndarray       # (S, A)
    transitions: np.ndarray   # (S, A, S)
    discount: float

    @property
    def num_states(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_actions(self) -> int:
        return self.rewards.shape[1]

    def evaluate(self, actions) -> np.ndarray:
        """Value vector of the deterministic policy ``actions[s]``."""
        s = np.arange(self.num_states)
        a = np.asarray(actions, dtype=np.int64)
        lhs = np.eye(self.num_states) - self.discount * self.transitions[s, a]
        return np.linalg.solve(lhs, self.rewards[s, a])

    def q_values(self, values) -> np.ndarray:
        return self.rewards + self.discount * self.transitions @ values


def induce_mdp(game: MarkovGame, policy: JointPolicy, player: int) -> InducedMDP:
    """Marginalise rewards and transitions over ``a_-i ~ pi_-i``; ``pi_i`` is ignored."""
    player = game.check_player(player)
    r = opponent_marginal(game, policy, player, game.rewards[player][:, :, None])[:, :, 0]
    p = opponent_marginal(game, policy, player, game.transitions)
    return InducedMDP(r, p, game.discount)


def solve_mdp(mdp: InducedMDP, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Optimal values and a deterministic optimal policy by policy iteration.

    An action is switched only when it beats the incumbent by more than
    ``tol * (1 + |Q|)``; the replacement is the lowest-index action within
    that tolerance of the maximum. This makes the iteration deterministic and
    stops it from cycling on rounding noise.
    """
    n_s, n_a = mdp.rewards.shape
    actions = np.argmax(mdp.rewards, axis=1)
    limit = n_a ** n_s + 1 if n_s * np.log(max(n_a, 2)) < 40 else 10**12
    for _ in range(int(limit)):
        values = mdp.evaluate(actions)
        q = mdp.q_values(values)
        best = q.max(axis=1)
        slack = tol * (1.0 + np.abs(best))
        current = q[np.arange(n_s), actions]
        improve = best - current > slack
        if not improve.any():
            return values, actions
        # lowest index within tolerance of the maximum
        candidates = np.argmax(q >= (best - slack)[:, None], axis=1)
        actions = np.where(improve, candidates, actions)
    raise SolverError("policy iteration did not terminate")


@dataclass
class ExploitabilityReport:
    br_values: np.ndarray       # (I,) V_i(mu, pi_i^dagger, pi_-i)
    values: np.ndarray          # (I,) V_i(mu, pi)
    regrets: np.ndarray         # (I,) clamped at 0
    br_policies: list           # per player, (S,) deterministic actions
    state_regrets: np.ndarray   # (I, S) regret with mu = e_s

    @property
    def max_regret(self) -> float:
        return float(self.regrets.max())

    @property
    def worst_state_regret(self) -> float:
        """Max regret over players and single-state initial distributions."""
        return float(self.state_regrets.max())

    def to_rows(self, iteration: int | None = None) -> list:
        return [
            {"iteration": iteration, "player": i, "regret": float(r)}
            for i, r in enumerate(self.regrets)
        ]

    def to_dict(self) -> dict:
        return {
            "br_values": self.br_values.tolist(),
            "values": self.values.tolist(),
            "regrets": self.regrets.tolist(),
            "max_regret": self.max_regret,
            "worst_state_regret": self.worst_state_regret,
            "br_policies": [p.tolist() for p in self.br_policies],
        }


def _clamp(x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=float)
    x[(x < 0) & (x >= -CLAMP_TOL)] = 0.0
    return x


def exploitability(game: MarkovGame, policy: JointPolicy, initial=None, values=None) -> ExploitabilityReport:
    """Per-player gain from an exact best response, measured at ``initial`` (default: game's mu)."""
    mu = game.initial_dist if initial is None else np.asarray(initial, dtype=float)
    if values is None:
        values = exact_values(game, policy)
    br_vals, br_pols, state_reg = [], [], []
    for i in range(game.num_players):
        v_star, acts = solve_mdp(induce_mdp(game, policy, i))
        br_vals.append(v_star)
        br_pols.append(acts)
        state_reg.append(v_star - values[i])
    br_vals = np.array(br_vals)
    br_mu = br_vals @ mu
    cur_mu = values @ mu
    return ExploitabilityReport(
        br_values=br_mu,
        values=cur_mu,
        regrets=_clamp(br_mu - cur_mu),
        br_policies=br_pols,
        state_regrets=_clamp(np.array(state_reg)),
    )
