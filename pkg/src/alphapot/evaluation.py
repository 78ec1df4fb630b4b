"""Exact and sampled evaluation of a fixed joint policy.

Exact quantities come from dense linear solves of ``(I - delta P^pi) x = b``;
the matrix is strictly diagonally dominant for ``delta < 1`` so the solve
cannot be singular. Sampled Q-tables come from truncated rollouts.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ParameterError, SolverError
from .game import JointPolicy, MarkovGame, expected_rewards, induced_chain, opponent_marginal, policy_weights

DEFAULT_HORIZON = 20
DEFAULT_EPISODES = 10


@dataclass
class EvaluationResult:
    values: np.ndarray          # (I, S)
    q_tables: list              # per player, (S, A_i)
    visitation: np.ndarray      # (S,)

    def value_at(self, initial) -> np.ndarray:
        """Per-player ``V_i(mu, pi)``."""
        return self.values @ np.asarray(initial, dtype=float)

    def to_dict(self) -> dict:
        return {
            "values": self.values.tolist(),
            "q_tables": [q.tolist() for q in self.q_tables],
            "visitation": self.visitation.tolist(),
        }


@dataclass
class SmoothedEvaluationResult(EvaluationResult):
    tau: float = 0.0
    entropy: np.ndarray = field(default=None)   # (I, S) nu_i(s, pi_i), in [-log A_i, 0]

    def to_dict(self) -> dict:
        doc = super().to_dict()
        doc.update(tau=self.tau, entropy=self.entropy.tolist())
        return doc


@dataclass
class SampledQ:
    """Monte-Carlo Q-table with the sampling parameters that produced it."""

    q: np.ndarray               # (S, A_i)
    stderr: np.ndarray          # (S, A_i)
    player: int
    episodes: int
    horizon: int
    seed: object = None

    def to_dict(self) -> dict:
        return {
            "player": self.player,
            "q": self.q.tolist(),
            "stderr": self.stderr.tolist(),
            "episodes": self.episodes,
            "horizon": self.horizon,
            "seed": self.seed,
        }


def _solve(game: MarkovGame, chain: np.ndarray, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
    lhs = np.eye(game.num_states) - game.discount * chain
    if transpose:
        lhs = lhs.T
    try:
        out = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - impossible for delta < 1
        raise SolverError(f"policy evaluation solve failed: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise SolverError("policy evaluation produced non-finite values")
    return out


def solve_stage(game: MarkovGame, policy: JointPolicy, stage: np.ndarray) -> np.ndarray:
    """Discounted value of per-state stage rewards ``stage`` (shape ``(S,)`` or ``(K, S)``)."""
    chain = induced_chain(game, policy)
    stage = np.asarray(stage, dtype=float)
    return _solve(game, chain, stage.T).T


def exact_values(game: MarkovGame, policy: JointPolicy) -> np.ndarray:
    """``(I, S)`` value functions ``V_i(s, pi)``."""
    chain = induced_chain(game, policy)
    return _solve(game, chain, expected_rewards(game, policy).T).T


def _q_from_values(game: MarkovGame, policy: JointPolicy, values: np.ndarray) -> list:
    values = np.asarray(values, dtype=float)
    future = np.einsum("sjt,it->sji", game.transitions, values)
    out = []
    for i in range(game.num_players):
        table = game.rewards[i][:, :, None] + game.discount * future[:, :, i : i + 1]
        out.append(opponent_marginal(game, policy, i, table)[:, :, 0])
    return out


def exact_q(game: MarkovGame, policy: JointPolicy, values: np.ndarray) -> list:
    """Per-player ``Q_i(s, a_i; pi)`` built from the value functions of ``policy``."""
    game.check_policy(policy)
    values = np.asarray(values, dtype=float)
    if values.shape != (game.num_players, game.num_states):
        raise ParameterError(f"values must have shape {(game.num_players, game.num_states)}")
    return _q_from_values(game, policy, values)


def visitation(game: MarkovGame, policy: JointPolicy, initial=None) -> np.ndarray:
    """Discounted state visitation ``d = (1 - delta) mu^T (I - delta P^pi)^-1``."""
    mu = game.initial_dist if initial is None else np.asarray(initial, dtype=float)
    if mu.shape != (game.num_states,):
        raise ParameterError("initial distribution has the wrong length")
    chain = induced_chain(game, policy)
    return (1.0 - game.discount) * _solve(game, chain, mu, transpose=True)


def evaluate(game: MarkovGame, policy: JointPolicy, initial=None) -> EvaluationResult:
    values = exact_values(game, policy)
    return EvaluationResult(values, exact_q(game, policy, values), visitation(game, policy, initial))


def negentropy(row) -> float:
    """``sum_a p(a) log p(a)`` with ``0 log 0 = 0``."""
    row = np.asarray(row, dtype=float)
    pos = row > 0
    return float(np.sum(row[pos] * np.log(row[pos])))


def policy_entropy(policy: JointPolicy) -> np.ndarray:
    """``(I, S)`` table of ``nu_i(s, pi_i)``."""
    out = np.zeros((len(policy), policy.num_states))
    for i, p in enumerate(policy):
        logs = np.log(p, where=p > 0, out=np.zeros_like(p))
        out[i] = np.sum(p * logs, axis=1)
    return out


def entropy_values(game: MarkovGame, policy: JointPolicy) -> np.ndarray:
    """``(I, S)`` discounted values of the stage reward ``nu_i(s, pi_i)``."""
    return solve_stage(game, policy, policy_entropy(policy))


def smoothed_values(game: MarkovGame, policy: JointPolicy, tau: float, initial=None) -> SmoothedEvaluationResult:
    """Values and Q-tables of the entropy-smoothed game with parameter ``tau``."""
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    ent = policy_entropy(policy)
    stage = expected_rewards(game, policy) - tau * ent
    chain = induced_chain(game, policy)
    vals = _solve(game, chain, stage.T).T
    q_raw = _q_from_values(game, policy, vals)
    q = [q_raw[i] - tau * ent[i][:, None] for i in range(game.num_players)]
    d = (1.0 - game.discount) * _solve(
        game, chain, game.initial_dist if initial is None else np.asarray(initial, float), transpose=True
    )
    return SmoothedEvaluationResult(vals, q, d, tau=float(tau), entropy=ent)


# ---------------------------------------------------------------------------
# sampled evaluation
# ---------------------------------------------------------------------------

def _policy_cdf(policy: JointPolicy):
    stack = policy.stack()
    cdf = np.cumsum(stack, axis=2)
    pos = stack > 0
    last = (stack.shape[2] - 1 - np.argmax(pos[:, :, ::-1], axis=2)).astype(np.int64)
    return cdf, last


def _rollout_q(game, policy, player, episodes, horizon, rng, bonus):
    n_states, n_act = game.num_states, game.action_counts[player]
    starts = np.repeat(np.arange(n_states, dtype=np.int64), n_act * episodes)
    firsts = np.tile(np.repeat(np.arange(n_act, dtype=np.int64), episodes), n_states)
    uniforms = rng.random((starts.size, horizon, game.num_players + 1))
    pi_cdf, pi_last = _policy_cdf(policy)
    p_cdf, p_last = game.transition_cdf
    returns = kernels.rollouts(
        starts, firsts, player, pi_cdf, pi_last, p_cdf, p_last,
        game.strides, np.ascontiguousarray(game.rewards[player]), np.ascontiguousarray(bonus, dtype=float),
        game.discount, uniforms,
    ).reshape(n_states, n_act, episodes)
    mean = returns.mean(axis=2)
    if episodes > 1:
        stderr = returns.std(axis=2, ddof=1) / np.sqrt(episodes)
    else:
        stderr = np.full_like(mean, np.nan)
    return mean, stderr


def sampled_q(game: MarkovGame, policy: JointPolicy, player: int, episodes: int = DEFAULT_EPISODES,
              horizon: int = DEFAULT_HORIZON, seed=0, tau: float | None = None) -> SampledQ:
    """Monte-Carlo estimate of ``Q_i`` (or the smoothed ``Q~_i`` when ``tau`` is given).

    Every ``(s, a_i)`` entry averages ``episodes`` independent rollouts that start
    in ``s`` with player ``i`` forced to ``a_i`` for the first step; opponents
    draw from ``pi_-i`` and everyone follows ``pi`` afterwards. Returns are
    truncated after ``horizon`` steps.
    """
    game.check_policy(policy)
    player = game.check_player(player)
    if episodes < 1 or horizon < 1:
        raise ParameterError("episodes and horizon must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bonus = np.zeros(game.num_states)
    if tau is not None:
        if not tau > 0:
            raise ParameterError("tau must be positive")
        bonus = -tau * policy_entropy(policy)[player]
    mean, stderr = _rollout_q(game, policy, player, episodes, horizon, rng, bonus)
    return SampledQ(mean, stderr, player, episodes, horizon, None if isinstance(seed, np.random.Generator) else seed)


def sampled_q_tables(game: MarkovGame, policy: JointPolicy, episodes: int, horizon: int,
                     rng: np.random.Generator, tau: float | None = None) -> list:
    """Sampled Q (or Q~) tables for every player, drawing from one generator in player order."""
    game.check_policy(policy)
    ent = policy_entropy(policy) if tau is not None else None
    out = []
    for i in range(game.num_players):
        bonus = np.zeros(game.num_states) if ent is None else -tau * ent[i]
        out.append(_rollout_q(game, policy, i, episodes, horizon, rng, bonus)[0])
    return out


__all__ = [
    "EvaluationResult",
    "SmoothedEvaluationResult",
    "SampledQ",
    "exact_values",
    "exact_q",
    "visitation",
    "evaluate",
    "negentropy",
    "policy_entropy",
    "entropy_values",
    "smoothed_values",
    "solve_stage",
    "sampled_q",
    "sampled_q_tables",
    "policy_weights",
]
