"""Tabular finite discounted Markov games.

Joint actions are stored as one flattened integer with player 0 varying
fastest, so for ``action_counts = (2, 3)`` the order is
``(0,0), (1,0), (0,1), (1,1), (0,2), (1,2)``. Reward tables have shape
``(I, S, J)`` and the transition kernel ``(S, J, S)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .errors import ParameterError, ShapeError

PROB_TOL = 1e-12


def _check_prob_rows(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{what}: non-finite entries")
    if np.any(arr < 0.0):
        raise ParameterError(f"{what}: negative probabilities (min {arr.min():.3g})")
    err = np.abs(arr.sum(axis=-1) - 1.0)
    if err.size and err.max() > PROB_TOL:
        raise ParameterError(f"{what}: rows do not sum to 1 (max error {err.max():.3g})")


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


def num_joint_actions(action_counts: Sequence[int]) -> int:
    return int(np.prod([int(a) for a in action_counts], dtype=np.int64))


def joint_strides(action_counts: Sequence[int]) -> np.ndarray:
    """Multipliers turning per-player actions into a flat joint index."""
    strides = np.ones(len(action_counts), dtype=np.int64)
    for i in range(1, len(action_counts)):
        strides[i] = strides[i - 1] * int(action_counts[i - 1])
    return strides


def joint_index(actions: Sequence[int], action_counts: Sequence[int]) -> int:
    if len(actions) != len(action_counts):
        raise ShapeError("one action per player expected")
    idx = 0
    for a, n, st in zip(actions, action_counts, joint_strides(action_counts)):
        if not 0 <= a < n:
            raise ShapeError(f"action {a} out of range for {n} actions")
        idx += int(a) * int(st)
    return idx


def decode_joint(index: int, action_counts: Sequence[int]) -> tuple[int, ...]:
    out = []
    for n in action_counts:
        out.append(index % n)
        index //= n
    return tuple(out)


def joint_actions_array(action_counts: Sequence[int]) -> np.ndarray:
    """``(J, I)`` integer array; row ``j`` holds the actions of joint action ``j``."""
    j = np.arange(num_joint_actions(action_counts), dtype=np.int64)
    cols = []
    for n in action_counts:
        cols.append(j % n)
        j = j // n
    return np.stack(cols, axis=1) if cols else np.zeros((1, 0), dtype=np.int64)


@dataclass(frozen=True, eq=False)
class MarkovGame:
    """A finite discounted Markov game ``<I, S, (A_i), (u_i), P, delta>`` plus ``mu``.

    Arrays are copied and made read-only on construction. Probability tables
    must be valid to within ``1e-12``; nothing is renormalised.
    """

    action_counts: tuple[int, ...]
    rewards: np.ndarray
    transitions: np.ndarray
    discount: float
    initial_dist: np.ndarray

    def __post_init__(self):
        counts = tuple(int(a) for a in self.action_counts)
        if not counts or min(counts) < 1:
            raise ShapeError("need at least one player and one action per player")
        object.__setattr__(self, "action_counts", counts)
        rewards = _frozen(self.rewards)
        transitions = _frozen(self.transitions)
        mu = _frozen(self.initial_dist)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "initial_dist", mu)

        n_joint = num_joint_actions(counts)
        if transitions.ndim != 3 or transitions.shape[1] != n_joint or transitions.shape[0] != transitions.shape[2]:
            raise ShapeError(f"transitions must be (S, {n_joint}, S), got {transitions.shape}")
        n_states = transitions.shape[0]
        if n_states < 1:
            raise ShapeError("need at least one state")
        if rewards.shape != (len(counts), n_states, n_joint):
            raise ShapeError(f"rewards must be {(len(counts), n_states, n_joint)}, got {rewards.shape}")
        if mu.shape != (n_states,):
            raise ShapeError(f"initial_dist must have length {n_states}")
        if not np.all(np.isfinite(rewards)):
            raise ParameterError("rewards must be finite")
        if not 0.0 < float(self.discount) < 1.0:
            raise ParameterError(f"discount must lie in (0, 1), got {self.discount}")
        object.__setattr__(self, "discount", float(self.discount))
        _check_prob_rows(transitions, "transitions")
        _check_prob_rows(mu, "initial_dist")

    @property
    def num_players(self) -> int:
        return len(self.action_counts)

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_joint(self) -> int:
        return self.transitions.shape[1]

    @property
    def max_actions(self) -> int:
        return max(self.action_counts)

    @property
    def reward_bound(self) -> float:
        """``C = max |u_i(s, a)|``."""
        return float(np.abs(self.rewards).max())

    @property
    def reward_max(self) -> float:
        """``max u_i(s, a)`` without absolute value."""
        return float(self.rewards.max())

    @cached_property
    def strides(self) -> np.ndarray:
        return joint_strides(self.action_counts)

    @cached_property
    def joint_actions(self) -> np.ndarray:
        return joint_actions_array(self.action_counts)

    @cached_property
    def _counts_arr(self) -> np.ndarray:
        return np.asarray(self.action_counts, dtype=np.int64)

    @cached_property
    def transition_cdf(self) -> tuple[np.ndarray, np.ndarray]:
        """Cumulative transition rows and the last positive index per row (for sampling)."""
        cdf = np.cumsum(self.transitions, axis=2)
        pos = self.transitions > 0
        last = (pos.shape[2] - 1 - np.argmax(pos[:, :, ::-1], axis=2)).astype(np.int64)
        return cdf, last

    def check_policy(self, policy: "JointPolicy") -> None:
        if policy.action_counts != self.action_counts or policy.num_states != self.num_states:
            raise ShapeError(
                f"policy shape {policy.num_states}x{policy.action_counts} does not match "
                f"game {self.num_states}x{self.action_counts}"
            )

    def check_player(self, player: int) -> int:
        if not 0 <= int(player) < self.num_players:
            raise ShapeError(f"player index {player} out of range for {self.num_players} players")
        return int(player)

    def with_initial(self, initial) -> "MarkovGame":
        return MarkovGame(self.action_counts, self.rewards, self.transitions, self.discount, initial)

    def to_dict(self) -> dict:
        return {
            "num_players": self.num_players,
            "num_states": self.num_states,
            "action_counts": list(self.action_counts),
            "discount": self.discount,
            "joint_action_order": "player0-fastest",
            "rewards": [r.ravel().tolist() for r in self.rewards],
            "transitions": self.transitions.ravel().tolist(),
            "initial_dist": self.initial_dist.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MarkovGame":
        counts = [int(a) for a in doc["action_counts"]]
        n_states = int(doc["num_states"])
        n_joint = num_joint_actions(counts)
        if len(counts) != int(doc.get("num_players", len(counts))):
            raise ShapeError("num_players disagrees with action_counts")
        rewards = np.asarray(doc["rewards"], dtype=float).reshape(len(counts), n_states, n_joint)
        if "transitions_sparse" in doc:
            sp = doc["transitions_sparse"]
            trans = np.zeros(n_states * n_joint * n_states)
            trans[np.asarray(sp["index"], dtype=np.int64)] = np.asarray(sp["value"], dtype=float)
        else:
            trans = np.asarray(doc["transitions"], dtype=float)
        trans = trans.reshape(n_states, n_joint, n_states)
        return cls(tuple(counts), rewards, trans, float(doc["discount"]), doc["initial_dist"])


class JointPolicy:
    """Stationary joint policy: ``probs[i][s, a_i] = pi_i(s, a_i)``.

    Immutable; updates return new objects that share untouched player arrays.
    """

    __slots__ = ("_probs",)

    def __init__(self, probs: Sequence, validate: bool = True):
        arrs = []
        for p in probs:
            a = np.array(p, dtype=float)
            if a.ndim != 2:
                raise ShapeError("each player's policy must be a (S, A_i) table")
            a.setflags(write=False)
            arrs.append(a)
        if not arrs:
            raise ShapeError("empty policy")
        if len({a.shape[0] for a in arrs}) != 1:
            raise ShapeError("players disagree on the number of states")
        if validate:
            for i, a in enumerate(arrs):
                _check_prob_rows(a, f"policy of player {i}")
        self._probs = tuple(arrs)

    @classmethod
    def _trusted(cls, arrs: tuple) -> "JointPolicy":
        obj = cls.__new__(cls)
        obj._probs = arrs
        return obj

    @classmethod
    def uniform(cls, game: MarkovGame) -> "JointPolicy":
        return cls([np.full((game.num_states, n), 1.0 / n) for n in game.action_counts])

    @classmethod
    def deterministic(cls, game: MarkovGame, actions) -> "JointPolicy":
        """One-hot policy; ``actions[i][s]`` is player ``i``'s action in state ``s``."""
        out = []
        for i, n in enumerate(game.action_counts):
            p = np.zeros((game.num_states, n))
            p[np.arange(game.num_states), np.asarray(actions[i], dtype=np.int64)] = 1.0
            out.append(p)
        return cls(out)

    def __len__(self) -> int:
        return len(self._probs)

    def __getitem__(self, i: int) -> np.ndarray:
        return self._probs[i]

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self._probs)

    def __repr__(self) -> str:
        return f"JointPolicy(num_states={self.num_states}, action_counts={self.action_counts})"

    @property
    def num_states(self) -> int:
        return self._probs[0].shape[0]

    @property
    def action_counts(self) -> tuple[int, ...]:
        return tuple(p.shape[1] for p in self._probs)

    def stack(self, width: int | None = None) -> np.ndarray:
        """Zero-padded ``(I, S, width)`` array for the kernels."""
        width = width or max(self.action_counts)
        out = np.zeros((len(self), self.num_states, width))
        for i, p in enumerate(self._probs):
            out[i, :, : p.shape[1]] = p
        return out

    def with_player(self, player: int, table) -> "JointPolicy":
        table = np.array(table, dtype=float)
        if table.shape != self._probs[player].shape:
            raise ShapeError("replacement table has the wrong shape")
        _check_prob_rows(table, f"policy of player {player}")
        table.setflags(write=False)
        arrs = list(self._probs)
        arrs[player] = table
        return JointPolicy._trusted(tuple(arrs))

    def with_row(self, player: int, state: int, row) -> "JointPolicy":
        table = self._probs[player].copy()
        table[state] = row
        return self.with_player(player, table)

    def equals(self, other: "JointPolicy") -> bool:
        """Bitwise equality."""
        return len(self) == len(other) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self, other)
        )

    def to_dict(self) -> dict:
        return {
            "num_states": self.num_states,
            "action_counts": list(self.action_counts),
            "policy": [p.tolist() for p in self._probs],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "JointPolicy":
        pol = cls(doc["policy"])
        if "action_counts" in doc and list(pol.action_counts) != [int(a) for a in doc["action_counts"]]:
            raise ShapeError("policy tables disagree with action_counts")
        return pol


def joint_action_iter(game_or_counts) -> Iterator[tuple[int, tuple[int, ...]]]:
    """Yield ``(flat_index, actions)`` for every joint action, player 0 fastest."""
    counts = getattr(game_or_counts, "action_counts", game_or_counts)
    ranges = [range(int(n)) for n in reversed(counts)]
    for idx, rev in enumerate(product(*ranges)):
        yield idx, tuple(reversed(rev))


def policy_weights(game: MarkovGame, policy: JointPolicy, skip: int = -1) -> np.ndarray:
    """``(S, J)`` joint-action probabilities; ``skip`` drops one player's factor."""
    game.check_policy(policy)
    return kernels.joint_weights(policy.stack(), game._counts_arr, skip)


def induced_chain(game: MarkovGame, policy: JointPolicy) -> np.ndarray:
    """State-to-state kernel ``P^pi(s'|s) = sum_a pi(a|s) P(s'|s,a)``."""
    w = policy_weights(game, policy)
    return np.einsum("sj,sjt->st", w, game.transitions)


def expected_rewards(game: MarkovGame, policy: JointPolicy) -> np.ndarray:
    """``(I, S)`` table of ``u_i(s, pi)``."""
    w = policy_weights(game, policy)
    return np.einsum("sj,isj->is", w, game.rewards)


def expected_reward(game: MarkovGame, policy: JointPolicy, player: int) -> np.ndarray:
    player = game.check_player(player)
    w = policy_weights(game, policy)
    return np.einsum("sj,sj->s", w, game.rewards[player])


def opponent_marginal(game: MarkovGame, policy: JointPolicy, player: int, table: np.ndarray) -> np.ndarray:
    """Average an ``(S, J, K)`` table over ``a_-i ~ pi_-i``; returns ``(S, A_i, K)``."""
    game.check_policy(policy)
    player = game.check_player(player)
    table = np.ascontiguousarray(table, dtype=float)
    return kernels.marginalize(table, policy.stack(), game._counts_arr, player)
