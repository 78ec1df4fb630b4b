"""Builders for Markov congestion games, perturbed team games and random test games.

Congestion-game state: one congestion bit per facility, packed as
``s = sum_e bit_e * 2**e``. Occupancy counts ``n_e`` stand in for aggregate
usage ``w_e = n_e D / |I|``.

Team-game state: ``0`` = low excitement, ``1`` = high. Action ``1`` approves
the project, ``0`` disapproves.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ParameterError, ShapeError
from .game import MarkovGame, joint_actions_array, num_joint_actions
from .potentials import PotentialSpec, mcg_alpha_bound, pmtg_alpha_bound

PAPER_FACILITY_WEIGHTS = (1.0, 2.0, 4.0, 6.0)
PAPER_PENALTY = -100.0
PAPER_STEEPNESS = 50.0


def _uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


# ---------------------------------------------------------------------------
# Markov congestion games
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CongestionGameSpec:
    """Parameters of a Markov congestion game.

    With no ``reward_table`` the facility reward is
    ``c_e(s, n) = weights[e] * n + penalty * bit_e(s)``. A ``reward_table`` of
    shape ``(S, E, |I| + 1)`` overrides it with ``c_e(s, n) = table[s, e, n]``.

    Threshold transitions (deterministic, per facility): a facility becomes
    congested when more than ``congest_frac * |I|`` players use it, recovers
    when at most ``decongest_frac * |I|`` do, and otherwise keeps its bit.
    Logistic transitions replace both steps by
    ``P(bit'=1 | bit=0) = sigmoid(k (n - congest_frac |I|))`` and
    ``P(bit'=1 | bit=1) = sigmoid(k (n - decongest_frac |I|))``.
    """

    weights: tuple = PAPER_FACILITY_WEIGHTS
    penalty: float = PAPER_PENALTY
    actions: tuple | None = None            # shared feasible subsets; default: singletons
    player_actions: tuple | None = None     # optional per-player override of ``actions``
    demand: float | None = None             # total demand D; default |I|
    congest_frac: float = 0.5
    decongest_frac: float = 0.25
    transition_mode: str = "threshold"
    steepness: float = PAPER_STEEPNESS
    zeta: float | None = None
    reward_table: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.actions is None:
            acts = tuple((e,) for e in range(len(self.weights)))
        else:
            acts = tuple(tuple(sorted(int(e) for e in a)) for a in self.actions)
        object.__setattr__(self, "actions", acts)
        if self.player_actions is not None:
            pa = tuple(tuple(tuple(sorted(int(e) for e in a)) for a in acts_i) for acts_i in self.player_actions)
            object.__setattr__(self, "player_actions", pa)
        for acts_i in (self.actions,) + (self.player_actions or ()):
            if not acts_i:
                raise ShapeError("every player needs at least one feasible action")
            for a in acts_i:
                if any(not 0 <= e < self.num_facilities for e in a):
                    raise ShapeError(f"action {a} uses an unknown facility")
        if not (0 < self.congest_frac <= 1 and 0 < self.decongest_frac <= 1):
            raise ParameterError("thresholds must lie in (0, 1]")
        if self.transition_mode not in ("threshold", "logistic"):
            raise ParameterError(f"unknown transition mode {self.transition_mode!r}")
        if self.demand is not None and not self.demand > 0:
            raise ParameterError("demand must be positive")
        if self.reward_table is not None:
            table = np.array(self.reward_table, dtype=float)
            table.setflags(write=False)
            object.__setattr__(self, "reward_table", table)

    @property
    def num_facilities(self) -> int:
        return len(self.weights)

    @property
    def num_states(self) -> int:
        return 2 ** self.num_facilities

    def feasible(self, player: int) -> tuple:
        return self.player_actions[player] if self.player_actions is not None else self.actions

    @property
    def max_action_size(self) -> int:
        sets = (self.actions,) + (self.player_actions or ())
        return max(len(a) for acts in sets for a in acts)

    def demand_for(self, num_players: int) -> float:
        return float(num_players if self.demand is None else self.demand)

    def usage_counts(self, actions) -> np.ndarray:
        """Occupancy count of every facility under one joint action."""
        counts = np.zeros(self.num_facilities, dtype=np.int64)
        for i, a in enumerate(actions):
            subsets = self.feasible(i)
            if not 0 <= int(a) < len(subsets):
                raise ShapeError(f"invalid action {a} for player {i}")
            for e in subsets[int(a)]:
                counts[e] += 1
        return counts

    def facility_reward(self, state: int, facility: int, count: int) -> float:
        if self.reward_table is not None:
            return float(self.reward_table[state, facility, count])
        bit = (int(state) >> int(facility)) & 1
        return self.weights[facility] * count + self.penalty * bit

    def reward_table_for(self, num_players: int) -> np.ndarray:
        """``(S, E, |I| + 1)`` table of ``c_e(s, n)``."""
        if self.reward_table is not None:
            if self.reward_table.shape != (self.num_states, self.num_facilities, num_players + 1):
                raise ShapeError("reward_table must have shape (S, E, |I| + 1)")
            return np.array(self.reward_table)
        n = np.arange(num_players + 1, dtype=float)
        bits = (np.arange(self.num_states)[:, None] >> np.arange(self.num_facilities)[None, :]) & 1
        w = np.asarray(self.weights)
        return w[None, :, None] * n[None, None, :] + self.penalty * bits[:, :, None]

    def lipschitz_zeta(self, num_players: int) -> float | None:
        """Supplied ``zeta``, else ``steepness / 4`` per occupant (logistic only), else ``None``."""
        if self.zeta is not None:
            return float(self.zeta)
        if self.transition_mode == "logistic":
            return self.steepness / 4.0 * num_players / self.demand_for(num_players)
        return None


def _mcg_counts(spec: CongestionGameSpec, num_players: int):
    counts_per_player = [len(spec.feasible(i)) for i in range(num_players)]
    acts = joint_actions_array(counts_per_player)
    incidence = []
    for i in range(num_players):
        inc = np.zeros((counts_per_player[i], spec.num_facilities))
        for k, subset in enumerate(spec.feasible(i)):
            inc[k, list(subset)] = 1.0
        incidence.append(inc)
    usage = np.zeros((acts.shape[0], spec.num_facilities), dtype=np.int64)
    for i in range(num_players):
        usage += incidence[i][acts[:, i]].astype(np.int64)
    return counts_per_player, acts, incidence, usage


def mcg_next_bit_prob(spec: CongestionGameSpec, num_players: int) -> np.ndarray:
    """``(2, |I| + 1)`` table: probability that a facility is congested next step, by bit and count."""
    n = np.arange(num_players + 1, dtype=float)
    hi = spec.congest_frac * num_players
    lo = spec.decongest_frac * num_players
    if spec.transition_mode == "logistic":
        return np.stack([expit(spec.steepness * (n - hi)), expit(spec.steepness * (n - lo))])
    from_normal = (n > hi).astype(float)
    from_congested = np.where(n <= lo, 0.0, 1.0)
    from_congested = np.where(n > hi, 1.0, from_congested)
    return np.stack([from_normal, from_congested])


def build_mcg(spec: CongestionGameSpec, num_players: int, discount: float, initial=None,
              max_potential: float | None = None) -> tuple[MarkovGame, PotentialSpec]:
    """Compile a Markov congestion game and its Rosenthal-based potential."""
    if num_players < 1:
        raise ParameterError("need at least one player")
    counts_per_player, acts, incidence, usage = _mcg_counts(spec, num_players)
    n_states, n_fac = spec.num_states, spec.num_facilities
    table = spec.reward_table_for(num_players)                       # (S, E, N+1)
    per_fac = np.stack([table[:, e, usage[:, e]] for e in range(n_fac)], axis=2)   # (S, J, E)
    rewards = np.stack([
        np.einsum("sje,je->sj", per_fac, incidence[i][acts[:, i]]) for i in range(num_players)
    ])
    cum = np.concatenate([np.zeros(table.shape[:2] + (1,)), np.cumsum(table[:, :, 1:], axis=2)], axis=2)
    phi = sum(cum[:, e, usage[:, e]] for e in range(n_fac))          # (S, J)

    nxt = mcg_next_bit_prob(spec, num_players)                        # (2, N+1)
    bits = (np.arange(n_states)[:, None] >> np.arange(n_fac)[None, :]) & 1     # (S, E)
    q1 = np.stack([nxt[bits[:, e][:, None], usage[None, :, e]] for e in range(n_fac)], axis=2)  # (S, J, E)
    trans = np.ones((n_states, acts.shape[0], n_states))
    for s_next in range(n_states):
        for e in range(n_fac):
            trans[:, :, s_next] *= q1[:, :, e] if bits[s_next, e] else 1.0 - q1[:, :, e]

    mu = _uniform(n_states) if initial is None else initial
    game = MarkovGame(tuple(counts_per_player), rewards, trans, discount, mu)
    zeta = spec.lipschitz_zeta(num_players)
    if max_potential is None:
        max_potential = max(0.0, float(phi.max())) / (1.0 - discount)
    alpha = None if zeta is None else mcg_alpha_bound(spec, zeta, max_potential, num_players, discount)
    return game, PotentialSpec.from_stage(phi, discount, alpha, "mcg")


# ---------------------------------------------------------------------------
# perturbed Markov team games
# ---------------------------------------------------------------------------

def pmtg_default_weights(num_players: int) -> tuple[np.ndarray, np.ndarray]:
    """``w_i = 10 (|I| + 1 - i) / |I|`` and ``w'_i = (i + 1) / |I|`` for players ``i = 1..|I|``."""
    i = np.arange(1, num_players + 1, dtype=float)
    return 10.0 * (num_players + 1 - i) / num_players, (i + 1) / num_players


@dataclass(frozen=True)
class TeamGameSpec:
    """Project-approval team game with per-player perturbations.

    The project runs when at least ``conduct_frac * |I|`` players approve; then
    everyone gets the common reward 1 plus
    ``xi_i = w_i 1{a_i = s} - w'_i a_i``, otherwise everyone gets 0.
    ``kappa`` rescales ``(w, w')`` jointly so that ``max |xi_i| = kappa``.
    """

    weights: tuple | None = None
    costs: tuple | None = None
    kappa: float | None = None
    transition_mode: str = "threshold"
    steepness: float = PAPER_STEEPNESS
    conduct_frac: float = 0.5
    low_frac: float = 0.25

    def __post_init__(self):
        if self.transition_mode not in ("threshold", "logistic"):
            raise ParameterError(f"unknown transition mode {self.transition_mode!r}")
        if self.kappa is not None and self.kappa < 0:
            raise ParameterError("kappa must be >= 0")


def _pmtg_tables(spec: TeamGameSpec, num_players: int):
    w_def, c_def = pmtg_default_weights(num_players)
    w = np.asarray(w_def if spec.weights is None else spec.weights, dtype=float)
    c = np.asarray(c_def if spec.costs is None else spec.costs, dtype=float)
    if w.shape != (num_players,) or c.shape != (num_players,):
        raise ShapeError("weights and costs need one entry per player")
    acts = joint_actions_array([2] * num_players)                   # (J, I)
    n_app = acts.sum(axis=1)
    conducted = (n_app >= spec.conduct_frac * num_players).astype(float)
    states = np.arange(2)
    common = np.broadcast_to(conducted, (2, acts.shape[0])).copy()  # (S, J)
    xi = np.empty((num_players, 2, acts.shape[0]))
    for i in range(num_players):
        match = (acts[None, :, i] == states[:, None]).astype(float)
        xi[i] = conducted[None, :] * (w[i] * match - c[i] * acts[None, :, i])
    if spec.kappa is not None:
        peak = np.abs(xi).max()
        if peak > 0:
            xi *= spec.kappa / peak
        elif spec.kappa > 0:
            raise ParameterError("cannot rescale all-zero perturbations to a positive kappa")
    return acts, n_app, common, xi


def pmtg_transitions(spec: TeamGameSpec, num_players: int, n_app: np.ndarray) -> np.ndarray:
    n = n_app.astype(float)
    hi = spec.conduct_frac * num_players
    lo = spec.low_frac * num_players
    if spec.transition_mode == "logistic":
        up = expit(spec.steepness * (n - hi))          # P(High | Low)
        stay = expit(spec.steepness * (n - lo))        # P(High | High)
    else:
        up = (n >= hi).astype(float)
        stay = (n >= lo).astype(float)
    trans = np.empty((2, n.size, 2))
    trans[0, :, 1] = up
    trans[0, :, 0] = 1.0 - up
    trans[1, :, 1] = stay
    trans[1, :, 0] = 1.0 - stay
    return trans


def build_pmtg(spec: TeamGameSpec, num_players: int, discount: float, initial=None) -> tuple[MarkovGame, PotentialSpec]:
    """Compile the project-approval perturbed team game; potential = discounted common reward."""
    if num_players < 1:
        raise ParameterError("need at least one player")
    _, n_app, common, xi = _pmtg_tables(spec, num_players)
    trans = pmtg_transitions(spec, num_players, n_app)
    return build_team_game(common, trans, (2,) * num_players, discount,
                           _uniform(2) if initial is None else initial, xi, family="pmtg")


def build_team_game(common_reward, transitions, action_counts, discount, initial=None,
                    perturbations=None, family: str = "team") -> tuple[MarkovGame, PotentialSpec]:
    """Team game ``u_i = r + xi_i`` with potential ``phi = r`` and gap ``2 kappa / (1 - delta)^2``."""
    r = np.asarray(common_reward, dtype=float)
    n_players = len(action_counts)
    xi = np.zeros((n_players,) + r.shape) if perturbations is None else np.asarray(perturbations, float)
    if xi.shape != (n_players,) + r.shape:
        raise ShapeError("perturbations must have shape (I, S, J)")
    n_states = r.shape[0]
    mu = _uniform(n_states) if initial is None else initial
    game = MarkovGame(tuple(action_counts), r[None] + xi, transitions, discount, mu)
    kappa = float(np.abs(xi).max()) if xi.size else 0.0
    return game, PotentialSpec.from_stage(r, discount, pmtg_alpha_bound(kappa, discount), family)


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------

def random_game(rng: np.random.Generator, action_counts, num_states: int, discount: float,
                reward_scale: float = 1.0) -> MarkovGame:
    """Rewards uniform on ``[-scale, scale]``, Dirichlet(1) transition rows and initial law."""
    n_joint = num_joint_actions(action_counts)
    rewards = rng.uniform(-reward_scale, reward_scale, size=(len(action_counts), num_states, n_joint))
    trans = rng.dirichlet(np.ones(num_states), size=(num_states, n_joint))
    mu = rng.dirichlet(np.ones(num_states))
    return MarkovGame(tuple(action_counts), rewards, trans, discount, mu)


def random_team_game(rng: np.random.Generator, action_counts, num_states: int, discount: float,
                     kappa: float = 0.0) -> tuple[MarkovGame, PotentialSpec]:
    """Random common reward in ``[0, 1]`` with perturbations rescaled to ``max |xi| = kappa``."""
    n_joint = num_joint_actions(action_counts)
    r = rng.uniform(0.0, 1.0, size=(num_states, n_joint))
    trans = rng.dirichlet(np.ones(num_states), size=(num_states, n_joint))
    xi = rng.uniform(-1.0, 1.0, size=(len(action_counts), num_states, n_joint))
    xi *= kappa / np.abs(xi).max()
    return build_team_game(r, trans, action_counts, discount, rng.dirichlet(np.ones(num_states)), xi)


def random_mcg_spec(rng: np.random.Generator, num_players: int, num_facilities: int, *,
                    max_subset: int = 2, num_actions: int = 3, transition_mode: str = "logistic",
                    steepness: float = 1.0, nonnegative: bool = True) -> CongestionGameSpec:
    """Random subset actions and a random facility reward table (nonnegative by default).

    ``num_actions`` is capped at the number of nonempty subsets of size at most ``max_subset``.
    """
    pool = [c for k in range(1, min(max_subset, num_facilities) + 1)
            for c in itertools.combinations(range(num_facilities), k)]
    pick = rng.choice(len(pool), size=min(num_actions, len(pool)), replace=False)
    subsets = [pool[k] for k in pick]
    low = 0.0 if nonnegative else -1.0
    table = rng.uniform(low, 1.0, size=(2 ** num_facilities, num_facilities, num_players + 1))
    table[:, :, 0] = 0.0
    return CongestionGameSpec(
        weights=(1.0,) * num_facilities,
        actions=tuple(sorted(subsets)),
        transition_mode=transition_mode,
        steepness=steepness,
        reward_table=table,
    )
