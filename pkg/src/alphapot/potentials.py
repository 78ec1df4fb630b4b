"""Alpha-potential functions: discounted stage potentials, closed-form gaps, gap probes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import ParameterError, ShapeError
from .evaluation import entropy_values, exact_values, solve_stage
from .game import JointPolicy, MarkovGame, policy_weights


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Stage potential ``phi(s, a)`` whose discounted value is the potential ``Phi``.

    ``alpha_bound`` is a certified gap (``None`` when no closed form applies)
    and ``potential_range_bound`` is ``C_Phi`` with
    ``|Phi(mu, pi) - Phi(mu, pi')| <= C_Phi``.
    """

    stage_potential: np.ndarray     # (S, J)
    alpha_bound: float | None
    potential_range_bound: float
    family: str = "custom"

    def __post_init__(self):
        phi = np.array(self.stage_potential, dtype=float)
        phi.setflags(write=False)
        object.__setattr__(self, "stage_potential", phi)
        if phi.ndim != 2 or not np.all(np.isfinite(phi)):
            raise ShapeError("stage_potential must be a finite (S, J) table")
        if self.alpha_bound is not None and not self.alpha_bound >= 0:
            raise ParameterError("alpha_bound must be >= 0")
        if not self.potential_range_bound >= 0:
            raise ParameterError("potential_range_bound must be >= 0")

    @classmethod
    def from_stage(cls, stage_potential, discount: float, alpha_bound: float | None = None,
                   family: str = "custom") -> "PotentialSpec":
        """Spec with ``C_Phi`` defaulted to ``(max phi - min phi) / (1 - delta)``."""
        phi = np.asarray(stage_potential, dtype=float)
        c_phi = float(phi.max() - phi.min()) / (1.0 - discount)
        return cls(phi, alpha_bound, c_phi, family)

    def check(self, game: MarkovGame) -> None:
        if self.stage_potential.shape != (game.num_states, game.num_joint):
            raise ShapeError(
                f"stage potential {self.stage_potential.shape} does not match game "
                f"{(game.num_states, game.num_joint)}"
            )

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "stage_potential": self.stage_potential.ravel().tolist(),
            "alpha_bound": self.alpha_bound,
            "potential_range_bound": self.potential_range_bound,
        }

    @classmethod
    def from_dict(cls, doc: dict, num_states: int, num_joint: int) -> "PotentialSpec":
        phi = np.asarray(doc["stage_potential"], dtype=float).reshape(num_states, num_joint)
        alpha = doc.get("alpha_bound")
        return cls(phi, None if alpha is None else float(alpha),
                   float(doc["potential_range_bound"]), doc.get("family", "custom"))


def potential_values(game: MarkovGame, spec: PotentialSpec, policy: JointPolicy,
                     tau: float | None = None) -> np.ndarray:
    """Per-state ``Phi(s, pi)``; with ``tau`` the smoothed ``Phi~`` (entropy of every player subtracted)."""
    spec.check(game)
    w = policy_weights(game, policy)
    stage = np.einsum("sj,sj->s", w, spec.stage_potential)
    phi = solve_stage(game, policy, stage)
    if tau is not None:
        if not tau > 0:
            raise ParameterError("tau must be positive")
        phi = phi - tau * entropy_values(game, policy).sum(axis=0)
    return phi


def potential_value(game: MarkovGame, spec: PotentialSpec, policy: JointPolicy, initial=None,
                    tau: float | None = None) -> float:
    """``Phi(mu, pi)`` (or ``Phi~(mu, pi)`` when ``tau`` is given)."""
    mu = game.initial_dist if initial is None else np.asarray(initial, dtype=float)
    return float(potential_values(game, spec, policy, tau) @ mu)


# ---------------------------------------------------------------------------
# congestion games
# ---------------------------------------------------------------------------

def rosenthal_stage_potential(mcg_spec, state: int, actions) -> float:
    """Rosenthal potential ``sum_e sum_{j=1}^{n_e} c_e(s, j)`` of one stage game.

    ``actions`` holds one action index per player, indexing ``mcg_spec.actions``.
    Usage enters ``c_e`` through occupancy counts ``n_e = w_e |I| / D``.
    """
    counts = mcg_spec.usage_counts(actions)
    total = 0.0
    for e, n_e in enumerate(counts):
        for j in range(1, int(n_e) + 1):
            total += mcg_spec.facility_reward(state, e, j)
    return total


def mcg_transition_bound(mcg_spec, zeta: float, num_players: int) -> float:
    """Bound ``2 zeta |S| D max|a_i| / |I|`` on ``||P^pi - P^pi'||_inf`` for unilateral deviations."""
    if zeta < 0:
        raise ParameterError("zeta must be >= 0")
    demand = mcg_spec.demand_for(num_players)
    max_size = mcg_spec.max_action_size
    return 2.0 * zeta * mcg_spec.num_states * demand * max_size / num_players


def mcg_alpha_bound(mcg_spec, zeta: float, max_potential: float, num_players: int, discount: float) -> float:
    """Closed-form gap ``2 zeta |S| D delta |E| max Phi / (|I| (1 - delta))``."""
    if zeta < 0 or max_potential < 0:
        raise ParameterError("zeta and max_potential must be >= 0")
    if not 0 < discount < 1:
        raise ParameterError("discount must lie in (0, 1)")
    demand = mcg_spec.demand_for(num_players)
    return (2.0 * zeta * mcg_spec.num_states * demand * discount * mcg_spec.num_facilities
            * max_potential / (num_players * (1.0 - discount)))


def pmtg_alpha_bound(kappa: float, delta: float) -> float:
    """Closed-form gap ``2 kappa / (1 - delta)^2`` of a perturbed team game."""
    if kappa < 0:
        raise ParameterError("kappa must be >= 0")
    if not 0 < delta < 1:
        raise ParameterError("delta must lie in (0, 1)")
    return 2.0 * kappa / (1.0 - delta) ** 2


# ---------------------------------------------------------------------------
# empirical gap
# ---------------------------------------------------------------------------

@dataclass
class GapEstimate:
    """Largest observed ``|dPhi - dV_i|``: a lower bound on the true gap."""

    estimate: float
    num_probes: int
    probe_description: str
    seed: object = None
    certified_bound: float | None = None

    @property
    def within_bound(self) -> bool | None:
        if self.certified_bound is None:
            return None
        return self.estimate <= self.certified_bound + 1e-8

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "num_probes": self.num_probes,
            "probe_description": self.probe_description,
            "seed": self.seed,
            "certified_bound": self.certified_bound,
            "within_bound": self.within_bound,
        }


def num_deterministic_profiles(game: MarkovGame) -> int:
    return math.prod(n ** game.num_states for n in game.action_counts)


def _det_tables(n_states: int, n_act: int) -> list:
    out = []
    for acts in product(range(n_act), repeat=n_states):
        t = np.zeros((n_states, n_act))
        t[np.arange(n_states), acts] = 1.0
        out.append(t)
    return out


def _gap_exhaustive(game: MarkovGame, spec: PotentialSpec) -> tuple[float, int]:
    tables = [_det_tables(game.num_states, n) for n in game.action_counts]
    sizes = tuple(len(t) for t in tables)
    diff = np.empty(sizes + (game.num_players, game.num_states))
    for idx in product(*(range(n) for n in sizes)):
        pol = JointPolicy._trusted(tuple(tables[i][k] for i, k in enumerate(idx)))
        phi = potential_values(game, spec, pol)
        diff[idx] = phi[None, :] - exact_values(game, pol)
    gap = 0.0
    for i in range(game.num_players):
        x = diff[..., i, :]
        gap = max(gap, float((x.max(axis=i) - x.min(axis=i)).max()))
    return gap, int(np.prod(sizes))


def _random_table(rng: np.random.Generator, n_states: int, n_act: int) -> np.ndarray:
    if rng.random() < 0.5:
        t = np.zeros((n_states, n_act))
        t[np.arange(n_states), rng.integers(0, n_act, n_states)] = 1.0
        return t
    return rng.dirichlet(np.ones(n_act), size=n_states)


def random_probe(game: MarkovGame, rng: np.random.Generator):
    """One unilateral deviation ``(i, pi, pi')`` with ``pi'`` differing only in player ``i``."""
    i = int(rng.integers(game.num_players))
    base = [_random_table(rng, game.num_states, n) for n in game.action_counts]
    dev = _random_table(rng, game.num_states, game.action_counts[i])
    pi = JointPolicy._trusted(tuple(base))
    alt = list(base)
    alt[i] = dev
    return i, pi, JointPolicy._trusted(tuple(alt))


def unilateral_gap(game: MarkovGame, spec: PotentialSpec, player: int, pi: JointPolicy,
                   pi_dev: JointPolicy) -> float:
    """``max_s |(Phi(s,pi') - Phi(s,pi)) - (V_i(s,pi') - V_i(s,pi))|``."""
    d_phi = potential_values(game, spec, pi_dev) - potential_values(game, spec, pi)
    d_v = exact_values(game, pi_dev)[player] - exact_values(game, pi)[player]
    return float(np.abs(d_phi - d_v).max())


def estimate_gap(game: MarkovGame, spec: PotentialSpec, probes: int | None = None, seed=0,
                 max_enumerate: int = 20_000) -> GapEstimate:
    """Empirical alpha over unilateral deviations.

    With ``probes=None`` and at most ``max_enumerate`` deterministic joint
    policies, every deterministic unilateral pair is checked. Otherwise
    ``probes`` random deviations (default 200) are drawn from ``seed``; probe
    ``k`` does not depend on the total count, so more probes never lower the
    estimate. The sup over all stochastic policies is never exhausted.
    """
    spec.check(game)
    n_det = num_deterministic_profiles(game)
    if probes is None and n_det <= max_enumerate:
        gap, n = _gap_exhaustive(game, spec)
        desc = f"exhaustive deterministic unilateral deviations over {n} joint policies"
        return GapEstimate(gap, n, desc, None, spec.alpha_bound)
    probes = 200 if probes is None else int(probes)
    rng = np.random.default_rng(seed)
    gap = 0.0
    for _ in range(probes):
        i, pi, alt = random_probe(game, rng)
        gap = max(gap, unilateral_gap(game, spec, i, pi, alt))
    desc = f"{probes} random unilateral deviations (half deterministic, half Dirichlet(1))"
    return GapEstimate(gap, probes, desc, seed, spec.alpha_bound)


def reward_potential(game: MarkovGame, player: int) -> PotentialSpec:
    """Use one player's own reward as stage potential (no certified gap)."""
    player = game.check_player(player)
    return PotentialSpec.from_stage(game.rewards[player], game.discount, None, f"reward:{player}")


__all__ = [
    "PotentialSpec",
    "GapEstimate",
    "potential_values",
    "potential_value",
    "rosenthal_stage_potential",
    "mcg_transition_bound",
    "mcg_alpha_bound",
    "pmtg_alpha_bound",
    "estimate_gap",
    "unilateral_gap",
    "random_probe",
    "reward_potential",
    "num_deterministic_profiles",
]
