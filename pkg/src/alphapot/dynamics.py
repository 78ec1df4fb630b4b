"""Projected gradient ascent and sequential max-improvement smoothed best response.

Both engines start from the uniform policy and are deterministic: exact mode
reruns are bit-identical, and sampled mode is reproducible from its seed. In
sampled mode iteration ``t`` draws from ``numpy.random.default_rng([seed, t])``,
so any iteration can be replayed in isolation.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .best_response import exploitability
from .errors import ParameterError
from .evaluation import (
    DEFAULT_EPISODES,
    DEFAULT_HORIZON,
    exact_q,
    exact_values,
    sampled_q_tables,
    smoothed_values,
)
from .game import JointPolicy, MarkovGame
from .potentials import PotentialSpec, potential_value

TERMINATION_TOL = 1e-10
TIE_BREAKS = ("lowest-index",)

TRACE_COLUMNS = (
    "iteration",
    "max_regret",
    "nash_regret",
    "potential",
    "smoothed_potential",
    "tau",
    "player",
    "state",
    "delta",
    "terminated",
)


# ---------------------------------------------------------------------------
# row-level operations
# ---------------------------------------------------------------------------

def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ParameterError("project_simplex expects a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise ParameterError("project_simplex input must be finite")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    x = np.maximum(v - theta, 0.0)
    return x / x.sum()


def smoothed_br(q_row, tau: float) -> np.ndarray:
    """Softmax of ``q_row / tau``: the entropy-regularised one-stage best response."""
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    q = np.asarray(q_row, dtype=float)
    z = np.exp((q - q.max()) / tau)
    return z / z.sum()


def smoothed_max(q_row, tau: float) -> float:
    """``max_p <q, p> - tau nu(p)`` in closed form, ``tau * logsumexp(q / tau)``."""
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    return float(tau * logsumexp(np.asarray(q_row, dtype=float) / tau))


def improvement(q_row, p_row, tau: float) -> float:
    """One-row gain ``Delta`` of switching ``p_row`` to ``smoothed_br(q_row, tau)``.

    Computed as ``tau * sum_a [p (log p - log br) - p + br]``; every summand is
    nonnegative, so the result cannot go below zero through cancellation.
    """
    q = np.asarray(q_row, dtype=float) / tau
    log_br = q - logsumexp(q)
    br = np.exp(log_br)
    p = np.asarray(p_row, dtype=float)
    pos = p > 0
    terms = br - p
    terms[pos] += p[pos] * (np.log(p[pos]) - log_br[pos])
    return float(tau * np.maximum(terms, 0.0).sum())


# ---------------------------------------------------------------------------
# evaluation modes and configs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalMode:
    """``exact`` linear solves, or ``sampled`` rollouts (``episodes`` per entry, ``horizon`` steps)."""

    kind: str = "exact"
    horizon: int = DEFAULT_HORIZON
    episodes: int = DEFAULT_EPISODES
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("exact", "sampled"):
            raise ParameterError(f"unknown evaluation mode {self.kind!r}")
        if self.horizon < 1 or self.episodes < 1:
            raise ParameterError("horizon and episodes must be >= 1")

    @classmethod
    def sampled(cls, horizon: int = DEFAULT_HORIZON, episodes: int = DEFAULT_EPISODES, seed: int = 0) -> "EvalMode":
        return cls("sampled", horizon, episodes, seed)

    def rng(self, iteration: int) -> np.random.Generator:
        return np.random.default_rng([int(self.seed), int(iteration)])

    def q_tables(self, game: MarkovGame, policy: JointPolicy, iteration: int = 0,
                 tau: float | None = None) -> list:
        """Per-player Q (or smoothed Q~ when ``tau`` is given)."""
        if self.kind == "exact":
            if tau is None:
                return exact_q(game, policy, exact_values(game, policy))
            return smoothed_values(game, policy, tau).q_tables
        return sampled_q_tables(game, policy, self.episodes, self.horizon, self.rng(iteration), tau)

    def to_dict(self) -> dict:
        return asdict(self)


EXACT = EvalMode()


@dataclass(frozen=True)
class PGAConfig:
    eta: float
    iterations: int
    mode: EvalMode = EXACT

    def __post_init__(self):
        if not self.eta > 0:
            raise ParameterError("eta must be positive")
        if self.iterations < 0:
            raise ParameterError("iterations must be >= 0")

    algorithm = "pga"

    def to_dict(self) -> dict:
        return {"algorithm": "pga", "eta": self.eta, "iterations": self.iterations, "mode": self.mode.to_dict()}


@dataclass(frozen=True)
class SMBRConfig:
    """Smoothing schedule ``tau_t = tau0 * decay**t``; ``decay = 1`` keeps tau fixed."""

    tau0: float
    iterations: int
    decay: float = 1.0
    tie_break: str = "lowest-index"
    mode: EvalMode = EXACT

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ParameterError("tau0 must be positive")
        if not 0 < self.decay <= 1:
            raise ParameterError("decay must lie in (0, 1]")
        if self.iterations < 0:
            raise ParameterError("iterations must be >= 0")
        if self.tie_break not in TIE_BREAKS:
            raise ParameterError(f"unknown tie-break rule {self.tie_break!r}")

    algorithm = "smbr"

    def tau_at(self, t: int) -> float:
        return self.tau0 * self.decay ** t

    def to_dict(self) -> dict:
        return {
            "algorithm": "smbr",
            "tau0": self.tau0,
            "decay": self.decay,
            "iterations": self.iterations,
            "tie_break": self.tie_break,
            "mode": self.mode.to_dict(),
        }


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------

def pga_step(game: MarkovGame, policy: JointPolicy, eta: float, mode: EvalMode = EXACT,
             iteration: int = 0) -> JointPolicy:
    """Every player moves every state row along its own Q, from one shared snapshot."""
    if eta < 0:
        raise ParameterError("eta must be >= 0")
    game.check_policy(policy)
    if eta == 0:
        return policy
    q = mode.q_tables(game, policy, iteration)
    new = []
    for i, p in enumerate(policy):
        step = p + eta * q[i]
        table = np.stack([project_simplex(row) for row in step])
        table.setflags(write=False)
        new.append(table)
    return JointPolicy._trusted(tuple(new))


def improvement_table(game: MarkovGame, policy: JointPolicy, tau: float, mode: EvalMode = EXACT,
                      iteration: int = 0, q_tables: list | None = None) -> np.ndarray:
    """``(I, S)`` table of ``Delta_i(s)``, the best smoothed one-row gain of each player in each state."""
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    q = mode.q_tables(game, policy, iteration, tau) if q_tables is None else q_tables
    out = np.empty((game.num_players, game.num_states))
    for i, p in enumerate(policy):
        for s in range(game.num_states):
            out[i, s] = improvement(q[i][s], p[s], tau)
    return out


@dataclass
class StepResult:
    policy: JointPolicy
    player: int | None
    state: int | None
    delta: float
    terminated: bool
    deltas: np.ndarray = field(repr=False, default=None)


def smbr_step(game: MarkovGame, policy: JointPolicy, tau: float, tie_break: str = "lowest-index",
              mode: EvalMode = EXACT, iteration: int = 0) -> StepResult:
    """Replace the single ``(i, s)`` row with the largest ``Delta`` by its smoothed best response.

    Ties go to the lowest player index, then the lowest state index. When
    ``max Delta <= 1e-10`` the policy is returned unchanged with ``terminated``.
    """
    if tie_break not in TIE_BREAKS:
        raise ParameterError(f"unknown tie-break rule {tie_break!r}")
    game.check_policy(policy)
    q = mode.q_tables(game, policy, iteration, tau)
    deltas = improvement_table(game, policy, tau, q_tables=q)
    flat = int(np.argmax(deltas))          # row-major: lowest player, then lowest state
    i, s = divmod(flat, game.num_states)
    best = float(deltas[i, s])
    if best <= TERMINATION_TOL:
        return StepResult(policy, None, None, best, True, deltas)
    table = policy[i].copy()
    table[s] = smoothed_br(q[i][s], tau)
    table.setflags(write=False)
    arrs = list(policy)
    arrs[i] = table
    return StepResult(JointPolicy._trusted(tuple(arrs)), i, s, best, False, deltas)


# ---------------------------------------------------------------------------
# run loop
# ---------------------------------------------------------------------------

@dataclass
class TraceRow:
    """Metrics of ``pi^(t)`` plus the update applied at iteration ``t`` (if any)."""

    iteration: int
    max_regret: float | None = None
    nash_regret: float | None = None
    potential: float | None = None
    smoothed_potential: float | None = None
    tau: float | None = None
    player: int | None = None
    state: int | None = None
    delta: float | None = None
    terminated: bool = False

    def as_csv(self) -> list:
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, bool):
                return int(x)
            if isinstance(x, float):
                return repr(x)
            return x

        return [fmt(getattr(self, c)) for c in TRACE_COLUMNS]


@dataclass
class RunTrace:
    """Per-iteration rows and policy snapshots of one run.

    ``nash_regret`` on row ``t >= 1`` is the mean of ``max_regret`` over the
    recorded rows ``1..t``; row 0 carries its own regret.
    """

    config: dict
    rows: list = field(default_factory=list)
    policies: list = field(default_factory=list)
    terminated: bool = False

    @property
    def final_policy(self) -> JointPolicy:
        return self.policies[-1]

    @property
    def iterations(self) -> np.ndarray:
        return np.array([r.iteration for r in self.rows])

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.rows], dtype=float)

    def l1_accuracy(self) -> np.ndarray:
        """Per snapshot ``(1/|I|) sum_i ||pi_i - pi_i^final||_1`` (summed over states)."""
        final = self.final_policy
        n = len(final)
        return np.array([
            sum(float(np.abs(p[i] - final[i]).sum()) for i in range(n)) / n for p in self.policies
        ])


def _potential_pair(game, potential, policy, mu, tau):
    if potential is None:
        return None, None
    phi = potential_value(game, potential, policy, mu)
    phi_s = None if tau is None else potential_value(game, potential, policy, mu, tau)
    return phi, phi_s


def run(game: MarkovGame, config, initial=None, potential: PotentialSpec | None = None,
        regret_every: int = 1, trace_path=None, keep_policies: bool = True) -> RunTrace:
    """Run PGA or SMBR for ``config.iterations`` steps from the uniform policy.

    Exploitability is measured at ``initial`` (default: the game's ``mu``) on
    every ``regret_every``-th snapshot and on the last one. With ``trace_path``
    the CSV trace is written and flushed row by row, a JSON sidecar with the
    resolved config sits next to it, and the final policy is written to
    ``<stem>.policy.json``.
    """
    if regret_every < 1:
        raise ParameterError("regret_every must be >= 1")
    if potential is not None:
        potential.check(game)
    mu = game.initial_dist if initial is None else np.asarray(initial, dtype=float)
    is_smbr = isinstance(config, SMBRConfig)
    if not is_smbr and not isinstance(config, PGAConfig):
        raise ParameterError("config must be a PGAConfig or SMBRConfig")
    cfg = config.to_dict()
    cfg.update(regret_every=regret_every, initial_dist=mu.tolist())
    trace = RunTrace(cfg)

    writer = fh = None
    if trace_path is not None:
        trace_path = Path(trace_path)
        trace_path.parent.mkdir(parents=True, exist_ok=True)
        trace_path.with_suffix(".json").write_text(json.dumps(cfg, indent=2))
        fh = open(trace_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        fh.flush()

    policy = JointPolicy.uniform(game)
    total, count = 0.0, 0
    last = None
    try:
        for t in range(config.iterations + 1):
            final = t == config.iterations
            tau = config.tau_at(t) if is_smbr else None
            row = TraceRow(t, tau=tau)
            if t % regret_every == 0 or final:
                regret = exploitability(game, policy, mu).max_regret
                row.max_regret = regret
                if t >= 1:
                    total += regret
                    count += 1
                last = total / count if count else regret
            row.nash_regret = last
            row.potential, row.smoothed_potential = _potential_pair(game, potential, policy, mu, tau)
            if keep_policies or final:
                trace.policies.append(policy)
            if not final:
                if is_smbr:
                    step = smbr_step(game, policy, tau, config.tie_break, config.mode, t)
                    row.delta = step.delta
                    if step.terminated:
                        row.terminated = True
                        if row.max_regret is None:
                            regret = exploitability(game, policy, mu).max_regret
                            row.max_regret = regret
                            if t >= 1:
                                total += regret
                                count += 1
                            row.nash_regret = total / count if count else regret
                        trace.terminated = True
                    else:
                        row.player, row.state = step.player, step.state
                        policy = step.policy
                else:
                    policy = pga_step(game, policy, config.eta, config.mode, t)
            trace.rows.append(row)
            if writer is not None:
                writer.writerow(row.as_csv())
                fh.flush()
            if row.terminated:
                if not keep_policies:
                    trace.policies.append(policy)
                break
    finally:
        if fh is not None:
            fh.close()
    if trace_path is not None:
        trace_path.with_suffix(".policy.json").write_text(json.dumps(trace.final_policy.to_dict()))
    return trace


# ---------------------------------------------------------------------------
# theory helpers (not used by the engines)
# ---------------------------------------------------------------------------

def theory_step_size(num_players: int, max_actions: int, discount: float, potential_range: float,
                     alpha: float, iterations: int) -> float:
    """PGA step size ``(1-delta)^2.5 sqrt(C_Phi + |I|^2 alpha T) / (2 |I| |A| sqrt(T))``."""
    if iterations < 1:
        raise ParameterError("iterations must be >= 1")
    num = (1.0 - discount) ** 2.5 * math.sqrt(potential_range + num_players ** 2 * alpha * iterations)
    return num / (2.0 * num_players * max_actions * math.sqrt(iterations))


def theory_tau(max_actions: int, discount: float, reward_bound: float, potential_range: float,
               alpha: float, iterations: int, min_initial: float) -> float:
    """Smoothing parameter of the SMBR regret bound (theorem-statement form)."""
    if iterations < 1:
        raise ParameterError("iterations must be >= 1")
    gap = alpha + potential_range / iterations
    if not gap > 0:
        raise ParameterError("alpha + C_Phi / T must be positive")
    if max_actions < 2:
        raise ParameterError("needs at least two actions")
    log_a = math.log(max_actions)
    root = math.sqrt(gap)
    inv = (log_a + math.sqrt(2.0 * log_a / (1.0 - discount)) / root
           + log_a * (1.0 - discount) * math.sqrt(min_initial) / (4.0 * reward_bound * math.sqrt(max_actions) * root))
    return 1.0 / inv


def smoothed_q_bound(reward_bound: float, tau: float, max_actions: int, discount: float) -> float:
    """Sup bound ``(C + tau log A) / (1 - delta)`` on ``|Q~|``."""
    return (reward_bound + tau * math.log(max_actions)) / (1.0 - discount)


__all__ = [
    "project_simplex",
    "smoothed_br",
    "smoothed_max",
    "improvement",
    "improvement_table",
    "pga_step",
    "smbr_step",
    "StepResult",
    "EvalMode",
    "EXACT",
    "PGAConfig",
    "SMBRConfig",
    "TraceRow",
    "RunTrace",
    "run",
    "TRACE_COLUMNS",
    "TERMINATION_TOL",
    "theory_step_size",
    "theory_tau",
    "smoothed_q_bound",
]
