"""Experiment runner: presets, repetitions, CSV traces, metrics and a JSON manifest.

Layout of one experiment directory::

    manifest.json            resolved config, seeds, library version, backend
    aggregate.csv            per-iteration mean/std of L1-accuracy and regret across runs
    run_<seed>/trace.csv     dynamics trace (TRACE_COLUMNS)
    run_<seed>/trace.json    run config sidecar
    run_<seed>/trace.policy.json   final policy
    run_<seed>/metrics.csv   METRICS_COLUMNS

A run that stops early (SMBR fixed point) is padded to the full horizon in
the aggregate: its policy no longer moves, so L1-accuracy stays 0 and the
last regret values carry over.
"""
from __future__ import annotations

import copy
import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import TRACE_COLUMNS, EvalMode, PGAConfig, SMBRConfig, run
from .errors import ParameterError
from .io import load_game
from .kernels import BACKEND
from .zoo import CongestionGameSpec, TeamGameSpec, build_mcg, build_pmtg

OUTPUT_ENV = "ALPHAPOT_OUT"
METRICS_COLUMNS = ("iteration", "l1_accuracy", "max_regret", "nash_regret", "potential")
AGGREGATE_COLUMNS = (
    "iteration",
    "l1_mean",
    "l1_std",
    "max_regret_mean",
    "max_regret_std",
    "nash_regret_mean",
    "nash_regret_std",
    "num_runs",
)

# Parameters of the experiments: |I|, delta, weights, thresholds, episode
# length 20, batch 10, step sizes and tau schedules.
PRESETS = {
    "mcg-paper": {
        "game": {"builder": "mcg", "num_players": 8, "discount": 0.99,
                 "params": {"weights": [1.0, 2.0, 4.0, 6.0], "penalty": -100.0}},
        "pga": {"eta": 0.01},
        "smbr": {"tau0": 5.0, "decay": 0.999},
        "algorithm": "pga",
    },
    "pmtg-paper": {
        "game": {"builder": "pmtg", "num_players": 16, "discount": 0.99, "params": {}},
        "pga": {"eta": 0.05},
        "smbr": {"tau0": 0.05, "decay": 0.9975},
        "algorithm": "pga",
    },
    "pmtg-logistic": {
        "game": {"builder": "pmtg", "num_players": 16, "discount": 0.99,
                 "params": {"transition_mode": "logistic", "steepness": 50.0}},
        "pga": {"eta": 0.05},
        "smbr": {"tau0": 0.05, "decay": 0.9975},
        "algorithm": "pga",
    },
}
for _name in list(PRESETS):
    _smbr = copy.deepcopy(PRESETS[_name])
    _smbr["algorithm"] = "smbr"
    PRESETS[f"{_name}-smbr"] = _smbr

PRESET_DEFAULTS = {"iterations": 1000, "mode": "sampled", "horizon": 20, "episodes": 10, "regret_every": 10}


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce an experiment."""

    game: dict
    algorithm: str = "pga"
    eta: float | None = None
    tau0: float | None = None
    decay: float = 1.0
    iterations: int = 100
    mode: str = "exact"
    horizon: int = 20
    episodes: int = 10
    regret_every: int = 1
    seeds: list = field(default_factory=lambda: [0])
    output: str | None = None
    preset: str | None = None

    def __post_init__(self):
        if self.algorithm not in ("pga", "smbr"):
            raise ParameterError(f"unknown algorithm {self.algorithm!r}")
        if self.algorithm == "pga" and not (self.eta is not None and self.eta > 0):
            raise ParameterError("pga needs a positive eta")
        if self.algorithm == "smbr" and not (self.tau0 is not None and self.tau0 > 0):
            raise ParameterError("smbr needs a positive tau0")
        if self.iterations < 0 or self.regret_every < 1:
            raise ParameterError("iterations must be >= 0 and regret_every >= 1")
        if not self.seeds:
            raise ParameterError("need at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ParameterError("seeds must be distinct")
        if "file" in self.game and not Path(self.game["file"]).exists():
            raise ParameterError(f"game file {self.game['file']} does not exist")
        self.seeds = [int(s) for s in self.seeds]
        EvalMode(self.mode, self.horizon, self.episodes)

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "ExperimentConfig":
        if name not in PRESETS:
            raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        p = PRESETS[name]
        algo = overrides.pop("algorithm", None) or p["algorithm"]
        kw = dict(PRESET_DEFAULTS, game=copy.deepcopy(p["game"]), algorithm=algo, preset=name)
        kw.update(p[algo])
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        if "preset" in doc and doc["preset"]:
            rest = {k: v for k, v in doc.items() if k != "preset"}
            return cls.from_preset(doc["preset"], **rest)
        return cls(**doc)

    def dynamics_config(self, seed: int):
        mode = EvalMode(self.mode, self.horizon, self.episodes, seed)
        if self.algorithm == "pga":
            return PGAConfig(self.eta, self.iterations, mode)
        return SMBRConfig(self.tau0, self.iterations, self.decay, mode=mode)

    def to_dict(self) -> dict:
        return asdict(self)


def build_game_from_spec(doc: dict):
    """``(game, potential)`` from a builder spec or ``{"file": path}``."""
    if "file" in doc:
        return load_game(doc["file"])
    builder = doc.get("builder")
    params = dict(doc.get("params", {}))
    n, delta, mu = int(doc["num_players"]), float(doc["discount"]), doc.get("initial")
    if builder == "mcg":
        if "reward_table" in params:
            params["reward_table"] = np.asarray(params["reward_table"], dtype=float)
        return build_mcg(CongestionGameSpec(**params), n, delta, mu)
    if builder == "pmtg":
        return build_pmtg(TeamGameSpec(**params), n, delta, mu)
    raise ParameterError(f"unknown game builder {builder!r}")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["" if x is None or (isinstance(x, float) and np.isnan(x)) else
                        (repr(float(x)) if isinstance(x, (float, np.floating)) else x) for x in row])


def _run_one(game, potential, cfg: ExperimentConfig, seed: int, run_dir: Path) -> dict:
    run_dir.mkdir(parents=True, exist_ok=True)
    trace = run(game, cfg.dynamics_config(seed), potential=potential,
                regret_every=cfg.regret_every, trace_path=run_dir / "trace.csv")
    l1 = trace.l1_accuracy()
    rows = [
        (r.iteration, float(l1[k]), r.max_regret, r.nash_regret, r.potential)
        for k, r in enumerate(trace.rows)
    ]
    _write_csv(run_dir / "metrics.csv", METRICS_COLUMNS, rows)
    return {
        "seed": seed,
        "trace": str((run_dir / "trace.csv").name),
        "metrics": str((run_dir / "metrics.csv").name),
        "policy": str((run_dir / "trace.policy.json").name),
        "dir": run_dir.name,
        "terminated": trace.terminated,
        "length": len(trace.rows),
    }


def _read_metrics(path: Path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for col in METRICS_COLUMNS:
        out[col] = np.array([float(r[col]) if r[col] != "" else np.nan for r in rows])
    return out


def _carry(x: np.ndarray, length: int) -> np.ndarray:
    """Forward-fill NaNs, then pad to ``length`` with the last value."""
    x = x.copy()
    for k in range(1, x.size):
        if np.isnan(x[k]):
            x[k] = x[k - 1]
    if x.size < length:
        x = np.concatenate([x, np.full(length - x.size, x[-1] if x.size else np.nan)])
    return x


def aggregate_metrics(metric_files, iterations: int) -> list:
    """Per-iteration mean and population std (ddof=0) across runs."""
    length = iterations + 1
    data = [_read_metrics(Path(p)) for p in metric_files]
    l1 = np.stack([np.concatenate([d["l1_accuracy"], np.zeros(length - d["l1_accuracy"].size)]) for d in data])
    reg = np.stack([_carry(d["max_regret"], length) for d in data])
    nash = np.stack([_carry(d["nash_regret"], length) for d in data])
    rows = []
    for t in range(length):
        rows.append((t, l1[:, t].mean(), l1[:, t].std(), reg[:, t].mean(), reg[:, t].std(),
                     nash[:, t].mean(), nash[:, t].std(), len(data)))
    return rows


def game_summary(game, potential, spec_doc: dict) -> dict:
    out = {
        "spec": spec_doc,
        "num_players": game.num_players,
        "num_states": game.num_states,
        "action_counts": list(game.action_counts),
        "num_joint_actions": game.num_joint,
        "discount": game.discount,
        "reward_bound": game.reward_bound,
    }
    if potential is not None:
        out.update(family=potential.family, alpha_bound=potential.alpha_bound,
                   potential_range_bound=potential.potential_range_bound)
    return out


def output_root(explicit: str | None) -> Path:
    return Path(explicit or os.environ.get(OUTPUT_ENV) or "alphapot_runs")


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, game_and_potential=None) -> Path:
    """Execute every repetition and write all artifacts; returns the experiment directory."""
    out = output_root(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    game, potential = game_and_potential or build_game_from_spec(cfg.game)
    dirs = [out / f"run_{seed}" for seed in cfg.seeds]
    if jobs > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_one, game, potential, cfg, s, d) for s, d in zip(cfg.seeds, dirs)]
            runs = [f.result() for f in futures]
    else:
        runs = [_run_one(game, potential, cfg, s, d) for s, d in zip(cfg.seeds, dirs)]
    for r in runs:
        for key in ("trace", "metrics", "policy"):
            r[key] = f"{r['dir']}/{r[key]}"
    agg = aggregate_metrics([out / r["metrics"] for r in runs], cfg.iterations)
    _write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS, agg)
    experiment = cfg.to_dict()
    experiment["output"] = str(out)
    manifest = {
        "version": __version__,
        "backend": BACKEND,
        "experiment": experiment,
        "seed_derivation": "iteration t of run with seed s samples from numpy.random.default_rng([s, t])",
        "game": game_summary(game, potential, cfg.game),
        "runs": runs,
        "aggregate": "aggregate.csv",
        "trace_columns": list(TRACE_COLUMNS),
        "metrics_columns": list(METRICS_COLUMNS),
        "aggregate_columns": list(AGGREGATE_COLUMNS),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out


__all__ = [
    "ExperimentConfig",
    "PRESETS",
    "METRICS_COLUMNS",
    "AGGREGATE_COLUMNS",
    "OUTPUT_ENV",
    "build_game_from_spec",
    "aggregate_metrics",
    "run_experiment",
    "game_summary",
]
