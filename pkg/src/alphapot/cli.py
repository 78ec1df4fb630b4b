"""``alphapot`` command line: run, evaluate, estimate-alpha, build-game."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .best_response import exploitability
from .errors import AlphaPotError
from .evaluation import exact_values
from .harness import PRESETS, ExperimentConfig, build_game_from_spec, run_experiment
from .io import load_game, load_policy, save_game
from .potentials import estimate_gap, potential_value, reward_potential


def _game_from_args(args):
    if getattr(args, "game", None):
        return load_game(args.game)
    if getattr(args, "spec", None):
        return build_game_from_spec(json.loads(Path(args.spec).read_text()))
    if getattr(args, "preset", None):
        return build_game_from_spec(PRESETS[args.preset]["game"])
    raise AlphaPotError("need --game, --spec or --preset")


def cmd_run(args) -> int:
    overrides = {
        "algorithm": args.algorithm,
        "eta": args.eta,
        "tau0": args.tau0,
        "decay": args.decay,
        "iterations": args.iterations,
        "mode": args.mode,
        "horizon": args.horizon,
        "episodes": args.episodes,
        "regret_every": args.regret_every,
        "output": args.out,
    }
    if args.seeds is not None:
        overrides["seeds"] = args.seeds
    elif args.repetitions is not None:
        overrides["seeds"] = list(range(args.seed, args.seed + args.repetitions))
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        doc.update({k: v for k, v in overrides.items() if v is not None})
        cfg = ExperimentConfig.from_dict(doc)
    elif args.preset:
        cfg = ExperimentConfig.from_preset(args.preset, **overrides)
    elif args.game or args.spec:
        game_doc = {"file": args.game} if args.game else json.loads(Path(args.spec).read_text())
        kw = {k: v for k, v in overrides.items() if v is not None}
        kw.setdefault("algorithm", "pga")
        cfg = ExperimentConfig(game=game_doc, **kw)
    else:
        raise AlphaPotError("need --preset, --config, --game or --spec")
    out = run_experiment(cfg, jobs=args.jobs)
    print(f"wrote {out / 'manifest.json'}")
    return 0


def cmd_evaluate(args) -> int:
    game, potential = _game_from_args(args)
    policy = load_policy(args.policy)
    game.check_policy(policy)
    mu = game.initial_dist if args.initial is None else np.asarray(args.initial, dtype=float)
    if mu.shape != (game.num_states,) or abs(mu.sum() - 1.0) > 1e-12 or (mu < 0).any():
        raise AlphaPotError("--initial must be a distribution over the game's states")
    values = exact_values(game, policy)
    report = exploitability(game, policy, mu, values)
    doc = {
        "values": (values @ mu).tolist(),
        "state_values": values.tolist(),
        "exploitability": report.to_dict(),
    }
    if potential is not None:
        doc["potential"] = potential_value(game, potential, policy, mu)
    text = json.dumps(doc, indent=2)
    if args.output:
        Path(args.output).write_text(text)
    print(text)
    return 0


def cmd_estimate_alpha(args) -> int:
    game, potential = _game_from_args(args)
    if args.potential == "attached":
        if potential is None:
            raise AlphaPotError("game has no attached potential; use --potential reward:<player>")
    elif args.potential.startswith("reward:"):
        potential = reward_potential(game, int(args.potential.split(":", 1)[1]))
    else:
        raise AlphaPotError(f"unsupported potential mode {args.potential!r}")
    est = estimate_gap(game, potential, probes=args.probes, seed=args.seed, max_enumerate=args.max_enumerate)
    doc = est.to_dict()
    doc["family"] = potential.family
    print(json.dumps(doc, indent=2))
    return 0


def cmd_build_game(args) -> int:
    if args.preset:
        spec = json.loads(json.dumps(PRESETS[args.preset]["game"]))
    elif args.spec:
        spec = json.loads(Path(args.spec).read_text())
    else:
        raise AlphaPotError("need --preset or --spec")
    if args.players is not None:
        spec["num_players"] = args.players
    if args.discount is not None:
        spec["discount"] = args.discount
    game, potential = build_game_from_spec(spec)
    save_game(args.output, game, potential, meta={"spec": spec})
    print(f"wrote {args.output} ({game.num_players} players, {game.num_states} states, "
          f"{game.num_joint} joint actions)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alphapot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run PGA or SMBR and write traces")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--config", help="ExperimentConfig JSON file")
    src.add_argument("--game", help="compiled game JSON")
    src.add_argument("--spec", help="game builder spec JSON")
    p.add_argument("--algorithm", choices=["pga", "smbr"])
    p.add_argument("--eta", type=float)
    p.add_argument("--tau0", type=float)
    p.add_argument("--decay", type=float)
    p.add_argument("--iterations", "-T", type=int)
    p.add_argument("--mode", choices=["exact", "sampled"])
    p.add_argument("--horizon", type=int)
    p.add_argument("--episodes", type=int, help="rollouts per (state, action) entry")
    p.add_argument("--regret-every", type=int)
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--seed", type=int, default=0, help="first seed when --repetitions is given")
    p.add_argument("--jobs", type=int, default=1, help="parallel repetitions")
    p.add_argument("--out", help="output directory (default: $ALPHAPOT_OUT or ./alphapot_runs)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="values, exploitability and potential of a policy")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--game")
    src.add_argument("--spec")
    src.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--policy", required=True)
    p.add_argument("--initial", type=float, nargs="+", help="override the initial distribution")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("estimate-alpha", help="empirical alpha over unilateral deviations")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--game")
    src.add_argument("--spec")
    src.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--potential", default="attached", help="'attached' or 'reward:<player>'")
    p.add_argument("--probes", type=int, help="random probes (default: exhaustive when small)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-enumerate", type=int, default=20_000)
    p.set_defaults(func=cmd_estimate_alpha)

    p = sub.add_parser("build-game", help="compile a game spec or preset to JSON")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--spec")
    p.add_argument("--players", type=int)
    p.add_argument("--discount", type=float)
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=cmd_build_game)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (AlphaPotError, ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"alphapot: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
