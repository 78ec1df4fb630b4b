"""Time the numba kernels against the pure-numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--players 8] [--repeat 5]

Both implementations are imported directly, so the ALPHAPOT_NUMBA flag does
not matter here. Numba timings exclude the first (compiling) call.
"""
import argparse
import timeit

import numpy as np

from alphapot import kernels
from alphapot._accel import HAS_NUMBA
from alphapot.evaluation import _policy_cdf
from alphapot.game import JointPolicy
from alphapot.zoo import CongestionGameSpec, build_mcg


def _cases(players: int, episodes: int, horizon: int, seed: int):
    rng = np.random.default_rng(seed)
    game, _ = build_mcg(CongestionGameSpec(transition_mode="logistic", steepness=5.0), players, 0.99)
    policy = JointPolicy([rng.dirichlet(np.ones(n), game.num_states) for n in game.action_counts])
    stack, counts = policy.stack(), np.asarray(game.action_counts, dtype=np.int64)
    table = np.ascontiguousarray(game.rewards[0][:, :, None])
    pi_cdf, pi_last = _policy_cdf(policy)
    p_cdf, p_last = game.transition_cdf
    n_roll = game.num_states * game.action_counts[0] * episodes
    starts = np.repeat(np.arange(game.num_states), game.action_counts[0] * episodes)
    firsts = np.tile(np.repeat(np.arange(game.action_counts[0]), episodes), game.num_states)
    uniforms = rng.random((n_roll, horizon, players + 1))
    roll_args = (starts, firsts, 0, pi_cdf, pi_last, p_cdf, p_last, game.strides,
                 np.ascontiguousarray(game.rewards[0]), np.zeros(game.num_states), game.discount, uniforms)
    return {
        "joint_weights": (kernels.joint_weights_np, kernels.joint_weights_nb, (stack, counts)),
        "marginalize": (kernels.marginalize_np, kernels.marginalize_nb, (table, stack, counts, 0)),
        "rollouts": (kernels.rollouts_np, kernels.rollouts_nb, roll_args),
    }, game


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--players", type=int, default=8)
    parser.add_argument("--episodes", type=int, default=10)
    parser.add_argument("--horizon", type=int, default=20)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    cases, game = _cases(args.players, args.episodes, args.horizon, args.seed)
    print(f"MCG with {game.num_players} players, {game.num_states} states, {game.num_joint} joint actions")
    print(f"{'kernel':<14}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max diff':>12}")
    for name, (np_fn, nb_fn, fn_args) in cases.items():
        t_np = min(timeit.repeat(lambda: np_fn(*fn_args), number=1, repeat=args.repeat))
        if not HAS_NUMBA:
            print(f"{name:<14}{1e3 * t_np:>12.2f}{'n/a':>12}")
            continue
        diff = float(np.abs(np_fn(*fn_args) - nb_fn(*fn_args)).max())
        t_nb = min(timeit.repeat(lambda: nb_fn(*fn_args), number=1, repeat=args.repeat))
        print(f"{name:<14}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
