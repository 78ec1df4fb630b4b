import numpy as np
import pytest

from alphapot.game import JointPolicy
from alphapot.zoo import random_game


def random_policy(rng, game, deterministic=False):
    out = []
    for n in game.action_counts:
        if deterministic:
            t = np.zeros((game.num_states, n))
            t[np.arange(game.num_states), rng.integers(0, n, game.num_states)] = 1.0
        else:
            t = rng.dirichlet(np.ones(n), size=game.num_states)
        out.append(t)
    return JointPolicy(out)


def random_instance(rng, max_states=5, max_players=3, max_actions=3, discounts=(0.5, 0.9, 0.99)):
    n_players = int(rng.integers(1, max_players + 1))
    counts = tuple(int(rng.integers(1, max_actions + 1)) for _ in range(n_players))
    n_states = int(rng.integers(1, max_states + 1))
    delta = float(rng.choice(discounts))
    return random_game(rng, counts, n_states, delta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_game(rng):
    return random_game(rng, (2, 3), 3, 0.9)


@pytest.fixture
def acceptance(request):
    """Record one acceptance line: ``acceptance(number, passed, detail)``."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", {})

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
