import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alphapot.errors import ShapeError
from alphapot.game import (
    JointPolicy,
    MarkovGame,
    decode_joint,
    expected_reward,
    induced_chain,
    joint_action_iter,
    joint_index,
)
from alphapot.zoo import random_game

from conftest import random_policy


def test_joint_action_order():
    assert [a for _, a in joint_action_iter([2])] == [(0,), (1,)]
    assert [a for _, a in joint_action_iter([2, 2])] == [(0, 0), (1, 0), (0, 1), (1, 1)]
    acts = [a for _, a in joint_action_iter([3, 2])]
    assert len(acts) == 6 and len(set(acts)) == 6


@given(st.lists(st.integers(1, 4), min_size=1, max_size=4))
def test_joint_index_roundtrip(counts):
    for idx, acts in joint_action_iter(counts):
        assert joint_index(acts, counts) == idx
        assert decode_joint(idx, counts) == acts


def test_validation_rejects_bad_rows():
    trans = np.array([[[0.5, 0.5]], [[1.0, 0.0]]])
    with pytest.raises(ValueError):
        MarkovGame((1,), np.zeros((1, 2, 1)), trans * 1.001, 0.9, [0.5, 0.5])
    with pytest.raises(ValueError):
        MarkovGame((1,), np.zeros((1, 2, 1)), trans, 1.0, [0.5, 0.5])
    with pytest.raises(ValueError):
        MarkovGame((1,), np.zeros((1, 2, 1)), trans, 0.9, [0.6, 0.5])
    with pytest.raises(ShapeError):
        MarkovGame((2,), np.zeros((1, 2, 1)), trans, 0.9, [0.5, 0.5])


def test_policy_validation(small_game):
    with pytest.raises(ValueError):
        JointPolicy([np.array([[0.6, 0.6]]), np.array([[1.0, 0, 0]])])
    bad = JointPolicy([np.full((2, 2), 0.5), np.full((2, 3), 1 / 3)])
    with pytest.raises(ShapeError):
        small_game.check_policy(bad)


def test_induced_chain_single_state():
    g = MarkovGame((2,), np.zeros((1, 1, 2)), np.ones((1, 2, 1)), 0.5, [1.0])
    assert np.array_equal(induced_chain(g, JointPolicy.uniform(g)), [[1.0]])


def test_induced_chain_matches_enumeration(rng):
    g = random_game(rng, (2, 2), 2, 0.9)
    pol = JointPolicy.uniform(g)
    want = np.mean([g.transitions[:, j, :] for j in range(4)], axis=0)
    assert np.allclose(induced_chain(g, pol), want, atol=1e-15)
    pol = random_policy(rng, g)
    want = np.zeros((2, 2))
    for j, (a0, a1) in joint_action_iter(g):
        w = pol[0][:, a0] * pol[1][:, a1]
        want += w[:, None] * g.transitions[:, j, :]
    assert np.allclose(induced_chain(g, pol), want, atol=1e-14)


def test_deterministic_policy_reads_rows(rng):
    g = random_game(rng, (3, 2), 3, 0.9)
    acts = [[2, 0, 1], [1, 1, 0]]
    pol = JointPolicy.deterministic(g, acts)
    chain = induced_chain(g, pol)
    for s in range(3):
        j = joint_index((acts[0][s], acts[1][s]), g.action_counts)
        assert np.array_equal(chain[s], g.transitions[s, j])
        assert expected_reward(g, pol, 1)[s] == pytest.approx(g.rewards[1, s, j], abs=0)


def test_expected_reward_enumeration(rng):
    g = random_game(rng, (2, 2, 2), 2, 0.9)
    pol = JointPolicy.uniform(g)
    assert np.allclose(expected_reward(g, pol, 2), g.rewards[2].mean(axis=1), atol=1e-15)
    const = MarkovGame(g.action_counts, np.full_like(g.rewards, 3.5), g.transitions, 0.9, g.initial_dist)
    assert np.allclose(expected_reward(const, random_policy(rng, g), 0), 3.5, atol=1e-14)


def test_chain_rows_and_affinity(rng):
    g = random_game(rng, (3, 2), 4, 0.9)
    for _ in range(20):
        p, q = random_policy(rng, g), random_policy(rng, g)
        assert np.allclose(induced_chain(g, p).sum(axis=1), 1.0, atol=1e-12)
        mix = JointPolicy([0.5 * a + 0.5 * b if i == 0 else a for i, (a, b) in enumerate(zip(p, q))])
        q0 = JointPolicy([q[0], p[1]])
        assert np.allclose(induced_chain(g, mix), 0.5 * induced_chain(g, p) + 0.5 * induced_chain(g, q0), atol=1e-14)


def test_reward_bound(rng):
    g = random_game(rng, (2, 3), 3, 0.9)
    for _ in range(10):
        pol = random_policy(rng, g)
        for i in range(2):
            assert np.all(np.abs(expected_reward(g, pol, i)) <= np.abs(g.rewards[i]).max(axis=1) + 1e-14)


def test_game_roundtrip(rng):
    g = random_game(rng, (2, 3), 3, 0.9)
    h = MarkovGame.from_dict(g.to_dict())
    assert np.array_equal(g.rewards, h.rewards) and np.array_equal(g.transitions, h.transitions)
    pol = random_policy(rng, g)
    assert JointPolicy.from_dict(pol.to_dict()).equals(pol)


def test_arrays_are_read_only(small_game):
    with pytest.raises(ValueError):
        small_game.rewards[0, 0, 0] = 1.0
    pol = JointPolicy.uniform(small_game)
    with pytest.raises(ValueError):
        pol[0][0, 0] = 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_chain_is_stochastic(seed):
    rng = np.random.default_rng(seed)
    counts = tuple(int(x) for x in rng.integers(1, 4, size=rng.integers(1, 4)))
    g = random_game(rng, counts, int(rng.integers(1, 5)), 0.9)
    chain = induced_chain(g, random_policy(rng, g))
    assert np.all(chain >= 0)
    assert np.allclose(chain.sum(axis=1), 1.0, atol=1e-12)


def test_joint_iter_matches_product():
    counts = (2, 3, 2)
    want = [tuple(reversed(t)) for t in itertools.product(*(range(n) for n in reversed(counts)))]
    assert [a for _, a in joint_action_iter(counts)] == want
