"""Hot numeric kernels over flattened joint actions.

Every kernel has a pure-numpy implementation (``*_np``) and a numba one
(``*_nb``); the unsuffixed names dispatch according to
:data:`alphapot._accel.USE_NUMBA`. Joint actions are flattened with player 0
varying fastest: ``j = a_0 + A_0 * (a_1 + A_1 * (a_2 + ...))``.

Policies enter the kernels as a padded stack of shape ``(I, S, A_max)``.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# joint action weights  w(s, j) = prod_i pi_i(s, a_i(j))
# ---------------------------------------------------------------------------

def joint_weights_np(pi_stack, action_counts, skip=-1):
    """Product weights over joint actions; player ``skip`` contributes a factor 1."""
    n_states = pi_stack.shape[1]
    w = np.ones((n_states, 1))
    for i in range(len(action_counts) - 1, -1, -1):
        n_act = int(action_counts[i])
        p = np.ones((n_states, n_act)) if i == skip else pi_stack[i, :, :n_act]
        w = (w[:, :, None] * p[:, None, :]).reshape(n_states, -1)
    return w


@njit(cache=True)
def joint_weights_nb(pi_stack, action_counts, skip=-1):
    # progressive outer product in the numpy path's order (last player first)
    n = action_counts.shape[0]
    n_states = pi_stack.shape[1]
    n_joint = 1
    for i in range(n):
        n_joint *= action_counts[i]
    w = np.ones((n_states, n_joint))
    width = 1
    for i in range(n - 1, -1, -1):
        n_act = action_counts[i]
        for s in range(n_states):
            for k in range(width - 1, -1, -1):
                base = w[s, k]
                for a in range(n_act - 1, -1, -1):
                    p = 1.0 if i == skip else pi_stack[i, s, a]
                    w[s, k * n_act + a] = base * p
        width *= n_act
    return w


# ---------------------------------------------------------------------------
# opponent marginalisation  out(s, a_p, k) = sum_{a_-p} pi_-p(s, a_-p) table(s, a, k)
# ---------------------------------------------------------------------------

def marginalize_np(table, pi_stack, action_counts, player):
    n_states, _, k = table.shape
    w = joint_weights_np(pi_stack, action_counts, skip=player)
    prod = table * w[:, :, None]
    n = len(action_counts)
    # C-order reshape puts player n-1 on axis 1 and player 0 on axis n
    shape = (n_states,) + tuple(int(action_counts[i]) for i in range(n - 1, -1, -1)) + (k,)
    prod = prod.reshape(shape)
    keep = 1 + (n - 1 - player)
    axes = tuple(ax for ax in range(1, n + 1) if ax != keep)
    return prod.sum(axis=axes) if axes else prod


@njit(cache=True)
def marginalize_nb(table, pi_stack, action_counts, player):
    n_states, n_joint, k = table.shape
    w = joint_weights_nb(pi_stack, action_counts, player)
    stride = 1
    for i in range(player):
        stride *= action_counts[i]
    n_act = action_counts[player]
    out = np.zeros((n_states, n_act, k))
    for s in range(n_states):
        for j in range(n_joint):
            wj = w[s, j]
            if wj != 0.0:
                ap = (j // stride) % n_act
                for kk in range(k):
                    out[s, ap, kk] += wj * table[s, j, kk]
    return out


# ---------------------------------------------------------------------------
# truncated discounted rollouts
# ---------------------------------------------------------------------------

def rollouts_np(starts, first_actions, player, pi_cdf, pi_last, p_cdf, p_last,
                strides, reward, bonus, discount, uniforms):
    """Discounted returns of ``len(starts)`` rollouts, vectorised over rollouts.

    Rollout ``n`` starts in ``starts[n]`` with ``player`` forced to play
    ``first_actions[n]`` at step 0; every other draw consumes
    ``uniforms[n, step, i]`` (players) or ``uniforms[n, step, I]`` (next state).
    """
    n_roll, horizon, _ = uniforms.shape
    n_players = pi_cdf.shape[0]
    state = starts.astype(np.int64).copy()
    ret = np.zeros(n_roll)
    disc = 1.0
    for step in range(horizon):
        joint = np.zeros(n_roll, np.int64)
        for i in range(n_players):
            if step == 0 and i == player:
                act = first_actions.astype(np.int64)
            else:
                cdf = pi_cdf[i, state]
                act = (uniforms[:, step, i][:, None] >= cdf).sum(axis=1)
                act = np.minimum(act, pi_last[i, state])
            joint += act * strides[i]
        ret = ret + disc * (reward[state, joint] + bonus[state])
        disc *= discount
        if step + 1 < horizon:
            cdf = p_cdf[state, joint]
            nxt = (uniforms[:, step, n_players][:, None] >= cdf).sum(axis=1)
            state = np.minimum(nxt, p_last[state, joint])
    return ret


@njit(cache=True)
def _draw(cdf, last, u):
    for k in range(cdf.shape[0]):
        if u < cdf[k]:
            return k
    return last


@njit(cache=True)
def rollouts_nb(starts, first_actions, player, pi_cdf, pi_last, p_cdf, p_last,
                strides, reward, bonus, discount, uniforms):
    n_roll, horizon, _ = uniforms.shape
    n_players = pi_cdf.shape[0]
    out = np.zeros(n_roll)
    for n in range(n_roll):
        state = starts[n]
        ret = 0.0
        disc = 1.0
        for step in range(horizon):
            joint = 0
            for i in range(n_players):
                if step == 0 and i == player:
                    act = first_actions[n]
                else:
                    act = _draw(pi_cdf[i, state], pi_last[i, state], uniforms[n, step, i])
                joint += act * strides[i]
            ret = ret + disc * (reward[state, joint] + bonus[state])
            disc *= discount
            if step + 1 < horizon:
                state = _draw(p_cdf[state, joint], p_last[state, joint],
                              uniforms[n, step, n_players])
        out[n] = ret
    return out


if USE_NUMBA:
    joint_weights = joint_weights_nb
    marginalize = marginalize_nb
    rollouts = rollouts_nb
else:
    joint_weights = joint_weights_np
    marginalize = marginalize_np
    rollouts = rollouts_np

BACKEND = "numba" if USE_NUMBA else "numpy"
