"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are printed as the tests run and repeated in a summary section at
the end of the pytest session. Criterion 9 is a known failure, documented
below and marked ``xfail(strict=True)`` so that its FAIL line does not turn the
suite red while any unexpected pass would.
"""
import itertools
import json
import time

import jsonschema
import numpy as np
import pytest

from alphapot.best_response import exploitability, induce_mdp, solve_mdp
from alphapot.cli import main
from alphapot.dynamics import PGAConfig, SMBRConfig, run, smbr_step
from alphapot.evaluation import (
    entropy_values,
    evaluate,
    exact_values,
    smoothed_values,
    visitation,
)
from alphapot.game import JointPolicy, MarkovGame, expected_rewards, induced_chain
from alphapot.io import load_schema, read_trace
from alphapot.potentials import estimate_gap, mcg_transition_bound
from alphapot.zoo import (
    CongestionGameSpec,
    TeamGameSpec,
    build_mcg,
    build_pmtg,
    build_team_game,
    random_game,
    random_mcg_spec,
    random_team_game,
)

from conftest import random_instance, random_policy

TEAM_SEEDS = range(30)


def _team_game(seed):
    """The alpha = 0 team game of criteria 9 and 11 (2 players, 2 states, 2 actions)."""
    return random_team_game(np.random.default_rng(seed), (2, 2), 2, 0.9)


def _unilateral(rng, game, policy, player):
    new = rng.dirichlet(np.ones(game.action_counts[player]), game.num_states)
    return JointPolicy([new if k == player else p for k, p in enumerate(policy)])


def test_c01_bellman_consistency(acceptance):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    resid = cons = vis_sum = vis_dom = 0.0
    for _ in range(100):
        g = random_instance(rng)
        pol = random_policy(rng, g)
        res = evaluate(g, pol)
        bell = res.values - expected_rewards(g, pol) - g.discount * res.values @ induced_chain(g, pol).T
        resid = max(resid, np.abs(bell).max())
        for i in range(g.num_players):
            cons = max(cons, np.abs((pol[i] * res.q_tables[i]).sum(axis=1) - res.values[i]).max())
        d = visitation(g, pol)
        vis_sum = max(vis_sum, abs(d.sum() - 1.0))
        vis_dom = max(vis_dom, ((1 - g.discount) * g.initial_dist - d).max())
    elapsed = time.perf_counter() - start
    ok = resid <= 1e-9 and cons <= 1e-9 and vis_sum <= 1e-9 and vis_dom <= 1e-12 and elapsed < 10
    acceptance(1, ok, f"residual {resid:.1e}, V-sum(pi Q) {cons:.1e}, |sum d - 1| {vis_sum:.1e}, "
                      f"domination slack {vis_dom:.1e}, {elapsed:.1f}s")
    assert ok


def _enumerate(mdp):
    best = np.full(mdp.num_states, -np.inf)
    for acts in itertools.product(range(mdp.num_actions), repeat=mdp.num_states):
        best = np.maximum(best, mdp.evaluate(acts))
    return best


def test_c02_best_response_oracle(acceptance):
    rng = np.random.default_rng(202)
    worst, count = 0.0, 0
    while count < 50:
        g = random_instance(rng, max_states=6, max_players=3, max_actions=3)
        i = int(rng.integers(g.num_players))
        if g.action_counts[i] ** g.num_states > 729:
            continue
        mdp = induce_mdp(g, random_policy(rng, g), i)
        v, _ = solve_mdp(mdp)
        worst = max(worst, np.abs(v - _enumerate(mdp)).max())
        count += 1
    ok = worst <= 1e-8
    acceptance(2, ok, f"max |solve_mdp - enumeration| {worst:.1e} over {count} instances")
    assert ok


def test_c03_rosenthal_exactness(acceptance):
    rng = np.random.default_rng(303)
    worst, checks = 0.0, 0
    for _ in range(50):
        n = int(rng.integers(2, 5))
        spec = random_mcg_spec(rng, n, int(rng.integers(1, 4)), nonnegative=False)
        g, pot = build_mcg(spec, n, 0.9)
        acts = g.joint_actions
        for i in range(n):
            for b in range(g.action_counts[i]):
                alt = acts.copy()
                alt[:, i] = b
                k = alt @ g.strides
                d_phi = pot.stage_potential - pot.stage_potential[:, k]
                d_u = g.rewards[i] - g.rewards[i][:, k]
                worst = max(worst, np.abs(d_phi - d_u).max())
                checks += d_phi.size
    ok = worst <= 1e-12
    acceptance(3, ok, f"max |dPhi - du_i| {worst:.1e} over {checks} unilateral pairs")
    assert ok


def test_c04_transition_difference_bound(acceptance):
    rng = np.random.default_rng(404)
    slack = np.inf
    for _ in range(40):
        n = int(rng.integers(2, 5))
        spec = random_mcg_spec(rng, n, int(rng.integers(1, 3)), steepness=float(rng.uniform(0.5, 5.0)))
        g, _ = build_mcg(spec, n, 0.9)
        bound = mcg_transition_bound(spec, spec.lipschitz_zeta(n), n)
        for _ in range(25):
            pol = random_policy(rng, g, deterministic=rng.random() < 0.5)
            alt = _unilateral(rng, g, pol, int(rng.integers(n)))
            diff = np.abs(induced_chain(g, pol) - induced_chain(g, alt)).sum(axis=1).max()
            slack = min(slack, bound + 1e-9 - diff)
    ok = slack >= 0
    acceptance(4, ok, f"min (bound + 1e-9 - measured) {slack:.3g} over 1000 deviations")
    assert ok


def test_c05_pmtg_gap(acceptance):
    g, pot = build_pmtg(TeamGameSpec(kappa=0.1), 2, 0.5)
    est = estimate_gap(g, pot)
    g0, pot0 = build_pmtg(TeamGameSpec(kappa=0.0), 2, 0.5)
    est0 = estimate_gap(g0, pot0)
    ok = est.estimate <= 0.8 and est0.estimate <= 1e-8 and pot.alpha_bound == pytest.approx(0.8)
    acceptance(5, ok, f"kappa=0.1: gap {est.estimate:.4f} <= 0.8 ({est.num_probes} probes); "
                      f"kappa=0: gap {est0.estimate:.1e}")
    assert ok


def test_c06_smoothed_identity_and_entropy_gap(acceptance):
    rng = np.random.default_rng(606)
    ident, slack = 0.0, np.inf
    for _ in range(100):
        g = random_instance(rng)
        tau = float(rng.uniform(0.01, 2.0))
        i = int(rng.integers(g.num_players))
        pol = random_policy(rng, g)
        alt = _unilateral(rng, g, pol, i)
        sm, sm_alt = smoothed_values(g, pol, tau), smoothed_values(g, alt, tau)
        v, v_alt = exact_values(g, pol), exact_values(g, alt)
        ident = max(ident, np.abs(sm.values - (v - tau * entropy_values(g, pol))).max())
        dd = np.abs((sm_alt.values[i] - sm.values[i]) - (v_alt[i] - v[i])).max()
        slack = min(slack, 2 * tau * np.log(g.action_counts[i]) / (1 - g.discount) - dd)
    ok = ident <= 1e-9 and slack >= -1e-12
    acceptance(6, ok, f"identity error {ident:.1e}; min entropy-gap slack {slack:.3g}")
    assert ok


def _pdl_gap(g, pol, alt, i, tau=None):
    """|V_i(alt) - V_i(pi) - performance-difference sum| at the initial law."""
    mu = g.initial_dist
    d_alt = visitation(g, alt)
    if tau is None:
        res, res_alt = evaluate(g, pol), evaluate(g, alt)
        adv = ((alt[i] - pol[i]) * res.q_tables[i]).sum(axis=1)
    else:
        res, res_alt = smoothed_values(g, pol, tau), smoothed_values(g, alt, tau)
        adv = ((alt[i] - pol[i]) * res.q_tables[i]).sum(axis=1) - tau * (res_alt.entropy[i] - res.entropy[i])
    lhs = (res_alt.values[i] - res.values[i]) @ mu
    return abs(lhs - d_alt @ adv / (1 - g.discount))


def test_c07_performance_difference(acceptance):
    rng = np.random.default_rng(707)
    raw = smooth = 0.0
    for _ in range(100):
        g = random_instance(rng)
        i = int(rng.integers(g.num_players))
        pol = random_policy(rng, g)
        alt = _unilateral(rng, g, pol, i)
        raw = max(raw, _pdl_gap(g, pol, alt, i))
        smooth = max(smooth, _pdl_gap(g, pol, alt, i, tau=float(rng.uniform(0.01, 1.0))))
    ok = raw <= 1e-8 and smooth <= 1e-8
    acceptance(7, ok, f"raw error {raw:.1e}, smoothed error {smooth:.1e} over 100 triples")
    assert ok


def test_c08_smbr_structure(acceptance):
    rng = np.random.default_rng(808)
    rows_ok, min_delta, term_ok, steps = True, np.inf, True, 0
    for _ in range(20):
        g = random_instance(rng, max_players=3, max_actions=3)
        pol = random_policy(rng, g)
        tau = float(rng.uniform(0.05, 1.0))
        for t in range(150):
            step = smbr_step(g, pol, tau, iteration=t)
            min_delta = min(min_delta, float(step.deltas.min()))
            if step.terminated:
                term_ok &= step.deltas.max() <= 1e-10
                break
            term_ok &= step.delta > 1e-10
            changed = [(i, s) for i in range(g.num_players) for s in range(g.num_states)
                       if not np.array_equal(pol[i][s], step.policy[i][s])]
            rows_ok &= changed == [(step.player, step.state)]
            pol = step.policy
            steps += 1
    # ties resolve to the lowest (player, state)
    zero = MarkovGame((2, 2), np.zeros((2, 2, 4)), np.full((2, 4, 2), 0.5), 0.9, [0.5, 0.5])
    tie = smbr_step(zero, JointPolicy.deterministic(zero, [[0, 1], [1, 0]]), 0.5)
    tie_ok = (tie.player, tie.state) == (0, 0)
    g = random_game(rng, (2, 3), 3, 0.9)
    a = run(g, SMBRConfig(0.2, 60, 0.99), keep_policies=False)
    b = run(g, SMBRConfig(0.2, 60, 0.99), keep_policies=False)
    det_ok = [r.as_csv() for r in a.rows] == [r.as_csv() for r in b.rows]
    ok = rows_ok and min_delta >= -1e-12 and term_ok and tie_ok and det_ok
    acceptance(8, ok, f"{steps} steps: one row per step {rows_ok}, min Delta {min_delta:.1e}, "
                      f"termination rule {term_ok}, tie-break {tie_ok}, bit-identical rerun {det_ok}")
    assert ok


def _smoothed_potential_drop(game, spec):
    tr = run(game, SMBRConfig(0.1, 500), potential=spec, keep_policies=False)
    phi = np.asarray(tr.column("smoothed_potential"))
    return float(np.diff(phi).min()) if phi.size > 1 else 0.0


@pytest.mark.xfail(strict=True, reason="smoothed potential is not monotone when transitions depend on "
                                       "actions; see the decisions ledger")
def test_c09_monotone_smoothed_potential(acceptance):
    drops = np.array([_smoothed_potential_drop(*_team_game(s)) for s in TEAM_SEEDS])
    bad = int((drops < -1e-8).sum())
    # control: the same games with action-independent transitions
    ctrl = []
    for s in TEAM_SEEDS:
        g, _ = _team_game(s)
        chain = np.random.default_rng(1000 + s).dirichlet(np.ones(2), size=2)
        trans = np.repeat(chain[:, None, :], g.num_joint, axis=1)
        r = g.rewards[0]
        ctrl.append(_smoothed_potential_drop(*build_team_game(r, trans, (2, 2), 0.9, g.initial_dist)))
    ctrl_bad = int((np.array(ctrl) < -1e-8).sum())
    ok = bad == 0
    acceptance(9, ok, f"{bad}/{len(drops)} team games decrease (worst step {drops.min():.2e}); "
                      f"{ctrl_bad}/{len(ctrl)} with action-independent transitions")
    assert ok


def _dist_to_deterministic(policy):
    return max(float(np.abs(p - np.eye(p.shape[1])[p.argmax(axis=1)]).max()) for p in policy)


def test_c10_convergence(acceptance):
    details, ok = [], True
    g, pot = build_mcg(CongestionGameSpec(weights=(1.0, 2.0)), 4, 0.95)
    thr = 0.05 * g.reward_bound / (1 - g.discount)
    for name, cfg in (("PGA", PGAConfig(0.01, 2000)), ("SMBR", SMBRConfig(5.0, 2000, 0.995))):
        start = time.perf_counter()
        tr = run(g, cfg, potential=pot, regret_every=100)
        elapsed = time.perf_counter() - start
        reg = exploitability(g, tr.final_policy).max_regret
        l1 = tr.l1_accuracy()
        above = np.flatnonzero(l1 > 0.01)
        settle = int(above[-1]) + 1 if above.size else 0
        good = reg <= thr and settle < len(l1) - 1 and elapsed < 300
        ok &= good
        details.append(f"MCG {name} regret {reg:.2e}<={thr:.3g} L1<=0.01 from t={settle}/{len(l1) - 1}")
    for mode in ("threshold", "logistic"):
        g, pot = build_pmtg(TeamGameSpec(transition_mode=mode, steepness=50.0), 4, 0.95)
        for name, cfg in (("PGA", PGAConfig(0.05, 2000)), ("SMBR", SMBRConfig(0.05, 2000, 0.9975))):
            start = time.perf_counter()
            tr = run(g, cfg, potential=pot, regret_every=100, keep_policies=False)
            elapsed = time.perf_counter() - start
            dist = _dist_to_deterministic(tr.final_policy)
            good = dist <= 0.05 and elapsed < 300
            ok &= good
            details.append(f"PMTG-{mode} {name} Linf-to-deterministic {dist:.1e}")
    acceptance(10, ok, "; ".join(details))
    assert ok


def _regret_series(game, cfg, total):
    tr = run(game, cfg, keep_policies=False)
    reg = np.asarray(tr.column("max_regret"), dtype=float)
    # a terminated SMBR run keeps its policy, so its regret carries forward
    reg = np.concatenate([reg, np.full(total + 1 - reg.size, reg[-1])])
    nash = np.array([reg[0]] + [reg[1:t + 1].mean() for t in range(1, total + 1)])
    recorded = np.asarray(tr.column("nash_regret"), dtype=float)
    assert np.allclose(nash[:recorded.size], recorded, atol=1e-12)
    return nash


def test_c11_regret_sublinearity(acceptance):
    g, _ = _team_game(0)
    pga = _regret_series(g, PGAConfig(0.1, 400), 400)
    smbr = _regret_series(g, SMBRConfig(0.1, 400, 0.99), 400)
    ok = pga[400] <= pga[100] and smbr[400] <= smbr[100]
    acceptance(11, ok, f"PGA {pga[100]:.4f} -> {pga[400]:.4f}; SMBR {smbr[100]:.4f} -> {smbr[400]:.4f}")
    assert ok


@pytest.mark.slow
def test_c12_paper_preset_smoke(acceptance, tmp_path):
    out = tmp_path / "mcg"
    start = time.perf_counter()
    code = main(["run", "--preset", "mcg-paper", "--mode", "exact", "-T", "50", "--regret-every", "1",
                 "--out", str(out)])
    elapsed = time.perf_counter() - start
    manifest = json.loads((out / "manifest.json").read_text())
    jsonschema.validate(manifest, load_schema("manifest"))
    rows = read_trace(out / "run_0" / "trace.csv")
    schema = load_schema("trace_row")
    for r in rows:
        jsonschema.validate(r, schema)
    regrets = [r[k] for r in rows for k in ("max_regret", "nash_regret") if r[k] is not None]
    game = manifest["game"]
    ok = (code == 0 and elapsed < 600 and len(rows) == 51 and min(regrets) >= 0
          and game["num_players"] == 8 and game["num_joint_actions"] == 4**8)
    acceptance(12, ok, f"exit {code}, {len(rows)} schema-valid rows, {len(regrets)} regret entries "
                       f"min {min(regrets):.3g}, {elapsed:.0f}s")
    assert ok
