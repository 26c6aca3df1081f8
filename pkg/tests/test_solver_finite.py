from __future__ import annotations

import json

import numpy as np
import pytest

from helpers import belief_mdp_value, random_model, random_policy
from rspomdp.errors import PolicyIncomplete
from rspomdp.filtering import initial_measure
from rspomdp.measure import JointMeasure, mixture
from rspomdp.simulate import enumerate_optimal, enumerate_value
from rspomdp.solver_finite import (
    AugmentedState,
    PolicyNode,
    PolicyTree,
    cost_iteration,
    reachable_nodes,
    solve_finite,
    value,
)
from rspomdp.utility import Exponential, Linear, Power


def test_one_step_closed_form(rng):
    for u in (Linear(), Exponential(0.6), Power(0.5)):
        spec = random_model(rng, 2, 3, 3, utility=u)
        res = solve_finite(spec, 1, 1)
        per_action = [float(np.dot(spec.q0, u(spec.c[1, :, a]))) for a in range(3)]
        assert res.value == pytest.approx(min(per_action), rel=1e-14)
        assert res.policy.root.action == int(np.argmin(per_action))
        assert res.certainty_equivalent == pytest.approx(float(u.inverse(res.value)))


def test_ties_pick_lowest_action():
    q = np.ones((1, 1, 3, 1, 1))
    c = np.ones((1, 1, 3))
    from rspomdp.model import ModelSpec

    spec = ModelSpec((0,), (0,), (0, 1, 2), [[2, 1, 0]], q, c, 0.9, [1.0])
    res = solve_finite(spec, 3, 0)
    assert res.policy.root.action == 0
    assert res.value == pytest.approx(1 + 0.9 + 0.81)


def test_matches_belief_mdp_for_linear(rng):
    for _ in range(5):
        spec = random_model(rng, 2, 3, 2, restrict_actions=True)
        assert solve_finite(spec, 3, 0).value == pytest.approx(belief_mdp_value(spec, 3, 0, spec.q0), abs=1e-12)


def test_policy_value_is_attained(rng):
    spec = random_model(rng, 2, 2, 2, utility=Exponential(0.5))
    res = solve_finite(spec, 3, 0)
    assert enumerate_value(spec, res.policy, 3, 0) == pytest.approx(res.value, abs=1e-12)
    assert enumerate_optimal(spec, 3, 0).value == pytest.approx(res.value, abs=1e-12)


def test_cost_iteration_never_beats_optimum(rng):
    spec = random_model(rng, 2, 2, 3, utility=Power(2.0))
    opt = solve_finite(spec, 3, 1).value
    root = AugmentedState(1, initial_measure(spec), 1.0)
    for _ in range(10):
        pol = random_policy(spec, 3, 1, rng)
        assert cost_iteration(spec, pol, 3, root) >= opt - 1e-12


def test_total_cost_flag(rng):
    spec = random_model(rng, 2, 2, 2, beta=0.6)
    assert solve_finite(spec, 3, 0, total_cost=True).value == pytest.approx(
        solve_finite(spec.replace(beta=1.0), 3, 0).value
    )


def test_horizon_must_be_positive(rng):
    with pytest.raises(ValueError, match="N >= 1"):
        solve_finite(random_model(rng), 0, 0)


def test_policy_json_round_trip(rng):
    spec = random_model(rng, 3, 2, 2)
    res = solve_finite(spec, 3, 2)
    doc = json.loads(json.dumps(res.to_dict()))
    back = PolicyTree.from_dict(doc["policy"])
    assert back.to_dict() == res.policy.to_dict()
    assert enumerate_value(spec, back, 3, 2) == enumerate_value(spec, res.policy, 3, 2)


def test_incomplete_policy(rng):
    spec = random_model(rng, 2, 2, 2, zero_frac=0.0)
    pol = PolicyTree(0, 2, PolicyNode(0, 0, {}))
    with pytest.raises(PolicyIncomplete):
        cost_iteration(spec, pol, 2, AugmentedState(0, initial_measure(spec)))
    with pytest.raises(PolicyIncomplete):
        pol.action_at([1])


def test_value_monotone_in_cost_shift(rng):
    spec = random_model(rng, 2, 2, 2, utility=Exponential(-0.5))
    for n in range(4):
        lo = value(spec, n, AugmentedState(0, JointMeasure.product(spec.q0, 0.0)))[0]
        hi = value(spec, n, AugmentedState(0, JointMeasure.product(spec.q0, 0.5)))[0]
        assert lo <= hi


def test_value_concave_in_measure_mixtures(rng):
    # the minimum of linear functionals of mu is concave along mixtures
    spec = random_model(rng, 2, 2, 2, utility=Power(0.5))
    mu1 = JointMeasure.from_atoms([(0, 0.2, 0.6), (1, 1.0, 0.4)])
    mu2 = JointMeasure.from_atoms([(0, 1.5, 0.1), (1, 0.3, 0.9)])
    v = lambda mu: value(spec, 2, AugmentedState(0, mu, 0.8))[0]  # noqa: E731
    for lam in np.linspace(0, 1, 6):
        assert v(mixture(mu1, mu2, lam)) >= lam * v(mu1) + (1 - lam) * v(mu2) - 1e-12


def test_reachable_nodes_count(rng):
    spec = random_model(rng, 2, 2, 2, zero_frac=0.0)
    counts = {}
    for n, _ in reachable_nodes(spec, 2, 0):
        counts[n] = counts.get(n, 0) + 1
    assert counts == {2: 1, 1: 4, 0: 16}


def test_initial_cost_offset(rng):
    spec = random_model(rng, 2, 2, 2)
    base = solve_finite(spec, 2, 0).value
    assert solve_finite(spec, 2, 0, initial_cost=1.25).value == pytest.approx(base + 1.25)


def test_value_increases_with_horizon_and_dominates_terminal(rng):
    spec = random_model(rng, 2, 2, 2, utility=Exponential(-0.3))
    for n, st in reachable_nodes(spec, 2, 0):
        values = [value(spec, k, st)[0] for k in range(3)]
        assert values[0] == pytest.approx(float(np.dot(st.mu.w, spec.utility(st.mu.s))))
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_one_step_single_action_with_discount_weight(rng):
    spec = random_model(rng, 2, 3, 1, utility=Power(2.0))
    mu = JointMeasure.from_atoms([(0, 0.5, 0.3), (2, 1.0, 0.7)])
    v, a = value(spec, 1, AugmentedState(1, mu, 0.6))
    expected = 0.3 * float(spec.utility(0.5 + 0.6 * spec.c[1, 0, 0])) + 0.7 * float(spec.utility(1.0 + 0.6 * spec.c[1, 2, 0]))
    assert a == 0 and v == pytest.approx(expected, rel=1e-14)


def test_undiscounted_nodes_keep_z_one(rng):
    spec = random_model(rng, 2, 2, 2, beta=1.0)
    assert all(st.z == 1.0 for _, st in reachable_nodes(spec, 3, 0))
