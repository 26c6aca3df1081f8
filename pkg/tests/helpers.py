"""Random instances and brute-force oracles shared by the tests.

The oracles deliberately avoid the package's filter and solvers: they work on
raw paths of the pair process or on their own Bayes updates.
"""

from __future__ import annotations

import itertools

import numpy as np

from rspomdp.model import ModelSpec, validate
from rspomdp.solver_finite import PolicyNode, PolicyTree
from rspomdp.utility import Linear


def _stochastic(rng, n, zero_frac):
    p = rng.dirichlet(np.ones(n))
    if n > 1 and zero_frac > 0:
        mask = rng.random(n) < zero_frac
        if mask.all():
            mask[rng.integers(n)] = False
        p = np.where(mask, 0.0, p)
    return p / p.sum()


def random_model(
    rng,
    nx=2,
    ny=2,
    na=2,
    *,
    beta=None,
    utility=None,
    zero_frac=0.2,
    cost_range=(0.5, 2.0),
    y_costs=True,
    restrict_actions=False,
):
    """Validated random model; rows are Dirichlet draws with some exact zeros."""
    q = np.empty((nx, ny, na, nx, ny))
    for idx in np.ndindex(nx, ny, na):
        q[idx] = _stochastic(rng, nx * ny, zero_frac).reshape(nx, ny)
    lo, hi = cost_range
    if y_costs:
        c = rng.uniform(lo, hi, size=(nx, ny, na))
    else:
        c = np.broadcast_to(rng.uniform(lo, hi, size=(nx, 1, na)), (nx, ny, na)).copy()
    if restrict_actions and na > 1:
        admissible = [sorted(rng.choice(na, size=rng.integers(1, na + 1), replace=False).tolist()) for _ in range(nx)]
    else:
        admissible = [list(range(na))] * nx
    spec = ModelSpec(
        x_states=tuple(range(nx)),
        y_states=tuple(range(ny)),
        actions=tuple(range(na)),
        admissible=admissible,
        q=q,
        c=c,
        beta=float(rng.uniform(0.5, 1.0)) if beta is None else beta,
        q0=_stochastic(rng, ny, zero_frac / 2),
        utility=utility or Linear(),
    )
    report = validate(spec)
    assert report.ok, report.violations
    return spec


def random_sizes(rng, choices=(1, 2, 3), limit=None):
    while True:
        nx, ny, na = (int(rng.choice(choices)) for _ in range(3))
        if limit is None or nx * ny * na <= limit:
            return nx, ny, na


def random_policy(spec, N, x0, rng):
    """Random deterministic policy covering every positive-probability history."""

    def build(n, x, w):
        a = int(rng.choice(spec.admissible[x]))
        kids = {}
        if n > 1:
            for x2 in range(spec.nx):
                w2 = w @ spec.q[x, :, a, x2, :]
                if w2.sum() > 0:
                    kids[x2] = build(n - 1, x2, w2)
        return PolicyNode(x, a, kids)

    return PolicyTree(x0, N, build(N, x0, np.asarray(spec.q0, dtype=float)))


def path_atoms(spec, x0, history):
    """Unnormalised law of (Y_n, S_n) on a history, one atom per hidden path."""
    ys = np.arange(spec.ny)
    ps = np.asarray(spec.q0, dtype=float).copy()
    ss = np.zeros(spec.ny)
    x = x0
    for k, (a, x2) in enumerate(history):
        cost = ss + spec.beta**k * spec.c[x, ys, a]
        trans = spec.q[x, ys, a, x2, :]  # (paths, ny)
        ps = (ps[:, None] * trans).ravel()
        ss = np.repeat(cost, spec.ny)
        ys = np.tile(np.arange(spec.ny), len(cost))
        keep = ps > 0
        ys, ss, ps = ys[keep], ss[keep], ps[keep]
        x = x2
    return ys, ss, ps


def merge_atoms(ys, ss, ps, tol=1e-9):
    """Group atoms by hidden state and cost (within ``tol``); returns sorted list."""
    out = []
    for y, s, p in sorted(zip(ys.tolist(), ss.tolist(), ps.tolist())):
        if out and out[-1][0] == y and s - out[-1][1] <= tol:
            out[-1][2] += p
        else:
            out.append([y, s, p])
    return out


def atom_error(expected, mu, tol=1e-9):
    """l-infinity weight error after matching atoms on (y, s)."""
    got = [list(a) for a in mu.atoms]
    err = 0.0
    used = [False] * len(got)
    for y, s, p in expected:
        match = None
        for i, (y2, s2, _) in enumerate(got):
            if not used[i] and y2 == y and abs(s2 - s) <= tol:
                match = i
                break
        if match is None:
            err = max(err, p)
        else:
            used[match] = True
            err = max(err, abs(got[match][2] - p))
    for i, (_, _, p) in enumerate(got):
        if not used[i]:
            err = max(err, p)
    return err


def bayes(spec, x, a, x2, belief):
    num = np.array([sum(belief[y] * spec.q[x, y, a, x2, y2] for y in range(spec.ny)) for y2 in range(spec.ny)])
    return num / num.sum()


def belief_mdp_value(spec, N, x, belief):
    """Risk-neutral value: min expected discounted cost on the belief MDP."""
    if N == 0:
        return 0.0
    best = np.inf
    for a in spec.admissible[x]:
        stage = sum(belief[y] * spec.c[x, y, a] for y in range(spec.ny))
        cont = 0.0
        for x2 in range(spec.nx):
            p = sum(belief[y] * spec.q[x, y, a, x2, y2] for y in range(spec.ny) for y2 in range(spec.ny))
            if p > 0:
                cont += p * belief_mdp_value(spec, N - 1, x2, bayes(spec, x, a, x2, belief))
        best = min(best, stage + spec.beta * cont)
    return best


def all_histories(spec, x0, length):
    """Every (action, next x) sequence up to ``length`` with admissible actions."""
    def rec(x, prefix):
        yield list(prefix)
        if len(prefix) == length:
            return
        for a in spec.admissible[x]:
            for x2 in range(spec.nx):
                yield from rec(x2, prefix + [(a, x2)])

    yield from rec(x0, [])


# -- house selling -------------------------------------------------------

def random_house(rng, n_theta=2, n_offers=3, N=2, utility=None):
    from rspomdp.house_selling import HouseModel

    grid = np.sort(rng.choice(np.arange(0, 11), size=n_offers, replace=False)).astype(float)
    q_offer = np.stack([_stochastic(rng, n_offers, 0.15) for _ in range(n_theta)])
    return HouseModel(
        thetas=tuple(range(n_theta)),
        offer_grid=grid,
        q_offer=q_offer,
        c_theta=rng.uniform(0.1, 1.5, size=n_theta),
        q0=_stochastic(rng, n_theta, 0.0),
        N=N,
        utility=utility or Linear(),
    )


def stopping_paths(model, x0):
    """Path tables for brute-force stopping: offer indices, probabilities, payoffs.

    Returns ``(paths, prob, payoff)`` with ``paths`` of shape (P, N) holding
    offer indices x_1..x_N, ``prob[t, p]`` the path probability given theta t,
    and ``payoff[t, p, k]`` the utility of stopping at time k on that path.
    """
    g, N = model.n_offers, model.N
    paths = np.array(list(itertools.product(range(g), repeat=N)), dtype=int).reshape(-1, N)
    prob = np.ones((model.n_theta, len(paths)))
    payoff = np.empty((model.n_theta, len(paths), N + 1))
    for t in range(model.n_theta):
        for p, path in enumerate(paths):
            prob[t, p] = np.prod(model.q_offer[t, path]) if N else 1.0
            offers = [x0] + [model.offer_grid[j] for j in path]
            for k in range(N + 1):
                payoff[t, p, k] = float(model.utility(offers[k] - k * model.c_theta[t]))
    return paths, prob, payoff


def decision_nodes(model):
    """Ordered offer-index prefixes (x_1..x_n) for n < N, and a lookup table."""
    nodes = [()]
    for n in range(1, model.N):
        nodes += list(itertools.product(range(model.n_offers), repeat=n))
    return nodes, {nd: i for i, nd in enumerate(nodes)}


def stopping_value(model, x0, rule, tables=None):
    """Expected utility of a stopping rule given as {prefix: stop?}."""
    paths, prob, payoff = tables or stopping_paths(model, x0)
    total = 0.0
    for p, path in enumerate(paths):
        tau = model.N
        for n in range(model.N):
            if rule[tuple(path[:n])]:
                tau = n
                break
        total += float(np.dot(model.q0 * prob[:, p], payoff[:, p, tau]))
    return total


def best_stopping_value(model, x0):
    """Supremum over every stopping rule on the offer tree, by enumeration."""
    paths, prob, payoff = stopping_paths(model, x0)
    nodes, index = decision_nodes(model)
    N = model.N
    node_ids = np.array([[index[tuple(path[:n])] for n in range(N)] for path in paths])  # (P, N)
    weight = model.q0[:, None] * prob  # (T, P)
    rules = np.array(list(itertools.product([False, True], repeat=len(nodes))))  # (R, nodes)
    stops = rules[:, node_ids]  # (R, P, N)
    tau = np.where(stops.any(axis=2), stops.argmax(axis=2), N)  # (R, P)
    pay = np.take_along_axis(
        np.broadcast_to(payoff[None], (len(rules),) + payoff.shape),
        np.broadcast_to(tau[:, None, :, None], (len(rules), model.n_theta, len(paths), 1)),
        axis=3,
    )[..., 0]  # (R, T, P)
    values = (pay * weight[None]).sum(axis=(1, 2))
    return float(values.max())
