"""Ground truth by brute force: path enumeration, policy enumeration, sampling.

Nothing here uses the filter. ``enumerate_value`` sums over every path of the
pair process; ``enumerate_optimal`` tries every deterministic policy on the
observation tree; ``monte_carlo`` samples trajectories.

Random stream rule: trajectory ``i`` consumes the doubles ``i*(N+1)`` to
``i*(N+1)+N`` of ``numpy.random.Generator(PCG64(seed))``. Draw 0 picks the
initial hidden state from ``q0``; draw ``k+1`` picks ``(x_{k+1}, y_{k+1})``
jointly by inverse CDF over the row-major flattened kernel ``q[x, y, a]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PolicyIncomplete, TooLarge
from .model import ModelSpec
from .solver_finite import PolicyNode, PolicyTree

MAX_POLICIES = 10_000_000
Z95 = 1.959963984540054
CHUNK = 65_536


@dataclass
class Trajectory:
    xs: list = field(default_factory=list)  # x_0 .. x_N
    ys: list = field(default_factory=list)  # y_0 .. y_N
    actions: list = field(default_factory=list)  # a_0 .. a_{N-1}
    cost: float = 0.0  # sum_k beta^k c(x_k, y_k, a_k)
    utility: float = 0.0


def _root(policy) -> PolicyNode:
    return policy.root if isinstance(policy, PolicyTree) else policy


# -- exhaustive path enumeration -------------------------------------------

def path_sum(spec: ModelSpec, policy, N: int, x0: int) -> tuple[float, float]:
    """``(expected utility, total path probability)`` by summing over all paths."""
    U = spec.utility
    acc = [0.0, 0.0]

    def walk(k, x, y, prob, cost, node):
        if k == N:
            acc[0] += prob * float(U.evaluate(cost))
            acc[1] += prob
            return
        if node is None or node.action is None:
            raise PolicyIncomplete(f"policy has no action after {k} steps at x={x}")
        a = node.action
        spec.check_action(x, a)
        cost2 = cost + spec.beta**k * spec.c[x, y, a]
        kern = spec.q[x, y, a]
        for x2 in range(spec.nx):
            for y2 in range(spec.ny):
                p = kern[x2, y2]
                if p <= 0:
                    continue
                child = None
                if k + 1 < N:
                    child = node.children.get(x2)
                    if child is None:
                        raise PolicyIncomplete(f"policy has no branch for observation {x2} after {k + 1} steps")
                walk(k + 1, x2, y2, prob * p, cost2, child)

    root = _root(policy)
    for y0 in range(spec.ny):
        if spec.q0[y0] > 0:
            walk(0, x0, y0, float(spec.q0[y0]), 0.0, root)
    return acc[0], acc[1]


def enumerate_value(spec: ModelSpec, policy, N: int, x0: int) -> float:
    """E[U(total discounted cost)] under ``policy`` by exhaustive path summation."""
    return path_sum(spec, policy, N, x0)[0]


# -- exhaustive policy enumeration -----------------------------------------

def _reachable(spec: ModelSpec, x: int, a: int, weights: np.ndarray):
    """Observations with positive mass and the unnormalised hidden weights after each."""
    out = []
    for x2 in range(spec.nx):
        w2 = weights @ spec.q[x, :, a, x2, :]
        if w2.sum() > 0:
            out.append((x2, w2))
    return out


def count_policies(spec: ModelSpec, N: int, x0: int) -> int:
    def count(n, x, w):
        if n == 0:
            return 1
        total = 0
        for a in spec.admissible[x]:
            prod = 1
            for x2, w2 in _reachable(spec, x, a, w):
                prod *= count(n - 1, x2, w2) if n > 1 else 1
            total += prod
        return total

    return count(N, x0, np.asarray(spec.q0, dtype=float))


def iter_policies(spec: ModelSpec, N: int, x0: int):
    """Every deterministic policy on the observation tree reachable from ``x0``."""

    def gen(n, x, w):
        for a in spec.admissible[x]:
            branches = _reachable(spec, x, a, w) if n > 1 else []
            subtrees = [list(gen(n - 1, x2, w2)) for x2, w2 in branches]
            for combo in itertools.product(*subtrees):
                yield PolicyNode(x, a, {x2: node for (x2, _), node in zip(branches, combo)})

    for root in gen(N, x0, np.asarray(spec.q0, dtype=float)):
        yield PolicyTree(x0, N, root)


@dataclass
class EnumerationResult:
    value: float
    policy: PolicyTree
    root_values: dict  # best value achievable with each root action
    n_policies: int

    def root_argmins(self, tol: float = 1e-10) -> list[int]:
        return [a for a, v in sorted(self.root_values.items()) if v <= self.value + tol]


def enumerate_optimal(spec: ModelSpec, N: int, x0: int, *, limit: int = MAX_POLICIES) -> EnumerationResult:
    """Minimum of :func:`enumerate_value` over all observation-tree policies."""
    if N < 1:
        raise ValueError("N >= 1 required")
    n = count_policies(spec, N, x0)
    if n > limit:
        raise TooLarge(f"{n} policies exceed the enumeration limit {limit}", policies=n)
    best_v, best_p = math.inf, None
    root_values: dict = {}
    for pol in iter_policies(spec, N, x0):
        v = enumerate_value(spec, pol, N, x0)
        a = pol.root.action
        root_values[a] = min(root_values.get(a, math.inf), v)
        if v < best_v:
            best_v, best_p = v, pol
    return EnumerationResult(best_v, best_p, root_values, n)


# -- Monte Carlo -------------------------------------------------------------

def _flatten(spec: ModelSpec, policy, N: int):
    """Policy as arrays: ``action[id]`` and ``child[id, x2]`` (-1 when absent)."""
    nodes = []

    def visit(node):
        idx = len(nodes)
        nodes.append(node)
        kids = {}
        for x2, ch in sorted(node.children.items()):
            kids[x2] = visit(ch)
        node_kids.append((idx, kids))
        return idx

    node_kids: list = []
    visit(_root(policy))
    action = np.array([-1 if nd.action is None else nd.action for nd in nodes], dtype=np.int64)
    child = np.full((len(nodes), spec.nx), -1, dtype=np.int64)
    for idx, kids in node_kids:
        for x2, c in kids.items():
            child[idx, x2] = c
    return action, child


def _uniforms(seed: int, start: int, count: int, width: int) -> np.ndarray:
    bitgen = np.random.PCG64(seed)
    bitgen.advance(start * width)
    return np.random.Generator(bitgen).random((count, width))


def _inverse_cdf(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise categorical draw; zero-probability cells are never chosen."""
    cdf = np.cumsum(probs, axis=-1)
    cdf /= cdf[..., -1:]
    return np.minimum((cdf <= u[..., None]).sum(axis=-1), probs.shape[-1] - 1)


def _simulate_chunk(spec, action, child, N, x0, u):
    S = u.shape[0]
    y = _inverse_cdf(np.broadcast_to(spec.q0, (S, spec.ny)), u[:, 0])
    x = np.full(S, x0, dtype=np.int64)
    node = np.zeros(S, dtype=np.int64)
    cost = np.zeros(S)
    for k in range(N):
        if np.any(node < 0):
            raise PolicyIncomplete(f"sampled history leaves the policy tree after {k} steps")
        a = action[node]
        if np.any(a < 0):
            raise PolicyIncomplete(f"policy has no action after {k} steps")
        cost += spec.beta**k * spec.c[x, y, a]
        kern = spec.q[x, y, a].reshape(S, -1)
        j = _inverse_cdf(kern, u[:, k + 1])
        x, y = j // spec.ny, j % spec.ny
        if k + 1 < N:
            node = child[node, x]
    return cost


def sample_costs(spec: ModelSpec, policy, N: int, x0: int, samples: int, seed: int) -> np.ndarray:
    """Discounted total cost of ``samples`` trajectories under the stream rule."""
    action, child = _flatten(spec, policy, N)
    out = np.empty(samples)
    for start in range(0, samples, CHUNK):
        count = min(CHUNK, samples - start)
        u = _uniforms(seed, start, count, N + 1)
        out[start:start + count] = _simulate_chunk(spec, action, child, N, x0, u)
    return out


def monte_carlo(spec: ModelSpec, policy, N: int, x0: int, samples: int, seed: int) -> tuple[float, float]:
    """Sample mean of U(total cost) and its 95% normal confidence half-width."""
    if samples < 1:
        raise ValueError("samples >= 1 required")
    util = np.asarray(spec.utility.evaluate(sample_costs(spec, policy, N, x0, samples, seed)), dtype=float)
    mean = float(util.mean())
    if samples == 1:
        return mean, math.inf
    return mean, float(Z95 * util.std(ddof=1) / math.sqrt(samples))


def trajectory(spec: ModelSpec, policy, N: int, x0: int, seed: int, index: int = 0) -> Trajectory:
    """Trajectory ``index`` of the stream, simulated one step at a time."""
    u = _uniforms(seed, index, 1, N + 1)[0]
    qflat = lambda p: np.asarray(p, dtype=float).ravel()  # noqa: E731
    y = int(_inverse_cdf(qflat(spec.q0), np.asarray(u[0])))
    x, node = x0, _root(policy)
    traj = Trajectory(xs=[x], ys=[y])
    for k in range(N):
        if node is None or node.action is None:
            raise PolicyIncomplete(f"policy has no action after {k} steps")
        a = node.action
        traj.actions.append(a)
        traj.cost += spec.beta**k * float(spec.c[x, y, a])
        j = int(_inverse_cdf(qflat(spec.q[x, y, a]), np.asarray(u[k + 1])))
        x, y = divmod(j, spec.ny)
        traj.xs.append(x)
        traj.ys.append(y)
        node = node.children.get(x) if k + 1 < N else None
    traj.utility = float(spec.utility.evaluate(traj.cost))
    return traj
