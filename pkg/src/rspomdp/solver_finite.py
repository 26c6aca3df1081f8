"""Exact finite-horizon value iteration on the augmented state (x, mu, z).

The value of ``n`` remaining stages is computed by recursing over every
admissible action and every observation with positive predictive mass. The
recursion is exponential in the horizon; it is exact, which is what the
oracle tests and the infinite-horizon bounds need.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import OutOfRange, PolicyIncomplete
from .filtering import initial_measure, psi_branches
from .measure import JointMeasure, expected_utility
from .model import ModelSpec


@dataclass(frozen=True)
class AugmentedState:
    x: int
    mu: JointMeasure
    z: float = 1.0


@dataclass
class PolicyNode:
    """Decision at one observable history; ``children`` keyed by next observation."""

    x: int
    action: int | None
    children: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"x": self.x, "action": self.action}
        if self.children:
            out["children"] = {str(k): v.to_dict() for k, v in sorted(self.children.items())}
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "PolicyNode":
        kids = {int(k): cls.from_dict(v) for k, v in doc.get("children", {}).items()}
        action = doc.get("action")
        return cls(int(doc["x"]), None if action is None else int(action), kids)

    def count(self) -> int:
        return 1 + sum(ch.count() for ch in self.children.values())


@dataclass
class PolicyTree:
    x0: int
    horizon: int
    root: PolicyNode

    def to_dict(self) -> dict:
        return {"x0": self.x0, "horizon": self.horizon, "tree": self.root.to_dict()}

    @classmethod
    def from_dict(cls, doc: dict) -> "PolicyTree":
        return cls(int(doc["x0"]), int(doc["horizon"]), PolicyNode.from_dict(doc["tree"]))

    def action_at(self, history: list[int]) -> int:
        """Action after the observation sequence ``history`` (excluding x0)."""
        node = self.root
        for x2 in history:
            try:
                node = node.children[x2]
            except KeyError:
                raise PolicyIncomplete(f"no decision for history {history}") from None
        if node.action is None:
            raise PolicyIncomplete(f"no decision for history {history}")
        return node.action


@dataclass
class SolveResult:
    x0: int
    horizon: int
    value: float
    certainty_equivalent: float
    policy: PolicyTree
    solver: str = "general"
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "x0": self.x0,
            "horizon": self.horizon,
            "solver": self.solver,
            "value": self.value,
            "certainty_equivalent": self.certainty_equivalent,
        }
        out.update(self.info)
        out["policy"] = self.policy.to_dict()
        return out


# -- generic tree recursion ------------------------------------------------

Expand = Callable[[int, int, object], list]  # (x, a, state) -> [(x2, weight, state2)]
Terminal = Callable[[int, object], float]  # (x, state) -> value


def recurse(
    n: int,
    x: int,
    state,
    *,
    admissible: tuple,
    expand: Expand,
    terminal: Terminal,
    build: bool = False,
    memo: dict | None = None,
    key: Callable | None = None,
):
    """Minimise ``sum(weight * value(child))`` over actions, ``n`` levels deep.

    Returns ``(value, action, node)``; ``node`` is a :class:`PolicyNode` when
    ``build`` is true. Ties go to the lowest action index. Children are summed
    in increasing observation order so results are bitwise reproducible.
    """
    if n == 0:
        return terminal(x, state), None, None
    if memo is not None:
        k = key(n, x, state)
        hit = memo.get(k)
        if hit is not None:
            return hit
    best_v, best_a, best_kids = np.inf, None, None
    for a in admissible[x]:
        total = 0.0
        kids = {} if build else None
        for x2, weight, state2 in expand(x, a, state):
            v, _, node = recurse(
                n - 1, x2, state2,
                admissible=admissible, expand=expand, terminal=terminal,
                build=build, memo=memo, key=key,
            )
            total += weight * v
            if build and n > 1:
                kids[x2] = node
        if total < best_v:
            best_v, best_a, best_kids = total, a, kids
    node = PolicyNode(x, best_a, best_kids) if build else None
    out = (float(best_v), best_a, node)
    if memo is not None:
        memo[k] = out
    return out


def evaluate_policy(
    n: int,
    x: int,
    state,
    node: PolicyNode | None,
    *,
    expand: Expand,
    terminal: Terminal,
) -> float:
    """Same recursion with the policy's action in place of the minimum."""
    if n == 0:
        return terminal(x, state)
    if node is None or node.action is None:
        raise PolicyIncomplete(f"policy has no action at a reachable node (x={x}, {n} stages left)")
    total = 0.0
    for x2, weight, state2 in expand(x, node.action, state):
        child = node.children.get(x2) if n > 1 else None
        if n > 1 and child is None:
            raise PolicyIncomplete(f"policy has no branch for observation {x2} after x={x}")
        total += weight * evaluate_policy(n - 1, x2, state2, child, expand=expand, terminal=terminal)
    return total


# -- the embedding MDP ---------------------------------------------------

def _expand_general(spec: ModelSpec):
    beta = spec.beta

    def expand(x, a, state):
        mu, z = state
        return [(x2, m, (mu2, z * beta)) for x2, m, mu2 in psi_branches(spec, x, a, mu, z)]

    return expand


def _terminal_utility(spec: ModelSpec):
    def terminal(x, state):
        return expected_utility(state[0], spec.utility)

    return terminal


def value(spec: ModelSpec, n: int, state: AugmentedState, *, terminal: Terminal | None = None):
    """``(V_n(x, mu, z), argmin action)``; the action is None when ``n == 0``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    v, a, _ = recurse(
        n, state.x, (state.mu, state.z),
        admissible=spec.admissible,
        expand=_expand_general(spec),
        terminal=terminal or _terminal_utility(spec),
    )
    return v, a


def certainty_equivalent(spec: ModelSpec, v: float) -> float:
    try:
        return float(spec.utility.inverse(v))
    except OutOfRange:
        return float("nan")


def solve_finite(
    spec: ModelSpec,
    N: int,
    x0: int,
    *,
    total_cost: bool = False,
    initial_cost: float = 0.0,
) -> SolveResult:
    """Optimal value J_N(x0) and an optimal policy on the observation tree.

    ``total_cost`` solves the undiscounted problem (beta = 1) regardless of
    the model's discount factor.
    """
    if N < 1:
        raise ValueError("N >= 1 required")
    if total_cost:
        spec = spec.replace(beta=1.0)
    mu0 = initial_measure(spec, initial_cost)
    v, _, root = recurse(
        N, x0, (mu0, 1.0),
        admissible=spec.admissible,
        expand=_expand_general(spec),
        terminal=_terminal_utility(spec),
        build=True,
    )
    return SolveResult(
        x0=x0,
        horizon=N,
        value=v,
        certainty_equivalent=certainty_equivalent(spec, v),
        policy=PolicyTree(x0, N, root),
    )


def cost_iteration(spec: ModelSpec, policy: PolicyTree | PolicyNode, n: int, state: AugmentedState) -> float:
    """Expected terminal utility of following ``policy`` for ``n`` stages from ``state``."""
    root = policy.root if isinstance(policy, PolicyTree) else policy
    return evaluate_policy(
        n, state.x, (state.mu, state.z), root,
        expand=_expand_general(spec),
        terminal=_terminal_utility(spec),
    )


def reachable_nodes(spec: ModelSpec, N: int, x0: int, *, initial_cost: float = 0.0) -> Iterator[tuple[int, AugmentedState]]:
    """Every augmented state reachable in the first ``N`` stages, under any action.

    Yields ``(stages_remaining, state)`` in depth-first order, root first.
    """
    expand = _expand_general(spec)

    def walk(n, x, mu, z):
        yield n, AugmentedState(x, mu, z)
        if n == 0:
            return
        for a in spec.admissible[x]:
            for x2, _, (mu2, z2) in expand(x, a, (mu, z)):
                yield from walk(n - 1, x2, mu2, z2)

    yield from walk(N, x0, initial_measure(spec, initial_cost), 1.0)
