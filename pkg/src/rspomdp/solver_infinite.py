"""Discounted infinite-horizon values, certified by a sandwich of bounds.

The optimal value is never represented as a function. Instead the finite
recursion is run ``n`` levels deep from the root with its terminal function
swapped for the bounding functions

    lower(mu, z) = E_mu[U(S + z*c_min/(1-beta))]
    upper(mu, z) = E_mu[U(S + z*c_max/(1-beta))]

which bracket the optimal value. ``n`` is chosen so that a closed-form bound
on the bracket width falls below the requested tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BetaOne, CostNotPositive, NonMonotoneUtility, TooLarge, WrongUtility
from .filtering import initial_measure
from .measure import JointMeasure, expected_utility
from .model import ModelSpec
from .solver_exp import _expand as _expand_exp
from .solver_exp import _key as _exp_key
from .solver_exp import check_overflow
from .solver_finite import PolicyNode, PolicyTree, _expand_general, _terminal_utility, recurse
from .utility import Exponential

MAX_LEAVES = 5_000_000
MAX_HORIZON = 10_000


@dataclass
class InfiniteResult:
    lower: float
    upper: float
    gap: float
    horizon: int
    root_action: int
    policy: PolicyTree
    gap_bound: float  # closed-form bound the gap is certified against
    curvature: str

    def to_dict(self, with_policy: bool = False) -> dict:
        out = {
            "lower": self.lower,
            "upper": self.upper,
            "gap": self.gap,
            "horizon": self.horizon,
            "root_action": self.root_action,
            "gap_bound": self.gap_bound,
            "curvature": self.curvature,
        }
        if with_policy:
            out["policy"] = self.policy.to_dict()
        return out


def _check_discounted(spec: ModelSpec) -> None:
    if not spec.beta < 1:
        raise BetaOne("infinite horizon requires beta < 1", beta=spec.beta)


def _check_costs(spec: ModelSpec) -> None:
    if not spec.c_min > 0:
        raise CostNotPositive("infinite-horizon bounds need c_min > 0", c_min=spec.c_min)


def curvature(spec: ModelSpec) -> str:
    kind = spec.utility.curvature
    if kind not in ("concave", "convex"):
        raise NonMonotoneUtility(f"{spec.utility.variant} utility is neither concave nor convex")
    return kind


def bound_b(spec: ModelSpec, mu: JointMeasure, z: float, which: str) -> float:
    """Lower (``which='lower'``) or upper bounding function at ``(mu, z)``."""
    _check_discounted(spec)
    if which not in ("lower", "upper"):
        raise ValueError("which must be 'lower' or 'upper'")
    c = spec.c_min if which == "lower" else spec.c_max
    tail = z * c / (1.0 - spec.beta)
    s = mu.s + tail
    spec.utility.check_domain(s)
    return float(np.dot(mu.w, spec.utility(s)))


def gap_bound(spec: ModelSpec, n: int, *, z: float = 1.0, mu: JointMeasure | None = None) -> float:
    """Closed-form bound on ``upper - lower`` after ``n`` stages.

    Concave U: beta^n z c_max/(1-beta) * U'_-(z c_min).
    Convex U: z c_max beta^n/(1-beta) * E_mu[U'_+(S + z c_max/(1-beta))].
    """
    _check_discounted(spec)
    beta, cmax = spec.beta, spec.c_max
    scale = beta**n * z * cmax / (1.0 - beta)
    if curvature(spec) == "concave":
        _check_costs(spec)
        return float(scale * spec.utility.left_derivative(z * spec.c_min))
    if mu is None:
        mu = initial_measure(spec)
    slope = spec.utility.right_derivative(mu.s + z * cmax / (1.0 - beta))
    return float(scale * np.dot(mu.w, slope))


def horizon_for_gap(spec: ModelSpec, eps: float, z: float = 1.0, mu: JointMeasure | None = None) -> int:
    """Smallest n whose closed-form gap bound is at most ``eps``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    _check_discounted(spec)
    _check_costs(spec)
    curvature(spec)
    for n in range(MAX_HORIZON + 1):
        if gap_bound(spec, n, z=z, mu=mu) <= eps:
            return n
    raise TooLarge(f"no horizon up to {MAX_HORIZON} reaches gap {eps}")


def _check_size(spec: ModelSpec, n: int, *, joint: bool = True) -> None:
    """Refuse depth-``n`` recursions whose leaf or cost-atom count is too large.

    With ``joint`` the joint measure at a leaf can carry one cost atom per
    hidden path when costs depend on the hidden state.
    """
    branch = max(len(acts) for acts in spec.admissible) * spec.nx
    work = n * math.log(branch) if branch > 1 else 0.0
    if joint and spec.ny > 1 and np.ptp(spec.c, axis=1).max() > 0:
        work += n * math.log(spec.ny)
    if work > math.log(MAX_LEAVES):
        raise TooLarge(
            f"depth-{n} recursion is too large ({branch} branches per stage); raise eps or shrink the model",
            horizon=n,
            branching=branch,
        )


def _bound_terminal(spec: ModelSpec, which: str):
    def terminal(x, state):
        mu, z = state
        return bound_b(spec, mu, z, which)

    return terminal


def t_power(spec: ModelSpec, n: int, x0: int, terminal: str, *, build: bool = False):
    """``(T^n w)(x0, Q0 x delta_0, 1)`` for ``terminal`` in lower/upper/utility.

    Returns ``(value, root_action, policy_root)``.
    """
    term = _terminal_utility(spec) if terminal == "utility" else _bound_terminal(spec, terminal)
    return recurse(
        n, x0, (initial_measure(spec), 1.0),
        admissible=spec.admissible,
        expand=_expand_general(spec),
        terminal=term,
        build=build,
    )


def bound_sequence(spec: ModelSpec, x0: int, n_max: int) -> dict:
    """Root values of T^n applied to both bounds and to U, for n = 0..n_max."""
    _check_discounted(spec)
    _check_size(spec, n_max)
    out = {"lower": [], "upper": [], "utility": []}
    for n in range(n_max + 1):
        for which in out:
            out[which].append(t_power(spec, n, x0, which)[0])
    return out


def _root_action(spec: ModelSpec, x0: int, action):
    return spec.admissible[x0][0] if action is None else action


def solve_infinite(spec: ModelSpec, x0: int, eps: float) -> InfiniteResult:
    """Bracket the optimal discounted value to within ``eps``.

    The returned policy minimises the upper-bound recursion at every expanded
    node; its suboptimality is at most the gap.
    """
    _check_discounted(spec)
    _check_costs(spec)
    kind = curvature(spec)
    n = horizon_for_gap(spec, eps)
    while True:
        _check_size(spec, n)
        lower = t_power(spec, n, x0, "lower")[0]
        upper, action, root = t_power(spec, n, x0, "upper", build=True)
        if upper - lower <= eps or n >= MAX_HORIZON:
            break
        n += 1
    return InfiniteResult(
        lower=lower,
        upper=upper,
        gap=upper - lower,
        horizon=n,
        root_action=_root_action(spec, x0, action),
        policy=PolicyTree(x0, n, root or PolicyNode(x0, _root_action(spec, x0, action))),
        gap_bound=gap_bound(spec, n),
        curvature=kind,
    )


def _exp_terminal(spec: ModelSpec, which: str):
    gamma = spec.utility.gamma
    c = spec.c_min if which == "lower" else spec.c_max
    tail = c / (1.0 - spec.beta)

    def terminal(x, state):
        _, zeta = state
        return float(spec.utility(zeta / gamma * tail))

    return terminal


def t_power_exp(spec: ModelSpec, n: int, x0: int, terminal: str, *, build: bool = False):
    """Exponential analogue of :func:`t_power` on information vectors."""
    if not isinstance(spec.utility, Exponential):
        raise WrongUtility(f"exponential solver needs an exponential utility, got {spec.utility.variant}")
    gamma = spec.utility.gamma
    if terminal == "utility":
        term = lambda x, s: 1.0 / gamma  # noqa: E731
    else:
        term = _exp_terminal(spec, terminal)
    return recurse(
        n, x0, (np.asarray(spec.q0, dtype=float), gamma),
        admissible=spec.admissible,
        expand=_expand_exp(spec),
        terminal=term,
        build=build,
        memo={},
        key=_exp_key,
    )


def solve_infinite_exp(spec: ModelSpec, x0: int, eps: float) -> InfiniteResult:
    """Same bracketing run through the information-vector recursion."""
    if not isinstance(spec.utility, Exponential):
        raise WrongUtility(f"exponential solver needs an exponential utility, got {spec.utility.variant}")
    _check_discounted(spec)
    _check_costs(spec)
    check_overflow(spec)
    kind = curvature(spec)
    n = horizon_for_gap(spec, eps)
    while True:
        _check_size(spec, n, joint=False)
        lower = t_power_exp(spec, n, x0, "lower")[0]
        upper, action, root = t_power_exp(spec, n, x0, "upper", build=True)
        if upper - lower <= eps or n >= MAX_HORIZON:
            break
        n += 1
    return InfiniteResult(
        lower=lower,
        upper=upper,
        gap=upper - lower,
        horizon=n,
        root_action=_root_action(spec, x0, action),
        policy=PolicyTree(x0, n, root or PolicyNode(x0, _root_action(spec, x0, action))),
        gap_bound=gap_bound(spec, n),
        curvature=kind,
    )
