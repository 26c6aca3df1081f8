"""Power-utility value iteration in rescaled cost units.

For U(s) = s**gamma/gamma the discount can be pulled out of the value
function, V_n(x, mu, z) = z**gamma * d_n(x, mu rescaled by 1/z), so the
``z`` component disappears and each stage inflates accumulated costs by
1/beta instead.
"""

from __future__ import annotations

from .errors import WrongUtility
from .filtering import initial_measure, psi_branches
from .measure import JointMeasure, expected_utility
from .model import ModelSpec
from .solver_finite import PolicyTree, SolveResult, certainty_equivalent, recurse
from .utility import Power


def _gamma(spec: ModelSpec) -> float:
    if not isinstance(spec.utility, Power):
        raise WrongUtility(f"power solver needs a power utility, got {spec.utility.variant}")
    return spec.utility.gamma


def _expand(spec: ModelSpec, gamma: float):
    factor = spec.beta ** gamma

    def expand(x, a, mu):
        return [(x2, factor * m, mu2) for x2, m, mu2 in psi_branches(spec, x, a, mu, 1.0, power=True)]

    return expand


class _Terminal:
    """d_0 with a running record of the largest cost atom seen."""

    def __init__(self, spec: ModelSpec):
        self.utility = spec.utility
        self.max_support = 0.0

    def __call__(self, x, mu: JointMeasure) -> float:
        self.max_support = max(self.max_support, mu.support_bound)
        return expected_utility(mu, self.utility)


def d_value(spec: ModelSpec, n: int, x: int, mu: JointMeasure):
    """``(d_n(x, mu), argmin action)``."""
    gamma = _gamma(spec)
    v, a, _ = recurse(
        n, x, mu,
        admissible=spec.admissible,
        expand=_expand(spec, gamma),
        terminal=_Terminal(spec),
    )
    return v, a


def solve_finite_power(
    spec: ModelSpec,
    N: int,
    x0: int,
    *,
    total_cost: bool = False,
    initial_cost: float = 0.0,
) -> SolveResult:
    """J_N(x0) = d_N(x0, Q0 x delta_{initial_cost}).

    With gamma < 0 the utility is undefined at zero cost, which only matters
    when a zero-cost atom reaches the terminal stage.
    """
    if N < 1:
        raise ValueError("N >= 1 required")
    gamma = _gamma(spec)
    if total_cost:
        spec = spec.replace(beta=1.0)
    terminal = _Terminal(spec)
    v, _, root = recurse(
        N, x0, initial_measure(spec, initial_cost),
        admissible=spec.admissible,
        expand=_expand(spec, gamma),
        terminal=terminal,
        build=True,
    )
    return SolveResult(
        x0=x0,
        horizon=N,
        value=v,
        certainty_equivalent=certainty_equivalent(spec, v),
        policy=PolicyTree(x0, N, root),
        solver="power",
        info={"max_support_bound": terminal.max_support},
    )
