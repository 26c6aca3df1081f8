"""Exponential-utility value iteration on (x, information vector, gamma*z).

With U(s) = exp(gamma*s)/gamma the joint measure factors out of the value
function: V_n(x, mu, z) = E_mu[exp(gamma*S)] * e_n(x, mu_hat, gamma*z), where
``mu_hat`` is the exp-tilted hidden-state belief. The recursion for ``e_n``
lives on the simplex over hidden states, so equal beliefs reached along
different histories can share work through a memo table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValueOverflow, WrongUtility
from .filtering import PRUNE_TOL, psi_e_update, qhat_x
from .model import ModelSpec
from .solver_finite import PolicyTree, SolveResult, certainty_equivalent, recurse
from .utility import Exponential

MEMO_QUANTUM = 1e-10
_LOG_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class ExpState:
    x: int
    nu: np.ndarray  # information vector over hidden states
    zeta: float  # gamma * z


def _gamma(spec: ModelSpec) -> float:
    if not isinstance(spec.utility, Exponential):
        raise WrongUtility(f"exponential solver needs an exponential utility, got {spec.utility.variant}")
    return spec.utility.gamma


def _expand(spec: ModelSpec):
    beta = spec.beta

    def expand(x, a, state):
        nu, zeta = state
        weights = qhat_x(spec, x, nu, a, zeta)
        pred = nu @ spec.qx[x, :, a, :]
        return [
            (x2, float(weights[x2]), (psi_e_update(spec, x, a, x2, nu, zeta), beta * zeta))
            for x2 in range(spec.nx)
            if pred[x2] >= PRUNE_TOL
        ]

    return expand


def _key(n, x, state):
    nu, zeta = state
    return n, x, np.round(np.asarray(nu) / MEMO_QUANTUM).astype(np.int64).tobytes(), zeta


def check_overflow(spec: ModelSpec, N: int | None = None) -> None:
    """Fail fast when exp(gamma * largest reachable cost) leaves float range.

    ``N=None`` checks the infinite-horizon bound c_max/(1-beta).
    """
    gamma = _gamma(spec)
    if N is None:  # infinite horizon
        s_max = spec.c_max / (1.0 - spec.beta)
    else:
        s_max = spec.c_max * sum(spec.beta**k for k in range(N))
    if gamma * s_max > _LOG_MAX - 1.0:
        raise ValueOverflow(
            f"exp(gamma*s_max) overflows (gamma={gamma}, s_max={s_max:.6g}); "
            f"rescale costs or use |gamma| below {(_LOG_MAX - 1.0) / s_max:.6g}",
            gamma=gamma,
            s_max=s_max,
        )


def e_value(spec: ModelSpec, n: int, state: ExpState, *, memoize: bool = True, memo: dict | None = None):
    """``(e_n(x, nu, zeta), argmin action)``."""
    gamma = _gamma(spec)
    if memoize and memo is None:
        memo = {}
    v, a, _ = recurse(
        n, state.x, (np.asarray(state.nu, dtype=float), float(state.zeta)),
        admissible=spec.admissible,
        expand=_expand(spec),
        terminal=lambda x, s: 1.0 / gamma,
        memo=memo if memoize else None,
        key=_key,
    )
    return v, a


def solve_finite_exp(spec: ModelSpec, N: int, x0: int, *, total_cost: bool = False) -> SolveResult:
    if N < 1:
        raise ValueError("N >= 1 required")
    gamma = _gamma(spec)
    if total_cost:
        spec = spec.replace(beta=1.0)
    check_overflow(spec, N)
    v, _, root = recurse(
        N, x0, (np.asarray(spec.q0, dtype=float), gamma),
        admissible=spec.admissible,
        expand=_expand(spec),
        terminal=lambda x, s: 1.0 / gamma,
        build=True,
        memo={},
        key=_key,
    )
    return SolveResult(
        x0=x0,
        horizon=N,
        value=v,
        certainty_equivalent=certainty_equivalent(spec, v),
        policy=PolicyTree(x0, N, root),
        solver="exponential",
    )


def info_vector_trace(spec: ModelSpec, x0: int, observations) -> list[np.ndarray]:
    """Information vectors along a history, starting from the prior."""
    gamma = _gamma(spec)
    nu, zeta, x = np.asarray(spec.q0, dtype=float), gamma, x0
    out = [nu]
    for a, x2 in observations:
        nu = psi_e_update(spec, x, a, x2, nu, zeta)
        out.append(nu)
        x, zeta = x2, zeta * spec.beta
    return out
