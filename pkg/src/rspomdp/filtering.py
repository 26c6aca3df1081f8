"""Updating operators for the joint (hidden state, accumulated cost) filter.

``psi_update`` is the general operator on joint measures; ``phi_update`` is the
ordinary Bayes update of a hidden-state belief; ``psi_e_update`` and
``qhat_x`` drive the exponential-utility information vector; ``psi_p_update``
is the rescaled-cost operator used with power utility.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import UnreachableObservation, ValueOverflow
from .measure import JointMeasure
from .model import ModelSpec

DENOM_TOL = 1e-300
# Branches whose predictive probability falls below this are never filtered.
PRUNE_TOL = 1e-14


def _unreachable(mass: float, **where) -> UnreachableObservation:
    return UnreachableObservation(
        f"observation has predictive mass {mass:.3g}", mass=mass, **where
    )


def _push(spec: ModelSpec, x: int, a: int, x2: int, mu: JointMeasure, s_new: np.ndarray) -> JointMeasure:
    kern = spec.q[x, mu.y, a, x2, :]  # (atoms, ny)
    weights = mu.w[:, None] * kern
    denom = float(weights.sum())
    if denom <= DENOM_TOL:
        raise _unreachable(denom, x=x, a=a, x_next=x2)
    ny = spec.ny
    return JointMeasure(
        np.tile(np.arange(ny), len(mu)),
        np.repeat(s_new, ny),
        (weights / denom).ravel(),
    )


def predictive_x(spec: ModelSpec, x: int, a: int, mu: JointMeasure) -> np.ndarray:
    """Q^X(. | x, mu^Y, a): distribution of the next observation."""
    return mu.w @ spec.qx[x, mu.y, a, :]


def psi_update(spec: ModelSpec, x: int, a: int, x2: int, mu: JointMeasure, z: float) -> JointMeasure:
    """Condition on the observation ``x2`` and add the discounted cost ``z*c``."""
    spec.check_action(x, a)
    return _push(spec, x, a, x2, mu, mu.s + z * spec.c[x, mu.y, a])


def psi_p_update(spec: ModelSpec, x: int, a: int, x2: int, mu: JointMeasure) -> JointMeasure:
    """Like ``psi_update`` with z = 1 but costs move to ``(s + c) / beta``."""
    spec.check_action(x, a)
    return _push(spec, x, a, x2, mu, (mu.s + spec.c[x, mu.y, a]) / spec.beta)


def psi_branches(spec: ModelSpec, x: int, a: int, mu: JointMeasure, z: float, *, power: bool = False):
    """All observation branches of one step: list of ``(x2, mass, next_mu)``.

    Branches with mass below ``PRUNE_TOL`` are skipped.
    """
    spec.check_action(x, a)
    pred = predictive_x(spec, x, a, mu)
    if power:
        s_new = (mu.s + spec.c[x, mu.y, a]) / spec.beta
    else:
        s_new = mu.s + z * spec.c[x, mu.y, a]
    out = []
    for x2 in range(spec.nx):
        mass = float(pred[x2])
        if mass < PRUNE_TOL:
            continue
        out.append((x2, mass, _push(spec, x, a, x2, mu, s_new)))
    return out


def phi_update(spec: ModelSpec, x: int, a: int, x2: int, belief) -> np.ndarray:
    """Bayes update of a hidden-state belief after observing ``x2``."""
    spec.check_action(x, a)
    nu = np.asarray(belief, dtype=float)
    num = nu @ spec.q[x, :, a, x2, :]
    denom = float(num.sum())
    if denom <= DENOM_TOL:
        raise _unreachable(denom, x=x, a=a, x_next=x2)
    return num / denom


def _cost_tilt(spec: ModelSpec, x: int, a: int, zeta: float) -> np.ndarray:
    with np.errstate(over="ignore"):
        tilt = np.exp(zeta * spec.c[x, :, a])
    if not np.all(np.isfinite(tilt)):
        raise ValueOverflow(f"exp(zeta*c) overflows for zeta={zeta}")
    return tilt


def qhat_x(spec: ModelSpec, x: int, belief, a: int, zeta: float) -> np.ndarray:
    """Cost-tilted observation kernel; total mass is sum_y exp(zeta*c) belief_y."""
    spec.check_action(x, a)
    nu = np.asarray(belief, dtype=float)
    return (nu * _cost_tilt(spec, x, a, zeta)) @ spec.qx[x, :, a, :]


def psi_e_update(spec: ModelSpec, x: int, a: int, x2: int, belief, zeta: float) -> np.ndarray:
    """Information-vector update: Bayes with prior reweighted by exp(zeta*c)."""
    spec.check_action(x, a)
    nu = np.asarray(belief, dtype=float) * _cost_tilt(spec, x, a, zeta)
    num = nu @ spec.q[x, :, a, x2, :]
    denom = float(num.sum())
    if denom <= DENOM_TOL:
        raise _unreachable(denom, x=x, a=a, x_next=x2)
    return num / denom


@dataclass
class FilterTrace:
    x0: int
    observations: list = field(default_factory=list)  # (a_n, x_{n+1}) pairs
    measures: list = field(default_factory=list)  # mu_0 .. mu_n

    @property
    def history(self) -> list[tuple[int, int]]:
        """``(x_n, a_n)`` for every completed step."""
        xs = [self.x0] + [x2 for _, x2 in self.observations]
        return [(xs[k], a) for k, (a, _) in enumerate(self.observations)]

    def to_lines(self) -> list[dict]:
        xs = [self.x0] + [x2 for _, x2 in self.observations]
        lines = []
        for n, mu in enumerate(self.measures):
            row = {"n": n, "x": xs[n]}
            if n > 0:
                row["a"] = self.observations[n - 1][0]
            row.update(mu.to_dict())
            lines.append(row)
        return lines


def initial_measure(spec: ModelSpec, s0: float = 0.0) -> JointMeasure:
    return JointMeasure.product(spec.q0, s0)


def filter_trace(spec: ModelSpec, x0: int, observations: Sequence[tuple[int, int]]) -> FilterTrace:
    """Run the joint filter along an observed history, discounting by beta**n."""
    mu = initial_measure(spec)
    trace = FilterTrace(x0=x0, observations=[], measures=[mu])
    x, z = x0, 1.0
    for n, (a, x2) in enumerate(observations):
        try:
            mu = psi_update(spec, x, a, x2, mu, z)
        except UnreachableObservation as exc:
            exc.details["step"] = n
            raise UnreachableObservation(f"step {n}: {exc}", **exc.details) from exc
        trace.observations.append((a, x2))
        trace.measures.append(mu)
        x, z = x2, z * spec.beta
    return trace
