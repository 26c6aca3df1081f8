"""Bayesian optimal stopping for house offers with unknown offer law.

Offers are i.i.d. given an unknown parameter ``theta``; each further offer
costs ``c_theta``. The filter tracks the joint law of ``(theta, -cost so far)``
and the seller maximises E[U(offer - accumulated cost)]. An offer is accepted
as soon as its utility under the current filter reaches the continuation
value, which is equivalent to the offer exceeding a reservation level.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, ModelError, OutOfRange, UnreachableObservation
from .filtering import DENOM_TOL, PRUNE_TOL
from .measure import JointMeasure, expected_utility, marginal_y
from .model import STOCH_TOL, ValidationReport, parse_json
from .utility import Linear, UtilitySpec, utility_from_dict

STOP_TOL = 1e-12
INVERSE_XTOL = 1e-12


@dataclass(frozen=True, eq=False)
class HouseModel:
    thetas: tuple
    offer_grid: np.ndarray
    q_offer: np.ndarray  # q_offer[theta, j]: probability of offer_grid[j]
    c_theta: np.ndarray
    q0: np.ndarray
    N: int = 1
    utility: UtilitySpec = field(default_factory=Linear)

    def __post_init__(self):
        object.__setattr__(self, "thetas", tuple(self.thetas))
        for name in ("offer_grid", "q_offer", "c_theta", "q0"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        nt, nx = len(self.thetas), self.offer_grid.size
        if self.q_offer.shape != (nt, nx):
            raise ModelError(f"q_offer has shape {self.q_offer.shape}, expected {(nt, nx)}")
        if self.c_theta.shape != (nt,) or self.q0.shape != (nt,):
            raise ModelError("c_theta and q0 need one entry per theta")

    @property
    def n_theta(self) -> int:
        return len(self.thetas)

    @property
    def n_offers(self) -> int:
        return int(self.offer_grid.size)

    def replace(self, **changes) -> "HouseModel":
        doc = {k: getattr(self, k) for k in ("thetas", "offer_grid", "q_offer", "c_theta", "q0", "N", "utility")}
        doc.update(changes)
        return HouseModel(**doc)

    def to_dict(self) -> dict:
        return {
            "thetas": list(self.thetas),
            "offer_grid": self.offer_grid.tolist(),
            "q_offer": self.q_offer.tolist(),
            "c_theta": self.c_theta.tolist(),
            "q0": self.q0.tolist(),
            "N": self.N,
            "utility": self.utility.to_dict(),
        }


def validate_house(model: HouseModel) -> ValidationReport:
    out = []
    for t in range(model.n_theta):
        row = model.q_offer[t]
        if np.any(row < 0):
            out.append(f"negative offer probability for theta={t}")
        if abs(float(row.sum()) - 1.0) > STOCH_TOL:
            out.append(f"offer row sum {float(row.sum()):.12g} != 1 for theta={t}")
    if np.any(model.c_theta <= 0):
        out.append("observation costs c_theta must be > 0")
    if np.any(model.q0 < 0) or abs(float(model.q0.sum()) - 1.0) > STOCH_TOL:
        out.append("q0 must be a probability vector")
    if not np.all(np.isfinite(model.offer_grid)):
        out.append("offer grid must be finite")
    if model.N < 1:
        out.append("N >= 1 required")
    u = model.utility
    if not (u.real_line and u.is_concave):
        out.append(f"{u.variant} utility must be concave and defined on the whole real line")
    return ValidationReport(out)


def house_from_dict(doc: Mapping) -> HouseModel:
    required = ("thetas", "offer_grid", "q_offer", "c_theta", "q0")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ModelError(f"house model missing fields: {', '.join(missing)}")
    try:
        return HouseModel(
            thetas=tuple(doc["thetas"]),
            offer_grid=np.asarray(doc["offer_grid"], dtype=float),
            q_offer=np.asarray(doc["q_offer"], dtype=float),
            c_theta=np.asarray(doc["c_theta"], dtype=float),
            q0=np.asarray(doc["q0"], dtype=float),
            N=int(doc.get("N", 1)),
            utility=utility_from_dict(doc.get("utility", {"variant": "linear"})),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed house model: {exc}") from exc


def load_house(path: str | Path) -> HouseModel:
    return house_from_dict(parse_json(Path(path).read_text()))


# -- filter ----------------------------------------------------------------

def initial_stop_measure(model: HouseModel) -> JointMeasure:
    return JointMeasure.product(model.q0, 0.0)


def offer_predictive(model: HouseModel, mu: JointMeasure) -> np.ndarray:
    """Probability of each grid offer given the current filter."""
    return marginal_y(mu, model.n_theta) @ model.q_offer


def stop_update(model: HouseModel, j: int, mu: JointMeasure) -> JointMeasure:
    """Condition on the offer ``offer_grid[j]`` and charge ``c_theta`` for it."""
    w = mu.w * model.q_offer[mu.y, j]
    denom = float(w.sum())
    if denom <= DENOM_TOL:
        raise UnreachableObservation(f"offer index {j} has predictive mass {denom:.3g}", offer=j)
    return JointMeasure(mu.y, mu.s - model.c_theta[mu.y], w / denom)


def node_measure(model: HouseModel, offers) -> JointMeasure:
    """Filter after the offer indices ``offers`` (order does not matter)."""
    mu = initial_stop_measure(model)
    for j in offers:
        mu = stop_update(model, j, mu)
    return mu


def u_mu(model: HouseModel, mu: JointMeasure, x: float) -> float:
    """Expected utility of accepting offer ``x`` given the filter ``mu``."""
    return expected_utility(JointMeasure(mu.y, mu.s + x, mu.w), model.utility)


def u_mu_inverse(model: HouseModel, mu: JointMeasure, v: float) -> float:
    """The offer ``x`` with ``u_mu(model, mu, x) == v``."""
    f = lambda x: u_mu(model, mu, x) - v  # noqa: E731
    lo = hi = float(-np.dot(mu.w, mu.s))
    step = 1.0
    with np.errstate(over="ignore"):
        for _ in range(2100):
            try:
                flo, fhi = f(lo), f(hi)
            except DomainError:
                break
            if not (math.isfinite(flo) and math.isfinite(fhi)):
                break
            if flo == 0:
                return lo
            if fhi == 0:
                return hi
            if flo < 0 < fhi:
                return float(brentq(f, lo, hi, xtol=INVERSE_XTOL, rtol=4 * np.finfo(float).eps))
            if flo > 0:
                lo -= step
            if fhi < 0:
                hi += step
            step *= 2.0
    raise OutOfRange(f"value {v!r} is outside the range of U_mu", value=v)


# -- dynamic programme -----------------------------------------------------

class _Solver:
    """d_n and V_n with memoisation on the filter state."""

    def __init__(self, model: HouseModel):
        self.model = model
        self.memo: dict = {}

    def stop_value(self, mu, x):
        return float(u_mu(self.model, mu, x))

    def value(self, n: int, x: float, mu: JointMeasure) -> float:
        stop = self.stop_value(mu, x)
        if n == 0:
            return stop
        return max(stop, self.d(n, mu))

    def d(self, n: int, mu: JointMeasure) -> float:
        if n < 1:
            raise ValueError("continuation value needs n >= 1")
        key = (n, mu.key())
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        pred = offer_predictive(self.model, mu)
        total = 0.0
        for j, p in enumerate(pred):
            if p < PRUNE_TOL:
                continue
            total += p * self.value(n - 1, float(self.model.offer_grid[j]), stop_update(self.model, j, mu))
        total = float(total)
        self.memo[key] = total
        return total


def continuation_value(model: HouseModel, n: int, mu: JointMeasure, *, solver: _Solver | None = None) -> float:
    """d_n(mu): value of rejecting now with ``n`` offers still to come."""
    return (solver or _Solver(model)).d(n, mu)


def value(model: HouseModel, x: float, *, solver: _Solver | None = None) -> float:
    """J_N(x): optimal expected utility with first offer ``x``."""
    return (solver or _Solver(model)).value(model.N, x, initial_stop_measure(model))


def decide_stop(model: HouseModel, n: int, mu: JointMeasure, x: float, *, solver: _Solver | None = None) -> bool:
    """Accept offer ``x`` at time ``n`` (ties accept)."""
    if not 0 <= n < model.N:
        raise ValueError(f"decision time {n} outside [0, {model.N})")
    d = continuation_value(model, model.N - n, mu, solver=solver)
    return u_mu(model, mu, x) >= d - STOP_TOL


def reservation_level(model: HouseModel, n: int, mu: JointMeasure, *, solver: _Solver | None = None) -> float:
    """Smallest acceptable offer at time ``n`` given the filter ``mu``."""
    d = continuation_value(model, model.N - n, mu, solver=solver)
    return u_mu_inverse(model, mu, d)


@dataclass
class ReservationRow:
    n: int
    offers: tuple  # offer values seen before time n (sorted)
    threshold: float
    continuation: float

    def to_dict(self) -> dict:
        return {"n": self.n, "offers": list(self.offers), "threshold": self.threshold, "continuation": self.continuation}


def reachable_nodes(model: HouseModel):
    """``(n, offer index multiset, filter)`` for every reachable decision node.

    The filter depends on the history only through the multiset of offers
    seen after the first one, so nodes are keyed by sorted index tuples.
    """
    for n in range(model.N):
        for combo in itertools.combinations_with_replacement(range(model.n_offers), n):
            mu = initial_stop_measure(model)
            ok = True
            for j in combo:
                if offer_predictive(model, mu)[j] < PRUNE_TOL:
                    ok = False
                    break
                mu = stop_update(model, j, mu)
            if ok:
                yield n, combo, mu


def reservation_levels(model: HouseModel, *, solver: _Solver | None = None) -> list[ReservationRow]:
    solver = solver or _Solver(model)
    rows = []
    for n, combo, mu in reachable_nodes(model):
        d = solver.d(model.N - n, mu)
        rows.append(
            ReservationRow(
                n=n,
                offers=tuple(float(model.offer_grid[j]) for j in combo),
                threshold=u_mu_inverse(model, mu, d),
                continuation=d,
            )
        )
    return rows
