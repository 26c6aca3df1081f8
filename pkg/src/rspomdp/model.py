"""Finite risk-sensitive POMDP instances.

A model is a pair process (X, Y) on finite grids where X is observed and Y is
hidden. ``q[x, y, a, x2, y2]`` is the joint transition probability and
``c[x, y, a]`` the one-stage cost, which may depend on the hidden state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import GridOverflow, InadmissibleAction, ModelError
from .utility import Linear, Log, Power, UtilitySpec, utility_from_dict

STOCH_TOL = 1e-12


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ModelSpec:
    x_states: tuple
    y_states: tuple
    actions: tuple
    admissible: tuple  # admissible[x] -> tuple of action indices
    q: np.ndarray
    c: np.ndarray
    beta: float
    q0: np.ndarray
    utility: UtilitySpec = field(default_factory=Linear)

    # derived, filled in __post_init__
    qx: np.ndarray = field(init=False, repr=False)
    c_min: float = field(init=False)
    c_max: float = field(init=False)

    def __post_init__(self):
        nx, ny, na = len(self.x_states), len(self.y_states), len(self.actions)
        object.__setattr__(self, "x_states", tuple(self.x_states))
        object.__setattr__(self, "y_states", tuple(self.y_states))
        object.__setattr__(self, "actions", tuple(self.actions))
        adm = _normalize_admissible(self.admissible, self.x_states, self.actions)
        object.__setattr__(self, "admissible", adm)
        q = _frozen(self.q)
        c = _frozen(self.c)
        q0 = _frozen(self.q0)
        if q.shape != (nx, ny, na, nx, ny):
            raise ModelError(f"q has shape {q.shape}, expected {(nx, ny, na, nx, ny)}")
        if c.shape != (nx, ny, na):
            raise ModelError(f"c has shape {c.shape}, expected {(nx, ny, na)}")
        if q0.shape != (ny,):
            raise ModelError(f"q0 has shape {q0.shape}, expected {(ny,)}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "qx", _frozen(q.sum(axis=4)))
        costs = [c[x, y, a] for x in range(nx) for a in adm[x] for y in range(ny)]
        object.__setattr__(self, "c_min", float(min(costs)) if costs else math.nan)
        object.__setattr__(self, "c_max", float(max(costs)) if costs else math.nan)

    @property
    def nx(self) -> int:
        return len(self.x_states)

    @property
    def ny(self) -> int:
        return len(self.y_states)

    @property
    def na(self) -> int:
        return len(self.actions)

    def check_action(self, x: int, a: int) -> None:
        if a not in self.admissible[x]:
            raise InadmissibleAction(
                f"action {a} not admissible in observable state {x}", x=x, a=a
            )

    def replace(self, **changes) -> "ModelSpec":
        fields = dict(
            x_states=self.x_states,
            y_states=self.y_states,
            actions=self.actions,
            admissible=self.admissible,
            q=self.q,
            c=self.c,
            beta=self.beta,
            q0=self.q0,
            utility=self.utility,
        )
        fields.update(changes)
        return ModelSpec(**fields)

    def to_dict(self) -> dict:
        return {
            "x_states": list(self.x_states),
            "y_states": list(self.y_states),
            "actions": list(self.actions),
            "admissible": [list(a) for a in self.admissible],
            "q": self.q.tolist(),
            "c": self.c.tolist(),
            "beta": self.beta,
            "q0": self.q0.tolist(),
            "utility": self.utility.to_dict(),
        }


def _normalize_admissible(adm, x_states: Sequence, actions: Sequence) -> tuple:
    def action_index(a) -> int:
        if isinstance(a, (int, np.integer)) and not isinstance(a, bool):
            if not 0 <= a < len(actions):
                raise ModelError(f"action index {a} out of range")
            return int(a)
        if a in actions:
            return actions.index(a)
        raise ModelError(f"unknown action {a!r}")

    if isinstance(adm, Mapping):
        rows = []
        for i, label in enumerate(x_states):
            key = label if label in adm else str(label) if str(label) in adm else i
            rows.append(adm.get(key, adm.get(str(i), ())))
    else:
        rows = list(adm)
    if len(rows) != len(x_states):
        raise ModelError("admissible must list actions for every observable state")
    return tuple(tuple(sorted({action_index(a) for a in row})) for row in rows)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": list(self.violations)}


def validate(spec: ModelSpec, *, infinite_horizon: bool = False) -> ValidationReport:
    """Collect every violation of the model invariants; never raises."""
    out: list[str] = []
    q, c = spec.q, spec.c
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(c)) and np.all(np.isfinite(spec.q0))):
        out.append("q, c and q0 must be finite")
    for x in range(spec.nx):
        if not spec.admissible[x]:
            out.append(f"admissible set of x={x} is empty")
        for a in spec.admissible[x]:
            for y in range(spec.ny):
                row = q[x, y, a]
                if np.any(row < 0):
                    out.append(f"negative transition probability at (x={x}, y={y}, a={a})")
                total = float(row.sum())
                if abs(total - 1.0) > STOCH_TOL:
                    out.append(f"row sum {total:.12g} != 1 at (x={x}, y={y}, a={a})")
                if c[x, y, a] < 0:
                    out.append(f"negative cost {c[x, y, a]:.12g} at (x={x}, y={y}, a={a})")
    if np.any(spec.q0 < 0) or abs(float(spec.q0.sum()) - 1.0) > STOCH_TOL:
        out.append(f"q0 must be a probability vector (sum {float(spec.q0.sum()):.12g})")
    if not 0 < spec.beta <= 1:
        out.append(f"beta {spec.beta} outside (0, 1]")
    u = spec.utility
    needs_positive = isinstance(u, Log) or (isinstance(u, Power) and u.gamma < 0)
    if needs_positive and not spec.c_min > 0:
        out.append(f"{u.variant} utility requires strictly positive costs (c_min = {spec.c_min:.12g})")
    if infinite_horizon:
        if not spec.beta < 1:
            out.append("infinite horizon requires beta < 1")
        if not spec.c_min > 0:
            out.append(f"c_min must be > 0 for infinite-horizon bounds (c_min = {spec.c_min:.12g})")
    return ValidationReport(out)


def marginal_qx(spec: ModelSpec, x: int, y: int, a: int) -> np.ndarray:
    """Probability of each next observable state, summing out the hidden one."""
    spec.check_action(x, a)
    return spec.q[x, y, a].sum(axis=1)


# -- additive-noise construction ------------------------------------------

def _grid_index(grid: np.ndarray, value: float, tol: float = 1e-9) -> int | None:
    """Index of ``value`` on ``grid``; nearest point when inside the range, None outside."""
    if value < grid[0] - tol or value > grid[-1] + tol:
        return None
    return int(np.argmin(np.abs(grid - value)))


def build_additive_noise_model(
    h,
    b,
    noise_eta: Mapping[float, float],
    noise_eps: Mapping[float, float],
    x_grid: Sequence[float],
    y_grid: Sequence[float],
    *,
    cost,
    q0: Sequence[float],
    beta: float,
    actions: Sequence | None = None,
    utility: UtilitySpec | None = None,
) -> ModelSpec:
    """Discretise X' = h(Y) + eta, Y' = b(Y, A) + eps onto finite grids.

    ``h`` gives h(y) for each y-grid point (sequence or callable on the value),
    ``b`` gives b(y, a) as a table ``[y][a]`` or a callable ``b(y_value, a)``.
    Both are snapped to the nearest grid point. Noise mass landing outside a
    grid raises :class:`GridOverflow`. ``cost`` is a ``[x][y][a]`` table or a
    callable ``cost(x_value, y_value, a)``.
    """
    xg = np.asarray(x_grid, dtype=float)
    yg = np.asarray(y_grid, dtype=float)
    if np.any(np.diff(xg) <= 0) or np.any(np.diff(yg) <= 0):
        raise ModelError("grids must be strictly increasing")
    for name, pmf in (("eta", noise_eta), ("eps", noise_eps)):
        w = np.array(list(pmf.values()), dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > STOCH_TOL:
            raise ModelError(f"noise pmf {name} must be a probability vector")
    nx, ny = len(xg), len(yg)
    if actions is None:
        if callable(b):
            raise ModelError("actions must be given when b is a callable")
        actions = tuple(range(len(b[0])))
    na = len(actions)

    def h_at(j: int) -> float:
        return float(h(yg[j]) if callable(h) else h[j])

    def b_at(j: int, a: int) -> float:
        return float(b(yg[j], actions[a]) if callable(b) else b[j][a])

    q = np.zeros((nx, ny, na, nx, ny))
    for j in range(ny):
        hx = xg[_snap(xg, h_at(j))]
        px = np.zeros(nx)
        for eta, w in noise_eta.items():
            if w == 0:
                continue
            k = _grid_index(xg, hx + eta)
            if k is None:
                raise GridOverflow(f"h(y)+eta = {hx + eta} leaves the x grid", y=j, eta=eta)
            px[k] += w
        for a in range(na):
            by = yg[_snap(yg, b_at(j, a))]
            py = np.zeros(ny)
            for eps, w in noise_eps.items():
                if w == 0:
                    continue
                k = _grid_index(yg, by + eps)
                if k is None:
                    raise GridOverflow(f"b(y,a)+eps = {by + eps} leaves the y grid", y=j, a=a, eps=eps)
                py[k] += w
            q[:, j, a] = np.outer(px, py)[None, :, :]

    if callable(cost):
        c = np.array([[[cost(xv, yv, actions[a]) for a in range(na)] for yv in yg] for xv in xg], dtype=float)
    else:
        c = np.asarray(cost, dtype=float)
    return ModelSpec(
        x_states=tuple(xg.tolist()),
        y_states=tuple(yg.tolist()),
        actions=tuple(actions),
        admissible=tuple(tuple(range(na)) for _ in range(nx)),
        q=q,
        c=c,
        beta=beta,
        q0=q0,
        utility=utility or Linear(),
    )


def _snap(grid: np.ndarray, value: float) -> int:
    return int(np.argmin(np.abs(grid - value)))


# -- JSON I/O -------------------------------------------------------------

def _reject_constant(token: str):
    raise ModelError(f"non-finite number {token} in model file")


def _check_finite(obj, path: str = "$") -> None:
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ModelError(f"non-finite number at {path}")
    if isinstance(obj, list):
        for i, v in enumerate(obj):
            _check_finite(v, f"{path}[{i}]")
    elif isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{path}.{k}")


def parse_json(text: str) -> dict:
    """json.loads that refuses NaN/Infinity literals."""
    doc = json.loads(text, parse_constant=_reject_constant)
    _check_finite(doc)
    return doc


def model_from_dict(doc: Mapping) -> ModelSpec:
    required = ("x_states", "y_states", "actions", "q", "c", "beta", "q0")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ModelError(f"model document missing fields: {', '.join(missing)}")
    actions = list(doc["actions"])
    admissible = doc.get("admissible")
    if admissible is None:
        admissible = [list(range(len(actions)))] * len(doc["x_states"])
    try:
        return ModelSpec(
            x_states=tuple(doc["x_states"]),
            y_states=tuple(doc["y_states"]),
            actions=tuple(actions),
            admissible=admissible,
            q=np.asarray(doc["q"], dtype=float),
            c=np.asarray(doc["c"], dtype=float),
            beta=float(doc["beta"]),
            q0=np.asarray(doc["q0"], dtype=float),
            utility=utility_from_dict(doc.get("utility", {"variant": "linear"})),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed model document: {exc}") from exc


def load_model(path: str | Path) -> ModelSpec:
    return model_from_dict(parse_json(Path(path).read_text()))


def dump_model(spec: ModelSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=1))
