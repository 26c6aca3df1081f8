"""Strictly increasing utility functions applied to accumulated cost.

All evaluations are vectorised over numpy arrays. ``inverse`` maps a utility
level back to the cost it certainty-equivalates, so ``U.inverse(E[U(S)])`` is
the certainty equivalent of a random cost ``S``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ModelError, OutOfRange


class UtilitySpec:
    """Base class for the supported utility variants."""

    variant = "abstract"

    def __call__(self, s):
        raise NotImplementedError

    def inverse(self, v):
        raise NotImplementedError

    def left_derivative(self, s):
        raise NotImplementedError

    def right_derivative(self, s):
        raise NotImplementedError

    def in_domain(self, s) -> np.ndarray:
        return np.isfinite(np.asarray(s, dtype=float))

    @property
    def is_concave(self) -> bool:
        return False

    @property
    def is_convex(self) -> bool:
        return False

    @property
    def curvature(self) -> str:
        """Which infinite-horizon error bound applies: 'concave' or 'convex'.

        Utilities that are both (linear ones) use the concave branch.
        """
        if self.is_concave:
            return "concave"
        if self.is_convex:
            return "convex"
        return "none"

    @property
    def real_line(self) -> bool:
        """True when U is defined on all of R (needed for signed offers)."""
        return False

    def check_domain(self, s) -> None:
        arr = np.asarray(s, dtype=float)
        ok = self.in_domain(arr)
        if not np.all(ok):
            bad = arr[~ok] if arr.ndim else arr
            raise DomainError(
                f"{self.variant} utility undefined at s={np.ravel(bad)[0]!r}",
                variant=self.variant,
            )

    def evaluate(self, s):
        """Domain-checked evaluation."""
        self.check_domain(s)
        return self(s)

    def to_dict(self) -> dict:
        return {"variant": self.variant}


@dataclass(frozen=True)
class Linear(UtilitySpec):
    variant = "linear"

    def __call__(self, s):
        return np.asarray(s, dtype=float) * 1.0

    def inverse(self, v):
        return np.asarray(v, dtype=float) * 1.0

    def left_derivative(self, s):
        return np.ones_like(np.asarray(s, dtype=float))

    right_derivative = left_derivative

    @property
    def is_concave(self) -> bool:
        return True

    @property
    def is_convex(self) -> bool:
        return True

    @property
    def real_line(self) -> bool:
        return True


@dataclass(frozen=True)
class Exponential(UtilitySpec):
    """U(s) = exp(gamma*s)/gamma; convex for gamma > 0, concave for gamma < 0."""

    gamma: float
    variant = "exponential"

    def __post_init__(self):
        if not math.isfinite(self.gamma) or self.gamma == 0:
            raise ModelError("exponential utility needs a finite gamma != 0")

    def __call__(self, s):
        return np.exp(self.gamma * np.asarray(s, dtype=float)) / self.gamma

    def inverse(self, v):
        v = np.asarray(v, dtype=float)
        gv = self.gamma * v
        if np.any(gv <= 0):
            raise OutOfRange("value outside the range of the exponential utility")
        return np.log(gv) / self.gamma

    def left_derivative(self, s):
        return np.exp(self.gamma * np.asarray(s, dtype=float))

    right_derivative = left_derivative

    @property
    def is_concave(self) -> bool:
        return self.gamma < 0

    @property
    def is_convex(self) -> bool:
        return self.gamma > 0

    @property
    def real_line(self) -> bool:
        return True

    def to_dict(self) -> dict:
        return {"variant": self.variant, "gamma": self.gamma}


@dataclass(frozen=True)
class Power(UtilitySpec):
    """U(s) = s**gamma/gamma on s >= 0 (s > 0 when gamma < 0)."""

    gamma: float
    variant = "power"

    def __post_init__(self):
        if not math.isfinite(self.gamma) or self.gamma == 0:
            raise ModelError("power utility needs a finite gamma != 0")

    def in_domain(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.isfinite(s) & ((s > 0) if self.gamma < 0 else (s >= 0))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return np.power(s, self.gamma) / self.gamma

    def inverse(self, v):
        gv = self.gamma * np.asarray(v, dtype=float)
        if np.any(gv < 0) or (self.gamma < 0 and np.any(gv == 0)):
            raise OutOfRange("value outside the range of the power utility")
        return np.power(gv, 1.0 / self.gamma)

    def left_derivative(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return np.power(s, self.gamma - 1.0)

    right_derivative = left_derivative

    @property
    def is_concave(self) -> bool:
        return self.gamma < 1

    @property
    def is_convex(self) -> bool:
        return self.gamma >= 1

    @property
    def curvature(self) -> str:
        return "convex" if self.gamma >= 1 else "concave"

    def to_dict(self) -> dict:
        return {"variant": self.variant, "gamma": self.gamma}


@dataclass(frozen=True)
class Log(UtilitySpec):
    variant = "log"

    def in_domain(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.isfinite(s) & (s > 0)

    def __call__(self, s):
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(s, dtype=float))

    def inverse(self, v):
        return np.exp(np.asarray(v, dtype=float))

    def left_derivative(self, s):
        with np.errstate(divide="ignore"):
            return 1.0 / np.asarray(s, dtype=float)

    right_derivative = left_derivative

    @property
    def is_concave(self) -> bool:
        return True


@dataclass(frozen=True)
class PiecewiseLinearConcave(UtilitySpec):
    """Continuous piecewise-linear U with U(0) = 0.

    ``slopes[0]`` applies left of ``breakpoints[0]``, ``slopes[i]`` between
    ``breakpoints[i-1]`` and ``breakpoints[i]``, and ``slopes[-1]`` right of
    the last breakpoint. Slopes must be positive and non-increasing.
    """

    breakpoints: tuple = ()
    slopes: tuple = (1.0,)
    variant = "piecewise_linear_concave"
    _knot_values: tuple = field(init=False, repr=False, compare=False, default=())

    def __post_init__(self):
        b = tuple(float(v) for v in self.breakpoints)
        m = tuple(float(v) for v in self.slopes)
        if len(m) != len(b) + 1:
            raise ModelError("need exactly one more slope than breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise ModelError("breakpoints must be strictly increasing")
        if any(not math.isfinite(v) or v <= 0 for v in m):
            raise ModelError("slopes must be positive (strictly increasing U)")
        if any(m2 > m1 for m1, m2 in zip(m, m[1:])):
            raise ModelError("slopes must be non-increasing (concave U)")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "slopes", m)
        object.__setattr__(self, "_knot_values", tuple(self(np.array(b)).tolist()))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        m = self.slopes
        out = m[0] * s
        shift = 0.0
        for i, knot in enumerate(self.breakpoints):
            dm = m[i + 1] - m[i]
            out = out + dm * np.maximum(s - knot, 0.0)
            shift += dm * max(-knot, 0.0)
        return out - shift

    def inverse(self, v):
        v = np.asarray(v, dtype=float)
        b = np.asarray(self.breakpoints)
        kv = np.asarray(self._knot_values)
        if b.size == 0:
            return v / self.slopes[0]
        seg = np.searchsorted(kv, v, side="right")
        # anchor each value at the nearest knot on its segment
        anchor = np.clip(seg - 1, 0, b.size - 1)
        anchor = np.where(seg == 0, 0, anchor)
        slope = np.asarray(self.slopes)[seg]
        return b[anchor] + (v - kv[anchor]) / slope

    def left_derivative(self, s):
        idx = np.searchsorted(np.asarray(self.breakpoints), np.asarray(s, dtype=float), side="left")
        return np.asarray(self.slopes)[idx]

    def right_derivative(self, s):
        idx = np.searchsorted(np.asarray(self.breakpoints), np.asarray(s, dtype=float), side="right")
        return np.asarray(self.slopes)[idx]

    @property
    def is_concave(self) -> bool:
        return True

    @property
    def is_convex(self) -> bool:
        return len(set(self.slopes)) == 1

    @property
    def real_line(self) -> bool:
        return True

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "breakpoints": list(self.breakpoints),
            "slopes": list(self.slopes),
        }


_ALIASES = {
    "linear": "linear",
    "exponential": "exponential",
    "exp": "exponential",
    "power": "power",
    "log": "log",
    "piecewise_linear_concave": "piecewise_linear_concave",
    "piecewiselinearconcave": "piecewise_linear_concave",
}


def utility_from_dict(doc: dict) -> UtilitySpec:
    """Build a utility from its JSON form, e.g. ``{"variant": "power", "gamma": 0.5}``."""
    raw = str(doc.get("variant", "")).strip().lower().replace("-", "_")
    variant = _ALIASES.get(raw, _ALIASES.get(raw.replace("_", "")))
    if variant is None:
        raise ModelError(f"unknown utility variant {doc.get('variant')!r}")
    if variant == "linear":
        return Linear()
    if variant == "log":
        return Log()
    if variant == "piecewise_linear_concave":
        return PiecewiseLinearConcave(
            breakpoints=tuple(doc.get("breakpoints", ())),
            slopes=tuple(doc.get("slopes", (1.0,))),
        )
    if "gamma" not in doc:
        raise ModelError(f"{variant} utility needs 'gamma'")
    gamma = float(doc["gamma"])
    return Exponential(gamma) if variant == "exponential" else Power(gamma)
