"""Finite-support probability measures on (hidden state) x (accumulated cost).

A :class:`JointMeasure` is stored as three parallel arrays ``y`` (hidden-state
index), ``s`` (accumulated cost) and ``w`` (weight), always in canonical form:
sorted by ``(y, s)``, positive weights only, and atoms with equal ``y`` whose
costs lie within ``MERGE_TOL`` of each other merged into one.

Hidden-state beliefs (probability vectors over ``y``) are plain numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValueOverflow
from .utility import UtilitySpec

MERGE_TOL = 1e-9
WEIGHT_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def canonicalize(y, s, w, tol: float = MERGE_TOL):
    """Sort by (y, s), drop non-positive weights and merge near-equal costs."""
    y = np.asarray(y, dtype=np.int64).ravel()
    s = np.asarray(s, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    keep = w > 0
    y, s, w = y[keep], s[keep], w[keep]
    if y.size == 0:
        return y, s, w
    order = np.lexsort((s, y))
    y, s, w = y[order], s[order], w[order]
    starts = np.ones(y.size, dtype=bool)
    starts[1:] = (y[1:] != y[:-1]) | (np.diff(s) > tol)
    idx = np.flatnonzero(starts)
    return y[idx], s[idx], np.add.reduceat(w, idx)


@dataclass(frozen=True, eq=False)
class JointMeasure:
    y: np.ndarray
    s: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        y, s, w = canonicalize(self.y, self.s, self.w)
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "s", _readonly(s))
        object.__setattr__(self, "w", _readonly(w))

    @classmethod
    def from_atoms(cls, atoms: Iterable[Sequence[float]]) -> "JointMeasure":
        atoms = list(atoms)
        if not atoms:
            return cls(np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0))
        arr = np.asarray(atoms, dtype=float)
        return cls(arr[:, 0].astype(np.int64), arr[:, 1], arr[:, 2])

    @classmethod
    def product(cls, belief, s: float = 0.0) -> "JointMeasure":
        """``belief`` (over hidden states) times a point mass at cost ``s``."""
        belief = np.asarray(belief, dtype=float)
        ys = np.arange(belief.size)
        return cls(ys, np.full(belief.size, float(s)), belief)

    @property
    def atoms(self) -> list[tuple[int, float, float]]:
        return list(zip(self.y.tolist(), self.s.tolist(), self.w.tolist()))

    @property
    def support_bound(self) -> float:
        """Smallest K with all cost atoms inside [-K, K] (0 for a point mass at 0)."""
        return float(np.max(np.abs(self.s))) if self.s.size else 0.0

    @property
    def total(self) -> float:
        return float(self.w.sum())

    def __len__(self) -> int:
        return int(self.y.size)

    def is_valid(self) -> bool:
        return self.y.size > 0 and abs(self.total - 1.0) <= WEIGHT_TOL and bool(np.all(self.w > 0))

    def normalized(self) -> "JointMeasure":
        return JointMeasure(self.y, self.s, self.w / self.w.sum())

    def to_dict(self) -> dict:
        return {"atoms": [[int(y), float(s), float(w)] for y, s, w in self.atoms]}

    @classmethod
    def from_dict(cls, doc: dict) -> "JointMeasure":
        return cls.from_atoms(doc["atoms"])

    def key(self, digits: int = 12) -> tuple:
        """Hashable fingerprint, rounded so float noise does not split keys."""
        return (
            self.y.tobytes(),
            np.round(self.s, digits).tobytes(),
            np.round(self.w, digits).tobytes(),
        )

    def __repr__(self) -> str:
        body = ", ".join(f"({y}, {s:.6g}, {w:.6g})" for y, s, w in self.atoms[:6])
        more = "" if len(self) <= 6 else f", ... {len(self)} atoms"
        return f"JointMeasure([{body}{more}])"


def check_belief(belief, tol: float = WEIGHT_TOL) -> np.ndarray:
    b = np.asarray(belief, dtype=float)
    if b.ndim != 1 or np.any(b < 0) or abs(b.sum() - 1.0) > tol:
        raise ValueError("belief must be a probability vector")
    return b


def marginal_y(mu: JointMeasure, ny: int | None = None) -> np.ndarray:
    """Hidden-state marginal as a probability vector of length ``ny``."""
    n = int(mu.y.max()) + 1 if ny is None else ny
    return np.bincount(mu.y, weights=mu.w, minlength=n)


def marginal_s(mu: JointMeasure, tol: float = MERGE_TOL) -> list[tuple[float, float]]:
    """Cost marginal as merged ``(s, w)`` pairs sorted by ``s``."""
    _, s, w = canonicalize(np.zeros(len(mu), dtype=np.int64), mu.s, mu.w, tol)
    return list(zip(s.tolist(), w.tolist()))


def expected_utility(mu: JointMeasure, utility: UtilitySpec) -> float:
    utility.check_domain(mu.s)
    return float(np.dot(mu.w, utility(mu.s)))


def exp_transform(mu: JointMeasure, gamma: float, ny: int | None = None) -> tuple[float, np.ndarray]:
    """Return ``m = E[exp(gamma*S)]`` and the exp-tilted hidden-state belief."""
    with np.errstate(over="ignore"):
        tilt = mu.w * np.exp(gamma * mu.s)
    m = float(tilt.sum())
    if not math.isfinite(m) or not np.all(np.isfinite(tilt)):
        raise ValueOverflow(f"exp(gamma*s) overflows for gamma={gamma}, max s={mu.s.max()}")
    n = int(mu.y.max()) + 1 if ny is None else ny
    return m, np.bincount(mu.y, weights=tilt, minlength=n) / m


def rescale_s(mu: JointMeasure, factor: float) -> JointMeasure:
    if not factor > 0:
        raise ValueError("rescale factor must be positive")
    return JointMeasure(mu.y, mu.s * factor, mu.w)


def shift_s(mu: JointMeasure, offset: float) -> JointMeasure:
    return JointMeasure(mu.y, mu.s + offset, mu.w)


def mixture(mu1: JointMeasure, mu2: JointMeasure, lam: float) -> JointMeasure:
    """Convex combination ``lam*mu1 + (1-lam)*mu2`` as an atom union."""
    return JointMeasure(
        np.concatenate([mu1.y, mu2.y]),
        np.concatenate([mu1.s, mu2.s]),
        np.concatenate([lam * mu1.w, (1.0 - lam) * mu2.w]),
    )


def distance(mu1: JointMeasure, mu2: JointMeasure, tol: float = MERGE_TOL) -> float:
    """Sup-distance between atom weights after matching atoms on (y, s).

    Atoms match when they share ``y`` and their costs differ by at most
    ``tol``; an unmatched atom contributes its full weight.
    """
    d = 0.0
    i = j = 0
    a, b = mu1, mu2
    while i < len(a) or j < len(b):
        if i < len(a) and j < len(b) and a.y[i] == b.y[j] and abs(a.s[i] - b.s[j]) <= tol:
            d = max(d, abs(a.w[i] - b.w[j]))
            i += 1
            j += 1
        elif j >= len(b) or (i < len(a) and (a.y[i], a.s[i]) < (b.y[j], b.s[j])):
            d = max(d, a.w[i])
            i += 1
        else:
            d = max(d, b.w[j])
            j += 1
    return float(d)
