"""Annealing schedules, per-qubit anneal offsets and the inhomogeneous coefficients.

A qubit with offset ``delta`` sees the control signal ``c(s) + delta``; its
driver and problem coefficients are ``A(c(s) + delta)`` and
``B(c(s) + delta)``. Positive offsets advance a qubit, negative ones delay it.
Energies are in GHz.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

DEFAULT_BOUND = 0.15


def _identity(s):
    return s


@dataclass(frozen=True, eq=False)
class AnnealSchedule:
    c: np.ndarray
    A: np.ndarray
    B: np.ndarray
    signal_map: Callable = field(default=_identity)

    def __post_init__(self):
        c, A, B = (np.array(x, dtype=np.float64).reshape(-1) for x in (self.c, self.A, self.B))
        if not (c.size == A.size == B.size) or c.size < 2:
            raise ValueError("schedule table needs at least two rows of (c, A, B)")
        if np.any(np.diff(c) <= 0):
            raise ValueError("control values c must be strictly increasing")
        if np.any(np.diff(A) > 0) or np.any(np.diff(B) < 0):
            raise ValueError("A must be non-increasing and B non-decreasing in c")
        if np.any(A < 0) or np.any(B < 0):
            raise ValueError("schedule values must be non-negative")
        for a in (c, A, B):
            a.flags.writeable = False
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def c_range(self) -> tuple[float, float]:
        return float(self.c[0]), float(self.c[-1])

    def signal(self, s):
        return self.signal_map(s)

    def at_signal(self, c) -> tuple[np.ndarray, np.ndarray]:
        """(A, B) at control values ``c``; outside the table the end values hold."""
        return np.interp(c, self.c, self.A), np.interp(c, self.c, self.B)

    def baseline(self, s) -> tuple[np.ndarray, np.ndarray]:
        return self.at_signal(self.signal(s))

    def covers(self, lo: float, hi: float) -> bool:
        """True when every shifted signal in [c(0)+lo, c(1)+hi] lies inside the table."""
        c0, c1 = self.signal(0.0), self.signal(1.0)
        return bool(self.c[0] <= min(c0, c1) + lo and max(c0, c1) + hi <= self.c[-1])

    def check_headroom(self, bounds) -> None:
        b = np.asarray(bounds, dtype=float).reshape(-1, 2)
        if b.size and not self.covers(b[:, 0].min(), b[:, 1].max()):
            raise ValueError(
                f"schedule table {self.c_range} lacks headroom for offsets in "
                f"[{b[:, 0].min()}, {b[:, 1].max()}]"
            )

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["c", "A_GHz", "B_GHz"])
            for row in zip(self.c.tolist(), self.A.tolist(), self.B.tolist()):
                w.writerow([repr(x) for x in row])


def synth_default_schedule(A0: float = 1.0, B0: float = 1.0) -> AnnealSchedule:
    """Piecewise-linear schedule ``A = A0 max(0, 1-c)``, ``B = B0 clip(c, 0, 1)`` on c in [-0.5, 1.5]."""
    if A0 <= 0 or B0 <= 0:
        raise ValueError("A0 and B0 must be positive")
    c = np.array([-0.5, 0.0, 1.0, 1.5])
    return AnnealSchedule(c, A0 * np.maximum(0.0, 1.0 - c), B0 * np.clip(c, 0.0, 1.0))


def load_schedule(path: str | Path, bounds=None) -> AnnealSchedule:
    """Read a (c, A_GHz, B_GHz) CSV; ``bounds`` optionally enforces offset headroom."""
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise ValueError(f"{path}: empty schedule table")
    try:
        c = [float(r["c"]) for r in rows]
        A = [float(r["A_GHz"]) for r in rows]
        B = [float(r["B_GHz"]) for r in rows]
    except KeyError as exc:
        raise ValueError(f"{path}: missing column {exc}") from None
    sched = AnnealSchedule(c, A, B)
    if bounds is not None:
        sched.check_headroom(bounds)
    return sched


@dataclass(frozen=True, eq=False)
class OffsetVector:
    delta: np.ndarray
    bounds: np.ndarray  # (n, 2) rows [lo, hi]

    def __post_init__(self):
        d = np.array(self.delta, dtype=np.float64).reshape(-1)
        b = np.array(self.bounds, dtype=np.float64).reshape(-1, 2)
        if b.shape[0] != d.size:
            raise ValueError("need one [lo, hi] bound per qubit")
        if np.any(b[:, 0] > b[:, 1]):
            raise ValueError("bound with lo > hi")
        if np.any(d < b[:, 0]) or np.any(d > b[:, 1]):
            raise ValueError("offset outside its bounds")
        d.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "bounds", b)

    @property
    def n(self) -> int:
        return self.delta.size

    @classmethod
    def zeros(cls, n: int, bound: float = DEFAULT_BOUND) -> "OffsetVector":
        return cls(np.zeros(n), default_bounds(n, bound))

    def to_dict(self) -> dict:
        return {"delta": self.delta.tolist(), "bounds": self.bounds.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "OffsetVector":
        return cls(d["delta"], d["bounds"])

    def save(self, path: str | Path, **extra) -> None:
        d = dict(extra)
        d.update(self.to_dict())
        Path(path).write_text(json.dumps(d, indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "OffsetVector":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_bounds(n: int, bound: float = DEFAULT_BOUND) -> np.ndarray:
    return np.tile([-bound, bound], (n, 1))


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    A: np.ndarray
    B: np.ndarray
    edge_scale: np.ndarray
    clamped: bool = False

    @property
    def sqrt_B(self) -> np.ndarray:
        return np.sqrt(self.B)


def eval_coefficients(sched: AnnealSchedule, offsets: OffsetVector | None, instance, s: float) -> CoefficientSet:
    """Per-qubit ``A_i(s)``, ``B_i(s)`` and per-edge ``sqrt(B_i B_j)``."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s={s} outside [0, 1]")
    n = instance.n
    delta = np.zeros(n) if offsets is None else offsets.delta
    if delta.size != n:
        raise ValueError("offset vector length does not match the instance")
    c = sched.signal(s) + delta
    A, B = sched.at_signal(c)
    clamped = bool(np.any(c < sched.c[0]) or np.any(c > sched.c[-1]))
    e = instance.edges
    scale = np.sqrt(B[e[:, 0]] * B[e[:, 1]])
    return CoefficientSet(A, B, scale, clamped)


def coefficient_table(sched: AnnealSchedule, offsets: OffsetVector | None, n: int,
                      s: Sequence[float] | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``A_i(s)``, ``B_i(s)`` for a grid of s values; arrays of shape (len(s), n)."""
    s = np.asarray(s, dtype=float)
    delta = np.zeros(n) if offsets is None else offsets.delta
    c = np.asarray(sched.signal(s), dtype=float)[:, None] + delta[None, :]
    return sched.at_signal(c)


def breakpoints(sched: AnnealSchedule, offsets: OffsetVector | None) -> np.ndarray:
    """Interior s values where some qubit's signal crosses a table node.

    The coefficients are smooth between these points, which integrators use
    to keep their order. Only known for the identity signal map; otherwise empty.
    """
    if sched.signal_map is not _identity:
        return np.empty(0)
    delta = np.zeros(1) if offsets is None else np.unique(offsets.delta)
    s = (sched.c[:, None] - delta[None, :]).reshape(-1)
    s = np.unique(s[(s > 1e-12) & (s < 1 - 1e-12)])
    if s.size > 1:
        s = s[np.concatenate([[True], np.diff(s) > 1e-12])]
    return s

