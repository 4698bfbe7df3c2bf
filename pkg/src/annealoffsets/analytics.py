"""Time-to-solution, speedups, the hybrid alternation bound and difficulty groups."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .dynamics.sampling import SuccessEstimate

DEFAULT_PD = 0.99


@dataclass(frozen=True)
class TTSRecord:
    """``tts = t_ann log(1 - p_d) / log(1 - p)``; ``inf`` marks an unbounded TTS (p = 0)."""

    p: float
    t_ann: float
    p_d: float
    tts: float

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.tts)


def _check(p: float, t_ann: float, p_d: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    if t_ann <= 0:
        raise ValueError("t_ann must be positive")
    if not 0.0 < p_d < 1.0:
        raise ValueError("p_d must lie in (0, 1)")


def _tts_value(p: float, t_ann: float, p_d: float) -> float:
    if p == 0.0:
        return math.inf
    if p == 1.0:
        return t_ann
    return t_ann * math.log1p(-p_d) / math.log1p(-p)


def tts(p: float, t_ann: float, p_d: float = DEFAULT_PD) -> TTSRecord:
    """Time to solution; p = 1 is taken as a single anneal (``tts = t_ann``)."""
    _check(p, t_ann, p_d)
    return TTSRecord(p, t_ann, p_d, _tts_value(p, t_ann, p_d))


def hybrid_tts(p_bl: float, p_ao: float, t_ann: float, p_d: float = DEFAULT_PD) -> TTSRecord:
    """TTS when alternating baseline and offset calls,
    ``2 t_ann log(1 - p_d) / log[(1 - p_bl)(1 - p_ao)]``.

    The record's ``p`` is the per-pair success probability
    ``1 - (1 - p_bl)(1 - p_ao)``. A certain success in either call costs one
    pair, ``2 t_ann``, capped at ``2 tts(p_bl)`` so the bound against the
    baseline survives the p = 1 convention.
    """
    _check(p_bl, t_ann, p_d)
    _check(p_ao, t_ann, p_d)
    if p_bl == 1.0 or p_ao == 1.0:
        return TTSRecord(1.0, t_ann, p_d, min(2.0 * t_ann, 2.0 * _tts_value(p_bl, t_ann, p_d)))
    if p_bl == 0.0 and p_ao == 0.0:
        return TTSRecord(0.0, t_ann, p_d, math.inf)
    log_fail = math.log1p(-p_bl) + math.log1p(-p_ao)
    p_pair = -math.expm1(log_fail)
    return TTSRecord(p_pair, t_ann, p_d, 2.0 * t_ann * math.log1p(-p_d) / log_fail)


def speedup_ratio(p_bl: float, p_ao: float, t_ann: float = 1.0, p_d: float = DEFAULT_PD) -> float:
    """``TTS_BL / TTS_AO``."""
    a, b = _tts_value(p_bl, t_ann, p_d), _tts_value(p_ao, t_ann, p_d)
    if math.isinf(a) and math.isinf(b):
        return math.nan
    if math.isinf(b):
        return 0.0
    return a / b


# difficulty grouping ---------------------------------------------------------------

DEFAULT_RANGES = (
    ("0-25", 0.0, 25.0),
    ("25-50", 25.0, 50.0),
    ("50-75", 50.0, 75.0),
    ("75-100", 75.0, 100.0),
    ("hardest-10", 0.0, 10.0),
)


@dataclass(frozen=True, eq=False)
class DifficultyGrouping:
    """Percentile rank of each instance's baseline p (low rank = hard).

    A range ``(label, lo, hi)`` holds ranks in ``[lo, hi)``, closed at 100.
    The four quartile ranges partition the instances; ``hardest-10`` overlays them.
    """

    ranks: np.ndarray
    groups: dict = field(default_factory=dict)


def percentile_ranks(values: Sequence[float]) -> np.ndarray:
    """Mean-rank percentile: ``100 (rank - 1/2) / n`` with tied values sharing their average rank."""
    v = np.asarray(values, dtype=float)
    return 100.0 * (rankdata(v, method="average") - 0.5) / v.size


def difficulty_groups(baseline_ps: Sequence[float], ranges=DEFAULT_RANGES) -> DifficultyGrouping:
    if len(baseline_ps) == 0:
        raise ValueError("need at least one instance")
    r = percentile_ranks(baseline_ps)
    groups = {}
    for label, lo, hi in ranges:
        upper = r <= hi if hi >= 100.0 else r < hi
        groups[label] = np.nonzero((r >= lo) & upper)[0]
    return DifficultyGrouping(r, groups)


# speedup reports ---------------------------------------------------------------------


@dataclass(frozen=True)
class ExactProbability:
    """A success probability known exactly (e.g. ``p0`` from state-vector runs)."""

    p: float

    @property
    def p_hat(self) -> float:
        return self.p

    @property
    def p_upper(self) -> float:
        return self.p

    @property
    def solved(self) -> bool:
        return self.p > 0.0


def as_estimate(x) -> SuccessEstimate | ExactProbability:
    return x if isinstance(x, (SuccessEstimate, ExactProbability)) else ExactProbability(float(x))


@dataclass(frozen=True)
class PairResult:
    index: int
    p_bl: float
    p_ao: float
    ratio: float
    improved: bool
    bound: str  # "", "lower", "upper" or "unsolved"


def _pair(i: int, bl, ao, t_ann: float, p_d: float) -> PairResult:
    p_bl, p_ao = bl.p_upper, ao.p_upper
    ratio = speedup_ratio(p_bl, p_ao, t_ann, p_d)
    if not bl.solved and not ao.solved:
        bound, ratio = "unsolved", math.nan
    elif not bl.solved:
        bound = "lower"
    elif not ao.solved:
        bound = "upper"
    else:
        bound = ""
    return PairResult(i, bl.p_hat, ao.p_hat, ratio, ao.p_hat > bl.p_hat, bound)


def _stats(ratios: np.ndarray) -> dict:
    finite = ratios[np.isfinite(ratios)]
    if finite.size == 0:
        return {"count": 0, "median": None, "p35": None, "p65": None, "max": None}
    return {
        "count": int(finite.size),
        "median": float(np.median(finite)),
        "p35": float(np.percentile(finite, 35)),
        "p65": float(np.percentile(finite, 65)),
        "max": float(finite.max()),
    }


def speedup_report(pairs: Sequence[tuple], t_ann: float, p_d: float = DEFAULT_PD,
                   ranges=DEFAULT_RANGES) -> dict:
    """Per-instance ``TTS_BL / TTS_AO`` and aggregate statistics per difficulty group.

    Pair members are ``SuccessEstimate`` objects or plain exact probabilities.

    Ratios whose baseline was never solved use the bound ``p_BL < 1/runs`` and
    are flagged as lower bounds; medians over groups containing them are
    therefore lower bounds too (``median_is_bound``).
    """
    if not pairs:
        raise ValueError("empty input")
    pairs = [(as_estimate(bl), as_estimate(ao)) for bl, ao in pairs]
    rows = [_pair(i, bl, ao, t_ann, p_d) for i, (bl, ao) in enumerate(pairs)]
    grouping = difficulty_groups([bl.p_upper for bl, _ in pairs], ranges)
    ratios = np.array([r.ratio for r in rows])
    improved = np.array([r.improved for r in rows])

    def summary(idx) -> dict:
        idx = np.asarray(idx, dtype=int)
        d = _stats(ratios[idx])
        d["n"] = int(idx.size)
        d["fraction_improved"] = float(improved[idx].mean()) if idx.size else None
        d["median_is_bound"] = any(rows[i].bound == "lower" for i in idx)
        d["unsolved"] = int(sum(rows[i].bound == "unsolved" for i in idx))
        return d

    return {
        "t_ann": t_ann,
        "p_d": p_d,
        "overall": summary(np.arange(len(rows))),
        "groups": {label: summary(idx) for label, idx in grouping.groups.items()},
        "instances": [
            {
                "index": r.index, "p_bl": r.p_bl, "p_ao": r.p_ao, "ratio": r.ratio,
                "improved": r.improved, "bound": r.bound, "percentile_rank": float(grouping.ranks[r.index]),
            }
            for r in rows
        ],
    }
