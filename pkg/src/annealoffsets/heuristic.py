"""Effective-field anneal-offset heuristic.

For every qubit the absolute effective field ``|h_i + sum_j J_ij s_j|`` is
averaged over the configurations of its neighbors (uniformly, or with
per-configuration weights, optionally over only the ``M`` strongest
neighbors). Averages are normalized by their maximum to ratios ``r_i`` in
[0, 1], and offsets ``delta_i = |delta|_max (1 - 2 r_i)`` are clamped to the
per-qubit bounds: the most strongly coupled qubits are delayed.

Averages are accumulated in exact rational arithmetic and each exact
ratio is rounded to a multiple of ``2**-RATIO_BITS``. Rescaling (h, J) by a
constant perturbs float inputs by an ulp (``0.1 * 3`` is not ``0.3``); the
grid absorbs that, so ratios and offsets are unchanged by the scale.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import IsingInstance
from .schedule import AnnealSchedule, OffsetVector, default_bounds

MAX_ENUM_DEGREE = 16
RATIO_BITS = 40


@dataclass(frozen=True, eq=False)
class NeighborWeights:
    """Per-qubit weights over neighbor configurations.

    ``neighbors[i]`` lists the neighbor indices (ascending) whose
    configurations ``weights[i]`` ranges over; configuration index bit ``k``
    set means neighbor ``k`` is -1.
    """

    neighbors: tuple[tuple[int, ...], ...]
    weights: tuple[np.ndarray, ...]

    def __post_init__(self):
        for nb, w in zip(self.neighbors, self.weights):
            w = np.asarray(w)
            if w.shape != (1 << len(nb),):
                raise ValueError("weight vector length must be 2**(number of neighbors)")
            if np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-12):
                raise ValueError("weights must be non-negative and sum to 1")

    @classmethod
    def uniform(cls, instance: IsingInstance, subset_size: int | None = None) -> "NeighborWeights":
        nbs = tuple(tuple(j for j, _ in neighbor_subset(instance, i, subset_size)) for i in range(instance.n))
        return cls(nbs, tuple(np.full(1 << len(nb), 1.0 / (1 << len(nb))) for nb in nbs))


@dataclass(frozen=True, eq=False)
class EffectiveFieldReport:
    avg_abs_field: np.ndarray
    ratios: np.ndarray
    variant: str

    def to_rows(self, delta: Sequence[float] | None = None) -> list[dict]:
        rows = []
        for i, (f, r) in enumerate(zip(self.avg_abs_field.tolist(), self.ratios.tolist())):
            row = {"qubit": i, "avg_abs_field": f, "ratio": r}
            if delta is not None:
                row["delta"] = float(delta[i])
            rows.append(row)
        return rows

    def write_csv(self, path: str | Path, delta: Sequence[float] | None = None) -> None:
        rows = self.to_rows(delta)
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["qubit"])
            w.writeheader()
            for row in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def neighbor_subset(instance: IsingInstance, i: int, subset_size: int | None) -> list[tuple[int, float]]:
    """Neighbors of ``i`` in ascending index order; with ``subset_size`` only the
    ``subset_size`` largest-|J| ones (ties to the lower index)."""
    nb = instance.neighbors[i]
    if subset_size is None or subset_size >= len(nb):
        return list(nb)
    if subset_size < 0:
        raise ValueError("subset_size must be non-negative")
    keep = sorted(nb, key=lambda t: (-abs(t[1]), t[0]))[:subset_size]
    return sorted(keep)


def neighbor_spin_table(d: int) -> np.ndarray:
    idx = np.arange(1 << d, dtype=np.int64)[:, None]
    return (1 - 2 * ((idx >> np.arange(d)) & 1)).astype(np.int64)


def _exact_avg(h: float, couplings: Sequence[float], weights: np.ndarray | None) -> Fraction:
    d = len(couplings)
    table = neighbor_spin_table(d)
    hq = Fraction(h)
    Jq = [Fraction(w) for w in couplings]
    total = Fraction(0)
    for c, row in enumerate(table.tolist()):
        f = hq
        for w, s in zip(Jq, row):
            f += w if s > 0 else -w
        if weights is None:
            total += abs(f)
        else:
            total += Fraction(float(weights[c])) * abs(f)
    return total / (1 << d) if weights is None else total


def snap_ratio(q: Fraction) -> float:
    """Nearest multiple of ``2**-RATIO_BITS`` (exact in a double)."""
    return round(q * (1 << RATIO_BITS)) / (1 << RATIO_BITS)


def effective_field_stats(
    instance: IsingInstance,
    weights: NeighborWeights | None = None,
    subset_size: int | None = None,
    max_degree: int = MAX_ENUM_DEGREE,
) -> EffectiveFieldReport:
    n = instance.n
    if weights is not None and len(weights.weights) != n:
        raise ValueError("need one weight vector per qubit")
    cache: dict = {}
    exact: list[Fraction] = []
    for i in range(n):
        if weights is None:
            nb = neighbor_subset(instance, i, subset_size)
        else:
            lookup = dict(instance.neighbors[i])
            nb = [(j, lookup[j]) for j in weights.neighbors[i]]
        if len(nb) > max_degree:
            raise ValueError(
                f"qubit {i} has {len(nb)} neighbors (cap {max_degree}); use subset_size to approximate"
            )
        Js = [w for _, w in nb]
        if weights is None:
            # uniform average depends only on h and the multiset of |J|
            key = (float(instance.h[i]), tuple(sorted(abs(w) for w in Js)))
            if key not in cache:
                cache[key] = _exact_avg(key[0], key[1], None)
            exact.append(cache[key])
        else:
            exact.append(_exact_avg(float(instance.h[i]), Js, np.asarray(weights.weights[i])))
    top = max(exact, default=Fraction(0))
    if top == 0:
        raise ValueError("every average effective field is zero; nothing to normalize")
    if weights is not None:
        variant = "weighted"
    elif subset_size is not None:
        variant = f"subset({subset_size})"
    else:
        variant = "uniform"
    avg = np.array([float(f) for f in exact])
    ratios = np.array([snap_ratio(f / top) for f in exact])
    return EffectiveFieldReport(avg, ratios, variant)


def assign_offsets(report: EffectiveFieldReport | np.ndarray, delta_max_mag: float,
                   bounds=None) -> OffsetVector:
    """``clip(delta_max * (1 - 2 r), lo, hi)`` per qubit."""
    r = report.ratios if isinstance(report, EffectiveFieldReport) else np.asarray(report, dtype=float)
    if delta_max_mag < 0:
        raise ValueError("delta_max_mag must be non-negative")
    b = default_bounds(r.size) if bounds is None else np.asarray(bounds, dtype=float).reshape(-1, 2)
    raw = delta_max_mag * (1.0 - 2.0 * r)
    # + 0.0 turns -0.0 into 0.0
    return OffsetVector(np.clip(raw, b[:, 0], b[:, 1]) + 0.0, b)


def frequency_weights_from_samples(instance: IsingInstance, samples, subset_size: int | None = None) -> NeighborWeights:
    x = np.asarray(samples)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("need a non-empty (reads, n) sample array")
    if x.shape[1] != instance.n:
        raise ValueError("sample width does not match the instance")
    bits = (x < 0).astype(np.int64)
    nbs, ws = [], []
    for i in range(instance.n):
        nb = [j for j, _ in neighbor_subset(instance, i, subset_size)]
        code = bits[:, nb] @ (1 << np.arange(len(nb), dtype=np.int64)) if nb else np.zeros(len(x), dtype=np.int64)
        counts = np.bincount(code, minlength=1 << len(nb))
        nbs.append(tuple(nb))
        ws.append(counts / counts.sum())
    return NeighborWeights(tuple(nbs), tuple(ws))


def heuristic_offsets(instance: IsingInstance, delta_max_mag: float, bounds=None, **kw) -> OffsetVector:
    return assign_offsets(effective_field_stats(instance, **kw), delta_max_mag, bounds)


@dataclass(frozen=True, eq=False)
class SearchResult:
    offsets: OffsetVector
    p0: float
    baseline_p0: float
    evaluations: int
    history: list


def search_offsets(
    instance: IsingInstance,
    schedule: AnnealSchedule,
    objective_budget: int,
    strategy: str = "grid",
    config=None,
    bounds=None,
    direction: Sequence[float] | None = None,
    seed: int = 0,
) -> SearchResult:
    """Direct maximization of the exact success probability over offsets.

    Only feasible at exact-simulation scale. The all-zero offset vector is
    always evaluated first, so the result is never worse than baseline.

    ``grid``: with ``direction`` the line ``t * direction`` through the box,
    otherwise the Cartesian product of equally many levels per qubit.
    ``coordinate``: per-qubit +/- step moves with step halving.
    ``random``: uniform draws in the box.
    """
    from .dynamics import ExactRunConfig, enumerate_ground_states, run_exact

    if objective_budget < 1:
        raise ValueError("budget must be at least one evaluation")
    n = instance.n
    b = default_bounds(n) if bounds is None else np.asarray(bounds, dtype=float).reshape(-1, 2)
    config = config or ExactRunConfig()
    ground = enumerate_ground_states(instance)
    history: list[tuple[np.ndarray, float]] = []

    def evaluate(delta) -> float:
        off = OffsetVector(np.asarray(delta, dtype=float), b)
        p = run_exact(instance, schedule, off, config, ground=ground).p0
        history.append((off.delta.copy(), p))
        return p

    base = evaluate(np.zeros(n))
    left = objective_budget - 1
    if left > 0:
        if strategy == "grid":
            for cand in _grid_candidates(b, left, direction):
                evaluate(cand)
        elif strategy == "random":
            rng = np.random.default_rng(seed)
            for _ in range(left):
                evaluate(rng.uniform(b[:, 0], b[:, 1]))
        elif strategy == "coordinate":
            _coordinate_search(evaluate, b, left, history)
        else:
            raise ValueError(f"unknown strategy {strategy!r}")
    best_delta, best_p = max(history, key=lambda t: t[1])
    return SearchResult(OffsetVector(best_delta, b), best_p, base, len(history), history)


def _grid_candidates(b: np.ndarray, budget: int, direction):
    n = b.shape[0]
    if direction is not None:
        u = np.asarray(direction, dtype=float)
        with np.errstate(divide="ignore"):
            hi = np.min(np.where(u > 0, b[:, 1] / u, np.where(u < 0, b[:, 0] / u, np.inf)))
            lo = np.max(np.where(u > 0, b[:, 0] / u, np.where(u < 0, b[:, 1] / u, -np.inf)))
        ts = np.linspace(lo, hi, budget + 1) if budget > 1 else np.array([hi])
        ts = [t for t in ts if t != 0][:budget]
        return [t * u for t in ts]
    levels = max(2, int(np.floor((budget + 1) ** (1.0 / n))))
    while levels ** n > budget + 1 and levels > 2:
        levels -= 1
    axes = [np.linspace(lo, hi, levels) for lo, hi in b]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    grid = grid[np.any(grid != 0, axis=1)]
    return list(grid[:budget])


def _coordinate_search(evaluate, b: np.ndarray, budget: int, history) -> None:
    n = b.shape[0]
    x = np.zeros(n)
    fx = history[-1][1]
    step = 0.5 * float(np.min(b[:, 1] - b[:, 0]))
    used = 0
    while used < budget and step > 1e-6:
        improved = False
        for i in range(n):
            for sgn in (1.0, -1.0):
                if used >= budget:
                    return
                y = x.copy()
                y[i] = np.clip(y[i] + sgn * step, b[i, 0], b[i, 1])
                if y[i] == x[i]:
                    continue
                fy = evaluate(y)
                used += 1
                if fy > fx:
                    x, fx, improved = y, fy, True
                    break
        if not improved:
            step /= 2
