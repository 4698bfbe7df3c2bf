"""Success-probability estimation under the batched annealing protocol.

Runs are drawn in batches (calls) of ``batch_size``; a fresh random
spin-reversal gauge is applied every ``gauge_period`` runs; sampling stops
after the first batch that brings the success count to ``stop_successes``,
or when ``max_batches`` batches are spent. A run succeeds when its energy
equals the reference ground energy.

A sampler is any callable ``sampler(instance, num_reads, rng) -> (num_reads, n)``
array of +/-1 spins. Gauge block ``g`` (runs ``g*gauge_period`` onward) draws
its gauge and sampler randomness from ``default_rng([seed, g])``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import Callable, TextIO

import numpy as np

from ..model import GroundStateSet, IsingInstance, energies, energy_tolerance

Z95 = 1.959963984540054

Sampler = Callable[[IsingInstance, int, np.random.Generator], np.ndarray]


@dataclass(frozen=True)
class SamplerProtocol:
    batch_size: int = 10_000
    max_batches: int = 1_000
    stop_successes: int = 5
    gauge_period: int = 1_000
    use_gauges: bool = True
    # stop at the exact run that reaches stop_successes instead of at the end of its batch
    stop_within_batch: bool = False

    def __post_init__(self):
        if min(self.batch_size, self.max_batches, self.stop_successes, self.gauge_period) < 1:
            raise ValueError("protocol sizes must all be positive")

    @property
    def max_runs(self) -> int:
        return self.batch_size * self.max_batches


@dataclass(frozen=True)
class SuccessEstimate:
    """``p_hat = successes / runs`` with a 95% Wilson interval.

    When nothing succeeded (``solved`` is False) ``p_upper = 1 / runs`` is the
    bound to propagate instead of the zero point estimate.
    """

    successes: int
    runs: int
    p_hat: float
    ci_low: float
    ci_high: float
    solved: bool

    @property
    def p_upper(self) -> float:
        return self.p_hat if self.solved else 1.0 / self.runs

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_upper"] = self.p_upper
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SuccessEstimate":
        return cls(int(d["successes"]), int(d["runs"]), float(d["p_hat"]), float(d["ci_low"]),
                   float(d["ci_high"]), bool(d["solved"]))

    @classmethod
    def from_counts(cls, successes: int, runs: int) -> "SuccessEstimate":
        if runs < 1 or not 0 <= successes <= runs:
            raise ValueError("need 0 <= successes <= runs and runs >= 1")
        lo, hi = wilson_interval(successes, runs)
        p = successes / runs
        return cls(successes, runs, p, min(lo, p), max(hi, p), successes > 0)


def wilson_interval(successes: int, runs: int, z: float = Z95) -> tuple[float, float]:
    p = successes / runs
    z2 = z * z
    denom = 1.0 + z2 / runs
    center = (p + z2 / (2 * runs)) / denom
    half = z * math.sqrt(p * (1 - p) / runs + z2 / (4 * runs * runs)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def estimate_success(
    sampler: Sampler,
    instance: IsingInstance,
    reference: GroundStateSet,
    protocol: SamplerProtocol = SamplerProtocol(),
    seed: int = 0,
    records: TextIO | None = None,
) -> SuccessEstimate:
    """Run the batched protocol; optionally stream ``run_index,gauge_id,energy,success`` rows."""
    if reference.degeneracy < 1:
        raise ValueError("reference ground-state set is empty")
    n = instance.n
    tol = energy_tolerance(instance)
    writer = csv.writer(records) if records is not None else None
    if writer is not None:
        writer.writerow(["run_index", "gauge_id", "energy", "success"])
    runs = successes = 0
    done = False
    for _ in range(protocol.max_batches):
        batch_end = runs + protocol.batch_size
        while runs < batch_end:
            gid = runs // protocol.gauge_period
            take = min(batch_end, (gid + 1) * protocol.gauge_period) - runs
            rng = np.random.default_rng([seed, gid])
            if protocol.use_gauges:
                mask = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
                out = np.asarray(sampler(instance.gauged(mask), take, rng)) * mask
            else:
                out = np.asarray(sampler(instance, take, rng))
            en = energies(instance, out)
            ok = en <= reference.energy + tol
            if protocol.stop_within_batch and successes + ok.sum() >= protocol.stop_successes:
                cut = int(np.nonzero(np.cumsum(ok) >= protocol.stop_successes - successes)[0][0]) + 1
                en, ok, take = en[:cut], ok[:cut], cut
                done = True
            if writer is not None:
                for k in range(take):
                    writer.writerow([runs + k, gid, repr(float(en[k])), int(ok[k])])
            runs += take
            successes += int(ok.sum())
            if done:
                break
        if done or successes >= protocol.stop_successes:
            break
    return SuccessEstimate.from_counts(successes, runs)
