"""Spin-vector Monte Carlo: a classical rotor surrogate for the annealer.

Each qubit is an angle ``theta_i`` in [0, pi] with energy

    sum_i [-A_i(s) sin theta_i + B_i(s) h_i cos theta_i]
        + sum_ij sqrt(B_i B_j) J_ij cos theta_i cos theta_j

and is updated by Metropolis moves to uniformly drawn angles while ``s``
advances from 0 to 1 over the sweeps. Non-adjacent qubits are updated
together, one graph color class at a time; all reads of a batch are
simulated in parallel.
"""
from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from ..model import IsingInstance
from ..schedule import AnnealSchedule, OffsetVector, coefficient_table


@dataclass(frozen=True)
class SVMCConfig:
    sweeps: int = 1000
    temperature: float = 0.02  # GHz

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


def color_classes(instance: IsingInstance) -> list[np.ndarray]:
    g = nx.Graph()
    g.add_nodes_from(range(instance.n))
    g.add_edges_from(instance.edges.tolist())
    colors = nx.greedy_color(g, strategy="largest_first")
    k = max(colors.values(), default=-1) + 1
    return [np.array(sorted(v for v, c in colors.items() if c == col), dtype=np.int64) for col in range(k)]


def _readout(theta: np.ndarray) -> np.ndarray:
    return np.where(np.cos(theta) >= 0, 1, -1).astype(np.int8)


def svmc_batch(instance: IsingInstance, schedule: AnnealSchedule, offsets: OffsetVector | None,
               num_reads: int, rng: np.random.Generator, config: SVMCConfig = SVMCConfig()) -> np.ndarray:
    n = instance.n
    Jm = instance.coupling_matrix()
    classes = color_classes(instance)
    s_grid = np.linspace(0.0, 1.0, config.sweeps)
    A_tab, B_tab = coefficient_table(schedule, offsets, n, s_grid)
    beta = 1.0 / config.temperature
    theta = np.full((num_reads, n), np.pi / 2)
    cos, sin = np.cos(theta), np.sin(theta)
    rows = [Jm[cls] for cls in classes]
    for A, B in zip(A_tab, B_tab):
        sb = np.sqrt(B)
        hb = B * instance.h
        for cls, Jc in zip(classes, rows):
            # local longitudinal field on the class from the current neighbor angles
            G = hb[cls] + sb[cls] * (Jc @ (cos * sb).T).T
            prop = rng.uniform(0.0, np.pi, size=(num_reads, cls.size))
            cp, spp = np.cos(prop), np.sin(prop)
            dE = -A[cls] * (spp - sin[:, cls]) + G * (cp - cos[:, cls])
            acc = (dE <= 0) | (rng.random(dE.shape) < np.exp(-beta * np.maximum(dE, 0.0)))
            theta[:, cls] = np.where(acc, prop, theta[:, cls])
            cos[:, cls] = np.where(acc, cp, cos[:, cls])
            sin[:, cls] = np.where(acc, spp, sin[:, cls])
    return _readout(theta)


def run_svmc(instance: IsingInstance, schedule: AnnealSchedule, offsets: OffsetVector | None = None,
             sweeps: int = 1000, temperature: float = 0.02, seed: int | None = 0) -> np.ndarray:
    """One SVMC anneal; returns the +/-1 readout ``sign(cos theta)`` (0 reads as +1)."""
    cfg = SVMCConfig(sweeps, temperature)
    return svmc_batch(instance, schedule, offsets, 1, np.random.default_rng(seed), cfg)[0]


def svmc_sampler(schedule: AnnealSchedule, offsets: OffsetVector | None = None,
                 config: SVMCConfig = SVMCConfig()):
    def sample(instance: IsingInstance, num_reads: int, rng: np.random.Generator) -> np.ndarray:
        return svmc_batch(instance, schedule, offsets, num_reads, rng, config)

    return sample


def simulated_annealing_reference(instance: IsingInstance, reads: int = 32, sweeps: int = 2000,
                                  beta_range: tuple[float, float] = (0.1, 20.0), seed: int = 0):
    """Lowest-energy state found by classical single-spin-flip annealing.

    Used as the success reference when the instance is too large to enumerate;
    the result is not certified.
    """
    from ..model import GroundStateSet, energies

    rng = np.random.default_rng(seed)
    n = instance.n
    Jm = instance.coupling_matrix()
    classes = color_classes(instance)
    x = rng.choice(np.array([-1.0, 1.0]), size=(reads, n))
    scale = max(1.0, float(np.abs(instance.J).max(initial=0.0)), float(np.abs(instance.h).max(initial=0.0)))
    rows = [Jm[cls] for cls in classes]
    for beta in np.geomspace(*beta_range, sweeps) / scale:
        for cls, Jc in zip(classes, rows):
            field = instance.h[cls] + (Jc @ x.T).T
            dE = -2.0 * x[:, cls] * field
            flip = (dE <= 0) | (rng.random(dE.shape) < np.exp(-beta * np.maximum(dE, 0.0)))
            x[:, cls] = np.where(flip, -x[:, cls], x[:, cls])
    en = energies(instance, x)
    best = en.min()
    states = np.unique(x[en == best].astype(np.int8), axis=0)
    return GroundStateSet(float(best), states, False)
