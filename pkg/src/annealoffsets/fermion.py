"""Free-fermion spectra of open transverse-field Ising chains.

For an open chain ``H = sum_i G_i X_i + sum_i K_i Z_i Z_{i+1}`` the
Jordan-Wigner map ``X_i = 1 - 2 n_i`` gives a quadratic fermion
Hamiltonian with Bogoliubov-de Gennes matrix ``[[a, b], [-b, -a]]``,
``a_ii = -2 G_i``, ``a_{i,i+1} = a_{i+1,i} = K_i``, ``b_{i,i+1} = -b_{i+1,i} = K_i``.
Its ``n`` non-negative eigenvalues are the single-fermion energies
``eps_k``, equal to the singular values of the bidiagonal ``a + b``; every
many-body level is ``E_0 + sum`` of a subset of them.

With ``h = 0`` the dynamics conserve spin-flip parity, which is fermion
parity, so the relevant gap above the ground state is the cheapest
two-fermion excitation ``eps_1 + eps_2`` (``gap="parity"``). The lowest
single-fermion energy ``eps_1`` (``gap="single"``) collapses onto the
edge zero mode in the ordered phase.
"""
from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import svdvals

from .model import IsingInstance
from .schedule import AnnealSchedule, OffsetVector, coefficient_table

# Boltzmann constant over Planck constant, GHz per kelvin
KB_OVER_H_GHZ = 1.380649e-23 / 6.62607015e-34 / 1e9
DEFAULT_TEMPERATURE_K = 0.012


def _check_chain(instance: IsingInstance) -> None:
    if not instance.is_chain():
        raise ValueError("free-fermion analysis needs an open chain with edges (i, i+1)")
    if np.any(instance.h != 0):
        raise ValueError("free-fermion analysis needs h = 0")


def chain_terms(instance: IsingInstance, schedule: AnnealSchedule, offsets: OffsetVector | None,
                s: float | Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Transverse fields ``G = A_i(s)`` and bonds ``K = sqrt(B_i B_{i+1}) J_{i,i+1}``; rows per s."""
    _check_chain(instance)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    A, B = coefficient_table(schedule, offsets, instance.n, s_arr)
    K = np.sqrt(B[:, :-1] * B[:, 1:]) * instance.J[None, :]
    return A, K


def bdg_matrix(G: np.ndarray, K: np.ndarray) -> np.ndarray:
    n = len(G)
    a = np.diag(-2.0 * np.asarray(G, dtype=float))
    b = np.zeros((n, n))
    i = np.arange(n - 1)
    a[i, i + 1] = a[i + 1, i] = K
    b[i, i + 1] = K
    b[i + 1, i] = -np.asarray(K)
    return np.block([[a, b], [-b, -a]])


def single_particle_energies(G: np.ndarray, K: np.ndarray) -> np.ndarray:
    n = len(G)
    m = np.diag(-2.0 * np.asarray(G, dtype=float))
    i = np.arange(n - 1)
    m[i, i + 1] = 2.0 * np.asarray(K)
    return np.sort(svdvals(m))


def chain_bdg_spectrum(instance: IsingInstance, schedule: AnnealSchedule, offsets: OffsetVector | None,
                       s: float) -> np.ndarray:
    """Sorted single-fermion energies (GHz) at normalized time ``s``."""
    G, K = chain_terms(instance, schedule, offsets, s)
    return single_particle_energies(G[0], K[0])


@dataclass(frozen=True, eq=False)
class FermionSpectrum:
    s_grid: np.ndarray
    energies: np.ndarray  # (len(s_grid), n), ascending per row

    def gap(self, kind: str = "parity") -> np.ndarray:
        if kind == "parity":
            return self.energies[:, 0] + self.energies[:, 1] if self.energies.shape[1] > 1 else 2 * self.energies[:, 0]
        if kind == "single":
            return self.energies[:, 0]
        raise ValueError(f"unknown gap convention {kind!r}")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "k", "epsilon_GHz"])
            for s, row in zip(self.s_grid.tolist(), self.energies.tolist()):
                for k, e in enumerate(row):
                    w.writerow([repr(s), k, repr(e)])

    def write_gap_csv(self, path: str | Path) -> None:
        eps_min = self.gap("single")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "eps_min_GHz", "two_eps_min_GHz", "parity_gap_GHz"])
            for s, e1, gp in zip(self.s_grid.tolist(), eps_min.tolist(), self.gap("parity").tolist()):
                w.writerow([repr(s), repr(e1), repr(2 * e1), repr(gp)])


def spectrum_sweep(instance: IsingInstance, schedule: AnnealSchedule, offsets: OffsetVector | None,
                   s_grid: Sequence[float]) -> FermionSpectrum:
    s = np.asarray(s_grid, dtype=float)
    if s.ndim != 1 or s.size == 0 or np.any(np.diff(s) < 0) or s[0] < 0 or s[-1] > 1:
        raise ValueError("s_grid must be a non-empty sorted grid in [0, 1]")
    G, K = chain_terms(instance, schedule, offsets, s)
    return FermionSpectrum(s, np.array([single_particle_energies(g, k) for g, k in zip(G, K)]))


@dataclass(frozen=True)
class CriticalMetrics:
    s_star: float
    delta_star: float
    k_star: int
    temperature_K: float
    threshold_GHz: float
    gap_kind: str = "parity"

    def to_dict(self) -> dict:
        return {
            "s_star": self.s_star,
            "delta_star_GHz": self.delta_star,
            "k_star": self.k_star,
            "temperature_K": self.temperature_K,
            "threshold_GHz": self.threshold_GHz,
            "gap": self.gap_kind,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")


def thermal_threshold_ghz(temperature_K: float) -> float:
    return KB_OVER_H_GHZ * temperature_K


def critical_metrics(spec: FermionSpectrum, temperature_K: float = DEFAULT_TEMPERATURE_K,
                     gap: str = "parity") -> CriticalMetrics:
    """Gap minimum over the grid (first grid point on ties) and the number of
    single-fermion energies below ``k_B T / h`` there."""
    if spec.energies.size == 0:
        raise ValueError("empty spectrum")
    if temperature_K < 0:
        raise ValueError("temperature must be non-negative")
    d = spec.gap(gap)
    i = int(np.argmin(d))
    thr = thermal_threshold_ghz(temperature_K)
    k_star = int(np.sum(spec.energies[i] < thr))
    return CriticalMetrics(float(spec.s_grid[i]), float(d[i]), k_star, float(temperature_K), thr, gap)


# dense cross-check -----------------------------------------------------------------


def dense_chain_hamiltonian(G: np.ndarray, K: np.ndarray, driver_sign: int = -1) -> np.ndarray:
    """``driver_sign * sum G_i X_i + sum K_i Z_i Z_{i+1}`` as a dense matrix (small n only)."""
    n = len(G)
    dim = 1 << n
    idx = np.arange(dim)
    z = 1 - 2 * ((idx[:, None] >> np.arange(n)) & 1)
    H = np.diag((z[:, :-1] * z[:, 1:]) @ np.asarray(K, dtype=float)).astype(float)
    for i in range(n):
        H[idx, idx ^ (1 << i)] += driver_sign * G[i]
    return H


def fermion_vs_exact_residual(G: np.ndarray, K: np.ndarray) -> float:
    """Max deviation between dense many-body excitation energies and the
    free-fermion prediction ``sum`` over occupied modes."""
    n = len(G)
    if n > 12:
        raise ValueError("dense cross-check limited to n <= 12")
    eps = single_particle_energies(G, K)
    levels = np.linalg.eigvalsh(dense_chain_hamiltonian(G, K))
    exc = levels - levels[0]
    pred = np.sort([sum(c) for r in range(n + 1) for c in itertools.combinations(eps, r)])
    return float(np.max(np.abs(exc - pred)))
