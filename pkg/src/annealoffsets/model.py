"""Chimera topology, Ising instances, energies and the exhaustive ground-state oracle."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ChimeraGraph:
    """Defect-free Chimera graph C(rows, cols, cell_size).

    Vertex ``v`` of cell ``(r, c)``, side ``u`` (0 = vertical, 1 = horizontal)
    and in-side index ``k`` is ``((r * cols + c) * 2 + u) * cell_size + k``.
    Side-0 qubits couple to the cell below, side-1 qubits to the cell on the right.
    """

    rows: int
    cols: int
    cell_size: int = 4

    def __post_init__(self):
        if min(self.rows, self.cols, self.cell_size) < 1:
            raise ValueError("rows, cols and cell_size must all be >= 1")

    @property
    def n(self) -> int:
        return self.rows * self.cols * 2 * self.cell_size

    def vertex(self, r: int, c: int, side: int, k: int) -> int:
        return ((r * self.cols + c) * 2 + side) * self.cell_size + k

    def coords(self, v: int) -> tuple[int, int, int, int]:
        L = self.cell_size
        cell, rest = divmod(v, 2 * L)
        side, k = divmod(rest, L)
        r, c = divmod(cell, self.cols)
        return r, c, side, k

    def cell_vertices(self, r: int, c: int) -> list[int]:
        base = self.vertex(r, c, 0, 0)
        return list(range(base, base + 2 * self.cell_size))

    @cached_property
    def edges(self) -> np.ndarray:
        L = self.cell_size
        out = []
        for r in range(self.rows):
            for c in range(self.cols):
                for k in range(L):
                    for k2 in range(L):
                        out.append((self.vertex(r, c, 0, k), self.vertex(r, c, 1, k2)))
                if r + 1 < self.rows:
                    out.extend((self.vertex(r, c, 0, k), self.vertex(r + 1, c, 0, k)) for k in range(L))
                if c + 1 < self.cols:
                    out.extend((self.vertex(r, c, 1, k), self.vertex(r, c + 1, 1, k)) for k in range(L))
        arr = np.array(sorted(out), dtype=np.int64).reshape(-1, 2)
        arr.flags.writeable = False
        return arr

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def expected_edge_count(self) -> int:
        L, R, C = self.cell_size, self.rows, self.cols
        return R * C * L * L + L * (R * (C - 1) + C * (R - 1))


def build_chimera(rows: int, cols: int, cell_size: int = 4) -> ChimeraGraph:
    return ChimeraGraph(int(rows), int(cols), int(cell_size))


def chain_edges(n: int) -> np.ndarray:
    """Open-chain edge list (i, i+1), i = 0..n-2."""
    i = np.arange(max(n - 1, 0), dtype=np.int64)
    return np.stack([i, i + 1], axis=1)


@dataclass(frozen=True, eq=False)
class IsingInstance:
    """Classical Ising problem ``sum_i h_i x_i + sum_(i<j) J_ij x_i x_j``.

    ``edges`` holds one row ``(i, j)`` with ``i < j`` per coupler and ``J``
    the matching coupling values. ``inactive`` lists vertices absent from the
    working graph; they carry no field and no couplers.
    """

    h: np.ndarray
    edges: np.ndarray
    J: np.ndarray
    problem_class: str = "custom"
    params: dict = field(default_factory=dict)
    seed: int | None = None
    inactive: tuple[int, ...] = ()

    def __post_init__(self):
        h = np.array(self.h, dtype=np.float64).reshape(-1)
        edges = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        J = np.array(self.J, dtype=np.float64).reshape(-1)
        n = h.size
        if J.size != edges.shape[0]:
            raise ValueError(f"{edges.shape[0]} edges but {J.size} coupling values")
        if edges.size:
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise ValueError("edges must be listed with i < j")
            if edges.min() < 0 or edges.max() >= n:
                raise ValueError("edge endpoint outside 0..n-1")
            if np.unique(edges, axis=0).shape[0] != edges.shape[0]:
                raise ValueError("duplicate edge")
        inactive = tuple(sorted(int(v) for v in self.inactive))
        if inactive:
            dead = np.zeros(n, dtype=bool)
            dead[list(inactive)] = True
            if np.any(h[dead] != 0) or (edges.size and np.any(dead[edges].any(axis=1))):
                raise ValueError("inactive vertices may not carry fields or couplers")
        for a in (h, edges, J):
            a.flags.writeable = False
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "inactive", inactive)
        object.__setattr__(self, "params", dict(self.params))

    @property
    def n(self) -> int:
        return self.h.size

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def neighbors(self) -> list[list[tuple[int, float]]]:
        """Per vertex, ``(neighbor, J)`` pairs in ascending neighbor order."""
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for (i, j), w in zip(self.edges.tolist(), self.J.tolist()):
            adj[i].append((j, w))
            adj[j].append((i, w))
        for a in adj:
            a.sort()
        return adj

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def coupling_matrix(self) -> sp.csr_matrix:
        """Symmetric sparse J with zero diagonal."""
        i, j = self.edges[:, 0], self.edges[:, 1]
        m = sp.coo_matrix(
            (np.concatenate([self.J, self.J]), (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(self.n, self.n),
        )
        return m.tocsr()

    def is_chain(self) -> bool:
        return self.num_edges == max(self.n - 1, 0) and np.array_equal(self.edges, chain_edges(self.n))

    def scaled(self, alpha: float) -> "IsingInstance":
        return self.replace(h=self.h * alpha, J=self.J * alpha)

    def gauged(self, mask: Sequence[int] | np.ndarray) -> "IsingInstance":
        """Spin-reversal transform: ``h_i -> g_i h_i``, ``J_ij -> g_i g_j J_ij``."""
        g = np.asarray(mask, dtype=np.float64)
        if g.shape != (self.n,) or not np.all(np.abs(g) == 1):
            raise ValueError("gauge mask must be a +/-1 vector of length n")
        return self.replace(h=self.h * g, J=self.J * g[self.edges[:, 0]] * g[self.edges[:, 1]])

    def replace(self, **changes: Any) -> "IsingInstance":
        kw = dict(
            h=self.h, edges=self.edges, J=self.J, problem_class=self.problem_class,
            params=self.params, seed=self.seed, inactive=self.inactive,
        )
        kw.update(changes)
        return IsingInstance(**kw)

    # serialization -----------------------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "format_version": FORMAT_VERSION,
            "class": self.problem_class,
            "params": self.params,
            "seed": self.seed,
            "n": self.n,
            "edges": [[i, j, w] for (i, j), w in zip(self.edges.tolist(), self.J.tolist())],
            "h": self.h.tolist(),
        }
        if self.inactive:
            d["inactive"] = list(self.inactive)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IsingInstance":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported instance format_version {d.get('format_version')!r}")
        h = [float(x) for x in d["h"]]
        if len(h) != d["n"]:
            raise ValueError("h length does not match n")
        rows = d["edges"]
        edges = [(int(i), int(j)) for i, j, _ in rows]
        J = [float(w) for _, _, w in rows]
        return cls(
            h=h, edges=np.array(edges, dtype=np.int64).reshape(-1, 2), J=J,
            problem_class=d.get("class", "custom"), params=d.get("params", {}),
            seed=d.get("seed"), inactive=tuple(d.get("inactive", ())),
        )

    def dumps(self) -> str:
        # float repr is the shortest string that round-trips exactly
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "IsingInstance":
        return cls.from_dict(json.loads(Path(path).read_text()))


def energy(instance: IsingInstance, config: Sequence[int] | np.ndarray) -> float:
    x = np.asarray(config, dtype=np.float64)
    if x.shape != (instance.n,):
        raise ValueError(f"configuration has shape {x.shape}, expected ({instance.n},)")
    e = instance.edges
    return float(instance.h @ x + np.sum(instance.J * x[e[:, 0]] * x[e[:, 1]]))


def energies(instance: IsingInstance, configs: np.ndarray) -> np.ndarray:
    """Row-wise energies of a ``(reads, n)`` array of +/-1 spins."""
    x = np.asarray(configs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != instance.n:
        raise ValueError(f"configs must have shape (reads, {instance.n})")
    e = instance.edges
    return x @ instance.h + (x[:, e[:, 0]] * x[:, e[:, 1]]) @ instance.J


def validate_spins(config: Iterable[int]) -> np.ndarray:
    x = np.asarray(list(config) if not isinstance(config, np.ndarray) else config)
    if not np.all((x == 1) | (x == -1)):
        raise ValueError("spins must be -1 or +1")
    return x.astype(np.int8)


@dataclass(frozen=True, eq=False)
class GroundStateSet:
    energy: float
    states: np.ndarray  # (degeneracy, n) int8
    certified: bool

    @property
    def degeneracy(self) -> int:
        return self.states.shape[0]

    def indices(self) -> np.ndarray:
        """Computational-basis indices, bit ``i`` set when spin ``i`` is -1."""
        bits = (self.states < 0).astype(np.int64)
        return bits @ (1 << np.arange(self.states.shape[1], dtype=np.int64))

    def to_dict(self) -> dict:
        return {"energy": self.energy, "certified": self.certified, "states": self.states.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GroundStateSet":
        return cls(float(d["energy"]), np.array(d["states"], dtype=np.int8).reshape(len(d["states"]), -1),
                   bool(d["certified"]))


class EnumerationTooLarge(ValueError):
    pass


def _spin_table(bits: int) -> np.ndarray:
    """Row ``b`` holds spins of bitmask ``b``; bit set means spin -1."""
    idx = np.arange(1 << bits, dtype=np.int64)[:, None]
    return 1.0 - 2.0 * ((idx >> np.arange(bits)) & 1)


def energy_tolerance(instance: IsingInstance) -> float:
    scale = float(np.abs(instance.h).sum() + np.abs(instance.J).sum())
    return 1e-9 * max(1.0, scale)


def enumerate_ground_states(instance: IsingInstance, max_n: int = 24) -> GroundStateSet:
    """Exhaustive scan over all ``2**n`` configurations.

    The spins are split into a low block (tabulated once) and a high block
    (streamed in chunks); the energy of every configuration is
    ``E_low + E_high + X_low . F_high`` where ``F_high`` is the field the
    high spins exert on the low ones. Minimizers within a round-off
    tolerance are returned in lexicographic spin order (+1 before -1).
    """
    n = instance.n
    if n > max_n:
        raise EnumerationTooLarge(
            f"{n} spins exceeds the enumeration cap of {max_n}; supply a heuristic reference instead"
        )
    if n == 0:
        return GroundStateSet(0.0, np.zeros((1, 0), dtype=np.int8), True)
    n_lo = min(n, 14)
    n_hi = n - n_lo
    h, e, J = instance.h, instance.edges, instance.J
    lo_mask = (e[:, 0] < n_lo) & (e[:, 1] < n_lo)
    hi_mask = (e[:, 0] >= n_lo) & (e[:, 1] >= n_lo)
    cross = ~(lo_mask | hi_mask)

    x_lo = _spin_table(n_lo)
    e_lo = x_lo @ h[:n_lo] + (x_lo[:, e[lo_mask, 0]] * x_lo[:, e[lo_mask, 1]]) @ J[lo_mask]
    # cross edges always have i < n_lo <= j
    coup = np.zeros((max(n_hi, 0), n_lo))
    np.add.at(coup, (e[cross, 1] - n_lo, e[cross, 0]), J[cross])
    he = e[hi_mask] - n_lo

    tol = energy_tolerance(instance)
    chunk = max(1, (1 << 22) >> n_lo)
    best = np.inf
    cand: list[np.ndarray] = []
    for start in range(0, 1 << n_hi, chunk):
        stop = min(start + chunk, 1 << n_hi)
        hi_idx = np.arange(start, stop, dtype=np.int64)[:, None]
        x_hi = 1.0 - 2.0 * ((hi_idx >> np.arange(n_hi)) & 1) if n_hi else np.ones((1, 0))
        e_hi = x_hi @ h[n_lo:] + (x_hi[:, he[:, 0]] * x_hi[:, he[:, 1]]) @ J[hi_mask]
        tot = e_hi[:, None] + e_lo[None, :] + (x_hi @ coup) @ x_lo.T
        cmin = tot.min()
        if cmin > best + tol:
            continue
        best = min(best, cmin)
        r, c = np.nonzero(tot <= best + tol)
        cand.append(((start + r).astype(np.int64) << n_lo) | c)
    idx = np.concatenate(cand)
    bits = (idx[:, None] >> np.arange(n)) & 1
    states = (1 - 2 * bits).astype(np.int8)
    en = energies(instance, states)
    keep = en <= en.min() + tol
    states = states[keep]
    order = np.lexsort((-states).T[::-1])
    states = states[order]
    return GroundStateSet(energy(instance, states[0]), states, True)
