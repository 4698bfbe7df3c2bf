"""Seeded generators for the URkD, 4MRkD, ASC and WSC problem classes.

Every generator is a pure function of its parameters and seed. Each class
also has a membership checker that re-derives class membership from the
instance alone (``check_membership``).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import ChimeraGraph, IsingInstance, build_chimera, chain_edges


@dataclass(frozen=True)
class URkDParams:
    k: int = 8
    rows: int = 4
    cols: int = 4
    cell_size: int = 4
    inactive: tuple[int, ...] = ()

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class FourModalParams:
    k: int = 8
    p_light: float = 0.5
    rows: int = 4
    cols: int = 4
    cell_size: int = 4
    inactive: tuple[int, ...] = ()

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if not 0.0 < self.p_light < 1.0:
            raise ValueError("p_light must lie in (0, 1)")


@dataclass(frozen=True)
class ASCParams:
    n: int = 4
    b: int = 12
    W1: float = -1.0
    W2: float = -0.5

    def __post_init__(self):
        if self.n < 1 or self.b < 0:
            raise ValueError("need n >= 1 and b >= 0")
        if not (self.W1 < 0 and self.W2 < 0):
            raise ValueError("ASC couplings must both be ferromagnetic (negative)")
        if self.b > 0 and not abs(self.W1) > abs(self.W2):
            raise ValueError("ASC needs |W1| > |W2| > 0")

    @property
    def num_spins(self) -> int:
        return self.n * (2 * self.b + 1) + 1

    @classmethod
    def for_size(cls, N: int, n: int, **kw) -> "ASCParams":
        """Parameters for an N-spin chain; N must equal n(2b+1)+1 for some b."""
        q, rem = divmod(N - 1, n)
        if rem or q % 2 == 0:
            raise ValueError(f"N={N} is not n(2b+1)+1 for n={n}")
        return cls(n=n, b=(q - 1) // 2, **kw)


@dataclass(frozen=True)
class WSCParams:
    """Weak-strong cluster pairs on a Chimera grid.

    ``layout`` lists ``(strong_cell, weak_cell)`` pairs as ``((r, c), (r, c))``.
    When empty, ``pairs`` pairs are laid out as horizontally adjacent cells,
    strong cell on even columns. ``inter_coupling`` is ``"uniform_pm1"``:
    i.i.d. +/-1 on every coupler between strong cells of different pairs.
    """

    pairs: int = 1
    lam: float = 0.44
    rows: int = 1
    cols: int = 2
    cell_size: int = 4
    layout: tuple = ()
    inter_coupling: str = "uniform_pm1"

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lambda must lie in (0, 1)")
        if self.inter_coupling != "uniform_pm1":
            raise ValueError(f"unknown inter_coupling rule {self.inter_coupling!r}")

    def cell_pairs(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        if self.layout:
            return [(tuple(s), tuple(w)) for s, w in self.layout]
        slots = [(r, c) for r in range(self.rows) for c in range(0, self.cols - 1, 2)]
        if self.pairs > len(slots):
            raise ValueError(f"{self.pairs} pairs do not fit a {self.rows}x{self.cols} grid")
        return [((r, c), (r, c + 1)) for r, c in slots[: self.pairs]]


H_STRONG = -1.0


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _live_edges(graph: ChimeraGraph, inactive) -> np.ndarray:
    edges = graph.edges
    if not inactive:
        return edges
    dead = np.zeros(graph.n, dtype=bool)
    dead[list(inactive)] = True
    return edges[~dead[edges].any(axis=1)]


def gen_urkd(params: URkDParams, seed: int) -> IsingInstance:
    g = build_chimera(params.rows, params.cols, params.cell_size)
    edges = _live_edges(g, params.inactive)
    values = np.concatenate([np.arange(-params.k, 0), np.arange(1, params.k + 1)]).astype(float)
    J = _rng(seed).choice(values, size=edges.shape[0])
    return IsingInstance(np.zeros(g.n), edges, J, "urkd", _params(params), seed, params.inactive)


def gen_4mrkd(params: FourModalParams, seed: int) -> IsingInstance:
    g = build_chimera(params.rows, params.cols, params.cell_size)
    edges = _live_edges(g, params.inactive)
    rng = _rng(seed)
    m = edges.shape[0]
    light = rng.random(m) < params.p_light
    sign = np.where(rng.random(m) < 0.5, -1.0, 1.0)
    J = sign * np.where(light, 1.0, float(params.k))
    return IsingInstance(np.zeros(g.n), edges, J, "4mrkd", _params(params), seed, params.inactive)


def asc_couplings(params: ASCParams) -> np.ndarray:
    """Edge ``i`` (1-based) gets W1 when ceil(i/n) is odd, else W2."""
    i = np.arange(1, params.num_spins)
    heavy = ((i + params.n - 1) // params.n) % 2 == 1
    return np.where(heavy, params.W1, params.W2).astype(float)


def gen_asc(params: ASCParams) -> IsingInstance:
    N = params.num_spins
    return IsingInstance(np.zeros(N), chain_edges(N), asc_couplings(params), "asc", _params(params), None)


def gen_wsc(params: WSCParams, seed: int) -> IsingInstance:
    g = build_chimera(params.rows, params.cols, params.cell_size)
    pairs = params.cell_pairs()
    used: set[tuple[int, int]] = set()
    for s, w in pairs:
        for cell in (s, w):
            if cell in used:
                raise ValueError(f"cell {cell} used by more than one cluster")
            if not (0 <= cell[0] < g.rows and 0 <= cell[1] < g.cols):
                raise ValueError(f"cell {cell} outside the {g.rows}x{g.cols} grid")
            used.add(cell)
        if abs(s[0] - w[0]) + abs(s[1] - w[1]) != 1:
            raise ValueError(f"strong cell {s} and weak cell {w} are not adjacent")

    cell_of = {}
    h = np.zeros(g.n)
    strong_of = {}
    for p, (s, w) in enumerate(pairs):
        for v in g.cell_vertices(*s):
            h[v] = H_STRONG
            cell_of[v] = (p, "strong")
        for v in g.cell_vertices(*w):
            h[v] = -params.lam * abs(H_STRONG)
            cell_of[v] = (p, "weak")
        strong_of[p] = s

    rng = _rng(seed)
    edges, J = [], []
    for i, j in g.edges.tolist():
        a, b = cell_of.get(i), cell_of.get(j)
        if a is None or b is None:
            continue
        if a[0] == b[0]:
            edges.append((i, j))
            J.append(-1.0)
        elif a[1] == "strong" and b[1] == "strong":
            edges.append((i, j))
            J.append(np.nan)
    J = np.asarray(J, dtype=float)
    inter = np.isnan(J)
    J[inter] = np.where(rng.random(int(inter.sum())) < 0.5, -1.0, 1.0)
    meta = _params(params)
    meta["layout"] = [[list(s), list(w)] for s, w in pairs]
    return IsingInstance(h, np.array(edges, dtype=np.int64).reshape(-1, 2), J, "wsc", meta, seed)


def _params(p) -> dict:
    d = asdict(p)
    for k, v in list(d.items()):
        if isinstance(v, tuple):
            d[k] = list(v)
    return d


def wsc_weak_field(lam: float) -> float:
    return -lam * abs(H_STRONG)


# membership checks -----------------------------------------------------------------


def _chimera_from(inst: IsingInstance) -> ChimeraGraph:
    p = inst.params
    return build_chimera(p["rows"], p["cols"], p.get("cell_size", 4))


def check_membership(inst: IsingInstance) -> bool:
    """Re-derive class membership from the instance's own data."""
    cls = inst.problem_class
    if cls in ("urkd", "4mrkd"):
        g = _chimera_from(inst)
        if inst.n != g.n or np.any(inst.h != 0):
            return False
        if not np.array_equal(inst.edges, _live_edges(g, inst.inactive)):
            return False
        k = inst.params["k"]
        if cls == "urkd":
            a = np.abs(inst.J)
            return bool(np.all((a >= 1) & (a <= k) & (a == np.round(a))))
        return bool(np.all(np.isin(inst.J, [-k, -1.0, 1.0, k])))
    if cls == "asc":
        p = ASCParams(**{k: inst.params[k] for k in ("n", "b", "W1", "W2")})
        return (inst.n == p.num_spins and inst.is_chain() and not np.any(inst.h)
                and np.array_equal(inst.J, asc_couplings(p)))
    if cls == "wsc":
        g = _chimera_from(inst)
        lam = inst.params["lam"]
        edge_set = {tuple(e) for e in g.edges.tolist()}
        if inst.n != g.n or not all(tuple(e) in edge_set for e in inst.edges.tolist()):
            return False
        ok = True
        strong_cells = set()
        for s, w in inst.params["layout"]:
            sv, wv = g.cell_vertices(*s), g.cell_vertices(*w)
            strong_cells.add(tuple(s))
            ok &= bool(np.all(inst.h[sv] == H_STRONG))
            ok &= bool(np.all(np.isclose(inst.h[wv], -lam)))
        members = set()
        for s, w in inst.params["layout"]:
            members.update(g.cell_vertices(*s) + g.cell_vertices(*w))
        ok &= all(inst.h[v] == 0 for v in range(inst.n) if v not in members)
        pair_of = {}
        for p, (s, w) in enumerate(inst.params["layout"]):
            for v in g.cell_vertices(*s) + g.cell_vertices(*w):
                pair_of[v] = p
        for (i, j), Jij in zip(inst.edges.tolist(), inst.J.tolist()):
            if pair_of.get(i) == pair_of.get(j):
                ok &= Jij == -1.0
            else:
                ci, cj = g.coords(i)[:2], g.coords(j)[:2]
                ok &= ci in strong_cells and cj in strong_cells and abs(Jij) == 1.0
        return bool(ok)
    raise ValueError(f"no membership rule for class {cls!r}")


GENERATORS = {
    "urkd": (URkDParams, gen_urkd),
    "4mrkd": (FourModalParams, gen_4mrkd),
    "asc": (ASCParams, lambda p, seed=None: gen_asc(p)),
    "wsc": (WSCParams, gen_wsc),
}


def generate(problem_class: str, params: dict, seed: int | None) -> IsingInstance:
    try:
        ptype, fn = GENERATORS[problem_class]
    except KeyError:
        raise ValueError(f"unknown problem class {problem_class!r}") from None
    kw = {k: tuple(map(tuple, v)) if k == "layout" else tuple(v) if isinstance(v, list) else v
          for k, v in params.items()}
    return fn(ptype(**kw), seed)
