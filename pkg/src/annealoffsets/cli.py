"""Command-line experiment driver.

One JSON config file drives every subcommand; ``--set dotted.key=VALUE``
overrides single fields (VALUE parsed as JSON, falling back to a string).
Outputs live under ``output``; each file carries the config hash and the
seeds that produced it, and nothing time-dependent, so reruns are
byte-identical.

Config schema (all sections optional, defaults shown by ``annealoffsets
config``)::

    seed            root seed
    output          output directory
    problem         {class, params, count}
    schedule        {A0, B0} or {csv}
    offsets         {variant: uniform|subset, subset_size, delta_max: [...],
                     include_baseline, bound}
    simulator       {kind: exact|svmc, t_ann, tol, driver_sign, sweeps, temperature}
    protocol        SamplerProtocol fields
    reference       {max_enumerate}
    analysis        {p_d}
    spectrum        {points, temperature_K, gap, cross_check_points}

Exit codes: 0 ok, 2 config error, 3 sampling budget exhausted with an
unsolved condition (bounds are still written).
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .analytics import hybrid_tts, speedup_report, tts
from .dynamics import (ExactRunConfig, SamplerProtocol, SuccessEstimate, SVMCConfig, estimate_success,
                       run_exact, simulated_annealing_reference, svmc_sampler)
from .fermion import critical_metrics, fermion_vs_exact_residual, chain_terms, spectrum_sweep
from .generators import generate
from .heuristic import assign_offsets, effective_field_stats
from .model import EnumerationTooLarge, GroundStateSet, IsingInstance, enumerate_ground_states
from .schedule import OffsetVector, default_bounds, load_schedule, synth_default_schedule

EXIT_OK, EXIT_CONFIG, EXIT_UNSOLVED = 0, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    seed: int = 0
    output: str = "out"
    problem: dict = field(default_factory=lambda: {"class": "urkd", "params": {}, "count": 1})
    schedule: dict = field(default_factory=lambda: {"A0": 1.0, "B0": 1.0})
    offsets: dict = field(default_factory=lambda: {
        "variant": "uniform", "subset_size": None, "delta_max": [0.05, 0.1],
        "include_baseline": True, "bound": 0.15})
    simulator: dict = field(default_factory=lambda: {
        "kind": "svmc", "t_ann": 10.0, "tol": 1e-8, "driver_sign": -1,
        "sweeps": 1000, "temperature": 0.02})
    protocol: dict = field(default_factory=lambda: asdict(SamplerProtocol()))
    reference: dict = field(default_factory=lambda: {"max_enumerate": 24})
    analysis: dict = field(default_factory=lambda: {"p_d": 0.99})
    spectrum: dict = field(default_factory=lambda: {
        "points": 2001, "temperature_K": 0.012, "gap": "parity", "cross_check_points": 5})

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        cfg = cls()
        for k, v in d.items():
            default = getattr(cfg, k)
            if isinstance(default, dict):
                if not isinstance(v, dict):
                    raise ConfigError(f"section {k!r} must be an object")
                merged = dict(default)
                merged.update(v)
                v = merged
            setattr(cfg, k, v)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if int(self.problem.get("count", 1)) < 0:
            raise ConfigError("problem.count must be >= 0")
        dm = self.offsets["delta_max"]
        if not isinstance(dm, list) or any(not isinstance(x, (int, float)) or x < 0 for x in dm):
            raise ConfigError("offsets.delta_max must be a list of non-negative numbers")
        if self.offsets["variant"] not in ("uniform", "subset"):
            raise ConfigError("offsets.variant must be 'uniform' or 'subset'")
        if self.offsets["variant"] == "subset" and not self.offsets.get("subset_size"):
            raise ConfigError("offsets.variant 'subset' needs offsets.subset_size")
        if self.simulator["kind"] not in ("exact", "svmc"):
            raise ConfigError("simulator.kind must be 'exact' or 'svmc'")
        try:
            SamplerProtocol(**self.protocol)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"protocol: {exc}") from None

    @property
    def sweep(self) -> list[float]:
        """The delta_max values to run, ascending, with 0 first when the baseline is included."""
        vals = {float(x) for x in self.offsets["delta_max"]}
        if self.offsets.get("include_baseline", True):
            vals.add(0.0)
        return sorted(vals)

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _set_path(d: dict, dotted: str, raw: str) -> None:
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
        if not isinstance(cur, dict):
            raise ConfigError(f"cannot set {dotted!r}: {k!r} is not a section")
    cur[keys[-1]] = value


def load_config(path: str | None, overrides=()) -> ExperimentConfig:
    d: dict = {}
    if path:
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    d = copy.deepcopy(d)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        k, v = item.split("=", 1)
        _set_path(d, k, v)
    return ExperimentConfig.from_dict(d)


# output helpers ----------------------------------------------------------------------


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, nan to null, inf to the string 'inf'."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float):
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
    return x


class Writer:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.root = Path(cfg.output)
        self.hash = cfg.hash()

    def provenance(self, **seeds) -> dict:
        return {"config_hash": self.hash, "root_seed": self.cfg.seed, **seeds}

    def path(self, *parts) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def json(self, rel: tuple, payload: dict, **seeds) -> Path:
        body = {"provenance": self.provenance(**seeds)}
        body.update(payload)
        p = self.path(*rel)
        p.write_text(json.dumps(_clean(body), indent=1) + "\n")
        return p

    def csv(self, rel: tuple, header: list[str], rows, **seeds) -> Path:
        buf = io.StringIO()
        prov = self.provenance(**seeds)
        buf.write("# " + " ".join(f"{k}={v}" for k, v in prov.items()) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            row = [v.item() if isinstance(v, np.generic) else v for v in row]
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        p = self.path(*rel)
        p.write_text(buf.getvalue())
        return p


def read_csv(path: str | Path) -> list[dict]:
    """Rows of a CSV written by this tool, skipping the provenance comment."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def derive_seed(root: int, *key: int) -> int:
    return int(np.random.SeedSequence([root, *key]).generate_state(1, np.uint32)[0])


def _dtag(d: float) -> str:
    return f"d{d:.4f}"


def _schedule(cfg: ExperimentConfig):
    s = cfg.schedule
    if "csv" in s:
        return load_schedule(s["csv"], default_bounds(1, cfg.offsets["bound"]))
    return synth_default_schedule(float(s.get("A0", 1.0)), float(s.get("B0", 1.0)))


def _manifest(w: Writer) -> list[dict]:
    p = w.root / "instances" / "manifest.json"
    if not p.exists():
        raise ConfigError(f"no instance manifest at {p}; run 'generate' first")
    return json.loads(p.read_text())["instances"]


def _load_instance(w: Writer, entry: dict) -> IsingInstance:
    return IsingInstance.load(w.root / "instances" / entry["file"])


def _offsets_for(cfg: ExperimentConfig, inst: IsingInstance, d: float):
    bounds = default_bounds(inst.n, cfg.offsets["bound"])
    sub = cfg.offsets.get("subset_size") if cfg.offsets["variant"] == "subset" else None
    report = effective_field_stats(inst, subset_size=sub)
    return report, assign_offsets(report, d, bounds)


# subcommands -------------------------------------------------------------------------


def cmd_generate(cfg: ExperimentConfig) -> int:
    w = Writer(cfg)
    cls = cfg.problem["class"]
    params = cfg.problem.get("params", {})
    count = int(cfg.problem.get("count", 1))
    entries = []
    for i in range(count):
        seed = derive_seed(cfg.seed, i)
        try:
            inst = generate(cls, params, seed)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"problem: {exc}") from None
        name = f"inst_{i:04d}.json"
        d = inst.to_dict()
        d["provenance"] = w.provenance(instance_seed=seed, index=i)
        text = json.dumps(d, indent=1) + "\n"
        w.path("instances", name).write_text(text)
        entries.append({"index": i, "file": name, "seed": seed, "n": inst.n,
                        "sha256": hashlib.sha256(text.encode()).hexdigest()})
    w.json(("instances", "manifest.json"), {"class": cls, "params": params, "count": count,
                                            "instances": entries})
    return EXIT_OK


def cmd_offsets(cfg: ExperimentConfig) -> int:
    w = Writer(cfg)
    for e in _manifest(w):
        inst = _load_instance(w, e)
        for d in cfg.sweep:
            report, off = _offsets_for(cfg, inst, d)
            stem = f"inst_{e['index']:04d}_{_dtag(d)}"
            w.json(("offsets", stem + ".json"),
                   {"instance": e["file"], "delta_max": d, "variant": report.variant, **off.to_dict()},
                   instance_seed=e["seed"])
            w.csv(("offsets", stem + "_report.csv"), ["qubit", "avg_abs_field", "ratio", "delta"],
                  [(r["qubit"], r["avg_abs_field"], r["ratio"], r["delta"]) for r in report.to_rows(off.delta)],
                  instance_seed=e["seed"])
    return EXIT_OK


def _reference_seed(cfg: ExperimentConfig, e: dict) -> int:
    # shared by every condition of an instance so all are scored against one reference
    return derive_seed(cfg.seed, e["index"], 1 << 20)


def _reference(cfg: ExperimentConfig, inst: IsingInstance, seed: int) -> GroundStateSet:
    try:
        return enumerate_ground_states(inst, max_n=int(cfg.reference["max_enumerate"]))
    except EnumerationTooLarge:
        return simulated_annealing_reference(inst, seed=seed)


def _run_condition(args) -> dict:
    """One (instance, delta_max) condition; module-level so worker processes can run it."""
    cfg, e, j, d = args
    w = Writer(cfg)
    inst = _load_instance(w, e)
    sched = _schedule(cfg)
    off = OffsetVector.from_dict(json.loads((w.root / "offsets" / f"inst_{e['index']:04d}_{_dtag(d)}.json").read_text()))
    seed = derive_seed(cfg.seed, e["index"], j)
    sim = cfg.simulator
    stem = f"inst_{e['index']:04d}_{_dtag(d)}"
    if sim["kind"] == "exact":
        rc = ExactRunConfig(t_ann=float(sim["t_ann"]), tol=float(sim["tol"]), driver_sign=int(sim["driver_sign"]))
        res = run_exact(inst, sched, off, rc)
        out = {"instance": e["file"], "delta_max": d, "kind": "exact", "p0": res.p0,
               "steps": res.steps, "norm_drift": res.norm_drift}
    else:
        ref = _reference(cfg, inst, _reference_seed(cfg, e))
        sampler = svmc_sampler(sched, off, SVMCConfig(int(sim["sweeps"]), float(sim["temperature"])))
        buf = io.StringIO()
        est = estimate_success(sampler, inst, ref, SamplerProtocol(**cfg.protocol), seed=seed, records=buf)
        w.path("runs", stem + "_records.csv").write_text(
            f"# config_hash={w.hash} root_seed={cfg.seed} condition_seed={seed}\n" + buf.getvalue())
        out = {"instance": e["file"], "delta_max": d, "kind": "svmc", "estimate": est.to_dict(),
               "reference_energy": ref.energy, "reference_certified": ref.certified}
    w.json(("runs", stem + ".json"), out, instance_seed=e["seed"], condition_seed=seed)
    return out


def _done(w: Writer, stem: str) -> dict | None:
    p = w.root / "runs" / (stem + ".json")
    if not p.exists():
        return None
    d = json.loads(p.read_text())
    return d if d.get("provenance", {}).get("config_hash") == w.hash else None


def cmd_run(cfg: ExperimentConfig, workers: int = 1) -> int:
    """Run every pending condition; finished ones (same config hash) are kept, so an
    interrupted run resumes where it stopped."""
    w = Writer(cfg)
    entries = _manifest(w)
    todo, results = [], {}
    for e in entries:
        for j, d in enumerate(cfg.sweep):
            stem = f"inst_{e['index']:04d}_{_dtag(d)}"
            prev = _done(w, stem)
            if prev is None:
                todo.append((cfg, e, j, d))
            else:
                results[(e["index"], j)] = prev
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(workers) as pool:
            outs = list(pool.map(_run_condition, todo))
    else:
        outs = [_run_condition(t) for t in todo]
    for (_, e, j, _), out in zip(todo, outs):
        results[(e["index"], j)] = out
    rows = []
    unsolved = False
    for e in entries:
        for j, d in enumerate(cfg.sweep):
            r = results[(e["index"], j)]
            if r["kind"] == "exact":
                rows.append((e["index"], d, r["p0"], r["steps"], r["norm_drift"]))
            else:
                est = r["estimate"]
                unsolved |= not est["solved"]
                rows.append((e["index"], d, est["p_hat"], est["successes"], est["runs"], est["ci_low"],
                             est["ci_high"], int(est["solved"]), est["p_upper"]))
    if cfg.simulator["kind"] == "exact":
        w.csv(("runs", "p0_table.csv"), ["instance", "delta_max", "p0", "steps", "norm_drift"], rows)
    else:
        w.csv(("runs", "estimates.csv"), ["instance", "delta_max", "p_hat", "successes", "runs",
                                          "ci_low", "ci_high", "solved", "p_upper"], rows)
    return EXIT_UNSOLVED if unsolved else EXIT_OK


def _load_results(w: Writer, cfg: ExperimentConfig, entries) -> dict:
    out = {}
    for e in entries:
        for d in cfg.sweep:
            r = _done(w, f"inst_{e['index']:04d}_{_dtag(d)}")
            if r is None:
                raise ConfigError(f"missing run result for instance {e['index']} at delta_max={d}; run 'run' first")
            out[(e["index"], d)] = (SuccessEstimate.from_dict(r["estimate"]) if r["kind"] == "svmc"
                                    else float(r["p0"]))
    return out


def _p(x) -> float:
    return x.p_hat if isinstance(x, SuccessEstimate) else x


def cmd_analyze(cfg: ExperimentConfig) -> int:
    w = Writer(cfg)
    entries = _manifest(w)
    res = _load_results(w, cfg, entries)
    t_ann = float(cfg.simulator["t_ann"]) if cfg.simulator["kind"] == "exact" else float(cfg.simulator["sweeps"])
    p_d = float(cfg.analysis["p_d"])
    rows = []
    for e in entries:
        for d in cfg.sweep:
            x = res[(e["index"], d)]
            p = x.p_upper if isinstance(x, SuccessEstimate) else x
            solved = x.solved if isinstance(x, SuccessEstimate) else x > 0
            rows.append((e["index"], d, _p(x), tts(p, t_ann, p_d).tts, "" if solved else "upper-bound-p"))
    w.csv(("analysis", "tts.csv"), ["instance", "delta_max", "p", "tts", "flag"], rows)
    summary = {"t_ann": t_ann, "p_d": p_d, "time_unit": "ns" if cfg.simulator["kind"] == "exact" else "sweeps",
               "conditions": {}}
    if 0.0 in cfg.sweep:
        for d in cfg.sweep:
            if d == 0.0:
                continue
            pairs = [(res[(e["index"], 0.0)], res[(e["index"], d)]) for e in entries]
            if not pairs:
                continue
            rep = speedup_report(pairs, t_ann, p_d)
            for inst_row, e in zip(rep["instances"], entries):
                inst_row["index"] = e["index"]
                bl, ao = res[(e["index"], 0.0)], res[(e["index"], d)]
                pb = bl.p_upper if isinstance(bl, SuccessEstimate) else bl
                pa = ao.p_upper if isinstance(ao, SuccessEstimate) else ao
                inst_row["hybrid_tts"] = hybrid_tts(pb, pa, t_ann, p_d).tts
            w.json(("analysis", f"report_{_dtag(d)}.json"), rep)
            keys = ["index", "p_bl", "p_ao", "ratio", "improved", "bound", "percentile_rank", "hybrid_tts"]
            w.csv(("analysis", f"instances_{_dtag(d)}.csv"), keys,
                  [[r[k] if k != "improved" else int(r[k]) for k in keys] for r in rep["instances"]])
            summary["conditions"][str(d)] = {k: rep["overall"][k] for k in
                                             ("n", "fraction_improved", "median", "p35", "p65", "max",
                                              "median_is_bound", "unsolved")}
    w.json(("analysis", "summary.json"), summary)
    return EXIT_OK


def cmd_spectrum(cfg: ExperimentConfig, cross_check: bool = False) -> int:
    w = Writer(cfg)
    sched = _schedule(cfg)
    sp = cfg.spectrum
    grid = np.linspace(0.0, 1.0, int(sp["points"]))
    for e in _manifest(w):
        inst = _load_instance(w, e)
        if not inst.is_chain():
            raise ConfigError(f"{e['file']} is not an open chain; spectrum needs ASC-type instances")
        comparison = {}
        for d in cfg.sweep:
            _, off = _offsets_for(cfg, inst, d)
            spec = spectrum_sweep(inst, sched, off, grid)
            m = critical_metrics(spec, float(sp["temperature_K"]), sp["gap"])
            stem = f"inst_{e['index']:04d}_{_dtag(d)}"
            w.csv(("spectrum", stem + "_spectrum.csv"), ["s", "k", "epsilon_GHz"],
                  ((s, k, eps) for s, row in zip(spec.s_grid.tolist(), spec.energies.tolist())
                   for k, eps in enumerate(row)))
            e1 = spec.gap("single")
            w.csv(("spectrum", stem + "_gap.csv"), ["s", "eps_min_GHz", "two_eps_min_GHz", "parity_gap_GHz"],
                  zip(spec.s_grid.tolist(), e1.tolist(), (2 * e1).tolist(), spec.gap("parity").tolist()))
            w.json(("spectrum", stem + "_metrics.json"), {"delta_max": d, **m.to_dict()})
            comparison[str(d)] = m.to_dict()
            if cross_check:
                if inst.n > 10:
                    raise ConfigError("cross-check mode needs chains with n <= 10")
                pts = np.linspace(0.0, 1.0, int(sp["cross_check_points"]))
                G, K = chain_terms(inst, sched, off, pts)
                w.csv(("spectrum", stem + "_crosscheck.csv"), ["s", "max_abs_residual_GHz"],
                      [(s, fermion_vs_exact_residual(g, k)) for s, g, k in zip(pts.tolist(), G, K)])
        w.json(("spectrum", f"inst_{e['index']:04d}_comparison.json"), {"by_delta_max": comparison})
    return EXIT_OK


def cmd_oracle(cfg: ExperimentConfig) -> int:
    w = Writer(cfg)
    for e in _manifest(w):
        inst = _load_instance(w, e)
        seed = _reference_seed(cfg, e)
        ref = _reference(cfg, inst, seed)
        w.json(("oracle", f"inst_{e['index']:04d}_ground.json"), ref.to_dict(),
               instance_seed=e["seed"], reference_seed=seed)
    return EXIT_OK


# entry point -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="annealoffsets", description=__doc__.split("\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="JSON config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field, e.g. problem.count=10")
    common.add_argument("-o", "--output", help="output directory (overrides config)")
    common.add_argument("--seed", type=int, help="root seed (overrides config)")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write a seeded instance suite and manifest")
    sub.add_parser("offsets", parents=[common], help="heuristic offsets for every instance and delta_max")
    r = sub.add_parser("run", parents=[common], help="simulate every (instance, delta_max) condition")
    r.add_argument("--workers", type=int, default=1)
    sub.add_parser("analyze", parents=[common], help="TTS, speedup and difficulty-group reports")
    s = sub.add_parser("spectrum", parents=[common], help="free-fermion spectra of chain instances")
    s.add_argument("--cross-check", action="store_true", help="compare against dense diagonalization (n <= 10)")
    sub.add_parser("oracle", parents=[common], help="certified ground states (or a heuristic reference)")
    sub.add_parser("config", parents=[common], help="print the resolved config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = list(args.set)
        if args.output is not None:
            overrides.append(f"output={json.dumps(args.output)}")
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        cfg = load_config(args.config, overrides)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "offsets":
            return cmd_offsets(cfg)
        if args.command == "run":
            return cmd_run(cfg, args.workers)
        if args.command == "analyze":
            return cmd_analyze(cfg)
        if args.command == "spectrum":
            return cmd_spectrum(cfg, args.cross_check)
        if args.command == "oracle":
            return cmd_oracle(cfg)
        print(json.dumps(_clean(cfg.to_dict()), indent=1))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
