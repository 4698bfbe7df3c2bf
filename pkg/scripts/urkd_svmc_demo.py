"""End-to-end CLI pipeline on URkD instances with the SVMC surrogate sampler.

Equivalent to running ``annealoffsets generate/offsets/run/analyze`` with the
config below; a small default keeps it to about a minute.
"""
import argparse
import json
from pathlib import Path

from annealoffsets.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=4)
    ap.add_argument("--count", type=int, default=8)
    ap.add_argument("--sweeps", type=int, default=200)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("-o", "--output", default="out/urkd_svmc")
    args = ap.parse_args()

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    cfg = {
        "seed": 1,
        "problem": {"class": "urkd", "params": {"k": 8, "rows": args.rows, "cols": args.rows}, "count": args.count},
        "offsets": {"delta_max": [0.025, 0.05, 0.1]},
        "simulator": {"kind": "svmc", "sweeps": args.sweeps, "temperature": 0.02},
        "protocol": {"batch_size": 200, "max_batches": 5, "gauge_period": 100},
    }
    path = out / "config.json"
    path.write_text(json.dumps(cfg, indent=1) + "\n")
    common = ["-c", str(path), "-o", str(out)]
    for cmd in ("generate", "offsets"):
        cli([cmd, *common])
    rc = cli(["run", *common, "--workers", str(args.workers)])
    cli(["analyze", *common])
    summary = json.loads((out / "analysis" / "summary.json").read_text())
    for d, s in summary["conditions"].items():
        print(f"delta_max={d}: improved={s['fraction_improved']:.2f} median ratio={s['median']}"
              f"{' (lower bound)' if s['median_is_bound'] else ''}")
    print(f"run exit code {rc}")


if __name__ == "__main__":
    main()
