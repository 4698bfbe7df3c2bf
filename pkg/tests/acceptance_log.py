"""Collects one pass/fail line per acceptance criterion for the terminal summary."""
import contextlib
import time

RESULTS: dict[int, str] = {}


@contextlib.contextmanager
def criterion(num: int, title: str, detail: dict):
    """Record ``num`` as PASS unless the body raises; ``detail`` is filled in by the body."""
    t0 = time.perf_counter()
    status = "FAIL"
    try:
        yield detail
        status = "PASS"
    finally:
        info = ", ".join(f"{k}={v}" for k, v in detail.items())
        line = f"criterion {num:2d} {status}  {title}  [{time.perf_counter() - t0:.1f}s] {info}"
        RESULTS[num] = line
        print(line)
