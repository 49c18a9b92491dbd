"""Small shared helpers: log-log fitting, hashing, timing."""
from __future__ import annotations

import hashlib
import math
import time
from typing import Callable, Sequence


def fit_loglog(points: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares slope/intercept of log(y) against log(x), plus the largest
    absolute residual. Points with nonpositive coordinates are rejected."""
    if len(points) < 2:
        raise ValueError("need at least two points")
    if any(x <= 0 or y <= 0 for x, y in points):
        raise ValueError("log-log fit needs positive coordinates")
    xs = [math.log(x) for x, _ in points]
    ys = [math.log(y) for _, y in points]
    mx = sum(xs) / len(xs)
    my = sum(ys) / len(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        raise ValueError("degenerate x values")
    slope = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx
    intercept = my - slope * mx
    residual = max(abs(y - (slope * x + intercept)) for x, y in zip(xs, ys))
    return slope, intercept, residual


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def best_of(fn: Callable[[], object], repeats: int = 3) -> float:
    """Smallest wall time over a few runs; reduces scheduler noise."""
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best
