"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--B 100]

Each kernel runs on identical inputs under both backends; the last row
times a full gap-statistic run by swapping the backend module in place.
"""
import argparse
import time
from contextlib import contextmanager

import numpy as np

from nwdkit import cluster, kernels
from nwdkit.cluster import DistanceMatrix, gap_statistic


def blobs(seed, sizes=(10, 10, 10), within=0.1, across=0.9, jitter=0.02):
    rng = np.random.default_rng(seed)
    lab = np.repeat(np.arange(len(sizes)), sizes)
    d = np.where(lab[:, None] == lab[None, :], within, across) + rng.uniform(-jitter, jitter, (lab.size,) * 2)
    d = np.triu(d, 1)
    return DistanceMatrix([f"t{i}" for i in range(lab.size)], d + d.T)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


@contextmanager
def backend(impl):
    saved = {name: getattr(kernels, name) for name in ("intersect_count", "kmeanspp_indices", "lloyd", "dispersion")}
    for name in saved:
        setattr(kernels, name, getattr(impl, name))
    try:
        yield
    finally:
        for name, fn in saved.items():
            setattr(kernels, name, fn)


def speedup(names, row):
    if len(names) < 2:
        return ""
    return f"{row[names.index('python')] / row[names.index('cython')]:11.1f}x"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--B", type=int, default=100)
    args = ap.parse_args(argv)

    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled extension not built; only the fallback is timed")
    rng = np.random.default_rng(0)
    postings = [np.unique(rng.integers(0, 200_000, size=50_000)).astype(np.int64) for _ in range(3)]
    points = rng.normal(size=(300, 6))
    uniforms = rng.random(6)
    d = np.triu(rng.uniform(0, 1, (300, 300)), 1)
    d = d + d.T
    labels = rng.integers(0, 6, size=300)
    matrix = blobs(0)

    cases = {
        "intersect_count (3 x 50k)": lambda m: m.intersect_count(postings),
        "kmeanspp_indices (300 x 6, k=6)": lambda m: m.kmeanspp_indices(points, 6, uniforms),
        "lloyd (300 x 6, k=6)": lambda m: m.lloyd(points, points[:6].copy(), 100),
        "dispersion (300 x 300, k=6)": lambda m: m.dispersion(d, labels, 6),
    }
    names = sorted(impls)
    print(f"{'case':40s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases.items():
        row = [best_of(lambda: fn(impls[n]), args.repeat) for n in names]
        print(f"{label:40s}" + "".join(f"{t * 1e3:10.3f}ms" for t in row) + speedup(names, row))

    row = []
    for n in names:
        with backend(impls[n]):
            assert cluster.kernels.lloyd is impls[n].lloyd
            row.append(best_of(lambda: gap_statistic(matrix, 6, B=args.B, seed=0), 1))
    label = f"gap_statistic (n=30, kmax=6, B={args.B})"
    print(f"{label:40s}" + "".join(f"{t:11.2f}s" for t in row) + speedup(names, row))


if __name__ == "__main__":
    main()
