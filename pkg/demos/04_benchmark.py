"""
The bistable SDE benchmark, end to end.

1000 particles drift from near (1/2, 1/2) into two wells at (2, 4) and
(4, 2). Four datasets are cut from the simulation and each is fit by DDD
and Sparse DDD; every model is scored on the full snapshot series.

Takes about four minutes. Pass a smaller path count for a quick look:

    python demos/04_benchmark.py 200
"""

import sys

import numpy as np

from sparseddd.pipeline import BenchmarkConfig, format_table, run_benchmark

n_paths = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
res = run_benchmark(BenchmarkConfig(seed=0, n_paths=n_paths))

print(format_table(res.table(), res.parameter_counts()))
print()

########################## per-time errors (Figure-3 style) ##########################
print("2 + log10(error) at each observation time")
print(f"{'dataset':<15}{'method':<12}" + "".join(f"{t:>7.0f}" for t in res.test_times))
for (role, method), errs in sorted(res.test_errors.items()):
    print(f"{role:<15}{method:<12}" + "".join(f"{2 + np.log10(e):>7.2f}" for e in errs))

########################## where the particles end up ##########################
final = res.datasets["full-snapshot"].snapshots.samples[-1]
d = np.minimum(np.linalg.norm(final - [2, 4], axis=1), np.linalg.norm(final - [4, 2], axis=1))
print(f"\nfraction within distance 1 of a well at the last time: {np.mean(d <= 1):.3f}")
print("timings (s):", {str(k): round(v, 1) for k, v in res.timings.items()})
