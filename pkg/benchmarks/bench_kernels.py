"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--seed 0]

Both backends get the same inputs; results are checked for equality before timing.
"""
import argparse
import random
import timeit

from toolinertia import _pykernels
from toolinertia.kernels import BACKENDS, encode


def workload(seed: int):
    rng = random.Random(seed)
    paths = [encode([rng.randrange(12) for _ in range(rng.randint(2, 6))]) for _ in range(5000)]
    long_path = encode([rng.randrange(12) for _ in range(200_000)])
    window = encode([3, 7])
    seqs = [encode([rng.randrange(12) for _ in range(rng.randint(5, 60))]) for _ in range(2000)]
    return {
        "occurrences": lambda k: k.occurrences(long_path, window),
        "successor_hits": lambda k: k.successor_hits(paths, window),
        "ngram_counts(order 2)": lambda k: k.ngram_counts(seqs, 2, 2),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if "cython" not in BACKENDS:
        print("compiled extension not built; timing the Python backend only")
    cases = workload(args.seed)
    print(f"{'kernel':24} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for name, call in cases.items():
        py = min(timeit.repeat(lambda: call(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if "cython" in BACKENDS:
            ck = BACKENDS["cython"]
            assert call(ck) == call(_pykernels), f"{name}: backends disagree"
            cy = min(timeit.repeat(lambda: call(ck), number=1, repeat=args.repeat)) * 1e3
            print(f"{name:24} {py:10.2f} {cy:10.2f} {py / cy:7.1f}x")
        else:
            print(f"{name:24} {py:10.2f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
