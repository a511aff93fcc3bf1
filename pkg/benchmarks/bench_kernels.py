"""Benchmark the compiled kernels against the pure fallback.

Usage: python benchmarks/bench_kernels.py [--repeats 5]

Times the per-sample trigger scan (loop-carried state, the daemon's hot
path) and the damped-sinusoid bank (impact-sound synthesis) on both
backends and prints a speedup table.
"""

import argparse
import time

import numpy as np

from multisense.kernels import _pure

try:
    from multisense.kernels import _native
except ImportError:
    _native = None


def bench(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    targets = np.array([10.0, 15.0, 20.0])

    # 1000 noisy ramp profiles at 200 Hz, the acceptance-scale workload
    profiles = []
    for seed in range(1000):
        r = np.random.default_rng(seed)
        slope = r.uniform(0.5, 3.0)
        n = int(22.0 / slope * 200) + 200
        t = np.arange(n) / 200.0
        profiles.append(np.minimum(slope * t, 22.0) + r.normal(0, 0.07, n))
    total_samples = sum(len(p) for p in profiles)

    def scan_all(impl):
        for p in profiles:
            impl.trigger_scan(p, targets, 0.5, 3)

    freqs = rng.uniform(100, 8000, 12)
    damps = rng.uniform(2, 80, 12)
    amps = rng.uniform(0.1, 1.0, 12)
    n_samples = 96000  # 2 s at 48 kHz

    def synth(impl):
        impl.modal_synth(freqs, damps, amps, n_samples, 1.0 / 48000)

    rows = []
    for name, workload, unit_count, unit in (
        ("trigger_scan", scan_all, total_samples, "samples"),
        ("modal_synth (12 modes, 2 s)", synth, n_samples * 12, "mode-samples"),
    ):
        pure_t = bench(workload, _pure, repeats=args.repeats)
        row = [name, f"{pure_t * 1e3:9.1f} ms"]
        if _native is not None:
            native_t = bench(workload, _native, repeats=args.repeats)
            row += [f"{native_t * 1e3:9.1f} ms", f"{pure_t / native_t:6.1f}x"]
        else:
            row += ["       n/a", "   n/a"]
        row.append(f"({unit_count:,} {unit})")
        rows.append(row)

    print(f"{'kernel':<28}{'pure':>12}{'native':>12}{'speedup':>9}")
    for row in rows:
        print(f"{row[0]:<28}{row[1]:>12}{row[2]:>12}{row[3]:>9}  {row[4]}")
    if _native is None:
        print("\n(compiled extension not built; showing fallback only)")


if __name__ == "__main__":
    main()
