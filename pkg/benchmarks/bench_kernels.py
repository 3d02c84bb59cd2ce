"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--seconds 3]

Prints the best-of-N wall time per kernel for each backend, the speedup,
and the largest absolute difference between the two outputs.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from wmbench import _kernels_py

try:
    from wmbench import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def cases(seconds: float, sr: int = 16000):
    rng = np.random.default_rng(0)
    n = int(seconds * sr)
    x = rng.standard_normal(n) * 0.1
    sos = np.array([[1.05, -1.9, 0.9, 1.0, -1.9, 0.95],
                    [0.98, -1.6, 0.7, 1.0, -1.6, 0.68]])
    n_frames, n_bins = n // 256 + 1, 513
    mag = np.abs(rng.standard_normal((n_frames, n_bins)))
    phase = rng.uniform(-np.pi, np.pi, (n_frames, n_bins))
    steps = np.arange(0.0, n_frames, 0.8)
    advance = 2 * np.pi * 256 * np.arange(n_bins) / 1024
    return {
        "envelope_follower": lambda k: k.envelope_follower(np.abs(x), 0.99, 0.999),
        "sos_filter": lambda k: k.sos_filter(sos, x),
        "sinc_resample": lambda k: k.sinc_resample(x, 16000 / 22050, int(n * 22050 / 16000),
                                                   1.0, 32),
        "phase_vocoder": lambda k: k.phase_vocoder(mag, phase, steps, advance),
    }


def best_time(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seconds", type=float, default=3.0, help="signal length in seconds")
    args = p.parse_args(argv)

    if _kernels_c is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<18} {'python ms':>10} {'cython ms':>10} {'speedup':>8} {'max |diff|':>11}")
    for name, run in cases(args.seconds).items():
        t_py = best_time(lambda: run(_kernels_py), args.repeat)
        if _kernels_c is None:
            print(f"{name:<18} {1e3 * t_py:>10.2f}")
            continue
        t_c = best_time(lambda: run(_kernels_c), args.repeat)
        diff = float(np.max(np.abs(np.asarray(run(_kernels_py)) - np.asarray(run(_kernels_c)))))
        print(f"{name:<18} {1e3 * t_py:>10.2f} {1e3 * t_c:>10.2f} {t_py / t_c:>7.1f}x {diff:>11.2e}")


if __name__ == "__main__":
    main()
