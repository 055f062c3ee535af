"""Time the compiled and pure-Python kernel backends on PC-sized inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--seconds S]
"""
import argparse
import timeit

import numpy as np

from latereverb import kernels
from latereverb.dsp_core import hann_kernel_2d


def cases(seconds, rng):
    # one-sided power spectrogram of an S-second signal at 48 kHz (window 1024, hop 256)
    frames = (int(seconds * 48000) - 1024) // 256 + 1
    spec = rng.random((513, frames))
    sig = rng.standard_normal(int(seconds * 48000))
    bands = rng.standard_normal((29, int(seconds * 48000)))
    return {
        "conv2d_strided 64x64/4": lambda b: kernels.conv2d_strided(spec, hann_kernel_2d(64), 4, backend=b),
        "backward_energy": lambda b: kernels.backward_energy(sig, backend=b),
        "row_sq_error 29 bands": lambda b: kernels.row_sq_error(bands, bands[::-1], backend=b),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5, help="timed repetitions (best is reported)")
    parser.add_argument("--seconds", type=float, default=2.0, help="signal length in seconds")
    args = parser.parse_args(argv)

    backends = kernels.available_backends()
    rng = np.random.default_rng(0)
    print(f"signal length {args.seconds:g} s, best of {args.repeat}; backends: {', '.join(backends)}")
    print(f"{'kernel':<26}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases(args.seconds, rng).items():
        times = {}
        for b in backends:
            fn(b)  # warm-up
            times[b] = min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat))
        row = f"{name:<26}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends)
        if len(times) == 2:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
