"""Throughput of the compiled window kernel against the numpy fallback.

Usage: python benchmarks/bench_kernel.py [--windows N] [--repeat R]

Both backends consume the same random streams, so the script also checks
that their tallies agree exactly.
"""

import argparse
import time

import numpy as np

from snsqkd import ChannelParams, ProtocolParams
from snsqkd import simulator
from snsqkd.simulator import _numpy_kernel, _kernel_args
from snsqkd.simulator._rng import stream_key


def best_time(kernel, key, n, args, repeat):
    times = []
    counts = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        counts = kernel.simulate_block(key, 0, n, **args)
        times.append(time.perf_counter() - t0)
    return min(times), counts


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--windows", type=int, default=10**6)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--distance-km", type=float, default=100.0)
    args = parser.parse_args()

    protocol = ProtocolParams(phase_slice=simulator.DEFAULT_MC_PHASE_SLICE)
    channel = ChannelParams(distance_km=args.distance_km, misalignment=0.05)
    kargs = _kernel_args(protocol, channel)
    key = stream_key(2024)

    t_np, c_np = best_time(_numpy_kernel, key, args.windows, kargs, args.repeat)
    print(f"numpy     {args.windows:>10d} windows  {t_np:8.3f} s  {args.windows / t_np:12.3e} windows/s")
    if simulator._compiled is None:
        print("compiled  not built; run `pip install -e . --no-build-isolation` with Cython available")
        return
    t_c, c_c = best_time(simulator._compiled, key, args.windows, kargs, args.repeat)
    print(f"compiled  {args.windows:>10d} windows  {t_c:8.3f} s  {args.windows / t_c:12.3e} windows/s")
    print(f"speedup   {t_np / t_c:.1f}x")
    print("tallies identical:", bool(np.array_equal(c_np, c_c)))


if __name__ == "__main__":
    main()
