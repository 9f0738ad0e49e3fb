"""Timing comparison of the numpy and compiled kernel backends.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeats N]

Shapes mirror the real workload: whole-image convolutions at each pyramid
level of a 480px scene, proposal-batch convolutions inside the generator,
and RoI max pooling over a full proposal set. The table reports the best
wall time of N repeats per backend plus the speed ratio, and cross-checks
that both backends agree on every output.
"""

import argparse
import time

import numpy as np

from featgan.kernels import available_backends, get_backend

CONV_CASES = [
    # name, x shape, w shape, stride, pad
    ("conv 480px 1->8 k3", (1, 1, 480, 480), (8, 1, 3, 3), 1, 1),
    ("conv 240px 8->16 k3", (1, 8, 240, 240), (16, 8, 3, 3), 1, 1),
    ("conv 120px 16->24 k3", (1, 16, 120, 120), (24, 16, 3, 3), 1, 1),
    ("conv batch128 24->24 k3", (128, 24, 7, 7), (24, 24, 3, 3), 1, 1),
]
POOL_CASES = [
    # name, map shape, number of boxes
    ("roi pool 30x30 map x168", (48, 30, 30), 168),
    ("roi pool 30x30 map x512", (48, 30, 30), 512),
]


def _best_time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _conv_rows(backends, repeats, rng):
    rows = []
    for name, xs, ws, stride, pad in CONV_CASES:
        x = rng.standard_normal(xs).astype(np.float32)
        w = rng.standard_normal(ws).astype(np.float32)
        outs, times = {}, {}
        for b in backends:
            mod = get_backend(b)
            outs[b] = mod.conv2d_fwd(x, w, stride, pad)
            times[b] = _best_time(lambda m=mod: m.conv2d_fwd(x, w, stride, pad),
                                  repeats)
        if len(backends) == 2:
            a, c = (outs[b] for b in backends)
            assert np.allclose(a, c, atol=1e-4), f"{name}: backends disagree"
        rows.append((name, times))
    return rows


def _pool_rows(backends, repeats, rng):
    rows = []
    for name, ms, nboxes in POOL_CASES:
        fmap = rng.standard_normal(ms).astype(np.float32)
        c, h, w = ms
        r0 = rng.integers(0, h - 8, size=nboxes)
        c0 = rng.integers(0, w - 8, size=nboxes)
        r1 = r0 + rng.integers(1, 8, size=nboxes)
        c1 = c0 + rng.integers(1, 8, size=nboxes)
        cells = np.stack([r0, c0, r1, c1], axis=1).astype(np.int64)
        outs, times = {}, {}
        for b in backends:
            mod = get_backend(b)
            outs[b] = mod.roi_maxpool_fwd(fmap, cells, 7, 7)
            times[b] = _best_time(
                lambda m=mod: m.roi_maxpool_fwd(fmap, cells, 7, 7), repeats)
        if len(backends) == 2:
            (oa, aa), (ob, ab) = (outs[b] for b in backends)
            assert np.array_equal(oa, ob) and np.array_equal(aa, ab), \
                f"{name}: backends disagree"  # pooling is bit-exact
        rows.append((name, times))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per case (best is reported)")
    args = parser.parse_args()

    backends = available_backends()
    rng = np.random.default_rng(0)
    rows = _conv_rows(backends, args.repeats, rng)
    rows += _pool_rows(backends, args.repeats, rng)

    width = max(len(name) for name, _ in rows)
    header = f"{'case':<{width}}" + "".join(f"  {b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"  {'np/compiled':>12}"
    print(header)
    print("-" * len(header))
    for name, times in rows:
        line = f"{name:<{width}}"
        for b in backends:
            line += f"  {times[b] * 1e3:>10.2f}ms"
        if len(backends) == 2:
            line += f"  {times['numpy'] / times['compiled']:>11.2f}x"
        print(line)
    if len(backends) < 2:
        print("\n(compiled extension not built; showing numpy only)")


if __name__ == "__main__":
    main()
