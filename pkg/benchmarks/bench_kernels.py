"""Time the numba kernels against their numpy/scipy fallbacks.

    python3 benchmarks/bench_kernels.py --size 256 --repeat 5

Prints one line per kernel with the best-of-N wall time of each path and the
ratio; also checks that both paths return the same numbers.
"""
import argparse
import time
import warnings

import numpy as np

from stochdt import use_numba
from stochdt.edt import edt, knn_distance_maps, realization_maps
from stochdt.matching import smd_field
from stochdt.sdt import SdtParams, kappa
from stochdt.watershed import extract_seeds, internal_distance, watershed_segment


def best_of(fn, repeat):
    out = fn()  # warm-up, also triggers compilation
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def cases(size, rng):
    sparse = rng.random((size, size)) < 0.01
    dense = rng.random((size, size)) < 0.3
    ys, xs = np.nonzero(sparse)
    keep = rng.random((64, ys.size)) < 0.25
    k = kappa(0.75, 0.999)

    template = dense[: size // 4, : size // 4]
    d_fg = edt(dense)
    d_bg = edt(~dense)

    yy, xx = np.mgrid[0:size, 0:size]
    blobs = ((yy - size * 0.35) ** 2 + (xx - size * 0.35) ** 2 < (size * 0.2) ** 2) | \
            ((yy - size * 0.6) ** 2 + (xx - size * 0.65) ** 2 < (size * 0.25) ** 2)
    dist = internal_distance(blobs, SdtParams())

    def ws():
        seeds = extract_seeds(dist, blobs, h=0.5)
        return watershed_segment(dist, seeds, blobs).labels

    return {
        "edt (1% foreground)": lambda: edt(sparse),
        "edt (30% foreground)": lambda: edt(dense),
        f"knn k={k} (1% foreground)": lambda: knn_distance_maps(sparse, k),
        "64 realization EDTs": lambda: realization_maps(keep, ys, xs, sparse.shape, float(size)),
        f"smd field ({size // 4}px template)": lambda: smd_field(template, d_fg, d_bg).values,
        "h-maxima + seeded flood": ws,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    warnings.simplefilter("ignore")

    print(f"{'kernel':34s} {'numba [ms]':>11s} {'fallback [ms]':>14s} {'speed-up':>9s}  same")
    for name, fn in cases(args.size, np.random.default_rng(args.seed)).items():
        with use_numba(True):
            t_nb, a = best_of(fn, args.repeat)
        with use_numba(False):
            t_np, b = best_of(fn, args.repeat)
        same = np.allclose(a, b, rtol=0, atol=1e-9, equal_nan=True)
        print(f"{name:34s} {1e3 * t_nb:11.2f} {1e3 * t_np:14.2f} {t_np / t_nb:8.1f}x  {same}")


if __name__ == "__main__":
    main()
