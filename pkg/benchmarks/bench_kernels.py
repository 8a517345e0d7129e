"""Time the compiled filters against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--T 5000] [--repeat 5]

Both backends get identical inputs; the script also reports the largest
absolute difference between their outputs.
"""

import argparse
import timeit

import numpy as np

from rgcopula import _fallback
from rgcopula.copulas import INFO_KAPPA_MAX, INFO_KAPPA_MIN, info_grid

try:
    from rgcopula import _kernels
except ImportError:
    _kernels = None


def cases(T, rng):
    logrv = rng.normal(0.0, 1.0, T)
    x1, x2 = rng.standard_normal(T), rng.standard_normal(T)
    gx, gy = rng.exponential(size=T), rng.exponential(size=T)
    grid_n = info_grid("normal")
    grid_g = info_grid("rotated_gumbel")
    base = np.zeros(T)
    kmin, kmax = INFO_KAPPA_MIN, INFO_KAPPA_MAX
    return {
        "rg_logh": lambda m: m.rg_logh(logrv, 0.0, 0.2, 0.57, 0.41),
        "gas_normal": lambda m: m.gas_normal(x1, x2, 0.0121, 0.0244, 0.9911, 1.36, grid_n,
                                             kmin, kmax),
        "gas_student": lambda m: m.gas_student(x1, x2, base, 20.0, 0.1, 0.06, 0.9, 1.2),
        "gas_rgumbel": lambda m: m.gas_rgumbel(gx, gy, -0.05, 0.05, 0.91, -0.5, grid_g,
                                               kmin, kmax),
    }


def _first(out):
    return np.asarray(out[0] if isinstance(out, tuple) else out)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        raise SystemExit("compiled extension not built; run `python setup.py build_ext --inplace`")

    rng = np.random.default_rng(0)
    print(f"T = {args.T}, best of {args.repeat}")
    print(f"{'kernel':<14s}{'python [ms]':>14s}{'cython [ms]':>14s}{'speedup':>10s}{'max diff':>12s}")
    for name, fn in cases(args.T, rng).items():
        t_py = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat))
        t_cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat))
        diff = np.max(np.abs(_first(fn(_fallback)) - _first(fn(_kernels))))
        print(f"{name:<14s}{1e3 * t_py:14.3f}{1e3 * t_cy:14.3f}{t_py / t_cy:10.1f}{diff:12.2e}")


if __name__ == "__main__":
    main()
