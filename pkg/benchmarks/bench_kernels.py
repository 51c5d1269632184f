"""Compiled vs pure-Python kernels: timing and agreement.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from liplive._kernels import _pykernels

try:
    from liplive._kernels import _ckernels
except ImportError:                     # extension not built
    _ckernels = None


def fit_case(n=2880, half=240, seed=0):
    rng = np.random.default_rng(seed)
    x = np.cumsum(rng.standard_normal(n))
    w = (rng.random(n) > 0.2).astype(float)
    return x, w, half


def smo_case(n=150, d=128, seed=0):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(0.4, 1, (n // 3, d)), rng.normal(-0.2, 1, (n - n // 3, d))])
    y = np.r_[np.ones(n // 3), -np.ones(n - n // 3)]
    K = (x @ x.T / d + 1.0) ** 3
    return K, y, 1.0, 1e-4, 200000


def run(repeat):
    cases = {
        "local_linear_fit": (fit_case(), lambda m, a: m.local_linear_fit(*a)),
        "smo_solve": (smo_case(), lambda m, a: m.smo_solve(*a)),
    }
    rows = []
    for name, (args, call) in cases.items():
        ref = call(_pykernels, args)
        t_py = min(timeit.repeat(lambda: call(_pykernels, args), number=1, repeat=repeat))
        if _ckernels is None:
            rows.append((name, t_py, float("nan"), float("nan"), float("nan")))
            continue
        out = call(_ckernels, args)
        t_c = min(timeit.repeat(lambda: call(_ckernels, args), number=1, repeat=repeat))
        a = ref[0] if isinstance(ref, tuple) else ref
        b = out[0] if isinstance(out, tuple) else out
        rows.append((name, t_py, t_c, t_py / t_c, float(np.max(np.abs(a - b)))))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    rows = run(ap.parse_args().repeat)
    print(f"{'kernel':<18}{'python s':>12}{'cython s':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, tp, tc, sp, diff in rows:
        print(f"{name:<18}{tp:>12.4f}{tc:>12.5f}{sp:>10.1f}{diff:>14.2e}")


if __name__ == "__main__":
    main()
