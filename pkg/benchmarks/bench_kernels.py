"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Times the Jacobi eigensolver (38 x 38, the size of the income + employment
block), the Cholesky factorization (40 x 40) and one full pipeline fit, once
per backend, and checks that both backends agree.
"""
import argparse
import timeit

import numpy as np

from pcglm import _kernels_py, numeric
from pcglm.ingest import SynthSpec, generate_synthetic
from pcglm.pipeline import fit_pipeline

try:
    from pcglm import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def cases(rng):
    A = rng.standard_normal((500, 38))
    S = np.corrcoef(A, rowvar=False)
    B = rng.standard_normal((40, 40))
    spd = B @ B.T + 40 * np.eye(40)
    t = generate_synthetic(SynthSpec(n_tracts=2000, n_features=38, true_beta=(0.1,) * 38, seed=0)).tracts
    return {
        "jacobi 38x38": lambda k: k.jacobi_eigh(S, 100, 1e-12),
        "cholesky 40x40": lambda k: k.cholesky(spd, 1e-12),
        "pipeline fit n=2000 p=38": lambda k: _fit_with(k, t),
    }


def _fit_with(kernels, t):
    saved = numeric._impl
    numeric._impl = kernels
    try:
        return fit_pipeline(t.X, t.labels, t.feature_names)
    finally:
        numeric._impl = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = [("python", _kernels_py)]
    if _kernels_c is None:
        print("compiled extension not built; timing the Python fallback only")
    else:
        backends.append(("cython", _kernels_c))

    rng = np.random.default_rng(0)
    print(f"{'case':<26}{'backend':<9}{'best ms':>10}{'speedup':>10}")
    for name, fn in cases(rng).items():
        base = None
        for label, k in backends:
            number = 1 if "pipeline" in name else 5
            best = min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat)) / number
            base = base or best
            print(f"{name:<26}{label:<9}{best * 1e3:>10.3f}{base / best:>9.1f}x")

    if _kernels_c is not None:
        S = np.corrcoef(rng.standard_normal((200, 38)), rowvar=False)
        wp = np.sort(_kernels_py.jacobi_eigh(S, 100, 1e-12)[0])
        wc = np.sort(_kernels_c.jacobi_eigh(S, 100, 1e-12)[0])
        print(f"max eigenvalue difference between backends: {np.max(np.abs(wp - wc)):.2e}")


if __name__ == "__main__":
    main()
