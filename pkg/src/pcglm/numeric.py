"""Dense linear algebra used by the rest of the package.

The rotation and factorisation loops live in a compiled extension when it is
available; otherwise the numpy fallback in ``_kernels_py`` is used. Set
``PCGLM_PURE_PYTHON=1`` to force the fallback.
"""
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels_py
from .errors import ConvergenceError, InsufficientDataError, ShapeError, SingularMatrixError

if os.environ.get("PCGLM_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1e-12
SYMMETRY_TOL = 1e-10
PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class StandardizationStats:
    """Column means and sample (n-1) standard deviations.

    Both arrays span every input column; ``dropped`` lists the zero-variance
    columns, whose scale is reported as 0.
    """

    means: np.ndarray
    scales: np.ndarray
    dropped: tuple = ()

    @property
    def kept(self):
        mask = np.ones(len(self.means), dtype=bool)
        mask[list(self.dropped)] = False
        return mask

    def apply(self, X):
        X = np.asarray(X, dtype=np.float64)
        keep = self.kept
        return (X[:, keep] - self.means[keep]) / self.scales[keep]

    def invert(self, Z):
        keep = self.kept
        return np.asarray(Z) * self.scales[keep] + self.means[keep]


def _as_square(S, what):
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ShapeError(f"{what} must be a square matrix", shape=list(S.shape))
    if not np.all(np.isfinite(S)):
        raise ShapeError(f"{what} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0
    if S.size and float(np.max(np.abs(S - S.T))) > SYMMETRY_TOL * scale:
        raise ShapeError(f"{what} is not symmetric")
    return S


def sign_normalize(V):
    """Flip each column so its largest-magnitude entry is positive.

    Entries within a relative 1e-12 of the column maximum count as ties and
    the first of them decides, so the choice does not hinge on rounding.
    """
    V = np.array(V, dtype=np.float64, copy=True)
    for j in range(V.shape[1]):
        col = np.abs(V[:, j])
        top = col.max() if col.size else 0.0
        if top == 0.0:
            continue
        i = int(np.argmax(col >= top * (1.0 - 1e-12)))
        if V[i, j] < 0:
            V[:, j] = -V[:, j]
    return V


def sym_eigen(S):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi.

    Returns:
        (eigenvalues, eigenvectors): eigenvalues sorted descending, with the
        matching orthonormal eigenvectors as columns.
    """
    S = _as_square(S, "eigen input")
    n = S.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    S = 0.5 * (S + S.T)
    w, V, sweeps, converged = _impl.jacobi_eigh(S, JACOBI_MAX_SWEEPS, JACOBI_TOL)
    if not converged:
        raise ConvergenceError("Jacobi iteration did not converge", sweeps=int(sweeps))
    order = np.argsort(-w, kind="stable")
    return np.asarray(w)[order], sign_normalize(np.asarray(V)[:, order])


def cholesky(A):
    A = _as_square(A, "Cholesky input")
    L, bad = _impl.cholesky(A, PIVOT_TOL)
    if bad >= 0:
        raise SingularMatrixError(
            f"matrix is not positive definite (pivot {bad})", pivot=int(bad)
        )
    return np.asarray(L)


def cholesky_solve(A, b):
    """Solve ``A x = b`` for symmetric positive-definite ``A``."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or b.shape[0] != A.shape[0]:
        raise ShapeError("right-hand side length does not match matrix", shape=list(A.shape))
    L = cholesky(A)
    B = b.reshape(len(b), -1)
    return np.asarray(_impl.cho_solve(L, B)).reshape(b.shape)


def spd_inverse(A):
    A = np.asarray(A, dtype=np.float64)
    L = cholesky(A)
    inv = np.asarray(_impl.cho_solve(L, np.eye(A.shape[0])))
    return 0.5 * (inv + inv.T)


def standardize(X):
    """Centre and scale columns to mean 0, sample sd 1.

    Zero-variance columns are left out of ``Z`` and listed in ``dropped``.

    Returns:
        (Z, stats, dropped)
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError("expected a 2-D matrix", shape=list(X.shape))
    if X.shape[0] < 2:
        raise InsufficientDataError("need at least 2 rows to standardize", rows=int(X.shape[0]))
    means = X.mean(axis=0)
    centered = X - means
    sd = np.sqrt(np.sum(centered * centered, axis=0) / (X.shape[0] - 1))
    floor = 1e-12 * np.maximum(1.0, np.abs(means))
    dropped = tuple(int(j) for j in np.flatnonzero(sd <= floor))
    scales = np.where(sd <= floor, 0.0, sd)
    stats = StandardizationStats(means=means, scales=scales, dropped=dropped)
    return stats.apply(X), stats, dropped
