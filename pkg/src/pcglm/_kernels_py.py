"""Pure-Python (numpy) implementations of the hot linear-algebra kernels.

Same call signatures as the compiled ``_kernels`` extension; ``numeric``
picks whichever is importable.
"""
import math

import numpy as np


def jacobi_eigh(S, max_sweeps, tol):
    """Cyclic Jacobi rotations on a symmetric matrix.

    Returns ``(diag, V, sweeps, converged)`` with eigenvalues unsorted on the
    diagonal and eigenvectors in the columns of ``V``.
    """
    A = np.array(S, dtype=np.float64, order="C", copy=True)
    n = A.shape[0]
    V = np.eye(n)
    scale = math.sqrt(float(np.sum(A * A)))
    if scale == 0.0:
        return np.diag(A).copy(), V, 0, True
    threshold = tol * scale

    sweeps = 0
    converged = False
    while sweeps <= max_sweeps:
        off = math.sqrt(2.0 * float(np.sum(np.triu(A, 1) ** 2)))
        if off <= threshold:
            converged = True
            break
        if sweeps == max_sweeps:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                sign = 1.0 if theta >= 0.0 else -1.0
                t = sign / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = 0.0
                A[q, p] = 0.0

                v_p = V[:, p].copy()
                v_q = V[:, q].copy()
                V[:, p] = c * v_p - s * v_q
                V[:, q] = s * v_p + c * v_q
    return np.diag(A).copy(), V, sweeps, converged


def cholesky(A, rel_tol):
    """Lower Cholesky factor.

    Returns ``(L, bad_pivot)``; ``bad_pivot`` is -1 on success, otherwise the
    index of the first pivot at or below ``rel_tol * trace``.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    L = np.zeros((n, n))
    trace = float(np.trace(A))
    floor = rel_tol * trace
    if n and trace <= 0.0:
        return L, 0
    for j in range(n):
        d = A[j, j] - float(L[j, :j] @ L[j, :j])
        if d <= floor:
            return L, j
        ljj = math.sqrt(d)
        L[j, j] = ljj
        if j + 1 < n:
            L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / ljj
    return L, -1


def cho_solve(L, B):
    """Solve ``L L^T X = B`` for 2-D ``B`` by forward/back substitution."""
    L = np.asarray(L, dtype=np.float64)
    X = np.array(B, dtype=np.float64, copy=True)
    n = L.shape[0]
    for i in range(n):
        X[i] = (X[i] - L[i, :i] @ X[:i]) / L[i, i]
    for i in range(n - 1, -1, -1):
        X[i] = (X[i] - L[i + 1:, i] @ X[i + 1:]) / L[i, i]
    return X
