# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def jacobi_eigh(S, int max_sweeps, double tol):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] A_arr = np.array(S, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = A_arr.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] V_arr = np.eye(n)
    cdef double[:, ::1] A = A_arr
    cdef double[:, ::1] V = V_arr
    cdef Py_ssize_t i, p, q
    cdef double scale = 0.0, off, apq, theta, t, c, s, x, y
    cdef int sweeps = 0
    cdef bint converged = False

    for p in range(n):
        for q in range(n):
            scale += A[p, q] * A[p, q]
    scale = sqrt(scale)
    if scale == 0.0:
        return np.diag(A_arr).copy(), V_arr, 0, True

    while sweeps <= max_sweeps:
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += A[p, q] * A[p, q]
        off = sqrt(2.0 * off)
        if off <= tol * scale:
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
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for i in range(n):
                    x = A[i, p]
                    y = A[i, q]
                    A[i, p] = c * x - s * y
                    A[i, q] = s * x + c * y
                for i in range(n):
                    x = A[p, i]
                    y = A[q, i]
                    A[p, i] = c * x - s * y
                    A[q, i] = s * x + c * y
                A[p, q] = 0.0
                A[q, p] = 0.0
                for i in range(n):
                    x = V[i, p]
                    y = V[i, q]
                    V[i, p] = c * x - s * y
                    V[i, q] = s * x + c * y
    return np.diag(A_arr).copy(), V_arr, sweeps, converged


def cholesky(A_in, double rel_tol):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] A_arr = np.ascontiguousarray(A_in, dtype=np.float64)
    cdef Py_ssize_t n = A_arr.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] L_arr = np.zeros((n, n))
    cdef double[:, ::1] A = A_arr
    cdef double[:, ::1] L = L_arr
    cdef Py_ssize_t i, j, k
    cdef double trace = 0.0, floor, d, acc, ljj

    for i in range(n):
        trace += A[i, i]
    floor = rel_tol * trace
    if n > 0 and trace <= 0.0:
        return L_arr, 0
    for j in range(n):
        d = A[j, j]
        for k in range(j):
            d -= L[j, k] * L[j, k]
        if d <= floor:
            return L_arr, j
        ljj = sqrt(d)
        L[j, j] = ljj
        for i in range(j + 1, n):
            acc = A[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc / ljj
    return L_arr, -1


def cho_solve(L_in, B_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] L_arr = np.ascontiguousarray(L_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X_arr = np.array(B_in, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] L = L_arr
    cdef double[:, ::1] X = X_arr
    cdef Py_ssize_t n = L_arr.shape[0], m = X_arr.shape[1]
    cdef Py_ssize_t i, k, col
    cdef double acc
    for col in range(m):
        for i in range(n):
            acc = X[i, col]
            for k in range(i):
                acc -= L[i, k] * X[k, col]
            X[i, col] = acc / L[i, i]
        for i in range(n - 1, -1, -1):
            acc = X[i, col]
            for k in range(i + 1, n):
                acc -= L[k, i] * X[k, col]
            X[i, col] = acc / L[i, i]
    return X_arr
