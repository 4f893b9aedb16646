# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: cyclic Jacobi eigensolver and (2,2,1) alternating ascent."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def jacobi_eigh(double[:, ::1] a_in, double tol=1e-15, int max_sweeps=100):
    """Cyclic row-by-row Jacobi. Returns unsorted (eigenvalues, eigenvectors).

    Rotations touch rows p and q contiguously; columns are refreshed from the
    rows by symmetry, and the eigenvector matrix is accumulated transposed.
    """
    cdef Py_ssize_t n = a_in.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] A_arr = np.array(a_in, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Vt_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] A = A_arr
    cdef double[:, ::1] Vt = Vt_arr
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double off, fro, apq, app, aqq, theta, t, c, s, x, y
    fro = 0.0
    for p in range(n):
        for q in range(n):
            fro += A[p, q] * A[p, q]
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * A[p, q] * A[p, q]
        if off == 0.0 or off <= tol * tol * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                app = A[p, p]
                aqq = A[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    x = A[p, k]
                    y = A[q, k]
                    A[p, k] = c * x - s * y
                    A[q, k] = s * x + c * y
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    if k != p and k != q:
                        A[k, p] = A[p, k]
                        A[k, q] = A[q, k]
                for k in range(n):
                    x = Vt[p, k]
                    y = Vt[q, k]
                    Vt[p, k] = c * x - s * y
                    Vt[q, k] = s * x + c * y
    return np.diagonal(A_arr).copy(), np.ascontiguousarray(Vt_arr.T)


cdef double _objective(double[:, :, ::1] T, double[::1] x, double[::1] z, double[::1] acc):
    # acc is a length-d3 scratch buffer; k runs innermost over contiguous memory
    cdef Py_ssize_t d1 = T.shape[0], d2 = T.shape[1], d3 = T.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double total = 0.0, c
    for k in range(d3):
        acc[k] = 0.0
    for i in range(d1):
        for j in range(d2):
            c = x[i] * z[j]
            for k in range(d3):
                acc[k] += T[i, j, k] * c
    for k in range(d3):
        total += fabs(acc[k])
    return total


cdef void _normalize(double[::1] u):
    cdef Py_ssize_t i
    cdef double nrm = 0.0
    for i in range(u.shape[0]):
        nrm += u[i] * u[i]
    nrm = sqrt(nrm)
    if nrm > 0:
        for i in range(u.shape[0]):
            u[i] /= nrm


def ascent_221(double[:, :, ::1] T, double[::1] x0, double[::1] z0, int iters=100):
    """Sign-alternating ascent for sup_{|x|=|z|=1} sum_k |x^T T[:,:,k] z|."""
    cdef Py_ssize_t d1 = T.shape[0], d2 = T.shape[1], d3 = T.shape[2]
    cdef Py_ssize_t i, j, k
    cdef int it
    x_arr = np.array(x0, dtype=np.float64, copy=True)
    z_arr = np.array(z0, dtype=np.float64, copy=True)
    cdef double[::1] x = x_arr
    cdef double[::1] z = z_arr
    cdef double[:, ::1] U = np.empty((d1, d3))
    cdef double[:, ::1] W = np.empty((d2, d3))
    cdef double[::1] sgn = np.empty(d3)
    cdef double[::1] acc = np.empty(d3)
    cdef double s, c, val, prev
    _normalize(x)
    _normalize(z)
    prev = _objective(T, x, z, acc)
    for it in range(iters):
        # U[i, k] = sum_j T[i, j, k] z[j]; the x-update is U @ sign(x^T U)
        for i in range(d1):
            for k in range(d3):
                U[i, k] = 0.0
            for j in range(d2):
                c = z[j]
                for k in range(d3):
                    U[i, k] += T[i, j, k] * c
        for k in range(d3):
            acc[k] = 0.0
        for i in range(d1):
            for k in range(d3):
                acc[k] += x[i] * U[i, k]
        for k in range(d3):
            sgn[k] = -1.0 if acc[k] < 0 else 1.0
        for i in range(d1):
            s = 0.0
            for k in range(d3):
                s += sgn[k] * U[i, k]
            x[i] = s
        _normalize(x)
        # W[j, k] = sum_i T[i, j, k] x[i]
        for j in range(d2):
            for k in range(d3):
                W[j, k] = 0.0
        for i in range(d1):
            c = x[i]
            for j in range(d2):
                for k in range(d3):
                    W[j, k] += T[i, j, k] * c
        for k in range(d3):
            acc[k] = 0.0
        for j in range(d2):
            for k in range(d3):
                acc[k] += z[j] * W[j, k]
        for k in range(d3):
            sgn[k] = -1.0 if acc[k] < 0 else 1.0
        for j in range(d2):
            s = 0.0
            for k in range(d3):
                s += sgn[k] * W[j, k]
            z[j] = s
        _normalize(z)
        val = _objective(T, x, z, acc)
        if val - prev <= 1e-15 * val:
            prev = val if val > prev else prev
            break
        prev = val
    return prev, x_arr, z_arr
