# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled master-equation right-hand-side kernels.

Same contract as _kernels_py; BLAS zgemm does the heavy lifting and the
elementwise passes are fused C loops, so no temporaries are allocated per
evaluation.  All matrices are square, C-contiguous complex128.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport zgemm

cnp.import_array()

ctypedef double complex zc


cdef void _gemm_nn(double complex alpha, double complex[:, ::1] A,
                   double complex[:, ::1] B, double complex beta,
                   double complex[:, ::1] C) noexcept nogil:
    # C-order C = alpha * A @ B + beta * C via the column-major identity
    # C^T = B^T A^T (swap operand order, no transposes).
    cdef int d = A.shape[0]
    cdef char n = b'N'
    zgemm(&n, &n, &d, &d, &d, &alpha, &B[0, 0], &d, &A[0, 0], &d, &beta, &C[0, 0], &d)


cdef void _gemm_nc(double complex alpha, double complex[:, ::1] A,
                   double complex[:, ::1] B, double complex beta,
                   double complex[:, ::1] C) noexcept nogil:
    # C-order C = alpha * A @ B^H + beta * C.  Column-major: C^T = conj(B) A^T
    # and conj(B) is (B^T)^H, i.e. op 'C' applied to the raw C-order buffer.
    cdef int d = A.shape[0]
    cdef char n = b'N'
    cdef char c = b'C'
    zgemm(&c, &n, &d, &d, &d, &alpha, &B[0, 0], &d, &A[0, 0], &d, &beta, &C[0, 0], &d)


def rhs_dense_herm(double complex[:, ::1] G, double complex[:, ::1] rho,
                   double complex[:, ::1] out, double complex[:, ::1] work):
    """out = -G rho - (G rho)^dag, valid for Hermitian rho."""
    cdef int d = G.shape[0]
    cdef int i, j
    with nogil:
        _gemm_nn(1.0 + 0j, G, rho, 0.0 + 0j, work)
        for i in range(d):
            for j in range(d):
                out[i, j] = -work[i, j] - work[j, i].conjugate()


def rhs_dense_general(double complex[:, ::1] G, double complex[:, ::1] rho,
                      double complex[:, ::1] out, double complex[:, ::1] work):
    """out = -G rho - rho G^dag for arbitrary rho."""
    with nogil:
        _gemm_nn(-1.0 + 0j, G, rho, 0.0 + 0j, out)
        _gemm_nc(-1.0 + 0j, rho, G, 1.0 + 0j, out)


def add_sandwich(double complex[:, ::1] M, double complex[:, ::1] rho,
                 double complex[:, ::1] out, double complex[:, ::1] work):
    """out += M rho M^dag."""
    with nogil:
        _gemm_nn(1.0 + 0j, M, rho, 0.0 + 0j, work)
        _gemm_nc(1.0 + 0j, work, M, 1.0 + 0j, out)


def add_gather(long[::1] dst, long[::1] src, double rate,
               double complex[:, ::1] rho, double complex[:, ::1] out):
    """out[dst x dst] += rate * rho[src x src]."""
    cdef Py_ssize_t n = dst.shape[0]
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(n):
                out[dst[i], dst[j]] = out[dst[i], dst[j]] + rate * rho[src[i], src[j]]


def combine_stages(double complex[::1] base, double h, double[::1] coeffs,
                   double complex[:, ::1] k, Py_ssize_t n,
                   double complex[::1] out, scratch):
    """out = base + h * sum_{i<n} coeffs[i] * k[i].  `scratch` is unused here
    (kept for signature parity with the NumPy twin)."""
    cdef Py_ssize_t m = base.shape[0]
    cdef Py_ssize_t i, j
    cdef double complex acc
    with nogil:
        for j in range(m):
            acc = 0
            for i in range(n):
                acc = acc + coeffs[i] * k[i, j]
            out[j] = base[j] + h * acc


def error_max(double h, double[::1] coeffs, double complex[:, ::1] k,
              scratch, abs_buf):
    """max_j |h * sum_i coeffs[i] * k[i, j]|.  Scratch buffers unused."""
    cdef Py_ssize_t n = k.shape[0]
    cdef Py_ssize_t m = k.shape[1]
    cdef Py_ssize_t i, j
    cdef double complex acc
    cdef double best = 0.0
    cdef double mag
    with nogil:
        for j in range(m):
            acc = 0
            for i in range(n):
                acc = acc + coeffs[i] * k[i, j]
            mag = acc.real * acc.real + acc.imag * acc.imag
            if mag > best:
                best = mag
    return abs(h) * sqrt(best)
