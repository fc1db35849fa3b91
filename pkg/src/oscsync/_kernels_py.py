"""Pure-NumPy implementation of the master-equation right-hand-side kernels.

Semantics must stay identical to the compiled twin in _kernels_cy.pyx; the
test suite asserts agreement between the two backends.
"""
from __future__ import annotations

import numpy as np


def rhs_dense_herm(G, rho, out, work):
    """out = -G rho - (G rho)^dag, valid for Hermitian rho.

    G = iH + K folds the Hamiltonian and the anticommutator half of the
    dissipator; one matrix product instead of two.
    """
    np.matmul(G, rho, out=work)
    np.conjugate(work.T, out=out)
    out += work
    np.negative(out, out=out)


def rhs_dense_general(G, rho, out, work):
    """out = -G rho - rho G^dag for arbitrary rho."""
    np.matmul(G, rho, out=out)
    np.matmul(rho, G.conj().T, out=work)
    out += work
    np.negative(out, out=out)


def add_sandwich(M, rho, out, work):
    """out += M rho M^dag."""
    np.matmul(M, rho, out=work)
    out += work @ M.conj().T


def add_gather(dst, src, rate, rho, out):
    """out[dst x dst] += rate * rho[src x src].

    Covers jump operators that act as a scaled partial permutation of basis
    states (embedded TLS lowering operators in particular).
    """
    out[np.ix_(dst, dst)] += rate * rho[np.ix_(src, src)]


def combine_stages(base, h, coeffs, k, n, out, scratch):
    """out = base + h * sum_{i<n} coeffs[i] * k[i].

    Elementwise only (no BLAS) so the integrator's bookkeeping never touches
    a threaded library between kernel calls.
    """
    out[:] = base
    for i in range(n):
        c = coeffs[i]
        if c == 0.0:
            continue
        np.multiply(k[i], h * c, out=scratch)
        out += scratch


def error_max(h, coeffs, k, scratch, abs_buf):
    """max_j |h * sum_i coeffs[i] * k[i, j]| over all stages."""
    scratch[:] = 0.0
    tmp = np.empty_like(scratch)
    for i in range(k.shape[0]):
        c = coeffs[i]
        if c == 0.0:
            continue
        np.multiply(k[i], c, out=tmp)
        scratch += tmp
    np.abs(scratch, out=abs_buf)
    return abs(h) * float(abs_buf.max())
