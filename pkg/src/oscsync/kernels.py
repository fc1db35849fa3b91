"""Backend selection and precomputed evaluation plan for the dissipative flow.

The right-hand side

    L(rho) = -i [H, rho] + sum_j rate_j (L_j rho L_j^dag - {L_j^dag L_j, rho} / 2)

is evaluated as  -G rho - rho G^dag + sum_j rate_j L_j rho L_j^dag  with
G = iH + (1/2) sum_j rate_j L_j^dag L_j.  Jump operators that act as scaled
partial permutations of basis states (embedded TLS lowering operators) are
applied as block gathers instead of matrix products.

The compiled Cython kernels are used when the extension built; set
OSCSYNC_PURE_PYTHON=1 to force the NumPy fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("OSCSYNC_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def backend_name() -> str:
    return BACKEND


def _as_partial_permutation(matrix: np.ndarray):
    """Return (dst, src, weight) if `matrix` is a scaled partial permutation.

    Qualifies when every row and every column holds at most one nonzero and
    all nonzeros share one value; M rho M^dag then reduces to a block gather
    scaled by |value|^2.  Returns None otherwise.
    """
    rows, cols = np.nonzero(matrix)
    if rows.size == 0:
        return None
    if len(set(rows.tolist())) != rows.size or len(set(cols.tolist())) != cols.size:
        return None
    values = matrix[rows, cols]
    if not np.allclose(values, values[0], rtol=1e-12, atol=0.0):
        return None
    order = np.argsort(cols, kind="stable")
    dst = np.ascontiguousarray(rows[order], dtype=np.int64)
    src = np.ascontiguousarray(cols[order], dtype=np.int64)
    return dst, src, float(abs(values[0]) ** 2)


class RhsPlan:
    """Reusable buffers plus the structure-split jump list for one generator."""

    def __init__(self, generator, impl=None):
        self._impl = impl if impl is not None else _impl
        h = np.ascontiguousarray(generator.hamiltonian.matrix)
        d = h.shape[0]
        self.dim = d
        k = np.zeros((d, d), dtype=np.complex128)
        self.gathers: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.dense_jumps: list[np.ndarray] = []
        for op, rate in generator.jump_ops:
            if rate == 0.0:
                continue
            m = np.ascontiguousarray(op.matrix)
            k += 0.5 * rate * (m.conj().T @ m)
            perm = _as_partial_permutation(m)
            if perm is not None:
                dst, src, w = perm
                self.gathers.append((dst, src, rate * w))
            else:
                self.dense_jumps.append(np.ascontiguousarray(np.sqrt(rate) * m))
        self.G = np.ascontiguousarray(1j * h + k)
        self._work = np.empty((d, d), dtype=np.complex128)

    @property
    def ops(self):
        """Backend module with the elementwise helpers (combine_stages, ...)."""
        return self._impl

    def apply(self, rho: np.ndarray, out: np.ndarray, hermitian: bool = True) -> None:
        """Write L(rho) into `out`.  `hermitian=True` assumes rho = rho^dag."""
        impl = self._impl
        if hermitian:
            impl.rhs_dense_herm(self.G, rho, out, self._work)
        else:
            impl.rhs_dense_general(self.G, rho, out, self._work)
        for dst, src, rate in self.gathers:
            impl.add_gather(dst, src, rate, rho, out)
        for m in self.dense_jumps:
            impl.add_sandwich(m, rho, out, self._work)


def build_plan(generator, impl=None) -> RhsPlan:
    return RhsPlan(generator, impl=impl)
