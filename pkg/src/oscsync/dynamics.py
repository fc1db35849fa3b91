"""Deterministic time integration of the master equation over a fixed grid.

The stepper is an embedded Dormand-Prince 5(4) pair with step control on the
max-norm of the density-matrix increment and first-same-as-last reuse of the
trailing stage.  Steps are clamped to land exactly on the requested grid
times, so no interpolation is involved and identical inputs reproduce
trajectories bit for bit.

Physicality (trace, Hermiticity, positivity) is monitored while stepping;
exceeding the hard limits aborts with a PhysicalityError that names the
offending time and carries the partial trajectory for salvage.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from threadpoolctl import threadpool_limits

from . import kernels
from .fock import QOperator, SpaceLayout, displacement
from .model import LindbladGenerator

TRACE_HARD_LIMIT = 1e-6
MIN_EIG_HARD_LIMIT = -1e-6
_RHO0_TOL = 1e-10


@dataclass
class SolverOptions:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf
    positivity_check_stride: int = 10


@dataclass(frozen=True)
class StateDiagnostics:
    trace_error: float
    hermiticity_error: float
    min_eigenvalue: float


@dataclass(frozen=True)
class DensityState:
    layout: SpaceLayout
    matrix: np.ndarray
    diagnostics: StateDiagnostics

    @classmethod
    def from_matrix(cls, layout: SpaceLayout, matrix: np.ndarray) -> "DensityState":
        m = np.ascontiguousarray(matrix, dtype=np.complex128)
        diag = StateDiagnostics(
            trace_error=float(abs(np.trace(m).real - 1.0) + abs(np.trace(m).imag)),
            hermiticity_error=float(np.max(np.abs(m - m.conj().T))),
            min_eigenvalue=float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]),
        )
        return cls(layout=layout, matrix=m, diagnostics=diag)


@dataclass
class SolverStats:
    steps: int = 0
    rejected_steps: int = 0
    rhs_evaluations: int = 0
    max_trace_error: float = 0.0
    max_hermiticity_error: float = 0.0
    min_eigenvalue: float = math.inf
    error_estimate: float = 0.0
    backend: str = ""


@dataclass
class Trajectory:
    times: np.ndarray
    records: dict[str, np.ndarray]
    meta: SolverStats
    final_state: DensityState | None = None

    def record(self, name: str) -> np.ndarray:
        return self.records[name]


class PhysicalityError(RuntimeError):
    """Density matrix left the physical region during integration."""

    def __init__(self, message: str, time: float, partial: Trajectory | None = None):
        super().__init__(message)
        self.time = time
        self.partial = partial


def prepare_state(layout: SpaceLayout, kind: str, alphas=None, ns=None, tls="minus") -> DensityState:
    """Pure product state: per-oscillator coherent or Fock factors, TLS up/down.

    Coherent factors are displaced vacua on the truncated space; the assembled
    state is renormalized to unit trace, leaving truncation only as a shape
    distortion far from the cutoff.
    """
    osc_slots = layout.oscillator_slots
    tls_slots = layout.tls_slots
    if isinstance(tls, str):
        tls_labels = [tls] * len(tls_slots)
    else:
        tls_labels = list(tls)
    if len(tls_labels) != len(tls_slots):
        raise ValueError(f"need one TLS label per TLS ({len(tls_slots)})")

    if kind == "coherent":
        if alphas is None or len(alphas) != len(osc_slots):
            raise ValueError(f"coherent state needs one alpha per oscillator ({len(osc_slots)})")
        osc_kets = []
        for slot, alpha in zip(osc_slots, alphas):
            dim = layout.subsystems[slot].dim
            if alpha == 0:
                ket = np.zeros(dim, dtype=np.complex128)
                ket[0] = 1.0
            else:
                ket = displacement(dim, alpha).matrix[:, 0].copy()
            osc_kets.append(ket)
    elif kind == "fock":
        if ns is None or len(ns) != len(osc_slots):
            raise ValueError(f"fock state needs one index per oscillator ({len(osc_slots)})")
        osc_kets = []
        for slot, n in zip(osc_slots, ns):
            dim = layout.subsystems[slot].dim
            n = int(n)
            if not 0 <= n < dim:
                raise ValueError(f"Fock index {n} exceeds truncation (dim {dim})")
            ket = np.zeros(dim, dtype=np.complex128)
            ket[n] = 1.0
            osc_kets.append(ket)
    else:
        raise ValueError(f"unknown initial-state kind {kind!r}")

    tls_kets = []
    for label in tls_labels:
        if label not in ("plus", "minus"):
            raise ValueError(f"TLS label must be 'plus' or 'minus', got {label!r}")
        ket = np.zeros(2, dtype=np.complex128)
        ket[0 if label == "plus" else 1] = 1.0
        tls_kets.append(ket)

    factors = []
    osc_it, tls_it = iter(osc_kets), iter(tls_kets)
    for sub in layout.subsystems:
        factors.append(next(osc_it) if sub.kind == "oscillator" else next(tls_it))
    ket = factors[0]
    for f in factors[1:]:
        ket = np.kron(ket, f)
    rho = np.outer(ket, ket.conj())
    rho /= np.trace(rho).real
    return DensityState.from_matrix(layout, rho)


def standard_observables(layout: SpaceLayout) -> dict[str, QOperator]:
    """x_k, n_k, a_k per oscillator and excited population per TLS.

    Position convention: x = (a + a^dag) / sqrt(2).
    """
    from .fock import annihilation, embed, pauli

    obs: dict[str, QOperator] = {}
    for i, slot in enumerate(layout.oscillator_slots, start=1):
        a = embed(annihilation(layout.subsystems[slot].dim), layout, slot)
        obs[f"x{i}"] = QOperator(layout, (a.matrix + a.matrix.conj().T) / math.sqrt(2.0))
        obs[f"n{i}"] = QOperator(layout, a.matrix.conj().T @ a.matrix)
        obs[f"a{i}"] = a
    for j, slot in enumerate(layout.tls_slots, start=1):
        sp = embed(pauli("plus"), layout, slot)
        obs[f"pe{j}"] = QOperator(layout, sp.matrix @ sp.matrix.conj().T)
    return obs


# Dormand-Prince 5(4) tableau.  The last coefficient row equals the 5th-order
# weights, so stage 7 sits at the accepted point (first-same-as-last).
_DP_A = (
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_ERR = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40],
    dtype=np.float64,
)
_DP_A_ROWS = tuple(np.asarray(row, dtype=np.float64) for row in _DP_A)

_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_SAFETY = 0.9


def _validate_rho0(rho0: DensityState):
    d = rho0.diagnostics
    problems = []
    if d.trace_error > _RHO0_TOL:
        problems.append(f"trace error {d.trace_error:.3e}")
    if d.hermiticity_error > _RHO0_TOL:
        problems.append(f"hermiticity error {d.hermiticity_error:.3e}")
    if d.min_eigenvalue < -_RHO0_TOL:
        problems.append(f"min eigenvalue {d.min_eigenvalue:.3e}")
    if problems:
        raise ValueError("invalid initial state: " + ", ".join(problems))


def evolve(
    generator: LindbladGenerator,
    rho0: DensityState,
    t_grid,
    observables: Mapping[str, QOperator],
    options: SolverOptions | None = None,
    impl=None,
) -> Trajectory:
    """Integrate the flow and record <O> = tr(rho O) at every grid time.

    `t_grid` must start at 0 and increase strictly.  Raises PhysicalityError
    (with the partial trajectory attached) if the hard trace or positivity
    limits are breached at a checked step.
    """
    opts = options or SolverOptions()
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2:
        raise ValueError("t_grid must hold at least two times")
    if t_grid[0] != 0.0:
        raise ValueError("t_grid must start at 0")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must increase strictly")
    if rho0.layout != generator.layout:
        raise ValueError("initial state layout differs from generator layout")
    for name, op in observables.items():
        if op.layout != generator.layout:
            raise ValueError(f"observable {name!r} layout differs from generator layout")
    _validate_rho0(rho0)

    plan = kernels.build_plan(generator, impl=impl)
    ops = plan.ops
    d = plan.dim
    n_t = t_grid.size

    obs_flat = {
        name: np.ascontiguousarray(op.matrix.T).ravel() for name, op in observables.items()
    }
    records = {name: np.empty(n_t, dtype=np.complex128) for name in observables}
    stats = SolverStats(backend=kernels.backend_name() if impl is None else "custom")

    y = np.ascontiguousarray(rho0.matrix, dtype=np.complex128).copy()
    k_stages = np.empty((7, d * d), dtype=np.complex128)
    y_try = np.empty((d, d), dtype=np.complex128)
    scratch = np.empty(d * d, dtype=np.complex128)
    abs_buf = np.empty(d * d, dtype=np.float64)
    y_flat = y.reshape(-1)
    y_try_flat = y_try.reshape(-1)

    def rhs(src_mat, dst_flat):
        plan.apply(src_mat, dst_flat.reshape(d, d))
        stats.rhs_evaluations += 1

    def record_at(idx: int):
        for name, flat_op in obs_flat.items():
            records[name][idx] = np.einsum("i,i->", y_flat, flat_op)

    def partial(idx: int) -> Trajectory:
        return Trajectory(
            times=t_grid[:idx].copy(),
            records={name: rec[:idx].copy() for name, rec in records.items()},
            meta=stats,
        )

    def check_physicality(t: float, recorded: int, full: bool):
        tr = np.trace(y)
        trace_err = abs(tr.real - 1.0) + abs(tr.imag)
        stats.max_trace_error = max(stats.max_trace_error, trace_err)
        if trace_err > TRACE_HARD_LIMIT:
            raise PhysicalityError(
                f"trace error {trace_err:.3e} exceeds {TRACE_HARD_LIMIT:.0e} at t={t:.6g}",
                time=t,
                partial=partial(recorded),
            )
        if full:
            herm_err = float(np.max(np.abs(y - y.conj().T)))
            stats.max_hermiticity_error = max(stats.max_hermiticity_error, herm_err)
            min_eig = float(np.linalg.eigvalsh(0.5 * (y + y.conj().T))[0])
            stats.min_eigenvalue = min(stats.min_eigenvalue, min_eig)
            if min_eig < MIN_EIG_HARD_LIMIT:
                raise PhysicalityError(
                    f"min eigenvalue {min_eig:.3e} below {MIN_EIG_HARD_LIMIT:.0e} at t={t:.6g}",
                    time=t,
                    partial=partial(recorded),
                )

    t = float(t_grid[0])
    record_at(0)

    # single-threaded pools while stepping: the loop interleaves small BLAS /
    # LAPACK calls from different libraries, whose spin-waiting worker threads
    # otherwise fight over the cores and dominate the runtime
    with threadpool_limits(limits=1):
        rhs(y, k_stages[0])

        # first step size from the local derivative scale
        f_norm = float(np.max(np.abs(k_stages[0])))
        y_norm = float(np.max(np.abs(y)))
        scale0 = opts.abs_tol + opts.rel_tol * y_norm
        h = 0.01 * (y_norm + scale0) / (f_norm + 1e-30)
        h = float(min(h, opts.max_step, t_grid[1] - t_grid[0]))
        h = max(h, 1e-12)

        h_prop = h
        accepted_since_check = 0
        stride = max(1, int(opts.positivity_check_stride))

        for idx in range(1, n_t):
            target = float(t_grid[idx])
            while True:
                remaining = target - t
                if remaining <= 1e-14 * max(1.0, abs(target)):
                    t = target
                    break
                h = min(h_prop, opts.max_step, remaining)
                clamped = h >= remaining * (1.0 - 1e-12)

                # stages 2..7; stage 7 lands on the candidate point
                for s, a_row in enumerate(_DP_A_ROWS, start=1):
                    ops.combine_stages(y_flat, h, a_row, k_stages, s, y_try_flat, scratch)
                    rhs(y_try, k_stages[s])

                err = ops.error_max(h, _DP_ERR, k_stages, scratch, abs_buf)
                np.abs(y_flat, out=abs_buf)
                y_norm = float(abs_buf.max())
                np.abs(y_try_flat, out=abs_buf)
                scale = opts.abs_tol + opts.rel_tol * max(y_norm, float(abs_buf.max()))
                # error-per-unit-step acceptance: the accumulated drift over a
                # run then tracks rel_tol * t_end instead of rel_tol * n_steps
                err_rate = err / h
                if err_rate <= scale:
                    factor = _MAX_FACTOR if err_rate == 0.0 else min(
                        _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * (scale / err_rate) ** 0.25)
                    )
                    h_prop = h * factor
                    t = target if clamped else t + h
                    y_flat[:] = y_try_flat
                    k_stages[0] = k_stages[6]  # FSAL
                    stats.steps += 1
                    stats.error_estimate += err
                    accepted_since_check += 1
                    full = accepted_since_check >= stride
                    if full:
                        accepted_since_check = 0
                    check_physicality(t, idx, full=full)
                    if clamped:
                        break
                else:
                    factor = max(_MIN_FACTOR, _SAFETY * (scale / err_rate) ** 0.25)
                    h_prop = h * factor
                    stats.rejected_steps += 1
            record_at(idx)

        check_physicality(t, n_t, full=True)
    final_state = DensityState.from_matrix(generator.layout, y)
    stats.min_eigenvalue = min(stats.min_eigenvalue, final_state.diagnostics.min_eigenvalue)
    stats.max_hermiticity_error = max(
        stats.max_hermiticity_error, final_state.diagnostics.hermiticity_error
    )
    return Trajectory(
        times=t_grid.copy(), records=records, meta=stats, final_state=final_state
    )
