"""Compare the compiled and pure-NumPy right-hand-side kernels.

Times a single RHS evaluation and a short integration for both backends on
the bundled two-oscillator scenario at a range of truncations, and checks
that the two backends agree.

Run from the repository root:  python benchmarks/benchmark_kernels.py
"""
from __future__ import annotations

import time

import numpy as np
from threadpoolctl import threadpool_limits

from oscsync import _kernels_py, kernels
from oscsync.dynamics import SolverOptions, evolve, prepare_state, standard_observables
from oscsync.model import SystemSpec, build_lindblad

try:
    from oscsync import _kernels_cy
except ImportError:
    _kernels_cy = None


def _spec(n_max: int) -> SystemSpec:
    return SystemSpec.two_mode(
        0.95, 1.01, 0.2, 0.21, theta2=np.pi / 4, gamma=0.1, n_max=n_max
    )


def time_rhs(impl, n_max: int, repeats: int = 400) -> float:
    generator = build_lindblad(_spec(n_max))
    plan = kernels.build_plan(generator, impl=impl)
    d = plan.dim
    rho = prepare_state(generator.layout, "coherent", alphas=[0.7, 0.0]).matrix.copy()
    out = np.empty((d, d), dtype=np.complex128)
    # single-threaded pools, matching how the integrator drives the kernels
    with threadpool_limits(limits=1):
        plan.apply(rho, out)  # warm up
        t0 = time.perf_counter()
        for _ in range(repeats):
            plan.apply(rho, out)
    return (time.perf_counter() - t0) / repeats


def time_evolve(impl, n_max: int, t_end: float = 20.0) -> float:
    generator = build_lindblad(_spec(n_max))
    rho0 = prepare_state(generator.layout, "coherent", alphas=[0.7, 0.0])
    grid = np.linspace(0.0, t_end, 201)
    obs = standard_observables(generator.layout)
    t0 = time.perf_counter()
    evolve(generator, rho0, grid, obs, SolverOptions(), impl=impl)
    return time.perf_counter() - t0


def check_agreement(n_max: int) -> float:
    generator = build_lindblad(_spec(n_max))
    rho = prepare_state(generator.layout, "coherent", alphas=[0.7, 0.0]).matrix.copy()
    d = rho.shape[0]
    outs = []
    for impl in (_kernels_py, _kernels_cy):
        plan = kernels.build_plan(generator, impl=impl)
        out = np.empty((d, d), dtype=np.complex128)
        plan.apply(rho, out)
        outs.append(out)
    return float(np.max(np.abs(outs[0] - outs[1])))


def main():
    print(f"selected backend at import: {kernels.backend_name()}")
    if _kernels_cy is None:
        print("compiled extension not available; nothing to compare")
        return

    print(f"{'n_max':>6} {'dim':>5} {'numpy rhs':>12} {'cython rhs':>12} "
          f"{'speedup':>8} {'max |diff|':>11}")
    for n_max in (4, 6, 8, 10):
        dim = (n_max + 1) ** 2 * 2
        t_py = time_rhs(_kernels_py, n_max)
        t_cy = time_rhs(_kernels_cy, n_max)
        diff = check_agreement(n_max)
        print(f"{n_max:>6} {dim:>5} {t_py * 1e6:>10.1f}us {t_cy * 1e6:>10.1f}us "
              f"{t_py / t_cy:>7.2f}x {diff:>11.2e}")

    print("\nshort integration (t_end=20, two oscillators + TLS):")
    for n_max in (4, 6):
        t_py = time_evolve(_kernels_py, n_max)
        t_cy = time_evolve(_kernels_cy, n_max)
        print(f"  n_max={n_max}: numpy {t_py:.2f}s  cython {t_cy:.2f}s  "
              f"speedup {t_py / t_cy:.2f}x")


if __name__ == "__main__":
    main()
