"""Hamiltonians and the zero-temperature master-equation generator.

The core system is N oscillators dipole-coupled to M lossy two-level systems,

    H = sum_k w_k a_k^dag a_k + sum_j (w0/2) sz_j
        + sum_jk g_jk (e^{i th_jk} a_k + e^{-i th_jk} a_k^dag) sx_j,

with each TLS damped by a bare sigma_minus jump operator at rate Gamma_j.
All frequencies and rates are dimensionless ratios to the TLS splitting w0,
so figure-caption parameter sets can be entered directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import QOperator, SpaceLayout, annihilation, embed, pauli


def _tuple2d(values, rows: int | None = None) -> tuple[tuple[float, ...], ...]:
    arr = np.atleast_2d(np.asarray(values, dtype=float))
    if rows is not None and arr.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got {arr.shape[0]}")
    return tuple(tuple(float(x) for x in row) for row in arr)


@dataclass(frozen=True)
class SystemSpec:
    """Full physical parameter set of the N-oscillator / M-TLS model.

    `couplings` and `phases` are M x N (row j = TLS j, column k = oscillator k).
    `gamma_decay` accepts a scalar (shared by all TLSs) or one rate per TLS.
    """

    omega: tuple[float, ...]
    couplings: tuple[tuple[float, ...], ...]
    phases: tuple[tuple[float, ...], ...]
    gamma_decay: tuple[float, ...]
    omega0: float = 1.0
    n_max: int = 6

    def __post_init__(self):
        omega = tuple(float(w) for w in np.atleast_1d(self.omega))
        couplings = _tuple2d(self.couplings)
        phases = _tuple2d(self.phases, rows=len(couplings))
        gamma = self.gamma_decay
        if np.ndim(gamma) == 0:
            gamma = (float(gamma),) * len(couplings)
        else:
            gamma = tuple(float(g) for g in gamma)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "gamma_decay", gamma)
        object.__setattr__(self, "omega0", float(self.omega0))
        object.__setattr__(self, "n_max", int(self.n_max))

        n, m = len(omega), len(couplings)
        if any(len(row) != n for row in couplings) or any(len(row) != n for row in phases):
            raise ValueError("couplings/phases must be M x N matrices")
        if len(gamma) != m:
            raise ValueError(f"need one decay rate per TLS ({m}), got {len(gamma)}")
        if any(w <= 0 for w in omega):
            raise ValueError("oscillator frequencies must be positive")
        if any(g < 0 for row in couplings for g in row):
            raise ValueError("coupling strengths must be non-negative")
        if any(g < 0 for g in gamma):
            raise ValueError("decay rates must be non-negative")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1 (oscillator dim >= 2)")

    @property
    def n_oscillators(self) -> int:
        return len(self.omega)

    @property
    def n_tls(self) -> int:
        return len(self.couplings)

    @property
    def is_two_mode(self) -> bool:
        return self.n_oscillators == 2 and self.n_tls == 1

    def layout(self, n_max: int | None = None) -> SpaceLayout:
        return SpaceLayout.for_system(
            self.n_oscillators, self.n_tls, self.n_max if n_max is None else n_max
        )

    def coupling_matrix(self) -> np.ndarray:
        return np.asarray(self.couplings, dtype=float)

    def phase_matrix(self) -> np.ndarray:
        return np.asarray(self.phases, dtype=float)

    @classmethod
    def two_mode(
        cls,
        omega1: float,
        omega2: float,
        g1: float,
        g2: float,
        theta1: float = 0.0,
        theta2: float = 0.0,
        gamma: float = 0.1,
        omega0: float = 1.0,
        n_max: int = 6,
    ) -> "SystemSpec":
        """The two-oscillator, single-TLS core model."""
        return cls(
            omega=(omega1, omega2),
            couplings=((g1, g2),),
            phases=((theta1, theta2),),
            gamma_decay=(gamma,),
            omega0=omega0,
            n_max=n_max,
        )

    @classmethod
    def chain(
        cls,
        omega,
        g,
        gamma: float = 0.1,
        omega0: float = 1.0,
        n_max: int = 6,
    ) -> "SystemSpec":
        """N oscillators with each adjacent pair bridged by one lossy TLS.

        TLS j couples to the difference mode a_j - a_{j+1}; the minus sign is
        carried as a pi phase on the second column: g_{j,j} = g_{j,j+1} = g_j,
        theta_{j,j} = 0, theta_{j,j+1} = pi.
        """
        omega = tuple(float(w) for w in omega)
        g = tuple(float(x) for x in g)
        n = len(omega)
        if len(g) != n - 1:
            raise ValueError(f"chain of {n} oscillators needs {n - 1} couplings, got {len(g)}")
        couplings = np.zeros((n - 1, n))
        phases = np.zeros((n - 1, n))
        for j, gj in enumerate(g):
            couplings[j, j] = gj
            couplings[j, j + 1] = gj
            phases[j, j + 1] = math.pi
        return cls(
            omega=omega,
            couplings=couplings,
            phases=phases,
            gamma_decay=gamma,
            omega0=omega0,
            n_max=n_max,
        )


def _mode_ops(layout: SpaceLayout) -> list[QOperator]:
    dims = layout.dims
    return [embed(annihilation(dims[s]), layout, s) for s in layout.oscillator_slots]


def build_hamiltonian(spec: SystemSpec, n_max: int | None = None) -> QOperator:
    """Assemble the full dipole-coupled Hamiltonian on the spec's layout."""
    layout = spec.layout(n_max)
    a_ops = _mode_ops(layout)
    h = np.zeros((layout.total_dim,) * 2, dtype=np.complex128)
    for w, a in zip(spec.omega, a_ops):
        h += w * (a.matrix.conj().T @ a.matrix)
    for j, slot in enumerate(layout.tls_slots):
        sz = embed(pauli("z"), layout, slot).matrix
        sx = embed(pauli("x"), layout, slot).matrix
        h += 0.5 * spec.omega0 * sz
        for k, a in enumerate(a_ops):
            g = spec.couplings[j][k]
            if g == 0.0:
                continue
            th = spec.phases[j][k]
            dipole = np.exp(1j * th) * a.matrix + np.exp(-1j * th) * a.matrix.conj().T
            h += g * (dipole @ sx)
    return QOperator(layout, h)


def build_rwa_hamiltonian(omega2: float, omega0: float, g2: float, n_max: int) -> QOperator:
    """Jaynes-Cummings form: w2 a^dag a + (w0/2) sz + g2 (a s+ + a^dag s-)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    layout = SpaceLayout.for_system(1, 1, n_max)
    a = embed(annihilation(n_max + 1), layout, 0).matrix
    sz = embed(pauli("z"), layout, 1).matrix
    sp = embed(pauli("plus"), layout, 1).matrix
    h = omega2 * (a.conj().T @ a) + 0.5 * omega0 * sz + g2 * (a @ sp + a.conj().T @ sp.conj().T)
    return QOperator(layout, h)


def build_chain_hamiltonian(omega, omega0: float, g, n_max: int) -> QOperator:
    return build_hamiltonian(SystemSpec.chain(omega, g, omega0=omega0, n_max=n_max))


@dataclass(frozen=True)
class LindbladGenerator:
    """Hamiltonian plus jump operators; the generator of the dissipative flow.

    apply() is the plain dense reference evaluation of

        L(rho) = -i [H, rho] + sum_j rate_j (L_j rho L_j^dag
                                             - (L_j^dag L_j rho + rho L_j^dag L_j) / 2).

    Time stepping uses the faster kernel path (see oscsync.kernels), which is
    cross-checked against this form in the tests.
    """

    hamiltonian: QOperator
    jump_ops: tuple[tuple[QOperator, float], ...]

    def __post_init__(self):
        for op, rate in self.jump_ops:
            if rate < 0:
                raise ValueError(f"jump rate must be non-negative, got {rate}")
            if op.layout != self.hamiltonian.layout:
                raise ValueError("jump operator layout differs from Hamiltonian layout")

    @property
    def layout(self) -> SpaceLayout:
        return self.hamiltonian.layout

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=np.complex128)
        h = self.hamiltonian.matrix
        out = -1j * (h @ rho - rho @ h)
        for op, rate in self.jump_ops:
            m = op.matrix
            md = m.conj().T
            mdm = md @ m
            out += rate * (m @ rho @ md - 0.5 * (mdm @ rho + rho @ mdm))
        return out


def build_lindblad(spec: SystemSpec, n_max: int | None = None) -> LindbladGenerator:
    """Zero-temperature phenomenological generator: bare sigma_minus jumps."""
    h = build_hamiltonian(spec, n_max)
    jumps = tuple(
        (embed(pauli("minus"), h.layout, slot), spec.gamma_decay[j])
        for j, slot in enumerate(h.layout.tls_slots)
    )
    return LindbladGenerator(hamiltonian=h, jump_ops=jumps)
