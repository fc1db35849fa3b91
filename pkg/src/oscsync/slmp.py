"""Single-leaking-mode frame: rotate the oscillator pair so that exactly one
collective mode couples to the lossy TLS.

For the two-mode core model the frame is reached by a per-mode phase rotation
U_p = exp(i th1 n1 + i th2 n2) followed by a beamsplitter rotation
U_r = exp[gamma (a1 a2^dag - a1^dag a2)] with tan(gamma) = g1/g2.  In the new
frame the Hamiltonian keeps the same structure with

    w~1 = w1 cos^2 g + w2 sin^2 g        g~1 = g1 cos g - g2 sin g  (= 0)
    w~2 = w1 sin^2 g + w2 cos^2 g        g~2 = g1 sin g + g2 cos g
    xi12 = (w1 - w2) sin g cos g         (residual mode-mode tunnelling)

plus the tunnelling term xi12 a1^dag a2 + h.c.  Mode 1 is then decoupled from
the TLS and survives; everything else drains to vacuum, so the pair ends up
oscillating at the single frequency w~1.  Clean synchronization needs three
small ratios (r1, r2, r3 below); they are sufficient, not necessary.

The general M-TLS case is handled by splitting C^N into the span of the
coupling rows g_jk e^{i th_jk} (leaking) and its orthogonal complement
(preserved).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fock import QOperator, embed, annihilation, matrix_exponential
from .model import SystemSpec, build_hamiltonian

RANK_TOL = 1e-10
CONDITION_THRESHOLD = 0.5  # operationalizes "much smaller than"


class UndefinedAngleError(ValueError):
    """Both couplings vanish; the mixing angle is undefined."""


@dataclass(frozen=True)
class SlmpReport:
    """Derived frame quantities for a two-mode system."""

    gamma_angle: float
    omega_tilde: tuple[float, float]
    g_tilde: tuple[float, float]
    xi12: float
    eta: float
    condition_ratios: tuple[float, float, float]
    preserved_modes: tuple[np.ndarray, ...]
    leaking_modes: tuple[np.ndarray, ...]
    surviving_frequencies: tuple[float, ...]


@dataclass(frozen=True)
class ConditionCheck:
    ratios: tuple[float, float, float]
    satisfied: tuple[bool, bool, bool]
    threshold: float

    @property
    def all_satisfied(self) -> bool:
        return all(self.satisfied)


@dataclass(frozen=True)
class ModeDecomposition:
    preserved: tuple[np.ndarray, ...]
    leaking: tuple[np.ndarray, ...]
    surviving_frequencies: tuple[float, ...]

    @property
    def frequency_spread(self) -> float:
        if not self.surviving_frequencies:
            return 0.0
        return max(self.surviving_frequencies) - min(self.surviving_frequencies)


def mixing_angle(g1: float, g2: float) -> float:
    """Rotation angle in [0, pi) with tan(angle) = g1/g2, so g~1 vanishes."""
    if g1 < 0:
        raise ValueError("g1 must be non-negative")
    if g1 == 0.0 and g2 == 0.0:
        raise UndefinedAngleError("mixing angle undefined for g1 = g2 = 0")
    angle = math.atan2(g1, g2)
    if angle >= math.pi:  # g1 == 0, g2 < 0: fold to the equivalent angle 0
        angle = 0.0
    return angle


def _require_two_mode(spec: SystemSpec):
    if not spec.is_two_mode:
        raise ValueError("this operation requires the two-oscillator, single-TLS model")


def transform_params(spec: SystemSpec) -> SlmpReport:
    """Evaluate all frame quantities of the two-mode model in closed form."""
    _require_two_mode(spec)
    w1, w2 = spec.omega
    (g1, g2), = spec.couplings
    # fully decoupled system: any rotation works, take the identity
    gamma = 0.0 if (g1 == 0.0 and g2 == 0.0) else mixing_angle(g1, g2)
    c, s = math.cos(gamma), math.sin(gamma)
    wt1 = w1 * c * c + w2 * s * s
    wt2 = w1 * s * s + w2 * c * c
    gt1 = g1 * c - g2 * s
    gt2 = g1 * s + g2 * c
    xi12 = (w1 - w2) * s * c
    eta = math.sqrt((g1 * g1 + g2 * g2) / (w1 * w1 + w2 * w2))
    ratios = _condition_ratios(spec, xi12, eta)
    modes = mode_decomposition(spec.coupling_matrix(), spec.phase_matrix(), spec.omega)
    return SlmpReport(
        gamma_angle=gamma,
        omega_tilde=(wt1, wt2),
        g_tilde=(gt1, gt2),
        xi12=xi12,
        eta=eta,
        condition_ratios=ratios,
        preserved_modes=modes.preserved,
        leaking_modes=modes.leaking,
        surviving_frequencies=modes.surviving_frequencies,
    )


def _condition_ratios(spec: SystemSpec, xi12: float, eta: float) -> tuple[float, float, float]:
    w1, w2 = spec.omega
    (g1, g2), = spec.couplings
    gsq = g1 * g1 + g2 * g2
    if g1 == 0.0 or g2 == 0.0:
        # detuning bound degenerates; the tunnelling term vanishes identically
        r1 = 0.0
    else:
        r1 = abs(w1 - w2) / (gsq ** 1.5 / abs(g1 * g2))
    gamma_decay = spec.gamma_decay[0]
    if xi12 == 0.0:
        r2 = 0.0
    elif gamma_decay == 0.0:
        r2 = math.inf
    else:
        r2 = abs(xi12) / gamma_decay
    return (r1, r2, eta)


def check_conditions(spec: SystemSpec, threshold: float = CONDITION_THRESHOLD) -> ConditionCheck:
    """Evaluate the three smallness ratios and compare against `threshold`.

    r1: detuning vs the recast coupling bound |w1-w2| << (g1^2+g2^2)^{3/2}/(g1 g2)
    r2: residual tunnelling vs TLS decay       |xi12| << Gamma
    r3: coupling vs frequency scale            eta   << 1

    A verdict of True only means "sufficient conditions hold"; synchronization
    can still occur when they fail.
    """
    report = transform_params(spec)
    ratios = report.condition_ratios
    return ConditionCheck(
        ratios=ratios,
        satisfied=tuple(r < threshold for r in ratios),
        threshold=threshold,
    )


def _pivoted_gram_schmidt(rows: list[np.ndarray], scale: float) -> list[np.ndarray]:
    """Orthonormalize with pivoting on the largest remaining norm.

    Ties break to the lowest index (np.argmax convention).  Vectors whose
    residual norm falls below RANK_TOL * scale are dropped, so the output size
    is the numerical rank.
    """
    residual = [np.array(r, dtype=np.complex128) for r in rows]
    basis: list[np.ndarray] = []
    alive = list(range(len(residual)))
    while alive:
        norms = np.array([np.linalg.norm(residual[i]) for i in alive])
        pick = int(np.argmax(norms))
        if norms[pick] <= RANK_TOL * scale:
            break
        v = residual[alive[pick]] / norms[pick]
        basis.append(v)
        alive.pop(pick)
        for i in alive:
            residual[i] -= v * np.vdot(v, residual[i])
    return basis


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component real positive (ties: lowest index)."""
    k = int(np.argmax(np.abs(v)))
    c = v[k]
    if abs(c) == 0.0:
        return v
    return v * (np.conj(c) / abs(c))


def mode_decomposition(couplings, phases, omega=None) -> ModeDecomposition:
    """Split C^N into leaking (row span of g_jk e^{i th_jk}) and preserved parts.

    The preserved basis is the orthogonal complement under the conjugate inner
    product, built deterministically and phase-fixed so results are stable
    across runs.  Surviving frequencies are the eigenvalues of diag(omega)
    compressed onto the preserved subspace (ascending); omitted when omega is
    not given.
    """
    g = np.atleast_2d(np.asarray(couplings, dtype=float))
    th = np.atleast_2d(np.asarray(phases, dtype=float))
    if g.shape != th.shape:
        raise ValueError("couplings and phases must have the same shape")
    m, n = g.shape
    rows = g * np.exp(1j * th)
    scale = float(np.max(np.linalg.norm(rows, axis=1))) if rows.size else 0.0

    if scale == 0.0:
        warnings.warn(
            "zero coupling matrix: every mode is preserved", UserWarning, stacklevel=2
        )
        leaking_basis: list[np.ndarray] = []
    else:
        leaking_basis = _pivoted_gram_schmidt([rows[j] for j in range(m)], scale)

    # complement: project the standard basis out of the leaking span, then
    # orthonormalize what is left with the same pivoting rule
    candidates = []
    for k in range(n):
        e = np.zeros(n, dtype=np.complex128)
        e[k] = 1.0
        for v in leaking_basis:
            e -= v * np.vdot(v, e)
        candidates.append(e)
    preserved_basis = _pivoted_gram_schmidt(candidates, 1.0)

    preserved = tuple(_fix_phase(v) for v in preserved_basis)
    leaking = tuple(_fix_phase(v) for v in leaking_basis)

    surviving: tuple[float, ...] = ()
    if omega is not None and preserved:
        w = np.asarray(omega, dtype=float)
        if w.shape != (n,):
            raise ValueError(f"omega must have length {n}")
        vmat = np.column_stack(preserved)
        compressed = vmat.conj().T @ np.diag(w) @ vmat
        surviving = tuple(float(x) for x in np.linalg.eigvalsh(compressed))
    return ModeDecomposition(
        preserved=preserved, leaking=leaking, surviving_frequencies=surviving
    )


def build_slmp_unitaries(spec: SystemSpec, n_max: int | None = None) -> tuple[QOperator, QOperator]:
    """Frame-change unitaries (U_p, U_r) on the full composite layout.

    U_p = exp(i th1 n1 + i th2 n2) maps a_k -> e^{-i th_k} a_k; U_r mixes the
    modes by the angle gamma and leaves the TLS untouched.  Both are exactly
    unitary on total-excitation blocks that fit inside the truncation.
    """
    _require_two_mode(spec)
    layout = spec.layout(n_max)
    dims = layout.dims
    a1 = embed(annihilation(dims[0]), layout, 0).matrix
    a2 = embed(annihilation(dims[1]), layout, 1).matrix
    (th1, th2), = spec.phases
    (g1, g2), = spec.couplings
    gamma = 0.0 if (g1 == 0.0 and g2 == 0.0) else mixing_angle(g1, g2)
    gen_p = 1j * th1 * (a1.conj().T @ a1) + 1j * th2 * (a2.conj().T @ a2)
    gen_r = gamma * (a1 @ a2.conj().T - a1.conj().T @ a2)
    u_p = QOperator(layout, matrix_exponential(gen_p))
    u_r = QOperator(layout, matrix_exponential(gen_r))
    return u_p, u_r


def _inner_block_mask(spec: SystemSpec, n_max: int, margin: int = 2) -> np.ndarray:
    """Basis states with total Fock excitation <= n_max - margin (any TLS state)."""
    layout = spec.layout(n_max)
    dims = layout.dims
    osc = layout.oscillator_slots
    mask = np.zeros(layout.total_dim, dtype=bool)
    for idx in range(layout.total_dim):
        rem = idx
        labels = []
        for d in reversed(dims):
            labels.append(rem % d)
            rem //= d
        labels.reverse()
        total = sum(labels[s] for s in osc)
        mask[idx] = total <= n_max - margin
    return mask


def transformed_hamiltonian(spec: SystemSpec, n_max: int | None = None) -> QOperator:
    """Frame Hamiltonian built directly from the closed-form coefficients."""
    _require_two_mode(spec)
    report = transform_params(spec)
    layout = spec.layout(n_max)
    dims = layout.dims
    a1 = embed(annihilation(dims[0]), layout, 0).matrix
    a2 = embed(annihilation(dims[1]), layout, 1).matrix
    from .fock import pauli  # local import keeps module top lean

    sz = embed(pauli("z"), layout, 2).matrix
    sx = embed(pauli("x"), layout, 2).matrix
    wt1, wt2 = report.omega_tilde
    gt1, gt2 = report.g_tilde
    h = (
        wt1 * (a1.conj().T @ a1)
        + wt2 * (a2.conj().T @ a2)
        + 0.5 * spec.omega0 * sz
        + gt1 * ((a1 + a1.conj().T) @ sx)
        + gt2 * ((a2 + a2.conj().T) @ sx)
        + report.xi12 * (a1.conj().T @ a2 + a2.conj().T @ a1)
    )
    return QOperator(layout, h)


def verify_slmp_equivalence(spec: SystemSpec, n_max: int | None = None) -> float:
    """Max-abs residual between U H U^dag and the closed-form frame Hamiltonian.

    Compared on the inner excitation block (total Fock excitation up to
    n_max - 2) where the mode rotation is exactly block-unitary despite the
    truncation; the two outermost excitation shells are rotation boundary
    artifacts and are excluded.
    """
    _require_two_mode(spec)
    if n_max is None:
        n_max = spec.n_max
    if n_max < 4:
        raise ValueError("equivalence check needs n_max >= 4")
    h = build_hamiltonian(spec, n_max).matrix
    u_p, u_r = build_slmp_unitaries(spec, n_max)
    u = u_r.matrix @ u_p.matrix
    transformed = u @ h @ u.conj().T
    direct = transformed_hamiltonian(spec, n_max).matrix
    mask = _inner_block_mask(spec, n_max)
    diff = (transformed - direct)[np.ix_(mask, mask)]
    return float(np.max(np.abs(diff))) if diff.size else 0.0
