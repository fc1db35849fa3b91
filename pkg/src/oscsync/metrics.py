"""Synchronization observables: closed-form asymptotics and trajectory fits.

Conventions, used consistently everywhere:

* position operator x = (a + a^dag) / sqrt(2), so a coherent amplitude c
  produces a position oscillation of amplitude sqrt(2) |c|;
* fitted signals are modelled as  x(t) = A cos(w t - phi) + offset  with
  w > 0, i.e. phi is the phase LAG of the signal.  The reported phase
  difference phi_2 - phi_1 is positive when oscillator 2 reaches its maxima
  later than oscillator 1.  Under physical evolution <a_k>(t) = c_k e^{-iwt}
  this equals arg(c_2) - arg(c_1), matching the prediction below;
* all phase differences are wrapped to (-pi, pi] and compared with the
  wrapped distance min(|d|, 2 pi - |d|).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DensityState, Trajectory
from .fock import LayoutMismatchError, QOperator
from .model import SystemSpec
from .slmp import mixing_angle, transform_params

NO_OSCILLATION_AMP = 1e-6
ZERO_PREDICTION_AMP = 1e-8
_OMEGA_XTOL = 1e-10


def wrap_phase(phi: float) -> float:
    """Wrap to (-pi, pi]."""
    out = math.fmod(phi + math.pi, 2.0 * math.pi)
    if out <= 0.0:
        out += 2.0 * math.pi
    return out - math.pi


def wrapped_distance(phi_a: float, phi_b: float) -> float:
    d = abs(wrap_phase(phi_a) - wrap_phase(phi_b))
    return min(d, 2.0 * math.pi - d)


@dataclass(frozen=True)
class AsymptoticPrediction:
    """Late-time common frequency, complex mode amplitudes, phase difference."""

    omega_sync: float
    amplitudes: tuple[complex, complex]
    phase_diff: float


def analytic_asymptote(spec: SystemSpec, a1_0: complex, a2_0: complex) -> AsymptoticPrediction:
    """Closed-form late-time amplitudes of <a_1>, <a_2> for the two-mode model.

    Both modes end up rotating at the surviving frequency w~1 with the
    time-independent complex prefactors

        amp1 = a1_0 cos^2 g + a2_0 e^{-i d} cos g sin g
        amp2 = a1_0 e^{+i d} cos g sin g + a2_0 sin^2 g,   d = pi - (th2 - th1),

    which is the projection of the initial amplitude vector onto the
    preserved mode.  Accurate up to corrections of the order of the ratios
    reported by check_conditions.
    """
    if not spec.is_two_mode:
        raise ValueError("analytic asymptote requires the two-mode model")
    (g1, g2), = spec.couplings
    (th1, th2), = spec.phases
    gamma = mixing_angle(g1, g2)
    c, s = math.cos(gamma), math.sin(gamma)
    delta = math.pi - (th2 - th1)
    amp1 = a1_0 * c * c + a2_0 * cmath.exp(-1j * delta) * c * s
    amp2 = a1_0 * cmath.exp(1j * delta) * c * s + a2_0 * s * s
    if abs(amp1) == 0.0 and abs(amp2) == 0.0:
        phase_diff = 0.0
    else:
        phase_diff = wrap_phase(cmath.phase(amp2) - cmath.phase(amp1))
    omega_sync = transform_params(spec).omega_tilde[0]
    return AsymptoticPrediction(
        omega_sync=omega_sync, amplitudes=(amp1, amp2), phase_diff=phase_diff
    )


def expectation(state: DensityState, op: QOperator) -> complex:
    """tr(rho O)."""
    if state.layout != op.layout:
        raise LayoutMismatchError("state and operator layouts differ")
    return complex(np.sum(state.matrix * op.matrix.T))


@dataclass(frozen=True)
class SyncEstimate:
    """Shared-frequency sinusoid fit of two position signals."""

    omega_fit: float
    amplitudes: tuple[float, float]
    phases: tuple[float, float]
    phase_diff: float
    fit_residual: float
    window: tuple[float, float]
    oscillating: bool


def _lstsq_at(omega: float, t: np.ndarray, signals) -> tuple[float, list[np.ndarray]]:
    """Least squares of A cos(wt) + B sin(wt) + c per signal at fixed w."""
    design = np.column_stack([np.cos(omega * t), np.sin(omega * t), np.ones_like(t)])
    ssq = 0.0
    coefs = []
    for y in signals:
        c, *_ = np.linalg.lstsq(design, y, rcond=None)
        r = design @ c - y
        ssq += float(r @ r)
        coefs.append(c)
    return ssq, coefs


def _golden_minimize(fun, lo: float, hi: float, xtol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while (b - a) > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def fit_sync(
    trajectory: Trajectory,
    keys: tuple[str, str] = ("x1", "x2"),
    window_fraction: float = 0.25,
) -> SyncEstimate:
    """Fit one shared frequency and per-signal amplitude/phase on the tail.

    The frequency seed comes from the dominant discrete-Fourier peak of the
    first signal over the tail window, then a golden-section search refines
    it against the joint least-squares residual; amplitudes, phases and
    offsets are linear at fixed frequency.  When a tail signal has amplitude
    below 1e-6 there is nothing to fit and the estimate comes back flagged
    (oscillating=False) instead of raising.
    """
    if not 0.0 < window_fraction <= 0.5:
        raise ValueError("window_fraction must lie in (0, 0.5]")
    times = np.asarray(trajectory.times, dtype=float)
    span = times[-1] - times[0]
    t_start = times[-1] - window_fraction * span
    sel = times >= t_start - 1e-12 * max(1.0, span)
    t = times[sel]
    if t.size < 16:
        raise ValueError("tail window holds too few samples to fit")
    window = (float(t[0]), float(t[-1]))

    signals = [np.real(np.asarray(trajectory.records[k])[sel]) for k in keys]
    detrended = [y - y.mean() for y in signals]
    peaks = [float(np.max(np.abs(y))) for y in detrended]
    if min(peaks) < NO_OSCILLATION_AMP:
        return SyncEstimate(
            omega_fit=0.0,
            amplitudes=(peaks[0], peaks[1]),
            phases=(0.0, 0.0),
            phase_diff=0.0,
            fit_residual=0.0,
            window=window,
            oscillating=False,
        )

    # DFT seed on a padded grid; skip the zero-frequency bin
    n_pad = 8 * t.size
    spectrum = np.abs(np.fft.rfft(detrended[0], n=n_pad))
    freqs = 2.0 * math.pi * np.fft.rfftfreq(n_pad, d=(t[1] - t[0]))
    peak_bin = 1 + int(np.argmax(spectrum[1:]))
    omega_seed = float(freqs[peak_bin])
    bin_width = 2.0 * math.pi / (t[-1] - t[0])

    t_local = t - t[0]  # better conditioning; phases mapped back below
    fun = lambda w: _lstsq_at(w, t_local, signals)[0]
    omega = _golden_minimize(
        fun, max(omega_seed - bin_width, 1e-12), omega_seed + bin_width, _OMEGA_XTOL
    )
    ssq, coefs = _lstsq_at(omega, t_local, signals)

    amplitudes = []
    phases = []
    for c in coefs:
        amp = math.hypot(c[0], c[1])
        # x = a cos + b sin = A cos(w t_local - phi_local); shift back to absolute time
        phi = math.atan2(c[1], c[0]) + omega * t[0]
        amplitudes.append(float(amp))
        phases.append(wrap_phase(phi))
    n_samples = sum(len(s) for s in signals)
    return SyncEstimate(
        omega_fit=float(omega),
        amplitudes=(amplitudes[0], amplitudes[1]),
        phases=(phases[0], phases[1]),
        phase_diff=wrap_phase(phases[1] - phases[0]),
        fit_residual=math.sqrt(ssq / n_samples),
        window=window,
        oscillating=True,
    )


@dataclass(frozen=True)
class FitTolerances:
    freq_rel_tol: float = 0.02
    phase_tol: float = 0.15
    amp_rel_tol: float = 0.15


@dataclass(frozen=True)
class AgreementReport:
    freq_rel_error: float
    phase_error: float
    amp_errors: tuple[float, float]
    amp_ratio: float
    passed: bool
    oscillating: bool
    prediction: AsymptoticPrediction
    estimate: SyncEstimate


def compare(
    prediction: AsymptoticPrediction,
    estimate: SyncEstimate,
    tolerances: FitTolerances = FitTolerances(),
) -> AgreementReport:
    """Quantify fit-vs-prediction agreement and apply the configured tolerances.

    Predicted position amplitudes are sqrt(2) |amp_k|.  When a predicted
    amplitude is (numerically) zero the corresponding error is absolute and
    judged against 1e-6; a flagged no-oscillation estimate passes exactly
    when the prediction is zero too.
    """
    pred_amp = [math.sqrt(2.0) * abs(c) for c in prediction.amplitudes]
    pred_zero = all(p < ZERO_PREDICTION_AMP for p in pred_amp)

    amp_errors = []
    for fit_a, pred_a in zip(estimate.amplitudes, pred_amp):
        if pred_a < ZERO_PREDICTION_AMP:
            amp_errors.append(abs(fit_a - pred_a))
        else:
            amp_errors.append(abs(fit_a - pred_a) / pred_a)

    if not estimate.oscillating:
        freq_rel_error = 0.0
        phase_error = 0.0
        passed = pred_zero and all(e < NO_OSCILLATION_AMP for e in amp_errors)
    else:
        freq_rel_error = abs(estimate.omega_fit - prediction.omega_sync) / abs(
            prediction.omega_sync
        )
        phase_error = wrapped_distance(estimate.phase_diff, prediction.phase_diff)
        amp_ok = all(
            (e < NO_OSCILLATION_AMP if p < ZERO_PREDICTION_AMP else e < tolerances.amp_rel_tol)
            for e, p in zip(amp_errors, pred_amp)
        )
        passed = (
            freq_rel_error < tolerances.freq_rel_tol
            and phase_error < tolerances.phase_tol
            and amp_ok
        )

    a1, a2 = estimate.amplitudes
    amp_ratio = a2 / a1 if a1 > 0 else math.inf
    return AgreementReport(
        freq_rel_error=freq_rel_error,
        phase_error=phase_error,
        amp_errors=(amp_errors[0], amp_errors[1]),
        amp_ratio=amp_ratio,
        passed=passed,
        oscillating=estimate.oscillating,
        prediction=prediction,
        estimate=estimate,
    )
