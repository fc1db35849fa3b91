import math

import numpy as np
import pytest

from oscsync.dynamics import SolverStats, Trajectory, prepare_state
from oscsync.fock import LayoutMismatchError, SpaceLayout, annihilation, embed, number
from oscsync.metrics import (
    FitTolerances,
    analytic_asymptote,
    compare,
    expectation,
    fit_sync,
    wrap_phase,
    wrapped_distance,
)
from oscsync.model import SystemSpec
from oscsync.slmp import mode_decomposition

COS_G, SIN_G = 21 / 29, 20 / 29


def _synthetic_trajectory(times, x1, x2):
    return Trajectory(
        times=np.asarray(times, dtype=float),
        records={"x1": np.asarray(x1, dtype=complex), "x2": np.asarray(x2, dtype=complex)},
        meta=SolverStats(),
    )


def test_wrap_phase_range():
    assert wrap_phase(math.pi) == pytest.approx(math.pi)
    assert wrap_phase(-math.pi) == pytest.approx(math.pi)
    assert wrap_phase(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrapped_distance(math.pi - 0.05, -math.pi + 0.05) == pytest.approx(0.1, abs=1e-12)


def test_expectation_basics():
    # n_max=8 puts the coherent-state truncation floor well under the gate
    layout = SpaceLayout.for_system(1, 1, 8)
    vac = prepare_state(layout, "fock", ns=[0])
    assert expectation(vac, embed(number(9), layout, 0)) == 0.0
    coh = prepare_state(layout, "coherent", alphas=[0.7])
    a1 = embed(annihilation(9), layout, 0)
    assert abs(expectation(coh, a1) - 0.7) < 1e-6
    val = expectation(coh, embed(number(9), layout, 0))
    assert abs(val.imag) < 1e-12


def test_expectation_layout_mismatch():
    layout_a = SpaceLayout.for_system(1, 1, 3)
    layout_b = SpaceLayout.for_system(1, 1, 4)
    state = prepare_state(layout_a, "fock", ns=[0])
    with pytest.raises(LayoutMismatchError):
        expectation(state, embed(number(5), layout_b, 0))


def test_asymptote_headline_point(fig1_spec):
    pred = analytic_asymptote(fig1_spec, 0.7, 0.0)
    assert abs(pred.amplitudes[0]) == pytest.approx(0.7 * COS_G**2, abs=1e-14)
    assert abs(pred.amplitudes[1]) == pytest.approx(0.7 * SIN_G * COS_G, abs=1e-14)
    assert abs(pred.amplitudes[0]) == pytest.approx(0.36706, abs=1e-5)
    assert abs(pred.amplitudes[1]) == pytest.approx(0.34958, abs=1e-5)
    assert pred.phase_diff == pytest.approx(3 * math.pi / 4, abs=1e-12)
    assert pred.omega_sync == pytest.approx(0.97854, abs=5e-6)


def test_asymptote_fock_initial_data_is_dark(fig1_spec):
    pred = analytic_asymptote(fig1_spec, 0.0, 0.0)
    assert pred.amplitudes == (0.0, 0.0)
    assert pred.phase_diff == 0.0


@pytest.mark.parametrize("g1,g2", [(0.2, 0.21), (0.1, 0.4), (0.33, 0.05)])
def test_asymptote_equal_phases_gives_antiphase(g1, g2):
    spec = SystemSpec.two_mode(0.95, 1.01, g1, g2, theta1=0.0, theta2=0.0, gamma=0.1)
    pred = analytic_asymptote(spec, 0.7, 0.0)
    assert wrapped_distance(pred.phase_diff, math.pi) < 1e-12


def test_asymptote_pi_phase_gives_in_phase():
    spec = SystemSpec.two_mode(0.95, 1.01, 0.2, 0.21, theta1=0.0, theta2=math.pi, gamma=0.1)
    pred = analytic_asymptote(spec, 0.7, 0.0)
    assert wrapped_distance(pred.phase_diff, 0.0) < 1e-12


def test_asymptote_linearity(fig1_spec, rng):
    for _ in range(10):
        a = rng.normal(size=2) + 1j * rng.normal(size=2)
        c = complex(rng.normal(), rng.normal())
        base = analytic_asymptote(fig1_spec, a[0], a[1])
        scaled = analytic_asymptote(fig1_spec, c * a[0], c * a[1])
        np.testing.assert_allclose(
            scaled.amplitudes, [c * x for x in base.amplitudes], atol=1e-12
        )


def test_asymptote_amplitude_conservation(fig1_spec, rng):
    modes = mode_decomposition(
        fig1_spec.coupling_matrix(), fig1_spec.phase_matrix(), fig1_spec.omega
    )
    preserved = modes.preserved[0]
    # initial amplitudes proportional to the conjugate preserved vector: lossless
    a = np.conj(preserved) * (0.4 - 0.2j)
    pred = analytic_asymptote(fig1_spec, a[0], a[1])
    total_in = abs(a[0]) ** 2 + abs(a[1]) ** 2
    total_out = sum(abs(x) ** 2 for x in pred.amplitudes)
    assert total_out == pytest.approx(total_in, rel=1e-12)
    # generic initial data loses the leaking component
    for _ in range(10):
        a = rng.normal(size=2) + 1j * rng.normal(size=2)
        pred = analytic_asymptote(fig1_spec, a[0], a[1])
        total_out = sum(abs(x) ** 2 for x in pred.amplitudes)
        assert total_out <= abs(a[0]) ** 2 + abs(a[1]) ** 2 + 1e-12


def test_fit_recovers_its_own_model():
    t = np.linspace(0.0, 400.0, 4000)
    x1 = np.cos(0.97 * t)
    x2 = np.cos(0.97 * t - 2.356)  # oscillator 2 lags by 2.356 rad
    est = fit_sync(_synthetic_trajectory(t, x1, x2), window_fraction=0.25)
    assert est.oscillating
    assert est.omega_fit == pytest.approx(0.97, abs=1e-6)
    assert est.phase_diff == pytest.approx(2.356, abs=1e-6)
    assert est.amplitudes[0] == pytest.approx(1.0, abs=1e-6)
    assert est.fit_residual < 1e-8


def test_fit_phase_difference_invariant_under_time_shift():
    omega, tau = 0.97, 37.3
    results = []
    for shift in (0.0, tau):
        t = np.linspace(0.0, 400.0, 4000) + shift
        x1 = 0.5 * np.cos(omega * t - 0.4)
        x2 = 0.45 * np.cos(omega * t - 1.7)
        traj = Trajectory(
            times=t - t[0],
            records={"x1": (x1 + 0j), "x2": (x2 + 0j)},
            meta=SolverStats(),
        )
        results.append(fit_sync(traj, window_fraction=0.25).phase_diff)
    assert wrapped_distance(results[0], results[1]) < 1e-6


def test_fit_flags_no_oscillation():
    t = np.linspace(0.0, 100.0, 1000)
    est = fit_sync(
        _synthetic_trajectory(t, np.full_like(t, 1e-9), np.zeros_like(t)),
        window_fraction=0.5,
    )
    assert not est.oscillating
    assert est.omega_fit == 0.0
    assert max(est.amplitudes) < 1e-6


def test_fit_window_validation():
    t = np.linspace(0.0, 10.0, 100)
    traj = _synthetic_trajectory(t, np.cos(t), np.sin(t))
    with pytest.raises(ValueError):
        fit_sync(traj, window_fraction=0.7)
    with pytest.raises(ValueError):
        fit_sync(traj, window_fraction=0.0)


def test_compare_identical_inputs_passes(fig1_spec):
    t = np.linspace(0.0, 400.0, 4000)
    pred = analytic_asymptote(fig1_spec, 0.7, 0.0)
    w = pred.omega_sync
    x1 = math.sqrt(2.0) * abs(pred.amplitudes[0]) * np.cos(w * t)
    x2 = math.sqrt(2.0) * abs(pred.amplitudes[1]) * np.cos(w * t - pred.phase_diff)
    rep = compare(pred, fit_sync(_synthetic_trajectory(t, x1, x2)), FitTolerances())
    assert rep.passed
    assert rep.freq_rel_error < 1e-8
    assert rep.phase_error < 1e-6
    assert max(rep.amp_errors) < 1e-6


def test_compare_dark_prediction_and_flat_signal(fig1_spec):
    t = np.linspace(0.0, 100.0, 1000)
    est = fit_sync(_synthetic_trajectory(t, np.zeros_like(t), np.zeros_like(t)))
    pred = analytic_asymptote(fig1_spec, 0.0, 0.0)
    rep = compare(pred, est)
    assert rep.passed
    assert rep.freq_rel_error == 0.0 and rep.phase_error == 0.0


def test_compare_dark_signal_against_bright_prediction_fails(fig1_spec):
    t = np.linspace(0.0, 100.0, 1000)
    est = fit_sync(_synthetic_trajectory(t, np.zeros_like(t), np.zeros_like(t)))
    pred = analytic_asymptote(fig1_spec, 0.7, 0.0)
    assert not compare(pred, est).passed
