"""Batch front-end: analyze / simulate / compare / sweep scenario files.

Exit codes: 0 success, 1 configuration error, 2 strict-condition failure,
3 physicality violation during integration, 4 prediction mismatch.

Scenario argument is a path; bare names of bundled scenarios (fig1, fig2a,
fig2b, fock, chain3) are resolved from the package when no such file exists.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    ScenarioConfig,
    apply_sweep_value,
    parse_config_file,
)
from .dynamics import PhysicalityError, Trajectory, evolve, prepare_state, standard_observables
from .metrics import analytic_asymptote, compare, expectation, fit_sync
from .model import build_lindblad
from .slmp import mode_decomposition, transform_params, check_conditions

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STRICT = 2
EXIT_PHYSICALITY = 3
EXIT_MISMATCH = 4

BUNDLED = ("fig1", "fig2a", "fig2b", "fock", "chain3")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems map to the config-error code
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _fmt(x) -> str:
    """17 significant digits, '.' decimal separator."""
    return f"{float(x):.17g}"


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


def _fmt_report_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, complex):
        return _fmt_complex(value)
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt_report_value(v) for v in value) + "]"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _fmt(value)
    return str(value)


def _write_report(path: Path, items: list[tuple[str, object]]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in items:
            fh.write(f"{key} = {_fmt_report_value(value)}\n")


def _resolve_config_path(name_or_path: str) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    stem = p.name.removesuffix(".cfg")
    if stem in BUNDLED:
        return Path(str(resources.files("oscsync") / "scenarios" / f"{stem}.cfg"))
    raise ConfigError(f"config file not found: {name_or_path}")


def _out_path(raw: str, out_dir: str | None) -> Path:
    p = Path(raw)
    if out_dir is not None and not p.is_absolute():
        p = Path(out_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _load(args) -> ScenarioConfig:
    cfg = parse_config_file(_resolve_config_path(args.config))
    if args.nmax is not None:
        cfg = replace(cfg, system=replace(cfg.system, n_max=int(args.nmax)))
    return cfg


def _csv_header(layout) -> list[str]:
    cols = ["t"]
    for k in range(1, len(layout.oscillator_slots) + 1):
        cols += [f"x{k}", f"n{k}", f"re_a{k}", f"im_a{k}"]
    for j in range(1, len(layout.tls_slots) + 1):
        cols.append(f"pe{j}")
    return cols


def _csv_rows(traj: Trajectory, layout):
    n_osc = len(layout.oscillator_slots)
    n_tls = len(layout.tls_slots)
    for i, t in enumerate(traj.times):
        row = [_fmt(t)]
        for k in range(1, n_osc + 1):
            a = traj.records[f"a{k}"][i]
            row += [
                _fmt(traj.records[f"x{k}"][i].real),
                _fmt(traj.records[f"n{k}"][i].real),
                _fmt(a.real),
                _fmt(a.imag),
            ]
        for j in range(1, n_tls + 1):
            row.append(_fmt(traj.records[f"pe{j}"][i].real))
        yield row


def _write_csv(path: Path, traj: Trajectory, layout, aborted_at: float | None = None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(_csv_header(layout)) + "\n")
        for row in _csv_rows(traj, layout):
            fh.write(",".join(row) + "\n")
        if aborted_at is not None:
            fh.write(f"# ABORTED t={_fmt(aborted_at)}\n")


def _run_trajectory(cfg: ScenarioConfig):
    spec = cfg.system
    generator = build_lindblad(spec)
    layout = generator.layout
    ini = cfg.initial_state
    rho0 = prepare_state(layout, ini.kind, alphas=ini.alphas, ns=ini.ns, tls=ini.tls)
    observables = standard_observables(layout)
    traj = evolve(generator, rho0, cfg.time.grid(), observables, cfg.solver)
    return rho0, traj, layout


def _solver_report_items(traj: Trajectory) -> list[tuple[str, object]]:
    meta = traj.meta
    items = [
        ("steps", meta.steps),
        ("rejected_steps", meta.rejected_steps),
        ("rhs_evaluations", meta.rhs_evaluations),
        ("max_trace_error", meta.max_trace_error),
        ("max_hermiticity_error", meta.max_hermiticity_error),
        ("min_eigenvalue", meta.min_eigenvalue),
        ("error_estimate", meta.error_estimate),
        ("backend", meta.backend),
    ]
    if traj.final_state is not None:
        d = traj.final_state.diagnostics
        items += [
            ("final_trace_error", d.trace_error),
            ("final_hermiticity_error", d.hermiticity_error),
            ("final_min_eigenvalue", d.min_eigenvalue),
        ]
    return items


def _convergence_deviation(cfg: ScenarioConfig, traj: Trajectory) -> tuple[float, dict[str, float]]:
    """Re-run two truncation levels up and report max per-observable deviation."""
    bumped = replace(cfg, system=replace(cfg.system, n_max=cfg.system.n_max + 2))
    _, traj2, _ = _run_trajectory(bumped)
    per_obs = {
        name: float(np.max(np.abs(traj.records[name] - traj2.records[name])))
        for name in traj.records
    }
    return max(per_obs.values()), per_obs


def cmd_analyze(cfg: ScenarioConfig, args) -> int:
    spec = cfg.system
    items: list[tuple[str, object]] = []
    strict_failure = False
    if spec.is_two_mode:
        report = transform_params(spec)
        conditions = check_conditions(spec)
        items += [
            ("gamma_angle", report.gamma_angle),
            ("omega_tilde_1", report.omega_tilde[0]),
            ("omega_tilde_2", report.omega_tilde[1]),
            ("g_tilde_1", report.g_tilde[0]),
            ("g_tilde_2", report.g_tilde[1]),
            ("xi12", report.xi12),
            ("eta", report.eta),
            ("r1", report.condition_ratios[0]),
            ("r2", report.condition_ratios[1]),
            ("r3", report.condition_ratios[2]),
            ("condition1_ok", conditions.satisfied[0]),
            ("condition2_ok", conditions.satisfied[1]),
            ("condition3_ok", conditions.satisfied[2]),
            ("conditions_sufficient", conditions.all_satisfied),
        ]
        modes = report
        strict_failure = not conditions.all_satisfied
    else:
        modes = mode_decomposition(spec.coupling_matrix(), spec.phase_matrix(), spec.omega)
    for i, v in enumerate(modes.preserved_modes if spec.is_two_mode else modes.preserved, 1):
        items.append((f"preserved_mode_{i}", [complex(x) for x in v]))
    for i, v in enumerate(modes.leaking_modes if spec.is_two_mode else modes.leaking, 1):
        items.append((f"leaking_mode_{i}", [complex(x) for x in v]))
    surv = modes.surviving_frequencies
    items.append(("surviving_frequencies", list(surv)))
    items.append(("surviving_frequency_spread", (max(surv) - min(surv)) if surv else 0.0))

    path = _out_path(cfg.outputs.report_path, args.out)
    _write_report(path, items)
    print(f"analysis report written to {path}")
    if args.strict and strict_failure:
        return EXIT_STRICT
    return EXIT_OK


def cmd_simulate(cfg: ScenarioConfig, args) -> int:
    csv_path = _out_path(cfg.outputs.csv_path, args.out)
    report_path = _out_path(cfg.outputs.report_path, args.out)
    try:
        _, traj, layout = _run_trajectory(cfg)
    except PhysicalityError as err:
        if err.partial is not None:
            _write_csv(csv_path, err.partial, cfg.system.layout(), aborted_at=err.time)
        print(f"physicality violation: {err}", file=sys.stderr)
        return EXIT_PHYSICALITY
    _write_csv(csv_path, traj, layout)
    items = _solver_report_items(traj)
    if args.convergence_check:
        overall, per_obs = _convergence_deviation(cfg, traj)
        items.append(("convergence_max_deviation", overall))
        items += [(f"convergence_dev_{k}", v) for k, v in sorted(per_obs.items())]
    _write_report(report_path, items)
    print(f"trajectory written to {csv_path}")
    print(f"summary written to {report_path}")
    return EXIT_OK


def cmd_compare(cfg: ScenarioConfig, args) -> int:
    if not cfg.system.is_two_mode:
        raise ConfigError("compare requires the two-oscillator, single-TLS model")
    csv_path = _out_path(cfg.outputs.csv_path, args.out)
    report_path = _out_path(cfg.outputs.report_path, args.out)
    try:
        rho0, traj, layout = _run_trajectory(cfg)
    except PhysicalityError as err:
        if err.partial is not None:
            _write_csv(csv_path, err.partial, cfg.system.layout(), aborted_at=err.time)
        print(f"physicality violation: {err}", file=sys.stderr)
        return EXIT_PHYSICALITY
    _write_csv(csv_path, traj, layout)

    obs = standard_observables(layout)
    a1_0 = expectation(rho0, obs["a1"])
    a2_0 = expectation(rho0, obs["a2"])
    prediction = analytic_asymptote(cfg.system, a1_0, a2_0)
    estimate = fit_sync(traj, window_fraction=cfg.fit.window_fraction)
    agreement = compare(prediction, estimate, cfg.fit.tolerances)

    items: list[tuple[str, object]] = [
        ("omega_sync_predicted", prediction.omega_sync),
        ("omega_fit", estimate.omega_fit),
        ("freq_rel_error", agreement.freq_rel_error),
        ("phase_diff_predicted", prediction.phase_diff),
        ("phase_diff_fit", estimate.phase_diff),
        ("phase_error", agreement.phase_error),
        ("amp1_predicted", float(np.sqrt(2.0) * abs(prediction.amplitudes[0]))),
        ("amp2_predicted", float(np.sqrt(2.0) * abs(prediction.amplitudes[1]))),
        ("amp1_fit", estimate.amplitudes[0]),
        ("amp2_fit", estimate.amplitudes[1]),
        ("amp1_error", agreement.amp_errors[0]),
        ("amp2_error", agreement.amp_errors[1]),
        ("amp_ratio_fit", agreement.amp_ratio),
        ("fit_residual", estimate.fit_residual),
        ("fit_window_start", estimate.window[0]),
        ("fit_window_end", estimate.window[1]),
        ("oscillating", estimate.oscillating),
        ("passed", agreement.passed),
    ]
    if args.convergence_check:
        overall, _ = _convergence_deviation(cfg, traj)
        items.append(("convergence_max_deviation", overall))
    items += _solver_report_items(traj)
    _write_report(report_path, items)
    print(f"comparison report written to {report_path}")
    return EXIT_OK if agreement.passed else EXIT_MISMATCH


def cmd_sweep(cfg: ScenarioConfig, args) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep command requires a [sweep] section")
    if not cfg.system.is_two_mode:
        raise ConfigError("sweep requires the two-oscillator, single-TLS model")
    csv_path = _out_path(cfg.outputs.csv_path, args.out)

    rows = []
    for value in cfg.sweep.values:  # rows are independent; order of output is axis order
        spec = apply_sweep_value(cfg.system, cfg.sweep.field, value)
        sub = replace(cfg, system=spec, sweep=None)
        report = transform_params(spec)
        r1, r2, r3 = report.condition_ratios
        rho0, traj, layout = _run_trajectory(sub)
        obs = standard_observables(layout)
        prediction = analytic_asymptote(
            spec, expectation(rho0, obs["a1"]), expectation(rho0, obs["a2"])
        )
        estimate = fit_sync(traj, window_fraction=sub.fit.window_fraction)
        agreement = compare(prediction, estimate, sub.fit.tolerances)
        rows.append(
            [
                _fmt(value),
                _fmt(r1),
                _fmt(r2),
                _fmt(r3),
                _fmt(estimate.omega_fit),
                _fmt(estimate.phase_diff),
                "true" if agreement.passed else "false",
            ]
        )

    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("value,r1,r2,r3,omega_fit,phase_diff,passed\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    print(f"sweep table written to {csv_path}")
    return EXIT_OK


_COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = _Parser(prog="oscsync", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="scenario file path or bundled scenario name")
        p.add_argument("--strict", action="store_true")
        p.add_argument("--out", default=None, help="directory for output files")
        p.add_argument("--nmax", type=int, default=None, help="override oscillator truncation")
        p.add_argument("--convergence-check", action="store_true")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _load(args)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
