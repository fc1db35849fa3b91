"""Scenario configuration files.

Grammar (line oriented, UTF-8):

    # comment                     blank lines and trailing comments allowed
    [section]                     known sections: system, initial_state, time,
                                  solver, fit, outputs, sweep
    key = value                   value is one of:
                                    integer      42
                                    float        0.95, 1e-08, inf
                                    complex      0.7+0.3j  (Python literal)
                                    boolean      true / false
                                    array        [0.95, 1.01] or [[0.2, 0.21]]
                                                 (must close on the same line)
                                    string       anything else, taken verbatim

Serializing a parsed configuration and re-parsing it yields an identical
structure; the test suite holds this as an invariant.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import SolverOptions
from .metrics import FitTolerances
from .model import SystemSpec


class ConfigError(ValueError):
    """Malformed scenario file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class InitialStateConfig:
    kind: str
    alphas: tuple[complex, ...] | None = None
    ns: tuple[int, ...] | None = None
    tls: str = "minus"


@dataclass(frozen=True)
class TimeGridConfig:
    t_end: float
    n_points: int

    def __post_init__(self):
        if self.t_end <= 0:
            raise ConfigError("t_end must be positive")
        if self.n_points < 2:
            raise ConfigError("n_points must be at least 2")

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_points)


@dataclass(frozen=True)
class FitConfig:
    window_fraction: float = 0.25
    tolerances: FitTolerances = field(default_factory=FitTolerances)


@dataclass(frozen=True)
class OutputConfig:
    csv_path: str = "trajectory.csv"
    report_path: str = "report.txt"


@dataclass(frozen=True)
class SweepConfig:
    field: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class ScenarioConfig:
    system: SystemSpec
    initial_state: InitialStateConfig
    time: TimeGridConfig
    solver: SolverOptions
    fit: FitConfig
    outputs: OutputConfig
    sweep: SweepConfig | None = None


_INT_CHARS = set("+-0123456789")


def _parse_scalar(token: str, line: int):
    low = token.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    if token and set(token) <= _INT_CHARS and token not in ("+", "-"):
        try:
            return int(token)
        except ValueError:
            pass
    try:
        return float(token)
    except ValueError:
        pass
    if "j" in low:
        try:
            return complex(token)
        except ValueError:
            pass
    return token


def _split_top_level(body: str, line: int) -> list[str]:
    items, depth, cur = [], 0, []
    for ch in body:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise ConfigError("unbalanced ']' in array", line)
        if ch == "," and depth == 0:
            items.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise ConfigError("unbalanced '[' in array", line)
    items.append("".join(cur))
    return items


def _parse_value(raw: str, line: int):
    token = raw.strip()
    if not token:
        raise ConfigError("empty value", line)
    if token.startswith("["):
        if not token.endswith("]"):
            raise ConfigError("array must close on the same line", line)
        body = token[1:-1].strip()
        if not body:
            return []
        return [_parse_value(item, line) for item in _split_top_level(body, line)]
    return _parse_scalar(token, line)


def _parse_sections(text: str) -> dict[str, dict[str, tuple[object, int]]]:
    sections: dict[str, dict[str, tuple[object, int]]] = {}
    current: str | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("malformed section header", line_no)
            current = line[1:-1].strip()
            if not current:
                raise ConfigError("empty section name", line_no)
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line_no)
        if current is None:
            raise ConfigError("key outside of any [section]", line_no)
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError("empty key", line_no)
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", line_no)
        sections[current][key] = (_parse_value(value, line_no), line_no)
    return sections


_REQUIRED = object()


class _Section:
    def __init__(self, name: str, data: dict[str, tuple[object, int]]):
        self.name = name
        self._data = dict(data)

    def take(self, key: str, default=_REQUIRED):
        if key in self._data:
            value, _ = self._data.pop(key)
            return value
        if default is _REQUIRED:
            raise ConfigError(f"missing required key {key!r} in [{self.name}]")
        return default

    def line_of_leftover(self) -> tuple[str, int] | None:
        for key, (_, line) in self._data.items():
            return key, line
        return None


def _take_section(sections, name: str, required: bool = True) -> _Section | None:
    if name not in sections:
        if required:
            raise ConfigError(f"missing required section [{name}]")
        return None
    return _Section(name, sections.pop(name))


def _as_float_tuple(value, what: str) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise ConfigError(f"{what} must be an array")
    return tuple(float(v) for v in value)


def _as_matrix(value, what: str) -> tuple[tuple[float, ...], ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{what} must be a non-empty array")
    if not isinstance(value[0], list):
        value = [value]
    return tuple(tuple(float(x) for x in row) for row in value)


def parse_config(text: str) -> ScenarioConfig:
    sections = _parse_sections(text)

    sys_sec = _take_section(sections, "system")
    system = SystemSpec(
        omega=_as_float_tuple(sys_sec.take("omega"), "omega"),
        couplings=_as_matrix(sys_sec.take("couplings"), "couplings"),
        phases=_as_matrix(sys_sec.take("phases"), "phases"),
        gamma_decay=sys_sec.take("gamma"),
        omega0=float(sys_sec.take("omega0", 1.0)),
        n_max=int(sys_sec.take("n_max", 6)),
    )

    init_sec = _take_section(sections, "initial_state")
    kind = str(init_sec.take("kind"))
    alphas = init_sec.take("alphas", None)
    ns = init_sec.take("ns", None)
    if kind == "coherent" and alphas is None:
        raise ConfigError("initial_state kind 'coherent' requires 'alphas'")
    if kind == "fock" and ns is None:
        raise ConfigError("initial_state kind 'fock' requires 'ns'")
    initial_state = InitialStateConfig(
        kind=kind,
        alphas=None if alphas is None else tuple(complex(a) for a in alphas),
        ns=None if ns is None else tuple(int(n) for n in ns),
        tls=str(init_sec.take("tls", "minus")),
    )

    time_sec = _take_section(sections, "time")
    time_cfg = TimeGridConfig(
        t_end=float(time_sec.take("t_end")), n_points=int(time_sec.take("n_points"))
    )

    solver = SolverOptions()
    solver_sec = _take_section(sections, "solver", required=False)
    if solver_sec is not None:
        solver = SolverOptions(
            rel_tol=float(solver_sec.take("rel_tol", solver.rel_tol)),
            abs_tol=float(solver_sec.take("abs_tol", solver.abs_tol)),
            max_step=float(solver_sec.take("max_step", solver.max_step)),
            positivity_check_stride=int(
                solver_sec.take("positivity_check_stride", solver.positivity_check_stride)
            ),
        )

    fit = FitConfig()
    fit_sec = _take_section(sections, "fit", required=False)
    if fit_sec is not None:
        tol = FitTolerances(
            freq_rel_tol=float(fit_sec.take("freq_rel_tol", 0.02)),
            phase_tol=float(fit_sec.take("phase_tol", 0.15)),
            amp_rel_tol=float(fit_sec.take("amp_rel_tol", 0.15)),
        )
        fit = FitConfig(
            window_fraction=float(fit_sec.take("window_fraction", 0.25)), tolerances=tol
        )

    outputs = OutputConfig()
    out_sec = _take_section(sections, "outputs", required=False)
    if out_sec is not None:
        outputs = OutputConfig(
            csv_path=str(out_sec.take("csv_path", outputs.csv_path)),
            report_path=str(out_sec.take("report_path", outputs.report_path)),
        )

    sweep = None
    sweep_sec = _take_section(sections, "sweep", required=False)
    if sweep_sec is not None:
        sweep = SweepConfig(
            field=str(sweep_sec.take("field")),
            values=_as_float_tuple(sweep_sec.take("values"), "values"),
        )

    for sec in (sys_sec, init_sec, time_sec, solver_sec, fit_sec, out_sec, sweep_sec):
        if sec is None:
            continue
        leftover = sec.line_of_leftover()
        if leftover:
            key, line = leftover
            raise ConfigError(f"unknown key {key!r} in [{sec.name}]", line)
    if sections:
        raise ConfigError(f"unknown section [{next(iter(sections))}]")
    return ScenarioConfig(
        system=system,
        initial_state=initial_state,
        time=time_cfg,
        solver=solver,
        fit=fit,
        outputs=outputs,
        sweep=sweep,
    )


def parse_config_file(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, complex):
        return repr(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _fmt_value(value) -> str:
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt_value(v) for v in value) + "]"
    return _fmt_scalar(value)


def serialize_config(cfg: ScenarioConfig) -> str:
    sys_spec = cfg.system
    lines = ["[system]"]
    lines.append(f"omega = {_fmt_value(list(sys_spec.omega))}")
    lines.append(f"omega0 = {_fmt_scalar(sys_spec.omega0)}")
    lines.append(f"couplings = {_fmt_value([list(r) for r in sys_spec.couplings])}")
    lines.append(f"phases = {_fmt_value([list(r) for r in sys_spec.phases])}")
    lines.append(f"gamma = {_fmt_value(list(sys_spec.gamma_decay))}")
    lines.append(f"n_max = {sys_spec.n_max}")

    ini = cfg.initial_state
    lines += ["", "[initial_state]", f"kind = {ini.kind}"]
    if ini.alphas is not None:
        lines.append(f"alphas = {_fmt_value([complex(a) for a in ini.alphas])}")
    if ini.ns is not None:
        lines.append(f"ns = {_fmt_value(list(ini.ns))}")
    lines.append(f"tls = {ini.tls}")

    lines += [
        "",
        "[time]",
        f"t_end = {_fmt_scalar(cfg.time.t_end)}",
        f"n_points = {cfg.time.n_points}",
    ]

    sol = cfg.solver
    lines += [
        "",
        "[solver]",
        f"rel_tol = {_fmt_scalar(sol.rel_tol)}",
        f"abs_tol = {_fmt_scalar(sol.abs_tol)}",
        f"max_step = {_fmt_scalar(sol.max_step)}",
        f"positivity_check_stride = {sol.positivity_check_stride}",
    ]

    fit = cfg.fit
    lines += [
        "",
        "[fit]",
        f"window_fraction = {_fmt_scalar(fit.window_fraction)}",
        f"freq_rel_tol = {_fmt_scalar(fit.tolerances.freq_rel_tol)}",
        f"phase_tol = {_fmt_scalar(fit.tolerances.phase_tol)}",
        f"amp_rel_tol = {_fmt_scalar(fit.tolerances.amp_rel_tol)}",
    ]

    lines += [
        "",
        "[outputs]",
        f"csv_path = {cfg.outputs.csv_path}",
        f"report_path = {cfg.outputs.report_path}",
    ]

    if cfg.sweep is not None:
        lines += [
            "",
            "[sweep]",
            f"field = {cfg.sweep.field}",
            f"values = {_fmt_value(list(cfg.sweep.values))}",
        ]
    return "\n".join(lines) + "\n"


_SWEEPABLE = ("gamma", "omega0", "omega1", "omega2", "g1", "g2", "theta1", "theta2")


def apply_sweep_value(spec: SystemSpec, field_name: str, value: float) -> SystemSpec:
    """Return a copy of `spec` with one scalar parameter replaced.

    Supported fields: gamma, omega0, omega{k}, g{k}, theta{k} (k is a 1-based
    oscillator index; g/theta address the first TLS row).
    """
    value = float(value)
    if field_name == "gamma":
        return replace(spec, gamma_decay=(value,) * spec.n_tls)
    if field_name == "omega0":
        return replace(spec, omega0=value)
    for prefix, attr in (("omega", "omega"), ("g", "couplings"), ("theta", "phases")):
        if field_name.startswith(prefix) and field_name[len(prefix):].isdigit():
            k = int(field_name[len(prefix):]) - 1
            if not 0 <= k < spec.n_oscillators:
                raise ConfigError(f"sweep field {field_name!r}: oscillator index out of range")
            if attr == "omega":
                omega = list(spec.omega)
                omega[k] = value
                return replace(spec, omega=tuple(omega))
            rows = [list(r) for r in getattr(spec, attr)]
            rows[0][k] = value
            return replace(spec, **{attr: tuple(tuple(r) for r in rows)})
    raise ConfigError(
        f"unknown sweep field {field_name!r}; expected one of {', '.join(_SWEEPABLE)}"
    )
