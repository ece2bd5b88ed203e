"""Command-line front end: scenario runner, figure presets and transient fitting.

Scenario files are JSON objects::

    {
      "name": "single_qubit",              # optional, default: file stem
      "array": {"n_sites": 1, "lattice_phase": 1.5708, "gamma_1d": 1.0},
      "pulse": {"detuning": 0.0, "t_on": 0.0, "t_off": 20.0, "edge": "full"},
      "eit": {"control_rabi": 4.0},        # optional, needs level_scheme three_level
      "disorder": {"kind": "gaussian_detuning", "sigma": 0.5,
                   "realizations": 100, "base_seed": 7},       # optional
      "methods": ["residue", "ode"],       # residue | ode | spectral | bessel (| auto)
      "window": 20.0,                      # time after t_off to keep
      "dt": 0.01                           # sample spacing of residue/bessel traces
    }

Keys under ``array``/``pulse``/``eit`` mirror the dataclass fields. Without
disorder every method produces the full square-pulse response; ``edge``
restricts the written window to the rising (``[t_on, t_off)``) or falling
(``[t_off, t_off + window]``) part. With disorder the falling-edge intensity
is ensemble averaged per engine.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .ensemble import (ENGINES, DisorderKind, DisorderSpec, EnsembleScenario, ensemble_average,
                       fit_parameters)
from .errors import (ConfigError, ConvergenceError, FitError, NumericalError, RoutingError,
                     WQEDError)
from .model import (ArrayConfig, EITConfig, Edge, LevelScheme, PulseSpec, build_array,
                    build_eit, build_pulse, lattice)
from .modes import array_modes
from .oracle import (SpectralGrid, ode_propagate_qubits, ode_propagate_qutrits,
                     spectral_propagate)
from .response import (SPECTRUM_CSV_HEADER, ResponseFn, finite_n_poles, t_cont, t_eit,
                       t_finite_n, t_resolvent)
from .transients import (TimeSeries, beat_frequency, bessel_transient, edge_transient,
                         eit_pole_residues, full_pulse, pole_sum_transient,
                         read_timeseries_csv, rebound_amplitude, residue_transient_eit,
                         residue_transient_qubits, write_timeseries_csv)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
OUT_ENV = "WQED_OUT"
DEFAULT_OUT = "wqed_output"
CSV_SCHEMA_VERSION = 1
CURVES_CSV_X = "gamma_prime_tau"
POLES_CSV_HEADER = ["n_atoms", "re_pole", "im_pole", "kind"]
METHODS = ("residue", "ode", "spectral", "bessel")

HALF_PI = math.pi / 2

# figure parameter sets (rates in units of G'); pulse length, sweep values of
# N_d and sigma and N of the broadening runs are repo conventions
PRESETS: dict[str, dict] = {
    "fig1": {"n_atoms": 20, "gamma_1d": 0.25, "detuning": 0.37, "lattice_phase": HALF_PI,
             "t_off": 20.0, "window": 20.0},
    "fig2a": {"n_atoms": (1, 2, 200), "optical_depth": 5.0, "detuning": 0.3,
              "lattice_phase": HALF_PI, "delta_range": (-6.0, 6.0)},
    "fig2b": {"n_atoms": (1, 2, 200), "optical_depth": 5.0, "detuning": 0.3,
              "lattice_phase": HALF_PI, "window": 20.0},
    "fig2c": {"n_atoms": (1, 2, 200), "optical_depth": 5.0, "detuning": 0.3,
              "lattice_phase": HALF_PI},
    "fig3": {"n_sites": 300, "gamma_1d": 0.08, "detuning": 0.3, "lattice_phase": HALF_PI,
             "n_filled": (50, 150, 300), "realizations": 100, "window": 20.0},
    "fig4a": {"n_atoms": 5, "n_sites": 10, "gamma_1d": 2.5, "detuning": 0.5,
              "lattice_phase": HALF_PI, "realizations": 100, "window": 10.0},
    "fig4b": {"n_atoms": 5, "z_max": 5 * math.pi, "gamma_1d": 2.5, "detuning": 0.5,
              "lattice_phase": HALF_PI, "realizations": 100, "window": 10.0},
    "fig5a": {"n_atoms": 100, "gamma_1d": 0.2, "detuning": 0.0, "lattice_phase": HALF_PI,
              "sigma": (0.0, 0.5, 1.0), "realizations": 100, "window": 20.0},
    "fig5b": {"n_atoms": 5, "gamma_1d": 25.0, "detuning": 0.0, "lattice_phase": HALF_PI,
              "sigma": (0.0, 0.25, 1.25), "realizations": 100, "window": 5.0},
    "fig6a": {"n_atoms": (1, 2, 50), "optical_depth": 50.0, "control_rabi": 4.0,
              "detuning": 0.0, "two_photon_detuning": 0.0, "lattice_phase": HALF_PI,
              "t_off": 10.0, "window": 10.0},
    "fig6b": {"n_atoms": 1, "optical_depth": 1.0, "control_rabi": 4.0, "detuning": 0.0,
              "two_photon_detuning": 0.0, "lattice_phase": HALF_PI, "window": 10.0},
}
FIGURE_IDS = tuple(PRESETS)


# ---------------------------------------------------------------------------
# output helpers


@dataclass
class Curves:
    """Curves sharing one abscissa, written as a CSV plus an SVG overlay."""

    x: np.ndarray
    columns: dict
    x_label: str = CURVES_CSV_X
    y_label: str = "I / I0"

    def write_csv(self, path) -> Path:
        path = Path(path)
        names = list(self.columns)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([self.x_label] + names)
            for i, xv in enumerate(self.x):
                w.writerow([repr(float(xv))] + [repr(float(self.columns[k][i])) for k in names])
        return path


_COLOURS = ("#d62728", "#2ca02c", "#1f77b4", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def write_svg(path, curves: list, x_label: str = "t", y_label: str = "I / I0",
              title: str = "", points: bool = False, width: int = 640,
              height: int = 400) -> Path:
    """Static overlay of ``(label, x, y)`` curves: polylines (or dots) on plain axes."""
    left, right, top, bottom = 60, 150, 30, 45
    xs = np.concatenate([np.asarray(c[1], float) for c in curves])
    ys = np.concatenate([np.asarray(c[2], float) for c in curves])
    x0, x1 = float(np.nanmin(xs)), float(np.nanmax(xs))
    y0, y1 = float(np.nanmin(ys)), float(np.nanmax(ys))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = width - left - right, height - top - bottom

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
           f'<text x="{left}" y="{top + ph + 15}">{x0:.3g}</text>',
           f'<text x="{left + pw}" y="{top + ph + 15}" text-anchor="end">{x1:.3g}</text>',
           f'<text x="{left - 5}" y="{top + ph}" text-anchor="end">{y0:.3g}</text>',
           f'<text x="{left - 5}" y="{top + 10}" text-anchor="end">{y1:.3g}</text>',
           f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">{x_label}</text>',
           f'<text x="15" y="{top + ph / 2}" transform="rotate(-90 15 {top + ph / 2})" '
           f'text-anchor="middle">{y_label}</text>']
    if title:
        out.append(f'<text x="{left + pw / 2}" y="18" text-anchor="middle">{title}</text>')
    for k, (label, x, y) in enumerate(curves):
        colour = _COLOURS[k % len(_COLOURS)]
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        step = max(1, x.size // 2000)
        if points:
            out.extend(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="2.5" fill="{colour}"/>'
                       for a, b in zip(x[::step], y[::step]))
        else:
            pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[::step], y[::step])
                           if np.isfinite(b))
            out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.3" '
                       f'points="{pts}"/>')
        ly = top + 12 + 16 * k
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" '
                   f'y2="{ly - 4}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly}">{label}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path


def output_dir(cli_value: str | None) -> Path:
    return Path(cli_value or os.environ.get(OUT_ENV) or DEFAULT_OUT)


# ---------------------------------------------------------------------------
# scenario files


@dataclass(frozen=True)
class Scenario:
    name: str
    array: ArrayConfig
    pulse: PulseSpec
    eit: EITConfig | None = None
    disorder: DisorderSpec | None = None
    methods: tuple = ("residue",)
    window: float = 20.0
    dt: float = 0.01


_SCENARIO_KEYS = {"name", "array", "pulse", "eit", "disorder", "methods", "window", "dt"}


def _line_of(text: str, field_path: str | None) -> int | None:
    """First line mentioning the last key of a dotted field path."""
    if not field_path:
        return None
    key = field_path.split(".")[-1]
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _build_disorder(raw, base: ArrayConfig, seed: int | None) -> DisorderSpec:
    if not isinstance(raw, Mapping):
        raise ConfigError("disorder section must be an object", field="disorder")
    allowed = {"kind", "realizations", "base_seed", "n_filled", "z_max", "sigma"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field="disorder." + sorted(unknown)[0])
    try:
        kind = DisorderKind(raw.get("kind"))
    except ValueError:
        raise ConfigError(f"unknown disorder kind {raw.get('kind')!r}",
                          field="disorder.kind") from None
    for key in ("realizations", "base_seed", "n_filled"):
        v = raw.get(key)
        if v is not None and (isinstance(v, bool) or not isinstance(v, int)):
            raise ConfigError("expected an integer", field="disorder." + key)
    for key in ("z_max", "sigma"):
        v = raw.get(key)
        if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))):
            raise ConfigError("expected a number", field="disorder." + key)
    try:
        return DisorderSpec(kind, base, raw.get("realizations", 100),
                            seed if seed is not None else raw.get("base_seed", 0),
                            raw.get("n_filled"), raw.get("z_max"), float(raw.get("sigma", 0.0)))
    except ConfigError as exc:
        raise ConfigError(str(exc).split("] ", 1)[-1], field="disorder." + (exc.field or "")) \
            from None


def parse_scenario(raw, name: str = "scenario", seed: int | None = None) -> Scenario:
    """Validate a parsed JSON object into a :class:`Scenario`."""
    if not isinstance(raw, Mapping):
        raise ConfigError("scenario must be a JSON object")
    unknown = set(raw) - _SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field=sorted(unknown)[0])
    for key in ("array", "pulse"):
        if key not in raw:
            raise ConfigError("missing required section", field=key)
    array = build_array(raw["array"], prefix="array.")
    pulse = build_pulse(raw["pulse"], prefix="pulse.")
    eit = build_eit(raw["eit"], prefix="eit.") if raw.get("eit") is not None else None
    if eit is not None and array.level_scheme is not LevelScheme.THREE_LEVEL:
        raise ConfigError("an eit section needs level_scheme = three_level",
                          field="array.level_scheme")
    if eit is None and array.level_scheme is LevelScheme.THREE_LEVEL:
        raise ConfigError("three_level arrays need an eit section", field="eit")
    methods = raw.get("methods", ["residue"])
    if isinstance(methods, str):
        methods = [methods]
    if not isinstance(methods, list) or not methods:
        raise ConfigError("need a non-empty list of methods", field="methods")
    disorder = None
    if raw.get("disorder") is not None:
        disorder = _build_disorder(raw["disorder"], array, seed)
        valid = ENGINES + ("auto",)
        if eit is not None:
            raise ConfigError("disorder ensembles are implemented for two-level arrays",
                              field="disorder")
    else:
        valid = METHODS
    for m in methods:
        if m not in valid:
            raise ConfigError(f"unknown method {m!r} (choose from {', '.join(valid)})",
                              field="methods")
    if len(set(methods)) != len(methods):
        raise ConfigError("repeated method", field="methods")
    if "bessel" in methods and (eit is not None or not array.homogeneous):
        raise ConfigError("the bessel method describes identical two-level emitters",
                          field="methods")
    window = raw.get("window", 20.0)
    dt = raw.get("dt", 0.01)
    for key, v in (("window", window), ("dt", dt)):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError("expected a positive number", field=key)
    nm = raw.get("name", name)
    if not isinstance(nm, str) or not re.fullmatch(r"[\w.-]+", nm):
        raise ConfigError("name must be a plain file-name token", field="name")
    return Scenario(nm, array, pulse, eit, disorder, tuple(methods), float(window), float(dt))


def load_scenario(path, seed: int | None = None) -> Scenario:
    """Read and validate a scenario file; :class:`ConfigError` carries field and line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    try:
        return parse_scenario(raw, path.stem, seed)
    except ConfigError as exc:
        if exc.line is None:
            raise ConfigError(str(exc).split("] ", 1)[-1], field=exc.field,
                              line=_line_of(text, exc.field)) from None
        raise


# ---------------------------------------------------------------------------
# running


class MethodFailure(WQEDError):
    def __init__(self, method: str, exc: Exception):
        self.method = method
        self.cause = exc
        super().__init__(f"method '{method}' failed: {type(exc).__name__}: {exc}")


def steady_transmission(sc: Scenario) -> complex:
    arr, d = sc.array, sc.pulse.detuning
    if sc.eit is not None:
        return complex(t_eit(d, array_modes(arr), sc.eit, arr.gamma_prime, d))
    if arr.homogeneous:
        return complex(t_finite_n(d, array_modes(arr), arr.gamma_prime))
    return complex(t_resolvent(d, arr))


def _sample_times(sc: Scenario) -> np.ndarray:
    p = sc.pulse
    n = int(math.ceil((p.duration + sc.window) / sc.dt - 1e-9)) + 1
    return p.t_on + sc.dt * np.arange(n)


def _spectral_grid(sc: Scenario, response: ResponseFn) -> SpectralGrid:
    arr, p = sc.array, sc.pulse
    modes = array_modes(arr)
    rate = (arr.gamma_prime + float(np.max(modes.decays)) + float(np.max(np.abs(modes.shifts)))
            + abs(p.detuning) + float(np.max(np.abs(arr.detunings), initial=0.0)))
    settle = 60.0 / arr.gamma_prime
    if sc.eit is not None and sc.eit.control_rabi > 0:
        rate += 2 * sc.eit.control_rabi + abs(sc.eit.two_photon_detuning)
        slow = float(np.min(-response.poles.imag))
        settle = max(settle, 30.0 / max(slow, 1e-3))
    span = 1.01 * (p.duration + max(sc.window, settle))
    return SpectralGrid.for_problem(rate, span, arr.gamma_prime, align=p.duration)


def _residue_run(sc: Scenario, notes: list) -> TimeSeries:
    arr, p = sc.array, sc.pulse
    if not arr.homogeneous:
        raise RoutingError("the residue method assumes identical emitters; per-site detunings "
                           "need 'spectral' or 'ode'")
    modes = array_modes(arr)
    gp, d = arr.gamma_prime, p.detuning
    if sc.eit is not None and sc.eit.control_rabi > 0:
        eit = sc.eit
        if abs(eit.two_photon_detuning - d) <= 1e-12:
            def edge(t, e, t0):
                return residue_transient_eit(t, modes, eit, d, gp, e, t0)
        else:
            poles, res = eit_pole_residues(modes, eit, gp, d)
            tc = complex(t_eit(d, modes, eit, gp, d))

            def edge(t, e, t0):
                return pole_sum_transient(t, poles, res, tc, d, e, t0)
    else:
        if sc.eit is not None:
            notes.append("residue: control_rabi = 0, two-level residue sum used")

        def edge(t, e, t0):
            return edge_transient(t, modes, d, gp, e, t0)
    return full_pulse(edge, p, _sample_times(sc))


def _spectral_run(sc: Scenario, response: ResponseFn | None = None) -> TimeSeries:
    arr, p = sc.array, sc.pulse
    if response is None:
        modes = array_modes(arr)
        if sc.eit is not None:
            response = ResponseFn.eit(modes, sc.eit, arr.gamma_prime, p.detuning)
        elif arr.homogeneous:
            response = ResponseFn.finite_n(modes, arr.gamma_prime)
        else:
            response = ResponseFn.resolvent(arr, "eig")
    return spectral_propagate(response, p, _spectral_grid(sc, response), p.t_on,
                              p.t_off + sc.window)


def _bessel_run(sc: Scenario, notes: list) -> TimeSeries:
    arr, p = sc.array, sc.pulse
    b = arr.n_atoms * arr.gamma_1d / 2
    try:
        return full_pulse(lambda t, e, t0: bessel_transient(t, b, arr.gamma_prime, p.detuning,
                                                            e, t0), p, _sample_times(sc))
    except ConvergenceError as exc:
        notes.append(f"bessel: series did not converge ({exc}); spectral oracle on the "
                     "continuous-medium response substituted")
        ts = _spectral_run(sc, ResponseFn.continuous(b, arr.gamma_prime))
        ts.method = "bessel_via_spectral_oracle"
        return ts


def _ode_run(sc: Scenario) -> TimeSeries:
    p = sc.pulse
    span = (p.t_on, p.t_off + sc.window)
    if sc.eit is not None:
        return ode_propagate_qutrits(sc.array, sc.eit, p, t_span=span)
    return ode_propagate_qubits(sc.array, p, t_span=span)


def _restrict(ts: TimeSeries, sc: Scenario) -> TimeSeries:
    p = sc.pulse
    if p.edge is Edge.RISING:
        out = ts.window(0.0, p.duration - 0.5 * ts.dt)
    elif p.edge is Edge.FALLING:
        out = ts.window(p.duration, p.duration + sc.window)
    else:
        return ts
    out.edge = p.edge.value
    return out


def _value_at(ts: TimeSeries, tau: float) -> float:
    k = int(round((tau - (ts.t_start - ts.t0)) / ts.dt))
    k = min(max(k, 0), ts.samples.size - 1)
    return float(ts.intensity[k])


def summarize(ts: TimeSeries, sc: Scenario) -> dict:
    """Plateau, edge intensities and dominant tail oscillation of a full-pulse trace."""
    dur = sc.pulse.duration
    row = {"method": ts.method,
           "rising_0+": _value_at(ts, 0.0),
           "plateau": _value_at(ts, dur - ts.dt),
           "falling_0+": _value_at(ts, dur)}
    row["beat_freq"] = _tail_frequency(ts, dur, dur + sc.window)
    return row


def _tail_frequency(ts: TimeSeries, start: float, stop: float) -> float:
    """Beat frequency of the falling tail, NaN when the decay is monotone."""
    if rebound_amplitude(ts.window(start, stop)) < 1e-9:
        return float("nan")
    try:
        nu = beat_frequency(ts, start, stop)
    except (ValueError, np.linalg.LinAlgError):
        return float("nan")
    # fewer than one intensity period in the window is not an oscillation
    return nu if nu >= math.pi / (stop - start) else float("nan")


def _format_table(rows: list, columns: list) -> str:
    def fmt(v):
        if isinstance(v, float):
            return "-" if math.isnan(v) else f"{v:.6g}"
        return str(v)

    cells = [[fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(x[i]) for x in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


@dataclass
class RunResult:
    scenario: Scenario
    series: dict = field(default_factory=dict)
    ensembles: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    plateau_analytic: float = float("nan")


def execute(sc: Scenario, threads: int = 1) -> RunResult:
    """Run every requested method; nothing is written here."""
    res = RunResult(sc)
    if sc.disorder is not None:
        ens = EnsembleScenario(sc.pulse.detuning, sc.window,
                               int(round(sc.window / sc.dt)) + 1, sc.pulse.duration)
        for m in sc.methods:
            try:
                r = ensemble_average(sc.disorder, ens, m, threads=threads)
            except (NumericalError, RoutingError) as exc:
                raise MethodFailure(m, exc) from exc
            res.ensembles[m] = r
            row = {"method": f"ensemble/{r.mean.info.get('engine', m)}",
                   "falling_0+": float(r.mean.intensity[0])}
            row["beat_freq"] = _tail_frequency(r.mean, 0.0, sc.window)
            res.rows.append(row)
        res.plateau_analytic = abs(steady_transmission(sc)) ** 2
        res.notes.append(f"{sc.disorder.realizations} realizations, base_seed "
                         f"{sc.disorder.base_seed}; plateau column refers to the clean array")
        return res
    runners: dict[str, Callable[[], TimeSeries]] = {
        "residue": lambda: _residue_run(sc, res.notes),
        "ode": lambda: _ode_run(sc),
        "spectral": lambda: _spectral_run(sc),
        "bessel": lambda: _bessel_run(sc, res.notes),
    }
    for m in sc.methods:
        try:
            ts = runners[m]()
        except RoutingError:
            raise
        except (NumericalError, ValueError) as exc:
            raise MethodFailure(m, exc) from exc
        res.rows.append(summarize(ts, sc))
        res.series[m] = _restrict(ts, sc)
    t = steady_transmission(sc)
    res.plateau_analytic = abs(t) ** 2
    if sc.eit is not None and sc.eit.control_rabi == 0:
        arr = sc.array
        t2 = complex(t_finite_n(sc.pulse.detuning, array_modes(arr), arr.gamma_prime))
        res.notes.append(f"control_rabi = 0: EIT response coincides with the two-level result "
                         f"(|t_eit - t_two_level| = {abs(t - t2):.2e})")
    return res


def write_run(res: RunResult, out: Path) -> list:
    sc = res.scenario
    out.mkdir(parents=True, exist_ok=True)
    gp = sc.array.gamma_prime
    written = []
    curves = []
    for m, ts in res.series.items():
        written.append(write_timeseries_csv(ts, out / f"{sc.name}_{m}.csv", gp))
        curves.append((m, ts.tau, ts.intensity))
    for m, r in res.ensembles.items():
        written.append(r.to_csv(out / f"{sc.name}_ensemble_{m}.csv", gp))
        curves.append((f"ensemble {m}", r.mean.tau, r.mean.intensity))
    written.append(write_svg(out / f"{sc.name}_overlay.svg", curves, "Gamma' (t - t0)",
                             "I / I0", sc.name))
    return written


def summary_text(res: RunResult) -> str:
    lines = [f"scenario {res.scenario.name}: analytic plateau |t|^2 = "
             f"{res.plateau_analytic:.6g} I0"]
    cols = ["method", "rising_0+", "plateau", "falling_0+", "beat_freq"]
    lines.append(_format_table(res.rows, cols))
    lines += [f"note: {n}" for n in res.notes]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# figure reproduction


def _od_array(n, od, phase, **kw) -> ArrayConfig:
    return lattice(n, phase, od / n, **kw)


def _fig1(p):
    arr = lattice(p["n_atoms"], p["lattice_phase"], p["gamma_1d"])
    pulse = PulseSpec(p["detuning"], 0.0, p["t_off"])
    sc = Scenario("fig1", arr, pulse, window=p["window"])
    ts = _residue_run(sc, [])
    inp = np.where((ts.tau >= 0) & (ts.tau < pulse.duration), 1.0, 0.0)
    return {"fig1": Curves(ts.tau, {"input": inp, "output_N20": ts.intensity})}, {}


def _fig2a(p):
    d = np.linspace(*p["delta_range"], 2401)
    cols = {}
    for n in p["n_atoms"]:
        arr = _od_array(n, p["optical_depth"], p["lattice_phase"])
        cols[f"N{n}"] = np.abs(t_finite_n(d, array_modes(arr), 1.0)) ** 2
    cols["continuous"] = np.abs(t_cont(d, p["optical_depth"] / 2, 1.0)) ** 2
    return {"fig2a": Curves(d, cols, SPECTRUM_CSV_HEADER[0], "|t|^2")}, {}


def _fig2b(p):
    t = np.linspace(0.0, p["window"], 4001)
    cols = {}
    for n in p["n_atoms"]:
        arr = _od_array(n, p["optical_depth"], p["lattice_phase"])
        cols[f"N{n}"] = residue_transient_qubits(t, array_modes(arr), p["detuning"], 1.0,
                                                 "falling").intensity
    cols["continuous"] = bessel_transient(t, p["optical_depth"] / 2, 1.0, p["detuning"],
                                          "falling").intensity
    return {"fig2b": Curves(t, cols)}, {}


def _fig2c(p):
    rows = []
    for n in p["n_atoms"]:
        arr = _od_array(n, p["optical_depth"], p["lattice_phase"])
        for z in finite_n_poles(array_modes(arr), 1.0):
            rows.append([n, z.real, z.imag, "pole"])
    rows.append(["inf", 0.0, -0.5, "essential_singularity"])
    return {}, {"fig2c_poles": rows}


def _ensemble_fig(name, p, specs, engine="residue"):
    cols = {}
    t = None
    for label, spec, ens, refs in specs:
        r = ensemble_average(spec, ens, engine)
        t = r.mean.tau
        cols[label] = r.mean.intensity
        for rl, ref in refs(t):
            cols[rl] = ref
    return {name: Curves(t, cols)}, {}


def _fig3(p):
    base = ArrayConfig(p["n_sites"], tuple(range(p["n_sites"])), p["lattice_phase"],
                       p["gamma_1d"])
    ens = EnsembleScenario(p["detuning"], p["window"], 2001)

    def refs_for(nd):
        def refs(t):
            perfect = lattice(nd, p["lattice_phase"], p["gamma_1d"])
            yield f"perfect_N{nd}", residue_transient_qubits(
                t, array_modes(perfect), p["detuning"], 1.0, "falling").intensity
            yield f"bessel_N{nd}", bessel_transient(t, nd * p["gamma_1d"] / 2, 1.0,
                                                    p["detuning"], "falling").intensity
        return refs

    specs = [(f"fill_N{nd}", DisorderSpec("imperfect_fill", base, p["realizations"], 0,
                                          n_filled=nd), ens, refs_for(nd))
             for nd in p["n_filled"]]
    return _ensemble_fig("fig3", p, specs)


def _perfect_ref(p):
    def refs(t):
        arr = lattice(p["n_atoms"], p["lattice_phase"], p["gamma_1d"])
        yield "perfect", residue_transient_qubits(t, array_modes(arr), p["detuning"], 1.0,
                                                  "falling").intensity
    return refs


def _fig4a(p):
    base = ArrayConfig(p["n_sites"], tuple(range(p["n_sites"])), p["lattice_phase"],
                       p["gamma_1d"])
    spec = DisorderSpec("imperfect_fill", base, p["realizations"], 0, n_filled=p["n_atoms"])
    ens = EnsembleScenario(p["detuning"], p["window"], 2001)
    return _ensemble_fig("fig4a", p, [("average", spec, ens, _perfect_ref(p))])


def _fig4b(p):
    base = lattice(p["n_atoms"], p["lattice_phase"], p["gamma_1d"])
    spec = DisorderSpec("random_positions", base, p["realizations"], 0, z_max=p["z_max"])
    ens = EnsembleScenario(p["detuning"], p["window"], 2001)
    return _ensemble_fig("fig4b", p, [("average", spec, ens, _perfect_ref(p))])


def _fig5(name):
    def run(p):
        base = lattice(p["n_atoms"], p["lattice_phase"], p["gamma_1d"])
        ens = EnsembleScenario(p["detuning"], p["window"], 2001)
        cols = {}
        t = None
        for s in p["sigma"]:
            spec = DisorderSpec("gaussian_detuning", base, p["realizations"], 0, sigma=s)
            r = ensemble_average(spec, ens, "auto")
            if t is None:
                t = r.mean.tau
            # engines differ in sample spacing: bring every curve onto the first grid
            cols[f"sigma_{s:g}"] = np.interp(t, r.mean.tau, r.mean.intensity)
        return {name: Curves(t, cols)}, {}
    return run


def _fig6a(p):
    cols = {}
    t = np.linspace(0.0, p["t_off"] + p["window"], 8001)
    pulse = PulseSpec(p["detuning"], 0.0, p["t_off"])
    eit = EITConfig(p["control_rabi"], p["two_photon_detuning"])
    for n in p["n_atoms"]:
        arr = _od_array(n, p["optical_depth"], p["lattice_phase"],
                        level_scheme="three_level")
        modes = array_modes(arr)
        ts = full_pulse(lambda tt, e, t0: residue_transient_eit(tt, modes, eit, p["detuning"],
                                                                1.0, e, t0), pulse, t)
        cols[f"N{n}"] = ts.intensity
    return {"fig6a": Curves(t, cols)}, {}


def _fig6b(p):
    t = np.linspace(0.0, p["window"], 4001)
    arr = _od_array(p["n_atoms"], p["optical_depth"], p["lattice_phase"],
                    level_scheme="three_level")
    modes = array_modes(arr)
    eit = EITConfig(p["control_rabi"], p["two_photon_detuning"])
    osc = residue_transient_eit(t, modes, eit, p["detuning"], 1.0, "falling").intensity
    ref = residue_transient_qubits(t, modes, p["detuning"], 1.0, "falling").intensity
    return {"fig6b": Curves(t, {f"control_rabi_{p['control_rabi']:g}": osc,
                                "control_rabi_0": ref})}, {}


_FIGURES = {"fig1": _fig1, "fig2a": _fig2a, "fig2b": _fig2b, "fig2c": _fig2c, "fig3": _fig3,
            "fig4a": _fig4a, "fig4b": _fig4b, "fig5a": _fig5("fig5a"), "fig5b": _fig5("fig5b"),
            "fig6a": _fig6a, "fig6b": _fig6b}


def reproduce(fig_id: str, out: Path) -> list:
    """Compute the preset curves of ``fig_id`` and write CSV + SVG files into ``out``."""
    if fig_id not in PRESETS:
        raise ConfigError(f"unknown figure id {fig_id!r}", field="fig-id")
    curves, tables = _FIGURES[fig_id](PRESETS[fig_id])
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, c in curves.items():
        written.append(c.write_csv(out / f"{name}.csv"))
        written.append(write_svg(out / f"{name}.svg",
                                 [(k, c.x, v) for k, v in c.columns.items()],
                                 c.x_label, c.y_label, name))
    for name, rows in tables.items():
        path = out / f"{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(POLES_CSV_HEADER)
            w.writerows([[r[0], repr(float(r[1])), repr(float(r[2])), r[3]] for r in rows])
        written.append(path)
        pts = [(f"N={n}", [r[1] for r in rows if r[0] == n], [r[2] for r in rows if r[0] == n])
               for n in dict.fromkeys(r[0] for r in rows)]
        written.append(write_svg(out / f"{name}.svg", pts, "Re(delta) / G'", "Im(delta) / G'",
                                 name, points=True))
    return written


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wqed-precursors",
                                 description="Broadband pulse transients in waveguide-QED arrays")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a JSON scenario file")
    r.add_argument("config")
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--seed", type=int, default=None, help="override disorder.base_seed")
    f = sub.add_parser("reproduce", help="recompute the curves of one figure preset")
    f.add_argument("fig_id", metavar="fig-id", help=", ".join(FIGURE_IDS))
    f.add_argument("--out")
    t = sub.add_parser("fit", help="fit N, G1D and Delta to a falling-edge intensity CSV")
    t.add_argument("csv")
    t.add_argument("--nmax", type=int, default=50)
    t.add_argument("--t0", type=float, default=None,
                   help="switch-off time in the file's time column (default: first sample)")
    t.add_argument("--gamma-prime", type=float, default=1.0)
    t.add_argument("--lattice-phase", type=float, default=HALF_PI)
    return ap


def _cmd_run(args) -> int:
    if args.threads < 1:
        raise ConfigError("threads must be >= 1", field="--threads")
    sc = load_scenario(args.config, args.seed)
    res = execute(sc, args.threads)
    out = output_dir(args.out)
    files = write_run(res, out)
    print(summary_text(res))
    print("wrote " + ", ".join(str(p) for p in files))
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    if args.fig_id not in PRESETS:
        raise ConfigError(f"unknown figure id {args.fig_id!r}; choose from "
                          f"{', '.join(FIGURE_IDS)}", field="fig-id")
    files = reproduce(args.fig_id, output_dir(args.out))
    print("wrote " + ", ".join(str(p) for p in files))
    return EXIT_OK


def _cmd_fit(args) -> int:
    try:
        obs = read_timeseries_csv(args.csv, 0.0, args.gamma_prime)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read trace {args.csv}: {exc}") from None
    if args.t0 is not None:
        obs = obs.window(args.t0 / args.gamma_prime, obs.tau[-1])
    # the first retained sample is the switch-off time
    obs = TimeSeries(obs.t_start, obs.t_start, obs.dt, obs.samples, obs.method, 1.0, "falling")
    rep = fit_parameters(obs, n_max=args.nmax, lattice_phase=args.lattice_phase,
                         gamma_prime=args.gamma_prime)
    print(rep.to_json())
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handlers = {"run": _cmd_run, "reproduce": _cmd_reproduce, "fit": _cmd_fit}
    try:
        return handlers[args.command](args)
    except (ConfigError, RoutingError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MethodFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FitError as exc:
        print(f"numerical failure: fit: {exc}", file=sys.stderr)
        if exc.report:
            print(json.dumps(exc.report, default=float), file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
