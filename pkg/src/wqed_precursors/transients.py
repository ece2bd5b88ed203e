"""Closed-form time-domain transients after a sharp edge.

Field conventions: samples are ``E / E0`` envelopes rotating at the shifted
resonance with phase referenced to the edge time ``t0``. With
``tau = t - t0`` and ``t(delta) = 1 + sum_p c_p / (delta - p)``:

* falling edge: ``E_F(tau) = sum_p c_p exp(-i p tau) / (Delta - p)`` for
  ``tau > 0`` (so ``E_F(0+) = t(Delta) - 1``);
* rising edge: ``E_R(tau) = t(Delta) exp(-i Delta tau) - E_F(tau)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from .errors import (ContourGeometryError, ConvergenceError, DegenerateSpectrumError,
                     SingularityError)
from .kernels import exp_pole_sum
from .model import EITConfig, Edge, PulseSpec
from .modes import ModeSet
from .response import (ResponseFn, eit_pole_pairs, t_cont, t_eit, t_finite_n)

# least-squares fit (through the origin) of the 0.5 I0 rising-edge crossing
# against N G1D / (2 Oc^2) for N = 10..50, G1D = G', Oc = 4 G', k d = pi/2
EIT_DELAY_KAPPA = 1.42


@dataclass
class TimeSeries:
    """Uniformly sampled field after (or around) an edge."""

    t0: float
    t_start: float
    dt: float
    samples: np.ndarray
    method: str
    amplitude: float = 1.0
    edge: str = "falling"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.samples.size)

    @property
    def tau(self) -> np.ndarray:
        return self.times - self.t0

    @property
    def field(self) -> np.ndarray:
        """Field normalised to the input amplitude."""
        return self.samples / self.amplitude

    @property
    def intensity(self) -> np.ndarray:
        """``|E|^2 / I0``."""
        return np.abs(self.samples) ** 2 / self.amplitude**2

    def window(self, start: float, stop: float) -> "TimeSeries":
        """Sub-series with ``start <= t - t0 <= stop`` (small rounding slack)."""
        tau = self.tau
        slack = 1e-9 * self.dt
        idx = np.flatnonzero((tau >= start - slack) & (tau <= stop + slack))
        return TimeSeries(self.t0, float(self.times[idx[0]]), self.dt, self.samples[idx],
                          self.method, self.amplitude, self.edge, dict(self.info))


@dataclass(frozen=True)
class PoleContribution:
    pole: complex
    residue_weight: complex
    cluster_id: int


def uniform_times(times) -> tuple[np.ndarray, float]:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("need a 1-D time grid with at least two points")
    dt = (t[-1] - t[0]) / (t.size - 1)
    if dt <= 0 or np.max(np.abs(np.diff(t) - dt)) > 1e-9 * max(1.0, abs(dt)):
        raise ValueError("time grid must be uniform and increasing")
    return t, float(dt)


def _series(times, values, t0, method, amplitude, edge, info=None) -> TimeSeries:
    t, dt = uniform_times(times)
    return TimeSeries(t0, float(t[0]), dt, amplitude * values, method, amplitude,
                      Edge(edge).value, info or {})


def _assemble(tau, falling_part, t_carrier, detuning, edge):
    """Combine the transient part with the steady term for either edge."""
    edge = Edge(edge)
    steady = t_carrier * np.exp(-1j * detuning * tau)
    out = np.empty(tau.shape, dtype=complex)
    before = tau < 0
    after = ~before
    if edge is Edge.FALLING:
        out[before] = steady[before]
        out[after] = falling_part
    elif edge is Edge.RISING:
        out[before] = 0.0
        out[after] = steady[after] - falling_part
    else:
        raise ValueError("single-edge formula; use full_pulse() for both edges")
    return out


# ---------------------------------------------------------------------------
# continuous medium


def _bessel_small_arg(n, ab, q):
    """``(ab)^n / n! * 0F1(; n+1; -q)`` for ``q = x^2/4 <= 1``."""
    pre = np.exp(n * np.log(ab + 0j) - math.lgamma(n + 1))
    s = np.ones_like(q)
    term = np.ones_like(q)
    for k in range(1, 30):
        term = term * (-q) / (k * (n + k))
        s = s + term
    return pre * s


def bessel_series(tau, b: float, gamma_prime: float, detuning: float,
                  max_terms: int = 512, tail_tol: float = 1e-12, round_tol: float = 1e-6):
    """``sum_{n>=1} [-i/(Delta + i G'/2) sqrt(b/tau)]^n J_n(2 sqrt(b tau))``.

    Small-argument points use the entire form ``(ab)^n J_n(x)/(x/2)^n``; the
    rest use ``J_n`` from :mod:`scipy.special` with log-scaled powers. A point
    is converged once three consecutive terms fall below ``tail_tol``.
    At high optical depth the terms grow like ``|ab|^n / n!`` before they
    decay and the sum cancels; the rounding bound ``eps * sum |term|`` is
    tracked and a :class:`ConvergenceError` raised once it exceeds
    ``round_tol``. Returns ``(sum, n_terms)``.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("bessel_series needs tau >= 0")
    a = -1j / (detuning + 0.5j * gamma_prime)
    ab = a * b
    total = np.zeros(tau.shape, dtype=complex)
    if b == 0:
        return total, 0
    x = 2.0 * np.sqrt(b * tau)
    small = x <= 2.0
    big = ~small
    q = (x[small] / 2.0) ** 2
    xb = x[big]
    log_r = np.log(2.0 * ab / xb) if xb.size else np.zeros(0, dtype=complex)
    quiet = np.zeros(tau.shape, dtype=int)
    last = np.zeros(tau.shape)
    absum = np.zeros(tau.shape)
    for n in range(1, max_terms + 1):
        term = np.empty(tau.shape, dtype=complex)
        term[small] = _bessel_small_arg(n, ab, q)
        if xb.size:
            jn = special.jv(n, xb)
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                mag = n * log_r + np.log(np.abs(jn))
                tb = np.sign(jn) * np.exp(mag)
            tb[jn == 0] = 0.0
            term[big] = tb
        total += term
        last = np.abs(term)
        absum += last
        quiet = np.where(last < tail_tol, quiet + 1, 0)
        if n >= 3 and np.all(quiet >= 3):
            if not np.all(np.isfinite(total)):
                break
            rounding = float(4 * np.finfo(float).eps * absum.max())
            if rounding > round_tol:
                raise ConvergenceError(
                    f"Bessel series lost precision to cancellation (rounding bound "
                    f"{rounding:.3e}); high optical depth, use the spectral oracle instead",
                    partial=total, bound=rounding)
            return total, n
    raise ConvergenceError(
        f"Bessel series not converged after {max_terms} terms "
        f"(largest last term {np.max(last):.3e}); high optical depth converges slowly, "
        "use the spectral oracle instead",
        partial=total,
        bound=float(np.max(last)),
    )


def bessel_transient(times, b: float, gamma_prime: float, detuning: float, edge="falling",
                     t0: float = 0.0, amplitude: float = 1.0, max_terms: int = 512,
                     tail_tol: float = 1e-12, round_tol: float = 1e-6) -> TimeSeries:
    """Edge transient of a continuous Lorentz medium of coupling strength ``b``."""
    t, _ = uniform_times(times)
    tau = t - t0
    pos = tau >= 0
    s, n_terms = bessel_series(tau[pos], b, gamma_prime, detuning, max_terms, tail_tol,
                               round_tol)
    fall = np.exp(-0.5 * gamma_prime * tau[pos]) * s
    tc = complex(t_cont(detuning, b, gamma_prime))
    vals = _assemble(tau, fall, tc, detuning, edge)
    return _series(t, vals, t0, "bessel", amplitude, edge, {"n_terms": n_terms, "b": b})


# ---------------------------------------------------------------------------
# finite chains of two-level emitters


def residue_weights(eigenvalues) -> np.ndarray:
    """``lambda_xi^M / prod_{k != xi} (lambda_xi - lambda_k)`` for simple non-zero poles.

    Accumulated as complex logarithms so that large M neither overflows nor
    underflows.
    """
    lam = np.asarray(eigenvalues, dtype=complex)
    m = lam.size
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, 1.0)
    logw = m * np.log(lam) - np.sum(np.log(diff), axis=1)
    return np.exp(logw)


def _pole_sum(tau, poles, residues, detuning):
    """``sum_p c_p exp(-i p tau) / (Delta - p)`` on a uniform ``tau >= 0`` grid."""
    coef = residues / (detuning - poles)
    if tau.size == 0:
        return np.zeros(0, dtype=complex)
    dtau = (tau[-1] - tau[0]) / (tau.size - 1) if tau.size > 1 else 0.0
    return exp_pole_sum(tau[0], dtau, tau.size, poles, coef)


def _require_simple(modes: ModeSet):
    if modes.degenerate_clusters or modes.exceptional:
        raise DegenerateSpectrumError(
            "clustered or exceptional eigenvalues: the simple-pole residue formula does not "
            "apply; use contour_residue_fallback / edge_transient",
            clusters=tuple(modes.degenerate_clusters),
        )


def residue_transient_qubits(times, modes: ModeSet, detuning: float, gamma_prime: float,
                             edge="falling", t0: float = 0.0, amplitude: float = 1.0
                             ) -> TimeSeries:
    """Coherent sum of collective-mode contributions after an edge.

    Uses the closed-form residues ``lambda^M / prod (lambda_xi - lambda_k)`` of
    the product transmission; zero modes are dropped (their factor is 1).
    """
    _require_simple(modes)
    t, _ = uniform_times(times)
    tau = t - t0
    pos = tau >= 0
    lam = modes.active_eigenvalues
    w = residue_weights(lam)
    poles = lam - 0.5j * gamma_prime
    if np.any(np.abs(detuning - poles) < 1e-12):
        raise SingularityError("carrier coincides with a pole")
    fall = _pole_sum(tau[pos], poles, w, detuning)
    tc = complex(t_finite_n(detuning, modes, gamma_prime))
    vals = _assemble(tau, fall, tc, detuning, edge)
    info = {"weight_norm": float(np.sum(np.abs(w))), "n_poles": int(lam.size)}
    return _series(t, vals, t0, "residue", amplitude, edge, info)


@dataclass
class ClusterContribution:
    """Contour-integrated field of one pole cluster (falling-edge convention)."""

    field: np.ndarray
    contribution: PoleContribution
    radius: float
    nodes: int


def contour_residue_fallback(times, response: ResponseFn | callable, detuning: float,
                             cluster, foreign=(), t0: float = 0.0, cluster_id: int = 0,
                             nodes: int = 64, tol: float = 1e-9, max_nodes: int = 1 << 15
                             ) -> ClusterContribution:
    """Sum of residues of ``t(w) exp(-i w tau)/(w - Delta)`` over a pole cluster.

    Trapezoid rule on a circle of radius ``2 r_c + eps`` around the cluster
    centre, doubling the node count until the result changes by less than
    ``tol``. ``eps`` takes a quarter of the clearance to the nearest foreign
    singularity (other poles, the carrier). The returned field is the
    falling-edge contribution, i.e. ``-(1/2 pi i) \\oint ...``.
    """
    t, _ = uniform_times(times)
    tau = np.maximum(t - t0, 0.0)
    cl = np.atleast_1d(np.asarray(cluster, dtype=complex))
    centre = cl.mean()
    r_c = float(np.max(np.abs(cl - centre)))
    others = np.concatenate([np.atleast_1d(np.asarray(foreign, dtype=complex)),
                             [complex(detuning)]])
    clearance = float(np.min(np.abs(others - centre)))
    if clearance <= 2 * r_c * (1 + 1e-12):
        raise ContourGeometryError(
            f"circle of radius {2 * r_c:.3e} around the cluster would enclose a foreign "
            f"singularity at distance {clearance:.3e}")
    eps = 0.25 * (clearance - 2 * r_c)
    radius = 2 * r_c + eps

    def integrate(m):
        theta = 2 * np.pi * np.arange(m) / m
        z = centre + radius * np.exp(1j * theta)
        f = np.asarray(response(z)) / (z - detuning) * radius * np.exp(1j * theta)
        return (np.exp(-1j * np.outer(tau, z)) @ f) / m

    m = nodes
    prev = integrate(m)
    while True:
        m *= 2
        cur = integrate(m)
        if np.max(np.abs(cur - prev)) < tol or m >= max_nodes:
            break
        prev = cur
    fieldv = -cur
    zero = -integrate(m)[:1] if tau.size and tau[0] != 0 else fieldv[:1]
    contrib = PoleContribution(complex(centre), complex(zero[0]) if zero.size else 0j, cluster_id)
    return ClusterContribution(fieldv, contrib, radius, m)


def edge_transient(times, modes: ModeSet, detuning: float, gamma_prime: float, edge="falling",
                   t0: float = 0.0, amplitude: float = 1.0) -> TimeSeries:
    """Residue sum with automatic contour fallback for clustered poles."""
    if modes.simple:
        return residue_transient_qubits(times, modes, detuning, gamma_prime, edge, t0, amplitude)
    t, _ = uniform_times(times)
    tau = t - t0
    pos = tau >= 0
    zero = set(modes.zero_modes)
    groups = [c for c in modes.clusters if not zero.issuperset(c)]
    lam_all = modes.eigenvalues
    poles_all = lam_all - 0.5j * gamma_prime
    resp = ResponseFn.finite_n(modes, gamma_prime)
    active = modes.active_eigenvalues
    fall = np.zeros(int(pos.sum()), dtype=complex)
    simple = [c[0] for c in groups if len(c) == 1 and c[0] not in modes.exceptional]
    if simple:
        lam_s = lam_all[simple]
        # the product over the remaining active modes keeps multiplicities
        m = active.size
        diff = lam_s[:, None] - active[None, :]
        diff[np.abs(diff) == 0] = 1.0
        w = np.exp(m * np.log(lam_s) - np.sum(np.log(diff), axis=1))
        fall += _pole_sum(tau[pos], lam_s - 0.5j * gamma_prime, w, detuning)
    n_contour = 0
    for cid, c in enumerate(groups):
        if len(c) == 1 and c[0] not in modes.exceptional:
            continue
        members = poles_all[list(c)]
        mask = np.ones(lam_all.size, dtype=bool)
        mask[list(c)] = False
        mask[list(zero)] = False
        cc = contour_residue_fallback(t[pos], resp, detuning, members, poles_all[mask],
                                      t0=t0, cluster_id=cid)
        fall += cc.field
        n_contour += 1
    tc = complex(t_finite_n(detuning, modes, gamma_prime))
    vals = _assemble(tau, fall, tc, detuning, edge)
    return _series(t, vals, t0, "contour", amplitude, edge, {"contour_clusters": n_contour})


def pole_sum_transient(times, poles, residues, t_carrier: complex, detuning: float,
                       edge="falling", t0: float = 0.0, amplitude: float = 1.0,
                       method: str = "residue") -> TimeSeries:
    """Edge transient for any response given as ``1 + sum_p c_p/(delta - p)``."""
    t, _ = uniform_times(times)
    tau = t - t0
    pos = tau >= 0
    fall = _pole_sum(tau[pos], np.asarray(poles, complex), np.asarray(residues, complex),
                     detuning)
    vals = _assemble(tau, fall, t_carrier, detuning, edge)
    return _series(t, vals, t0, method, amplitude, edge)


def full_pulse(edge_response, pulse: PulseSpec, times) -> TimeSeries:
    """Both edges of a square pulse by linear superposition (no steady-state assumption).

    ``edge_response(times, edge, t0)`` must return the rising-edge
    :class:`TimeSeries` referenced to ``t0``. The result is referenced to
    ``pulse.t_on``.
    """
    t, _ = uniform_times(times)
    on = edge_response(t, "rising", pulse.t_on)
    off = edge_response(t, "rising", pulse.t_off)
    shift = np.exp(-1j * pulse.detuning * pulse.duration)
    samples = on.field - shift * off.field
    return TimeSeries(pulse.t_on, float(t[0]), on.dt, pulse.amplitude * samples, on.method,
                      pulse.amplitude, "full", on.info)


# ---------------------------------------------------------------------------
# qutrits under EIT


@dataclass(frozen=True)
class EITPoles:
    plus: np.ndarray
    minus: np.ndarray
    big_omega: np.ndarray

    @property
    def all(self) -> np.ndarray:
        return np.concatenate([self.plus, self.minus])


def eit_poles(modes: ModeSet, eit: EITConfig, gamma_prime: float,
              carrier_detuning: float | None = None) -> EITPoles:
    """Two poles per collective mode, relative to the shifted resonance."""
    p, m, om = eit_pole_pairs(modes, eit, gamma_prime, carrier_detuning)
    return EITPoles(p, m, om)


def eit_pole_residues(modes: ModeSet, eit: EITConfig, gamma_prime: float,
                      carrier_detuning: float | None = None):
    """Residues of the EIT product at its ``2M`` poles: ``+-W_xi (w_pm - o)/Omega_xi``."""
    poles = eit_poles(modes, eit, gamma_prime, carrier_detuning)
    o = 0.0 if carrier_detuning is None else carrier_detuning - eit.two_photon_detuning
    w = residue_weights(modes.active_eigenvalues)
    res_p = w * (poles.plus - o) / poles.big_omega
    res_m = -w * (poles.minus - o) / poles.big_omega
    return poles.all, np.concatenate([res_p, res_m])


def residue_transient_eit(times, modes: ModeSet, eit: EITConfig, detuning: float,
                          gamma_prime: float, edge="falling", t0: float = 0.0,
                          amplitude: float = 1.0) -> TimeSeries:
    """Closed-form qutrit transient at two-photon resonance.

    Pairs the two poles of each mode into ``cos``/``sin`` of
    ``Omega_xi tau / 2`` with ``Omega_xi = sqrt(4 Oc^2 + (lambda_xi - i G'/2)^2)``
    under a global ``exp(-G' tau / 4)`` envelope.
    """
    if abs(eit.two_photon_detuning - detuning) > 1e-12:
        raise ValueError("closed form assumes two-photon resonance (two_photon_detuning == "
                         "detuning); use eit_pole_residues with pole_sum_transient")
    _require_simple(modes)
    t, _ = uniform_times(times)
    tau = t - t0
    pos = tau >= 0
    lam = modes.active_eigenvalues
    w = residue_weights(lam)
    oc2 = eit.control_rabi**2
    dt_ = lam - 0.5j * gamma_prime
    om = np.sqrt(4 * oc2 + dt_**2 + 0j)
    denom = om**2 - (dt_ - 2 * detuning) ** 2
    if np.any(np.abs(denom) < 1e-14) or np.any(np.abs(om) < 1e-14):
        raise SingularityError("carrier on an EIT pole (e.g. dark pole at Oc = 0 and zero detuning)")
    coef = 2.0 * w / (om * denom)
    tp = tau[pos]
    out = np.zeros(tp.shape, dtype=complex)
    for s in range(0, tp.size, 4096):
        ts = tp[s:s + 4096, None]
        half = 0.5 * om[None, :] * ts
        bracket = (2 * om * detuning)[None, :] * np.cos(half) - 2j * (
            detuning * dt_ + 2 * oc2)[None, :] * np.sin(half)
        out[s:s + 4096] = (np.exp(-0.5j * ts * lam[None, :]) * bracket) @ coef
    paired = np.exp(-0.25 * gamma_prime * tp) * out
    tc = complex(t_eit(detuning, modes, eit, gamma_prime))
    # the paired sum is the rising-edge correction, i.e. minus the falling field
    vals = _assemble(tau, -paired, tc, detuning, edge)
    return _series(t, vals, t0, "residue_eit", amplitude, edge,
                   {"weight_norm": float(np.sum(np.abs(w)))})


@dataclass(frozen=True)
class DelayEstimate:
    time: float
    valid: bool
    note: str = ""


def eit_delay_estimate(modes: ModeSet, eit: EITConfig, kappa: float = EIT_DELAY_KAPPA
                       ) -> DelayEstimate:
    """Main-pulse arrival after switch-on, ``kappa * N G1D / (2 Oc^2)``.

    ``N G1D`` is taken as the sum of collective decay rates. Flagged invalid
    unless the control field is weak compared to the largest decay rate.
    """
    total = float(np.sum(modes.decays))
    if eit.control_rabi == 0:
        return DelayEstimate(math.inf, False, "no control field")
    est = kappa * total / (2 * eit.control_rabi**2)
    gmax = float(np.max(modes.decays))
    ok = eit.control_rabi < 0.5 * gmax
    return DelayEstimate(est, ok, "" if ok else "control field not small against max decay")


# ---------------------------------------------------------------------------
# analysis helpers


def beat_frequency(series: TimeSeries, start: float = 0.0, stop: float | None = None,
                   pad: int = 16) -> float:
    """Field beat frequency ``nu`` with ``I ~ cos^2(nu tau)``: half the intensity peak.

    The intensity tail (mean removed, exponential envelope divided out by a
    log-linear fit) is Fourier analysed with zero padding; the peak is refined
    by parabolic interpolation on log magnitudes.
    """
    s = series.window(start, series.tau[-1] if stop is None else stop)
    inten = s.intensity
    tau = s.tau
    keep = inten > 0
    slope, icpt = np.polyfit(tau[keep], np.log(inten[keep]), 1)
    flat = inten / np.exp(icpt + slope * tau)
    flat = flat - flat.mean()
    n = flat.size * pad
    spec = np.abs(np.fft.rfft(flat * np.hanning(flat.size), n))
    k = int(np.argmax(spec[1:]) + 1)
    if 0 < k < spec.size - 1:
        a, b, c = np.log(spec[k - 1:k + 2] + 1e-300)
        k = k + 0.5 * (a - c) / (a - 2 * b + c)
    omega_intensity = 2 * np.pi * k / (n * s.dt)
    return 0.5 * omega_intensity


def dip_period(series: TimeSeries, start: float = 0.0, stop: float | None = None) -> float:
    """Mean spacing of successive intensity minima (parabolic refinement)."""
    s = series.window(start, series.tau[-1] if stop is None else stop)
    inten = s.intensity
    idx = np.flatnonzero((inten[1:-1] < inten[:-2]) & (inten[1:-1] <= inten[2:])) + 1
    if idx.size < 2:
        raise ValueError("fewer than two intensity minima in the window")
    pos = []
    for i in idx:
        a, b, c = inten[i - 1:i + 2]
        den = a - 2 * b + c
        pos.append(s.tau[i] + (0.5 * (a - c) / den if den != 0 else 0.0) * s.dt)
    return float(np.mean(np.diff(pos)))


def arrival_time(series: TimeSeries, level: float = 0.5) -> float:
    """First upward crossing of ``level * I0`` after the intensity has dropped below it."""
    inten = series.intensity
    tau = series.tau
    start = np.flatnonzero(tau >= 0)[0]
    below = np.flatnonzero(inten[start:] < level)
    if below.size == 0:
        raise ValueError("intensity never drops below the level")
    i0 = start + below[0]
    up = np.flatnonzero(inten[i0:] >= level)
    if up.size == 0:
        raise ValueError("intensity never recovers to the level")
    j = i0 + up[0]
    y0, y1 = inten[j - 1], inten[j]
    frac = (level - y0) / (y1 - y0)
    return float(tau[j - 1] + frac * series.dt)


def step_equivalent_arrival(series: TimeSeries, final: float | None = None) -> float:
    """Arrival time of an ideal step carrying the same intensity deficit.

    ``integral_0^T (1 - I / I_final) dtau``: equals the crossing time for a
    sharp front and is insensitive to ringing superposed on the front.
    ``I_final`` defaults to the last sample; the window must cover the settling.
    """
    s = series.window(0.0, series.tau[-1])
    inten = s.intensity
    ref = inten[-1] if final is None else final
    return float(np.trapezoid(1.0 - inten / ref, dx=s.dt))


def rebound_amplitude(series: TimeSeries, start: float = 0.0) -> float:
    """Largest rise of the intensity above its running minimum (0 for monotone decay)."""
    s = series.window(start, series.tau[-1])
    inten = s.intensity
    return float(np.max(inten - np.minimum.accumulate(inten)))


TIMESERIES_CSV_HEADER = ["gamma_prime_tau", "re_field", "im_field", "intensity", "method"]


def write_timeseries_csv(series: TimeSeries, path, gamma_prime: float = 1.0) -> Path:
    path = Path(path)
    unit = gamma_prime if gamma_prime > 0 else 1.0
    f = series.field
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIMESERIES_CSV_HEADER)
        for tau, v, i in zip(series.tau, f, series.intensity):
            w.writerow([repr(float(tau) * unit), repr(float(v.real)), repr(float(v.imag)),
                        repr(float(i)), series.method])
    return path


def read_timeseries_csv(path, t0: float = 0.0, gamma_prime: float = 1.0) -> TimeSeries:
    """Inverse of :func:`write_timeseries_csv` (also accepts intensity-only files)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    tau = np.array([float(r["gamma_prime_tau"]) for r in rows]) / gamma_prime
    if "re_field" in rows[0] and rows[0]["re_field"] not in ("", None):
        f = np.array([complex(float(r["re_field"]), float(r["im_field"])) for r in rows])
    else:
        f = np.sqrt(np.array([float(r["intensity"]) for r in rows])).astype(complex)
    method = rows[0].get("method") or "observed"
    t, dt = uniform_times(tau + t0)
    return TimeSeries(t0, float(t[0]), dt, f, method, 1.0, "falling")
