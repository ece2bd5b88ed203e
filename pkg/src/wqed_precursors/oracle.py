"""Brute-force reference propagators.

Two independent routes to the transmitted field of a square pulse:

* :func:`spectral_propagate` synthesises ``E_out(w) = t(w) E_in(w)`` on a
  uniform frequency grid. The slowly decaying tail of ``s = t - 1`` is fitted
  by a few causal terms ``a_k / (delta + i gamma)^k`` whose convolution with
  the pulse is done in closed form; only the (fast decaying, tapered)
  remainder goes through the FFT.
* :func:`ode_propagate_qubits` / :func:`ode_propagate_qutrits` integrate the
  linear coherence equations with fixed-step RK4 and read out the field by
  the input-output relation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ResolutionError, StepSizeError
from .kernels import lti_steps
from .model import ArrayConfig, EITConfig, LevelScheme, PulseSpec, square_pulse_spectrum
from .modes import coupling_matrix
from .response import ResponseFn
from .transients import TimeSeries

TAPER_FRACTION = 0.05
RESOLUTION_TOL = 1e-6


@dataclass(frozen=True)
class SpectralGrid:
    """``n_points`` samples on ``[-W, W)``; ``dt = pi / W`` and span ``2 pi n / (2 W)``."""

    half_width: float
    n_points: int

    def __post_init__(self):
        n = self.n_points
        if n < 2 or n & (n - 1):
            raise ConfigError("n_points must be a power of two", field="n_points")
        if not self.half_width > 0:
            raise ConfigError("half_width must be positive", field="half_width")

    @property
    def d_delta(self) -> float:
        return 2 * self.half_width / self.n_points

    @property
    def dt(self) -> float:
        return math.pi / self.half_width

    @property
    def span(self) -> float:
        return self.n_points * self.dt

    @property
    def delta(self) -> np.ndarray:
        return -self.half_width + self.d_delta * np.arange(self.n_points)

    @classmethod
    def for_problem(cls, rate: float, span: float, gamma_prime: float = 1.0,
                    dt_factor: float = 0.005, align: float | None = None) -> "SpectralGrid":
        """Grid with ``dt <= dt_factor / rate`` covering at least ``span``.

        ``rate`` should bound every frequency scale of the problem
        (``G' + N G1D``, ``|Delta|``, ``Oc``). The half-width never drops below
        ``50 * max(rate, 1)``. With ``align`` (e.g. the pulse duration) the
        half-width is raised so that ``align`` is a whole number of steps.
        """
        rate = max(rate, gamma_prime, 1e-12)
        w = max(math.pi * rate / dt_factor, 50 * max(rate, 1.0))
        if align is not None:
            steps = math.ceil(align * w / math.pi - 1e-9)
            w = math.pi * steps / align
        n = 1 << max(1, math.ceil(math.log2(span * w / math.pi)))
        return cls(w, n)


def _taper(n: int, fraction: float = TAPER_FRACTION) -> np.ndarray:
    """Raised-cosine window falling to 0 over the outer ``fraction`` at each end."""
    m = max(1, int(round(fraction * n)))
    win = np.ones(n)
    ramp = 0.5 * (1 - np.cos(np.pi * np.arange(m) / m))
    win[:m] = ramp
    win[n - m:] = ramp[::-1]
    return win


def _fit_tail(delta, s, gamma, order):
    """Least-squares coefficients of ``sum_k a_k / (delta + i gamma)^k`` on the outer band."""
    w = np.max(np.abs(delta))
    band = np.abs(delta) >= 0.5 * w
    x = delta[band] + 1j * gamma
    # columns scaled to unit size at |delta| = W
    basis = np.stack([(w / x) ** k for k in range(1, order + 1)], axis=1)
    step = max(1, basis.shape[0] // 8192)
    coef, *_ = np.linalg.lstsq(basis[::step], s[band][::step], rcond=None)
    return coef * w ** np.arange(1, order + 1)


def _tail_settle(coef, gamma, tol: float = 1e-13) -> float:
    """Time after which every tail impulse term ``|a_k| u^(k-1)/(k-1)! e^(-gamma u)`` is below ``tol``.

    The synthesized body carries minus these terms, so their slower
    polynomial decay sets how far the periodic images must be pushed.
    """
    out = 0.0
    for k, a in enumerate(coef, start=1):
        if a == 0:
            continue
        m = k - 1

        def log_f(u):
            return math.log(abs(a)) + m * math.log(u) - math.lgamma(m + 1) - gamma * u

        u = max(m / gamma, 1e-12)  # peak of the term; decreasing beyond
        if log_f(u) <= math.log(tol):
            continue
        hi = 2 * u + 1.0 / gamma
        while log_f(hi) > math.log(tol):
            hi *= 2
        lo = u
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if log_f(mid) > math.log(tol) else (lo, mid)
        out = max(out, hi)
    return out


def _tail_response(coef, gamma, pulse: PulseSpec, t):
    """Exact convolution of the tail terms with the square pulse (absolute times ``t``)."""
    p = gamma - 1j * pulse.detuning
    out = np.zeros(t.shape, dtype=complex)
    on = t > pulse.t_on
    tt = t[on]
    u_hi = tt - pulse.t_on
    u_lo = np.maximum(tt - pulse.t_off, 0.0)

    def antideriv(m, u):
        # int u^m exp(-p u) du = -exp(-p u) sum_j m!/j! u^j / p^(m-j+1)
        acc = np.zeros(u.shape, dtype=complex)
        for j in range(m + 1):
            acc += math.factorial(m) / math.factorial(j) * u**j / p ** (m - j + 1)
        return -np.exp(-p * u) * acc

    acc = np.zeros(tt.shape, dtype=complex)
    for k, a in enumerate(coef, start=1):
        if a == 0:
            continue
        m = k - 1
        # impulse response of a/(delta + i gamma)^k: -i a (-i u)^m / m! exp(-gamma u)
        pref = -1j * a * (-1j) ** m / math.factorial(m)
        acc += pref * (antideriv(m, u_hi) - antideriv(m, u_lo))
    out[on] = pulse.amplitude * np.exp(-1j * pulse.detuning * (tt - pulse.t_on)) * acc
    return out


def input_field(pulse: PulseSpec, t) -> np.ndarray:
    """Square input ``E0 exp(-i Delta (t - t_on))`` on ``[t_on, t_off)``."""
    t = np.asarray(t, dtype=float)
    on = (t >= pulse.t_on) & (t < pulse.t_off)
    return np.where(on, pulse.amplitude * np.exp(-1j * pulse.detuning * (t - pulse.t_on)), 0)


def spectral_propagate(response: ResponseFn, pulse: PulseSpec, grid: SpectralGrid,
                       t_start: float | None = None, t_end: float | None = None,
                       tail_order: int = 4, gamma_ref: float | None = None) -> TimeSeries:
    """Full-pulse output field by Fourier synthesis of ``t(delta) E_in(delta)``.

    ``s = t - 1`` is split into an analytic tail ``sum_k a_k/(delta + i gamma)^k``
    (lowest order up to ``tail_order`` that flattens the band edges, convolved
    with the pulse in closed form) and a remainder synthesized by FFT.

    The output samples lie on the FFT time grid (spacing ``grid.dt``) within
    ``[t_start, t_end]`` (defaults: ``t_on`` minus a few steps to ``t_off +
    20``). Raises :class:`ResolutionError` if the remainder of ``s`` after the
    tail model exceeds ``1e-6`` at the band edges, or if the span cannot hold
    the requested window plus the decay of the remainder.
    """
    gp = float(response.params.get("gamma_prime", 0) or 0)
    if "array" in response.params:
        gp = response.params["array"].gamma_prime
    gamma = 0.5 * (gamma_ref if gamma_ref is not None else (gp if gp > 0 else 1.0))
    order = tail_order if response.smooth_tail else 1

    disp = response.params.get("dispersion")
    if disp is not None:
        omega_ref = disp.omega0 + response.params["array"].lamb_shift
        if grid.half_width >= omega_ref:
            raise ResolutionError(
                f"grid half-width {grid.half_width:g} reaches negative absolute frequency "
                f"(omega0 = {omega_ref:g}); raise the dispersion order")

    delta = grid.delta
    s = np.asarray(response(delta), dtype=complex) - 1.0
    if not np.all(np.isfinite(s)):
        raise ResolutionError("response is not finite on the grid")
    x = delta + 1j * gamma
    # lowest tail order that flattens the band edges: high orders add slowly
    # decaying polynomial terms to the impulse response
    best = None
    for k in range(1, order + 1):
        c = _fit_tail(delta, s, gamma, k)
        r = s - sum(a / x**j for j, a in enumerate(c, start=1))
        e = max(abs(r[0]), abs(r[-1]))
        if best is None or e < best[2]:
            best = (c, r, e)
        if e <= 1e-2 * RESOLUTION_TOL:
            break
    coef, rem, edge = best
    if edge > RESOLUTION_TOL:
        raise ResolutionError(
            f"grid half-width {grid.half_width:.4g} too small: residual response "
            f"{edge:.2e} at the band edge (limit {RESOLUTION_TOL:g})")

    t_start = pulse.t_on - 10 * grid.dt if t_start is None else t_start
    t_end = pulse.t_off + 20.0 / (2 * gamma) if t_end is None else t_end
    # periodic images of the remainder response (supported from t_on, decayed
    # by t_off + settle) must miss the output window
    settle = max(60.0 / (2 * gamma), _tail_settle(coef, gamma))
    need = max(t_end - min(t_start, pulse.t_on), pulse.t_off + settle - t_start)
    if need >= grid.span:
        raise ResolutionError(
            f"time span {grid.span:.4g} too short for window [{t_start}, {t_end}] "
            f"plus settling {settle:.3g}; increase n_points")

    ein = square_pulse_spectrum(pulse, delta)
    f = rem * _taper(delta.size) * ein * np.exp(-1j * delta * t_start)
    k = np.arange(delta.size)
    body = grid.d_delta / (2 * np.pi) * np.where(k % 2, -1.0, 1.0) * np.fft.fft(f)
    t = t_start + grid.dt * k
    keep = t <= t_end + 1e-9 * grid.dt
    t = t[keep]
    # samples landing on an edge up to rounding take its right limit
    for edge_t in (pulse.t_on, pulse.t_off):
        t[np.abs(t - edge_t) <= 1e-9 * grid.dt] = edge_t
    field = input_field(pulse, t) + body[keep] + _tail_response(coef, gamma, pulse, t)
    return TimeSeries(pulse.t_on, float(t[0]), grid.dt, field, "spectral_oracle",
                      pulse.amplitude, "full",
                      {"half_width": grid.half_width, "n_points": grid.n_points,
                       "edge_residual": float(edge), "tail": coef.tolist()})


# ---------------------------------------------------------------------------
# time-domain integration


def _rk4_maps(A, b, h):
    """Exact one-step RK4 maps for ``y' = A y + b`` with constant ``b``."""
    n = A.shape[0]
    hA = h * A
    eye = np.eye(n, dtype=complex)
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    P = eye + hA + hA2 / 2 + hA3 / 6 + hA3 @ hA / 24
    q = h * (eye + hA / 2 + hA2 / 6 + hA3 / 24) @ b
    return P, q


def ode_rate(array: ArrayConfig, pulse: PulseSpec, eit: EITConfig | None = None) -> float:
    """Largest frequency scale of the linear system (sets the step bound)."""
    rate = array.gamma_prime + array.n_atoms * array.gamma_1d + abs(pulse.detuning)
    rate += float(np.max(np.abs(array.detunings), initial=0.0))
    if eit is not None:
        rate += eit.control_rabi + abs(eit.two_photon_detuning)
    return rate


def _integrate(A, b, r, pulse: PulseSpec, rate, dt, t_span, n_state):
    max_dt = 0.05 / rate
    dt_req = 0.01 / rate if dt is None else float(dt)
    if dt_req > max_dt * (1 + 1e-12):
        raise StepSizeError(f"dt = {dt_req:.3g} exceeds the bound 0.05/rate = {max_dt:.3g}")
    if not dt_req > 0:
        raise StepSizeError("dt must be positive")
    T = pulse.duration
    n_on = max(1, math.ceil(T / dt_req - 1e-9))
    h = T / n_on
    t_start, t_end = (pulse.t_on, pulse.t_off + 20.0) if t_span is None else t_span
    if t_end <= t_start:
        raise ConfigError("t_span must be increasing", field="t_span")
    n_pre = max(0, math.ceil((pulse.t_on - t_start) / h - 1e-9))
    n_total = n_pre + max(0, math.ceil((t_end - pulse.t_on) / h - 1e-9))
    t0_grid = pulse.t_on - n_pre * h
    n_after = n_total - n_pre
    drive = np.zeros(n_after, dtype=complex)
    drive[:min(n_on, n_after)] = 1.0
    P, q = _rk4_maps(A, b, h)
    readout, _ = lti_steps(P, q, drive, np.zeros(n_state, dtype=complex), r)
    tau = h * np.arange(n_after + 1)
    direct = np.where(np.arange(n_after + 1) < n_on, 1.0, 0.0)
    rot = np.exp(-1j * pulse.detuning * tau)
    after = pulse.amplitude * (direct + readout) * rot
    field = np.concatenate([np.zeros(n_pre, dtype=complex), after])
    return TimeSeries(pulse.t_on, t0_grid, h, field, "ode_oracle", pulse.amplitude, "full",
                      {"dt": h, "steps": n_after})


def _qubit_blocks(array: ArrayConfig, pulse: PulseSpec):
    phi = array.positions
    x = pulse.detuning + 0.5j * array.gamma_prime
    K = coupling_matrix(array) + np.diag(array.detunings)
    A = 1j * (x * np.eye(array.n_atoms) - K)
    b = 1j * np.exp(1j * phi)
    r = 0.5j * array.gamma_1d * np.exp(-1j * phi)
    return A, b, r


def ode_propagate_qubits(array: ArrayConfig, pulse: PulseSpec, dt: float | None = None,
                         t_span: tuple[float, float] | None = None) -> TimeSeries:
    """Fixed-step RK4 solution of the driven linear coherence equations.

    Integration runs in the frame of the carrier; the output is rotated back
    to the shifted-resonance frame with phase referenced to ``t_on``. Edges
    fall on step boundaries (``dt`` is shrunk to fit) and samples take the
    right limit of the input. Default ``dt = 0.01 / rate``; larger than
    ``0.05 / rate`` is refused.
    """
    A, b, r = _qubit_blocks(array, pulse)
    return _integrate(A, b, r, pulse, ode_rate(array, pulse), dt, t_span, array.n_atoms)


def ode_propagate_qutrits(array: ArrayConfig, eit: EITConfig, pulse: PulseSpec,
                          dt: float | None = None,
                          t_span: tuple[float, float] | None = None) -> TimeSeries:
    """As :func:`ode_propagate_qubits` with a metastable coherence per emitter.

    ``d s_n/dt = i Ds s_n + i Oc e_n`` couples to the optical coherence
    ``e_n`` through ``+ i Oc s_n``.
    """
    if array.level_scheme is not LevelScheme.THREE_LEVEL:
        raise ConfigError("qutrit propagation needs level_scheme = three_level",
                          field="level_scheme")
    Aq, bq, rq = _qubit_blocks(array, pulse)
    n = array.n_atoms
    eye = np.eye(n)
    A = np.block([[Aq, 1j * eit.control_rabi * eye],
                  [1j * eit.control_rabi * eye, 1j * eit.two_photon_detuning * eye]])
    b = np.concatenate([bq, np.zeros(n)])
    r = np.concatenate([rq, np.zeros(n)])
    return _integrate(A, b, r, pulse, ode_rate(array, pulse, eit), dt, t_span, 2 * n)
