"""Complex transmission coefficients as functions of detuning.

Every function takes ``delta = omega - omega0_tilde`` (real or complex, any
shape) and returns the transmitted-to-incident field ratio with the free
propagation phase across the chain removed, so ``t -> 1`` far off resonance.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, SingularityError
from .kernels import pole_sum
from .model import ArrayConfig, EITConfig
from .modes import ModeSet, coupling_matrix

POLE_GUARD = 1e-12


def _check_distance(x, points, what):
    if points.size == 0:
        return
    flat = np.ravel(x)
    if flat.size == 0:
        return
    # |x - p| >= |Im x - Im p|: skip poles far from the imaginary range of x
    lo, hi = flat.imag.min(), flat.imag.max()
    gap = np.maximum(lo - points.imag, points.imag - hi)
    points = points[gap < POLE_GUARD]
    if points.size == 0:
        return
    # chunk to bound memory on long grids
    step = max(1, 2_000_000 // max(points.size, 1))
    for s in range(0, flat.size, step):
        d = np.abs(flat[s:s + step, None] - points[None, :])
        if np.any(d < POLE_GUARD):
            raise SingularityError(f"evaluation within {POLE_GUARD:g} of a {what}")


def t_cont(delta, b: float, gamma_prime: float):
    """Lorentz-medium transmission ``exp(-i b / (delta + i G'/2))``.

    Essential singularity at ``delta = -i G'/2``.
    """
    x = np.asarray(delta, dtype=complex) + 0.5j * gamma_prime
    _check_distance(x, np.zeros(1), "essential singularity")
    return np.exp(-1j * b / x)


def t_finite_n(delta, modes: ModeSet, gamma_prime: float):
    """Product over collective modes of ``x / (x - lambda)``, ``x = delta + i G'/2``.

    Zero modes contribute exactly 1 and are skipped.
    """
    x = np.asarray(delta, dtype=complex) + 0.5j * gamma_prime
    lam = modes.active_eigenvalues
    _check_distance(x, lam, "pole")
    out = np.ones_like(x)
    for l in lam:
        out = out * (x / (x - l))
    return out


def finite_n_poles(modes: ModeSet, gamma_prime: float) -> np.ndarray:
    return modes.active_eigenvalues - 0.5j * gamma_prime


def _resolvent_vectors(array: ArrayConfig):
    phi = array.positions
    return np.exp(1j * phi), np.exp(-1j * phi)


def t_resolvent(delta, array: ArrayConfig, method: str = "solve"):
    """Transmission from the steady-state coherences of the driven chain.

    Solves ``M sigma = -E_p`` with ``M = (delta + i G'/2) 1 - diag(Delta_i) - g``
    for every detuning and feeds ``sigma`` into the input-output relation.
    ``Delta_i`` shifts the resonance of emitter ``i``. ``method='eig'``
    diagonalises ``g + diag(Delta_i)`` once (fast for long grids).
    """
    delta = np.asarray(delta, dtype=complex)
    x = delta + 0.5j * array.gamma_prime
    u, w = _resolvent_vectors(array)
    K = coupling_matrix(array) + np.diag(array.detunings).astype(complex)
    half = 0.5j * array.gamma_1d
    if method == "eig":
        mu, V = np.linalg.eig(K)
        norm2 = np.einsum("ij,ij->j", V, V)
        V = V / np.sqrt(norm2)
        a = (w @ V) * (V.T @ u)
        _check_distance(x, mu, "pole")
        acc = pole_sum(x.ravel(), mu, a)
        return (1.0 - half * acc).reshape(x.shape)
    if method != "solve":
        raise ValueError(f"unknown method {method!r}")
    n = array.n_atoms
    flat = x.ravel()
    out = np.empty_like(flat)
    eye = np.eye(n)
    chunk = max(1, 200_000 // (n * n))
    for s in range(0, flat.size, chunk):
        xs = flat[s:s + chunk]
        M = xs[:, None, None] * eye - K[None]
        try:
            sol = np.linalg.solve(M, np.broadcast_to(u, (xs.size, n))[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise SingularityError("steady-state matrix is singular (pole)") from exc
        if not np.all(np.isfinite(sol)):
            raise SingularityError("steady-state matrix is singular (pole)")
        out[s:s + chunk] = 1.0 - half * (sol @ w)
    return out.reshape(x.shape)


def _eit_offset(eit: EITConfig, carrier_detuning: float | None) -> float:
    if carrier_detuning is None:
        return 0.0
    return carrier_detuning - eit.two_photon_detuning


def t_eit(delta, modes: ModeSet, eit: EITConfig, gamma_prime: float,
          carrier_detuning: float | None = None):
    """Qutrit-chain transmission under a control field.

    Without ``carrier_detuning`` the two-photon resonance convention is used
    (the two-photon detuning follows the carrier). Passing the carrier
    detuning enables the general case, where the Raman factor becomes
    ``delta - (carrier - two_photon_detuning)``.
    """
    oc2 = eit.control_rabi**2
    if oc2 == 0:
        # the Raman factor cancels: two-level product
        return t_finite_n(delta, modes, gamma_prime)
    d = np.asarray(delta, dtype=complex)
    x = d + 0.5j * gamma_prime
    raman = d - _eit_offset(eit, carrier_detuning)
    _check_distance(d, eit_poles_flat(modes, eit, gamma_prime, carrier_detuning), "pole")
    num = raman * x - oc2
    out = np.ones_like(x)
    for l in modes.active_eigenvalues:
        out = out * (num / (raman * (x - l) - oc2))
    return out


def eit_pole_pairs(modes: ModeSet, eit: EITConfig, gamma_prime: float,
                   carrier_detuning: float | None = None):
    """Pole pairs per active mode: ``(omega_plus, omega_minus, Omega_xi)``.

    ``omega_pm = (dt + o)/2 +- sqrt((dt - o)^2/4 + Oc^2)`` with
    ``dt = lambda - i G'/2`` and Raman offset ``o`` (0 at two-photon resonance),
    ``Omega_xi = sqrt(4 Oc^2 + (dt - o)^2)``.
    """
    o = _eit_offset(eit, carrier_detuning)
    dt = modes.active_eigenvalues - 0.5j * gamma_prime
    big_omega = np.sqrt(4 * eit.control_rabi**2 + (dt - o) ** 2 + 0j)
    centre = 0.5 * (dt + o)
    return centre + 0.5 * big_omega, centre - 0.5 * big_omega, big_omega


def eit_poles_flat(modes, eit, gamma_prime, carrier_detuning=None) -> np.ndarray:
    p, m, _ = eit_pole_pairs(modes, eit, gamma_prime, carrier_detuning)
    return np.concatenate([p, m])


def t_large_n(delta, modes: ModeSet, gamma_prime: float):
    """First-order (Beer-Lambert) limit ``exp(sum_xi lambda_xi / x)``."""
    x = np.asarray(delta, dtype=complex) + 0.5j * gamma_prime
    _check_distance(x, np.zeros(1), "essential singularity")
    return np.exp(np.sum(modes.eigenvalues) / x)


@dataclass(frozen=True)
class LinearDispersion:
    """Waveguide with ``k(omega) = omega / speed``.

    Positions are fixed by the phases ``k(omega0) z_i`` stored on the array:
    ``z_i = phi_i * speed / omega0``. ``gamma_1d`` optionally maps absolute
    frequency to the guided decay rate (default: the array's constant value).
    """

    omega0: float
    speed: float = 1.0
    gamma_1d: Callable | None = None

    def __post_init__(self):
        if not self.speed > 0:
            raise ConfigError("speed of light in the guide must be positive", field="speed")
        if not self.omega0 > 0:
            raise ConfigError("omega0 must be positive", field="omega0")

    def delays(self, array: ArrayConfig) -> np.ndarray:
        """Propagation times ``z_i / speed`` from the origin."""
        return array.positions / self.omega0

    def chain_transit(self, array: ArrayConfig) -> float:
        d = self.delays(array)
        return float(d[-1] - d[0])


def mirror_chain_dispersion(n_atoms: int, transit_time: float, order: int = 50) -> tuple:
    """Phases and dispersion for a mirror-configuration chain of given light transit time.

    Spacing phase ``order * pi`` at resonance; ``omega0`` chosen so that the
    first-to-last transit equals ``transit_time``.
    """
    spacing = order * np.pi
    omega0 = (n_atoms - 1) * spacing / transit_time if n_atoms > 1 else 1.0
    return spacing, LinearDispersion(omega0=omega0)


def _nonmarkov_parts(omega, array, dispersion):
    omega = np.asarray(omega, dtype=float)
    delta = omega - (dispersion.omega0 + array.lamb_shift)
    scale = omega / dispersion.omega0
    phi = array.positions[None, :] * np.ravel(scale)[:, None]
    if dispersion.gamma_1d is None:
        g1 = np.full(np.ravel(omega).shape, array.gamma_1d)
    else:
        g1 = np.asarray(dispersion.gamma_1d(np.ravel(omega)), dtype=float) * np.ones(np.ravel(omega).shape)
    return delta, phi, g1


def nonmarkov_matrices(omega, array: ArrayConfig, dispersion: LinearDispersion):
    """Frequency-dependent coupling matrices ``g(omega)`` (shape ``(n_freq, N, N)``)."""
    _, phi, g1 = _nonmarkov_parts(omega, array, dispersion)
    dphi = np.abs(phi[:, :, None] - phi[:, None, :])
    return -0.5j * g1[:, None, None] * np.exp(1j * dphi)


def t_nonmarkov(omega, array: ArrayConfig, dispersion: LinearDispersion,
                method: str = "solve"):
    """Transmission with retardation: ``g`` rebuilt at every frequency.

    ``t = 1 + (1/g_RL) sum_xi (g_R . v_xi)(v_xi^T . g_L) / (x - lambda_xi(omega))``,
    referenced to the right end of the chain (output in retarded time). With
    ``method='eig'`` the sum runs over a fresh eigendecomposition per
    frequency; ``'solve'`` evaluates the same resolvent by a linear solve.
    """
    from .modes import eigenmodes

    omega = np.asarray(omega, dtype=float)
    shape = omega.shape
    delta, phi, g1 = _nonmarkov_parts(omega, array, dispersion)
    x = delta.ravel() + 0.5j * array.gamma_prime
    n = array.n_atoms
    det = np.diag(array.detunings)
    out = np.empty(x.shape, dtype=complex)
    chunk = max(1, 100_000 // (n * n))
    for s in range(0, x.size, chunk):
        ph = phi[s:s + chunk]
        gm = -0.5j * g1[s:s + chunk, None, None] * np.exp(
            1j * np.abs(ph[:, :, None] - ph[:, None, :]))
        u = np.exp(1j * ph)   # g(z_n, z_L) up to the common factor
        w = np.exp(-1j * ph)  # g(z_R, z_n) up to the common factor
        xs = x[s:s + chunk]
        if method == "solve":
            M = xs[:, None, None] * np.eye(n) - gm - det
            sol = np.linalg.solve(M, u[..., None])[..., 0]
            acc = np.einsum("ij,ij->i", w, sol)
        elif method == "eig":
            acc = np.empty(xs.shape, dtype=complex)
            for k in range(xs.size):
                ms = eigenmodes(gm[k] + det, gamma_1d=g1[s + k])
                V = ms.eigenvectors
                a = (w[k] @ V) * (V.T @ u[k])
                if np.any(np.abs(xs[k] - ms.eigenvalues) < POLE_GUARD):
                    raise SingularityError("evaluation on a pole")
                acc[k] = np.sum(a / (xs[k] - ms.eigenvalues))
        else:
            raise ValueError(f"unknown method {method!r}")
        out[s:s + chunk] = 1.0 - 0.5j * g1[s:s + chunk] * acc
    return out.reshape(shape)


def nonmarkov_determinant(omega, array: ArrayConfig, dispersion: LinearDispersion):
    """``|det M(omega)|`` along real frequencies (pole-scan helper)."""
    delta, _, _ = _nonmarkov_parts(omega, array, dispersion)
    gm = nonmarkov_matrices(omega, array, dispersion)
    x = np.ravel(delta) + 0.5j * array.gamma_prime
    M = x[:, None, None] * np.eye(array.n_atoms) - gm - np.diag(array.detunings)
    return np.abs(np.linalg.det(M)).reshape(np.shape(omega))


def resolvent_determinant(delta, array: ArrayConfig):
    """``|det M(delta)|`` for the Markovian chain (pole-scan helper)."""
    delta = np.asarray(delta, dtype=complex)
    K = coupling_matrix(array) + np.diag(array.detunings)
    x = delta.ravel() + 0.5j * array.gamma_prime
    M = x[:, None, None] * np.eye(array.n_atoms) - K[None]
    return np.abs(np.linalg.det(M)).reshape(delta.shape)


def local_minima(values) -> np.ndarray:
    """Indices of strict interior local minima of a 1-D sequence."""
    v = np.asarray(values)
    inner = (v[1:-1] < v[:-2]) & (v[1:-1] < v[2:])
    return np.flatnonzero(inner) + 1


@dataclass(frozen=True)
class ResponseFn:
    """A transmission coefficient together with what is known about its poles.

    ``poles`` is only set where the pole positions are known in closed form
    (finite-N and EIT kinds); other kinds expose scan helpers instead.
    ``smooth_tail`` is False when ``t(delta) - 1`` keeps oscillating at large
    detuning (retardation), which limits the tail model used by the spectral
    oracle.
    """

    kind: str
    func: Callable = field(repr=False)
    poles: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    smooth_tail: bool = True

    def __call__(self, delta):
        return self.func(delta)

    @classmethod
    def continuous(cls, b, gamma_prime):
        return cls("continuous", lambda d: t_cont(d, b, gamma_prime), None,
                   {"b": b, "gamma_prime": gamma_prime})

    @classmethod
    def finite_n(cls, modes: ModeSet, gamma_prime):
        return cls("finiteN", lambda d: t_finite_n(d, modes, gamma_prime),
                   finite_n_poles(modes, gamma_prime), {"modes": modes, "gamma_prime": gamma_prime})

    @classmethod
    def resolvent(cls, array: ArrayConfig, method="solve"):
        return cls("resolvent", lambda d: t_resolvent(d, array, method), None, {"array": array})

    @classmethod
    def eit(cls, modes: ModeSet, eit: EITConfig, gamma_prime, carrier_detuning=None):
        return cls("eit", lambda d: t_eit(d, modes, eit, gamma_prime, carrier_detuning),
                   eit_poles_flat(modes, eit, gamma_prime, carrier_detuning),
                   {"modes": modes, "eit": eit, "gamma_prime": gamma_prime,
                    "carrier_detuning": carrier_detuning})

    @classmethod
    def large_n(cls, modes: ModeSet, gamma_prime):
        return cls("largeN", lambda d: t_large_n(d, modes, gamma_prime), None,
                   {"modes": modes, "gamma_prime": gamma_prime,
                    "b": float(abs(np.sum(modes.eigenvalues)))})

    @classmethod
    def nonmarkov(cls, array: ArrayConfig, dispersion: LinearDispersion):
        omega_ref = dispersion.omega0 + array.lamb_shift
        return cls("nonmarkov", lambda d: t_nonmarkov(np.asarray(d) + omega_ref, array, dispersion),
                   None, {"array": array, "dispersion": dispersion}, smooth_tail=False)


SPECTRUM_CSV_HEADER = ["delta_over_gamma_prime", "re_t", "im_t", "abs_t_sq"]


def write_spectrum_csv(delta, t, path, gamma_prime: float = 1.0) -> Path:
    path = Path(path)
    unit = gamma_prime if gamma_prime > 0 else 1.0
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SPECTRUM_CSV_HEADER)
        for d, v in zip(np.ravel(delta), np.ravel(t)):
            w.writerow([repr(float(d) / unit), repr(float(v.real)), repr(float(v.imag)),
                        repr(float(abs(v) ** 2))])
    return path
