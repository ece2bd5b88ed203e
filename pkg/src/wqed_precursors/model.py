"""Domain types, validation and closed-form input spectra.

Conventions used throughout the package
---------------------------------------
* Rates are measured in units of the non-guided decay ``gamma_prime`` when it
  is positive (set it to 1), otherwise in units of ``gamma_1d``.
* Spectral arguments are detunings ``delta = omega - omega0_tilde`` from the
  Lamb-shifted resonance ``omega0_tilde = omega0 + lamb_shift``.
* Positions are stored as phases ``k1D * z`` (radians).
* Complex fields are envelopes in the frame rotating at ``omega0_tilde`` with
  the phase referenced to an edge time ``t0``: an input switched on at ``t0``
  reads ``E0 * exp(-1j * detuning * (t - t0))``. Intensities never depend on
  this choice.
* Fourier convention: ``E(omega) = int E(t) exp(+1j omega t) dt``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError


class LevelScheme(str, Enum):
    TWO_LEVEL = "two_level"
    THREE_LEVEL = "three_level"


class Edge(str, Enum):
    RISING = "rising"
    FALLING = "falling"
    FULL = "full"


@dataclass(frozen=True)
class ArrayConfig:
    """Geometry and rates of the emitter chain."""

    n_sites: int
    occupied: tuple[int, ...]
    lattice_phase: float
    gamma_1d: float
    gamma_prime: float = 1.0
    lamb_shift: float = 0.0
    site_detunings: tuple[float, ...] = ()
    level_scheme: LevelScheme = LevelScheme.TWO_LEVEL
    explicit_positions: tuple[float, ...] | None = None
    positions: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "occupied", tuple(int(i) for i in self.occupied))
        object.__setattr__(self, "level_scheme", LevelScheme(self.level_scheme))
        if self.n_sites < 1:
            raise ConfigError("n_sites must be a positive integer", field="n_sites")
        occ = self.occupied
        if len(occ) == 0:
            raise ConfigError("at least one site must be occupied", field="occupied")
        if any(b <= a for a, b in zip(occ, occ[1:])):
            raise ConfigError(
                "occupied indices must be strictly increasing (no two emitters on one site)",
                field="occupied",
            )
        if occ[0] < 0 or occ[-1] >= self.n_sites:
            raise ConfigError("occupied index out of range [0, n_sites)", field="occupied")
        if self.gamma_1d < 0:
            raise ConfigError("gamma_1d must be >= 0", field="gamma_1d")
        if self.gamma_prime < 0:
            raise ConfigError("gamma_prime must be >= 0", field="gamma_prime")
        if self.gamma_1d + self.gamma_prime <= 0:
            raise ConfigError("gamma_1d + gamma_prime must be > 0", field="gamma_1d")

        n = len(occ)
        if self.explicit_positions is not None:
            pos = np.asarray(self.explicit_positions, dtype=float)
            if pos.shape != (n,):
                raise ConfigError(
                    f"explicit_positions needs {n} entries, got {pos.size}",
                    field="explicit_positions",
                )
            if np.any(np.diff(pos) < 0):
                raise ConfigError("positions must be non-decreasing", field="explicit_positions")
        else:
            pos = self.lattice_phase * np.asarray(occ, dtype=float)
        if not np.all(np.isfinite(pos)):
            raise ConfigError("positions must be finite", field="explicit_positions")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

        det = tuple(float(d) for d in self.site_detunings)
        if det and len(det) != n:
            raise ConfigError(
                f"site_detunings needs {n} entries, got {len(det)}", field="site_detunings"
            )
        object.__setattr__(self, "site_detunings", det)

    @property
    def n_atoms(self) -> int:
        return len(self.occupied)

    @property
    def optical_depth(self) -> float:
        """``N * gamma_1d / gamma_prime``; undefined (raises) when gamma_prime is 0."""
        if self.gamma_prime == 0:
            raise ValueError("optical depth undefined for gamma_prime = 0")
        return self.n_atoms * self.gamma_1d / self.gamma_prime

    @property
    def detunings(self) -> np.ndarray:
        if self.site_detunings:
            return np.asarray(self.site_detunings, dtype=float)
        return np.zeros(self.n_atoms)

    @property
    def homogeneous(self) -> bool:
        return not any(self.site_detunings)

    def replace(self, **changes) -> "ArrayConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {
            "n_sites": self.n_sites,
            "occupied": list(self.occupied),
            "lattice_phase": self.lattice_phase,
            "gamma_1d": self.gamma_1d,
            "gamma_prime": self.gamma_prime,
            "lamb_shift": self.lamb_shift,
            "site_detunings": list(self.site_detunings),
            "level_scheme": self.level_scheme.value,
        }
        if self.explicit_positions is not None:
            out["explicit_positions"] = list(self.explicit_positions)
        return out


def lattice(n_atoms: int, lattice_phase: float, gamma_1d: float, gamma_prime: float = 1.0,
            **kw) -> ArrayConfig:
    """Perfectly filled chain of ``n_atoms`` emitters."""
    return ArrayConfig(
        n_sites=n_atoms,
        occupied=tuple(range(n_atoms)),
        lattice_phase=lattice_phase,
        gamma_1d=gamma_1d,
        gamma_prime=gamma_prime,
        **kw,
    )


_ARRAY_KEYS = {
    "n_sites", "occupied", "lattice_phase", "explicit_positions", "gamma_1d",
    "gamma_prime", "lamb_shift", "site_detunings", "level_scheme",
}


def _number(raw, key, default=None, *, prefix=""):
    if key not in raw:
        if default is None:
            raise ConfigError("missing required value", field=prefix + key)
        return default
    val = raw[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"expected a number, got {val!r}", field=prefix + key)
    if not math.isfinite(val):
        raise ConfigError("value must be finite", field=prefix + key)
    return float(val)


def build_array(raw: Mapping, *, prefix: str = "") -> ArrayConfig:
    """Validate a raw mapping (e.g. parsed JSON) into an :class:`ArrayConfig`.

    Keys mirror the dataclass fields. ``occupied`` defaults to every site;
    ``explicit_positions`` (phases) overrides the lattice and fixes N.
    """
    if not isinstance(raw, Mapping):
        raise ConfigError("array section must be an object", field=prefix.rstrip(".") or None)
    unknown = set(raw) - _ARRAY_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field=prefix + sorted(unknown)[0])
    positions = raw.get("explicit_positions")
    if positions is not None:
        if not isinstance(positions, Sequence) or isinstance(positions, str):
            raise ConfigError("expected a list of numbers", field=prefix + "explicit_positions")
        n_sites = len(positions)
        occupied = tuple(range(n_sites))
        positions = tuple(float(p) for p in positions)
    else:
        if "n_sites" not in raw:
            raise ConfigError("missing required value", field=prefix + "n_sites")
        n_sites = raw["n_sites"]
        if isinstance(n_sites, bool) or not isinstance(n_sites, int):
            raise ConfigError("expected a positive integer", field=prefix + "n_sites")
        occupied = raw.get("occupied", list(range(n_sites)))
        if not isinstance(occupied, Sequence) or isinstance(occupied, str):
            raise ConfigError("expected a list of site indices", field=prefix + "occupied")
        if len(set(occupied)) != len(occupied):
            raise ConfigError("overlapping positions: repeated site index", field=prefix + "occupied")
        occupied = tuple(sorted(int(i) for i in occupied))
    scheme = raw.get("level_scheme", "two_level")
    try:
        scheme = LevelScheme(scheme)
    except ValueError:
        raise ConfigError(f"unknown level scheme {scheme!r}", field=prefix + "level_scheme") from None
    det = raw.get("site_detunings", ())
    try:
        return ArrayConfig(
            n_sites=n_sites,
            occupied=occupied,
            lattice_phase=_number(raw, "lattice_phase", 0.0 if positions is not None else None,
                                  prefix=prefix),
            gamma_1d=_number(raw, "gamma_1d", prefix=prefix),
            gamma_prime=_number(raw, "gamma_prime", 1.0, prefix=prefix),
            lamb_shift=_number(raw, "lamb_shift", 0.0, prefix=prefix),
            site_detunings=tuple(det),
            level_scheme=scheme,
            explicit_positions=positions,
        )
    except ConfigError as exc:
        if exc.field and prefix and not exc.field.startswith(prefix):
            raise ConfigError(str(exc).split("] ", 1)[-1], field=prefix + exc.field) from None
        raise


@dataclass(frozen=True)
class PulseSpec:
    """Square drive: carrier detuning from the shifted resonance, edges, amplitude."""

    detuning: float
    t_on: float = 0.0
    t_off: float = 40.0
    amplitude: float = 1.0
    edge: Edge = Edge.FULL

    def __post_init__(self):
        object.__setattr__(self, "edge", Edge(self.edge))
        if not self.t_off > self.t_on:
            raise ConfigError("t_off must exceed t_on", field="t_off")
        if not self.amplitude > 0:
            raise ConfigError("amplitude must be positive", field="amplitude")

    @property
    def duration(self) -> float:
        return self.t_off - self.t_on

    @property
    def intensity(self) -> float:
        return self.amplitude**2


def build_pulse(raw: Mapping, *, prefix: str = "") -> PulseSpec:
    if not isinstance(raw, Mapping):
        raise ConfigError("pulse section must be an object", field=prefix.rstrip(".") or None)
    unknown = set(raw) - {"detuning", "t_on", "t_off", "amplitude", "edge"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field=prefix + sorted(unknown)[0])
    edge = raw.get("edge", "full")
    try:
        edge = Edge(edge)
    except ValueError:
        raise ConfigError(f"unknown edge {edge!r}", field=prefix + "edge") from None
    try:
        return PulseSpec(
            detuning=_number(raw, "detuning", prefix=prefix),
            t_on=_number(raw, "t_on", 0.0, prefix=prefix),
            t_off=_number(raw, "t_off", 40.0, prefix=prefix),
            amplitude=_number(raw, "amplitude", 1.0, prefix=prefix),
            edge=edge,
        )
    except ConfigError as exc:
        if exc.field and not exc.field.startswith(prefix):
            raise ConfigError(str(exc).split("] ", 1)[-1], field=prefix + exc.field) from None
        raise


@dataclass(frozen=True)
class EITConfig:
    """Control Rabi frequency and two-photon detuning of the qutrit scheme."""

    control_rabi: float
    two_photon_detuning: float = 0.0

    def __post_init__(self):
        if self.control_rabi < 0:
            raise ConfigError("control_rabi must be >= 0", field="control_rabi")


def build_eit(raw: Mapping, *, prefix: str = "") -> EITConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("eit section must be an object", field=prefix.rstrip(".") or None)
    unknown = set(raw) - {"control_rabi", "two_photon_detuning"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field=prefix + sorted(unknown)[0])
    rabi = _number(raw, "control_rabi", prefix=prefix)
    if rabi < 0:
        raise ConfigError("control_rabi must be >= 0", field=prefix + "control_rabi")
    return EITConfig(rabi, _number(raw, "two_photon_detuning", 0.0, prefix=prefix))


@dataclass(frozen=True)
class EdgeSpectrum:
    """Principal-value samples plus the carrier delta kept symbolically.

    The full distribution is ``values(delta) + carrier_weight * dirac(delta - carrier)``.
    """

    delta: np.ndarray
    values: np.ndarray
    carrier: float
    carrier_weight: complex


def edge_spectrum(pulse: PulseSpec, delta, edge: Edge | str | None = None,
                  t0: float | None = None) -> EdgeSpectrum:
    """Fourier transform of a single sharp edge of ``pulse``.

    Rising: ``E0 exp(i delta t0) [+i P/(delta - Delta) + pi dirac]``; falling
    flips the sign of the principal-value part. ``t0`` defaults to 0 (the edge
    at the time origin); pass ``pulse.t_on``/``pulse.t_off`` for absolute edges.
    """
    edge = Edge(edge if edge is not None else pulse.edge)
    if edge is Edge.FULL:
        raise ValueError("edge_spectrum needs 'rising' or 'falling'; use square_pulse_spectrum")
    t0 = 0.0 if t0 is None else t0
    delta = np.asarray(delta, dtype=float)
    nu = delta - pulse.detuning
    if np.any(nu == 0):
        raise ValueError("grid contains the carrier point; the delta weight is kept separately")
    sign = 1.0 if edge is Edge.RISING else -1.0
    vals = sign * 1j * pulse.amplitude * np.exp(1j * delta * t0) / nu
    weight = math.pi * pulse.amplitude * complex(np.exp(1j * pulse.detuning * t0))
    return EdgeSpectrum(delta, vals, pulse.detuning, weight)


def _phi1(z):
    """(exp(z) - 1)/z for complex z, accurate near 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    out = np.empty_like(z)
    zs = z[small]
    out[small] = 1 + zs / 2 + zs * zs / 6 + zs**3 / 24
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb
    return out


def square_pulse_spectrum(pulse: PulseSpec, delta) -> np.ndarray:
    """Closed-form spectrum of the full square pulse (phase referenced to t_on).

    Time profile ``E0 exp(-i Delta (t - t_on))`` on ``[t_on, t_off)``. Entire
    in ``delta``; no carrier singularity.
    """
    delta = np.asarray(delta, dtype=float)
    T = pulse.duration
    nu = delta - pulse.detuning
    return pulse.amplitude * T * np.exp(1j * delta * pulse.t_on) * _phi1(1j * nu * T)
