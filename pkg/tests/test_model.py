import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from wqed_precursors.errors import ConfigError
from wqed_precursors.model import (ArrayConfig, EITConfig, PulseSpec, build_array, build_eit,
                                   build_pulse, edge_spectrum, lattice, square_pulse_spectrum)

from conftest import HALF_PI


def test_fully_filled_chain_has_optical_depth_five():
    arr = build_array({"n_sites": 20, "lattice_phase": HALF_PI, "gamma_1d": 0.25})
    assert arr.n_atoms == 20
    assert arr.optical_depth == pytest.approx(5.0, rel=1e-15)


def test_single_site_sits_at_origin():
    arr = build_array({"n_sites": 1, "lattice_phase": 1.234, "gamma_1d": 0.7})
    np.testing.assert_array_equal(arr.positions, [0.0])
    assert arr.optical_depth == pytest.approx(0.7)


def test_partially_filled_lattice_counts_only_occupied_sites():
    rng = np.random.default_rng(1)
    occ = sorted(rng.choice(300, 150, replace=False).tolist())
    arr = build_array({"n_sites": 300, "occupied": occ, "lattice_phase": HALF_PI,
                       "gamma_1d": 0.08})
    assert arr.optical_depth == pytest.approx(12.0)
    np.testing.assert_allclose(arr.positions, HALF_PI * np.array(occ))


@pytest.mark.parametrize("raw, field", [
    ({"n_sites": 4, "occupied": [1, 1], "lattice_phase": 1.0, "gamma_1d": 1.0}, "occupied"),
    ({"n_sites": 4, "occupied": [], "lattice_phase": 1.0, "gamma_1d": 1.0}, "occupied"),
    ({"n_sites": 4, "occupied": [0, 4], "lattice_phase": 1.0, "gamma_1d": 1.0}, "occupied"),
    ({"n_sites": 2, "lattice_phase": 1.0, "gamma_1d": "x"}, "gamma_1d"),
    ({"n_sites": 2, "lattice_phase": 1.0}, "gamma_1d"),
    ({"n_sites": 2, "lattice_phase": 1.0, "gamma_1d": -1.0}, "gamma_1d"),
    ({"n_sites": 2, "lattice_phase": 1.0, "gamma_1d": 0.0, "gamma_prime": 0.0}, "gamma_1d"),
    ({"n_sites": 2, "lattice_phase": 1.0, "gamma_1d": 1.0, "colour": 3}, "colour"),
    ({"n_sites": 2, "lattice_phase": 1.0, "gamma_1d": 1.0, "level_scheme": "x"}, "level_scheme"),
    ({"explicit_positions": [0.0, 2.0, 1.0], "gamma_1d": 1.0}, "explicit_positions"),
])
def test_invalid_array_reports_the_offending_field(raw, field):
    with pytest.raises(ConfigError) as info:
        build_array(raw)
    assert info.value.field == field


def test_site_detunings_must_match_atom_count():
    with pytest.raises(ConfigError):
        lattice(3, 1.0, 1.0, site_detunings=(0.1, 0.2))


def test_optical_depth_undefined_without_gamma_prime():
    arr = lattice(3, 1.0, 1.0, gamma_prime=0.0)
    with pytest.raises(ValueError):
        arr.optical_depth


def test_pulse_and_eit_validation():
    assert build_pulse({"detuning": 0.3}).duration == 40.0
    with pytest.raises(ConfigError):
        PulseSpec(0.0, 5.0, 5.0)
    with pytest.raises(ConfigError):
        PulseSpec(0.0, amplitude=0.0)
    with pytest.raises(ConfigError):
        build_pulse({"detuning": 0.0, "edge": "sideways"})
    with pytest.raises(ConfigError):
        build_eit({"control_rabi": -1.0})
    assert build_eit({"control_rabi": 4}).two_photon_detuning == 0.0
    with pytest.raises(ConfigError):
        EITConfig(-0.1)


def test_edge_spectrum_sign_follows_edge():
    p = PulseSpec(0.0)
    rise = edge_spectrum(p, [2.0], "rising")
    fall = edge_spectrum(p, [2.0], "falling")
    assert rise.values[0] == pytest.approx(0.5j)
    assert fall.values[0] == pytest.approx(-0.5j)
    assert rise.carrier_weight == pytest.approx(math.pi)


def test_edge_spectrum_refuses_the_carrier_point():
    with pytest.raises(ValueError):
        edge_spectrum(PulseSpec(0.3), [0.3], "rising")


def _quadrature_spectrum(p, d):
    nu = d - p.detuning

    def re(t):
        return math.cos(d * p.t_on + nu * (t - p.t_on))

    def im(t):
        return math.sin(d * p.t_on + nu * (t - p.t_on))

    opts = dict(limit=400, epsabs=1e-13, epsrel=1e-12)
    return p.amplitude * complex(quad(re, p.t_on, p.t_off, **opts)[0],
                                 quad(im, p.t_on, p.t_off, **opts)[0])


@pytest.mark.parametrize("detuning, t_on, t_off, amp", [
    (0.3, 0.0, 5.0, 1.0), (-1.2, 2.0, 9.5, 0.7), (0.0, -3.0, 1.0, 2.0)])
def test_square_pulse_spectrum_matches_quadrature(detuning, t_on, t_off, amp):
    p = PulseSpec(detuning, t_on, t_off, amp)
    for d in (-4.1, -0.5, detuning, detuning + 1e-7, 0.8, 3.3):
        exact = _quadrature_spectrum(p, d)
        got = square_pulse_spectrum(p, [d])[0]
        assert abs(got - exact) <= 1e-10 * abs(exact) + 1e-13


@settings(max_examples=40, deadline=None)
@given(det=st.floats(-3, 3), t_on=st.floats(-5, 5), dur=st.floats(0.1, 30),
       amp=st.floats(0.1, 5))
def test_two_edges_rebuild_the_square_pulse(det, t_on, dur, amp):
    p = PulseSpec(det, t_on, t_on + dur, amp)
    d = det + np.array([-2.7, -0.3, 0.11, 1.9])
    rise = edge_spectrum(p, d, "rising", t0=p.t_on)
    fall = edge_spectrum(p, d, "falling", t0=p.t_off)
    carrier = cmath.exp(-1j * det * dur)  # field at t_off relative to the t_on phase
    np.testing.assert_allclose(rise.values + carrier * fall.values,
                               square_pulse_spectrum(p, d), rtol=1e-9, atol=1e-12)
    # the two carrier deltas add up to the continuous wave
    assert rise.carrier_weight + carrier * fall.carrier_weight == pytest.approx(
        2 * math.pi * amp * cmath.exp(1j * det * p.t_on))


def test_array_round_trips_through_dict():
    arr = lattice(4, 0.7, 1.3, 0.9, site_detunings=(0.1, 0.0, -0.2, 0.3))
    again = build_array(arr.to_dict())
    assert again == arr
    assert isinstance(arr, ArrayConfig)
