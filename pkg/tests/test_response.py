import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wqed_precursors.errors import ConfigError, SingularityError
from wqed_precursors.model import ArrayConfig, EITConfig, lattice
from wqed_precursors.modes import array_modes
from wqed_precursors.response import (SPECTRUM_CSV_HEADER, LinearDispersion, ResponseFn,
                                      eit_pole_pairs, finite_n_poles, local_minima,
                                      mirror_chain_dispersion, nonmarkov_determinant,
                                      resolvent_determinant, t_cont, t_eit, t_finite_n,
                                      t_large_n, t_nonmarkov, t_resolvent, write_spectrum_csv)

from conftest import od_modes, random_lattice

GRID = np.linspace(-10, 10, 1001)


def test_continuous_medium_beer_lambert_on_resonance():
    b = 20 * 0.25 / 2  # N G1D / 2 for OD 5
    assert abs(t_cont(0.0, b, 1.0)) ** 2 == pytest.approx(math.exp(-10), rel=1e-12)
    assert abs(t_cont(0.0, b, 1.0)) ** 2 == pytest.approx(4.54e-5, rel=1e-3)


def test_continuous_medium_limits():
    np.testing.assert_array_equal(t_cont(GRID, 0.0, 1.0), 1.0)
    assert abs(t_cont(1e9, 2.5, 1.0) - 1) < 1e-8
    assert abs(t_cont(-1e9, 2.5, 1.0) - 1) < 1e-8
    with pytest.raises(SingularityError):
        t_cont(-0.5j, 2.5, 1.0)


def test_single_emitter_on_resonance():
    for g1 in (0.3, 1.0, 5.0):
        modes = array_modes(lattice(1, 0.0, g1))
        assert t_finite_n(0.0, modes, 1.0) == pytest.approx(1.0 / (1.0 + g1), abs=1e-15)


def test_mirror_chain_is_a_single_effective_emitter():
    n = 7
    modes = array_modes(lattice(n, np.pi, 0.4))
    single = (GRID + 0.5j) / (GRID + 0.5j + 0.5j * n * 0.4)
    np.testing.assert_allclose(t_finite_n(GRID, modes, 1.0), single, rtol=1e-10)


def test_finite_n_far_detuned_transparency():
    _, modes = od_modes(20)
    assert abs(t_finite_n(1e9, modes, 1.0) - 1) < 1e-7


def test_finite_n_refuses_pole():
    _, modes = od_modes(3)
    p = finite_n_poles(modes, 1.0)[0]
    with pytest.raises(SingularityError):
        t_finite_n(p, modes, 1.0)


def test_finite_n_poles_are_determinant_zeros():
    arr, modes = od_modes(4, od=3.0)
    poles = finite_n_poles(modes, 1.0)
    for p in poles:
        # |det M| on a small complex grid around the pole has its minimum at the centre
        h = 1e-3
        z = p + h * np.array([0, 1, -1, 1j, -1j])
        d = resolvent_determinant(z, arr)
        assert d[0] < 1e-12
        assert np.all(d[1:] > 10 * d[0])


def test_resolvent_equals_product_formula_random_homogeneous():
    rng = np.random.default_rng(42)
    arr = random_lattice(rng, 5)
    while arr.n_atoms != 5:
        arr = random_lattice(rng, 5)
    modes = array_modes(arr)
    a = t_resolvent(GRID, arr)
    b = t_finite_n(GRID, modes, arr.gamma_prime)
    assert np.abs(a - b).max() < 1e-10
    np.testing.assert_allclose(t_resolvent(GRID, arr, "eig"), b, atol=1e-10)


def test_single_emitter_site_detuning_shifts_the_dip():
    arr = ArrayConfig(1, (0,), 0.0, 2.0, site_detunings=(0.7,))
    t = t_resolvent(GRID, arr)
    assert GRID[np.argmin(np.abs(t))] == pytest.approx(0.7, abs=0.02)
    # exact 1 x 1 solve
    expected = 1 - 1.0 / (GRID + 0.5j - 0.7 + 1.0j) * 1.0j
    np.testing.assert_allclose(t, expected, rtol=1e-12)


def test_reversed_ordering_gives_same_transmission():
    rng = np.random.default_rng(7)
    pos = np.sort(rng.uniform(0, 10, 6))
    det = rng.normal(0, 0.4, 6)
    a = ArrayConfig(6, tuple(range(6)), 0.0, 0.8, explicit_positions=tuple(pos),
                    site_detunings=tuple(det))
    mirrored = tuple(np.sort(pos[-1] - pos))
    b = ArrayConfig(6, tuple(range(6)), 0.0, 0.8, explicit_positions=mirrored,
                    site_detunings=tuple(det[::-1]))
    np.testing.assert_allclose(t_resolvent(GRID, a), t_resolvent(GRID, b), rtol=1e-10)


def test_eit_transparency_at_two_photon_resonance():
    _, modes = od_modes(10, od=20)
    eit = EITConfig(2.0)
    assert t_eit(0.0, modes, eit, 1.0) == pytest.approx(1.0, abs=1e-14)


def test_eit_without_control_is_two_level():
    _, modes = od_modes(6)
    d = GRID + 0.013
    np.testing.assert_array_equal(t_eit(d, modes, EITConfig(0.0), 1.0),
                                  t_finite_n(d, modes, 1.0))


def test_single_qutrit_pole_pair():
    modes = array_modes(lattice(1, 0.0, 1.0))
    plus, minus, _ = eit_pole_pairs(modes, EITConfig(4.0), 1.0)
    root = math.sqrt(16 - 0.25)
    assert plus[0] == pytest.approx(root - 0.5j, abs=1e-12)
    assert minus[0] == pytest.approx(-root - 0.5j, abs=1e-12)
    assert root == pytest.approx(3.9686, abs=1e-4)
    with pytest.raises(SingularityError):
        t_eit(plus[0], modes, EITConfig(4.0), 1.0)


def test_eit_general_two_photon_detuning_reduces_to_convention():
    _, modes = od_modes(3)
    eit = EITConfig(1.5, two_photon_detuning=0.4)
    # carrier at the two-photon resonance: Raman offset vanishes
    np.testing.assert_allclose(t_eit(GRID, modes, eit, 1.0, carrier_detuning=0.4),
                               t_eit(GRID, modes, EITConfig(1.5), 1.0), rtol=1e-13)
    # otherwise the transparency point moves to the Raman resonance
    t = t_eit(np.array([0.0, 0.1]), modes, eit, 1.0, carrier_detuning=0.5)
    assert t[1] == pytest.approx(1.0, abs=1e-14)
    assert abs(t[0] - 1.0) > 1e-3


def test_large_n_equals_continuous_medium():
    _, modes = od_modes(20)
    np.testing.assert_allclose(t_large_n(GRID, modes, 1.0), t_cont(GRID, 2.5, 1.0), rtol=1e-12)


def _largen_deviation(n, od=5.0):
    _, modes = od_modes(n, od)
    return np.abs(np.abs(t_finite_n(GRID, modes, 1.0)) ** 2
                  - np.abs(t_large_n(GRID, modes, 1.0)) ** 2).max()


def test_large_n_deviation_shrinks_at_fixed_depth():
    dev = [_largen_deviation(n) for n in (2, 20, 200)]
    assert dev[0] > dev[1] > dev[2]
    assert dev[2] < 1e-3


def test_large_n_fails_for_one_strongly_coupled_emitter():
    modes = array_modes(lattice(1, 0.0, 5.0))
    exact = abs(t_finite_n(0.0, modes, 1.0)) ** 2
    approx = abs(t_large_n(0.0, modes, 1.0)) ** 2
    assert abs(exact - approx) / exact > 0.1


def test_fixed_depth_collapse():
    # transmittance of (N, G1D) in {(1, 5), (2, 2.5), (200, 0.025)} against the medium
    cont = np.abs(t_cont(GRID, 2.5, 1.0)) ** 2
    gaps = []
    for n in (1, 2, 200):
        _, modes = od_modes(n)
        gaps.append(np.abs(np.abs(t_finite_n(GRID, modes, 1.0)) ** 2 - cont).max())
    assert gaps[0] > gaps[1] > gaps[2]


def test_nonmarkov_short_chain_is_markovian_mirror():
    n = 4
    spacing, disp = mirror_chain_dispersion(n, 1e-8, order=2)
    arr = lattice(n, spacing, 0.7)
    mirror = array_modes(lattice(n, np.pi, 0.7))
    omega = disp.omega0 + GRID
    np.testing.assert_allclose(t_nonmarkov(omega, arr, disp),
                               t_finite_n(GRID, mirror, 1.0), atol=1e-6)
    np.testing.assert_allclose(t_nonmarkov(omega, arr, disp, method="eig"),
                               t_finite_n(GRID, mirror, 1.0), atol=1e-6)


def test_nonmarkov_single_emitter_is_lorentzian():
    disp = LinearDispersion(omega0=50.0)
    arr = lattice(1, 0.0, 1.3)
    single = array_modes(arr)
    np.testing.assert_allclose(t_nonmarkov(50.0 + GRID, arr, disp),
                               t_finite_n(GRID, single, 1.0), rtol=1e-12)


def test_nonmarkov_long_mirror_chain_has_several_resonances():
    n, g1 = 4, 1.0
    spacing, disp = mirror_chain_dispersion(n, 10.0 / g1, order=200)
    arr = lattice(n, spacing, g1)
    omega = disp.omega0 + np.linspace(-6, 6, 4001)
    minima = local_minima(nonmarkov_determinant(omega, arr, disp))
    assert minima.size > 1
    # the Markovian mirror chain has a single resonance
    markov = local_minima(resolvent_determinant(np.linspace(-6, 6, 4001),
                                                lattice(n, np.pi, g1)))
    assert markov.size == 1


def test_dispersion_validation():
    with pytest.raises(ConfigError):
        LinearDispersion(omega0=10.0, speed=0.0)
    with pytest.raises(ConfigError):
        LinearDispersion(omega0=10.0, speed=-1.0)


def test_response_fn_metadata():
    _, modes = od_modes(5)
    r = ResponseFn.finite_n(modes, 1.0)
    assert r.kind == "finiteN"
    np.testing.assert_allclose(r.poles, modes.eigenvalues - 0.5j)
    assert ResponseFn.resolvent(lattice(2, 1.0, 1.0)).poles is None
    e = ResponseFn.eit(modes, EITConfig(3.0), 1.0)
    assert e.poles.size == 10
    assert ResponseFn.large_n(modes, 1.0).params["b"] == pytest.approx(2.5)


configs = st.tuples(st.integers(1, 10), st.floats(0.0, 3.1), st.floats(0.0, 4.0),
                    st.floats(0.01, 3.0), st.floats(0.0, 5.0))


@settings(max_examples=60, deadline=None)
@given(configs)
def test_passivity_every_kind(c):
    n, phase, g1, gp, oc = c
    arr = lattice(n, phase, g1, gp)
    modes = array_modes(arr)
    d = np.linspace(-12, 12, 241) + 1e-3
    bound = 1 + 1e-9
    kinds = [t_cont(d, n * g1 / 2, gp), t_large_n(d, modes, gp)]
    try:
        kinds += [t_finite_n(d, modes, gp), t_resolvent(d, arr)]
        kinds += [t_eit(d, modes, EITConfig(oc), gp)]
    except SingularityError:
        pass
    for t in kinds:
        assert np.abs(t).max() <= bound


def test_spectrum_csv(tmp_path):
    d = np.array([-1.0, 0.0, 2.0])
    t = t_cont(d, 1.0, 2.0)
    path = write_spectrum_csv(d, t, tmp_path / "s.csv", gamma_prime=2.0)
    rows = list(csv.reader(path.open()))
    assert rows[0] == SPECTRUM_CSV_HEADER
    assert [float(r[0]) for r in rows[1:]] == [-0.5, 0.0, 1.0]
    assert float(rows[2][3]) == pytest.approx(abs(t[1]) ** 2)
