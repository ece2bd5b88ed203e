import csv
import json
import math

import numpy as np
import pytest

from wqed_precursors.errors import ConfigError, FitError, RoutingError
from wqed_precursors.ensemble import (ENSEMBLE_CSV_HEADER, DisorderSpec, EnsembleScenario,
                                      choose_engine, contour_is_flat, contour_landscape,
                                      default_grid, ensemble_average, falling_intensity,
                                      fit_parameters, realization_rng, sample_disorder)
from wqed_precursors.model import ArrayConfig, lattice
from wqed_precursors.modes import array_modes
from wqed_precursors.transients import TimeSeries, residue_transient_qubits

from conftest import HALF_PI

SHORT = EnsembleScenario(0.5, 10.0, 501)


def _sites(n, g1=2.5):
    return ArrayConfig(n, tuple(range(n)), HALF_PI, g1)


def test_spec_validation():
    base = _sites(10)
    with pytest.raises(ConfigError):
        DisorderSpec("imperfect_fill", base, 10, n_filled=11)
    with pytest.raises(ConfigError):
        DisorderSpec("imperfect_fill", base, 10)
    with pytest.raises(ConfigError):
        DisorderSpec("gaussian_detuning", base, 10, sigma=-1.0)
    with pytest.raises(ConfigError):
        DisorderSpec("random_positions", base, 10)
    with pytest.raises(ConfigError):
        DisorderSpec("gaussian_detuning", base, 0)


def test_zero_disorder_returns_the_clean_array():
    base = lattice(6, HALF_PI, 1.0)
    spec = DisorderSpec("gaussian_detuning", base, 5, 3, sigma=0.0)
    for r in range(5):
        arr = sample_disorder(spec, r)
        assert arr == base
        assert all(d == 0 for d in arr.detunings)
    full = DisorderSpec("imperfect_fill", _sites(6), 5, 3, n_filled=6)
    assert sample_disorder(full, 2).occupied == tuple(range(6))


def test_same_seed_and_index_give_identical_configs():
    spec = DisorderSpec("random_positions", lattice(5, HALF_PI, 1.0), 10, 42, z_max=5 * math.pi)
    a, b = sample_disorder(spec, 3), sample_disorder(spec, 3)
    assert a.explicit_positions == b.explicit_positions
    assert a.explicit_positions != sample_disorder(spec, 4).explicit_positions
    assert list(a.explicit_positions) == sorted(a.explicit_positions)
    x = realization_rng(42, 3).standard_normal(4)
    y = realization_rng(42, 3).standard_normal(4)
    assert np.array_equal(x, y)
    assert not np.array_equal(x, realization_rng(43, 3).standard_normal(4))


def test_imperfect_fill_draws_distinct_sites():
    spec = DisorderSpec("imperfect_fill", _sites(300, 0.08), 20, 1, n_filled=50)
    for r in range(20):
        occ = sample_disorder(spec, r).occupied
        assert len(set(occ)) == 50 and list(occ) == sorted(occ)
        assert 0 <= occ[0] and occ[-1] < 300


@pytest.mark.parametrize("kind,kw", [("gaussian_detuning", {"sigma": 0.0}),
                                     ("imperfect_fill", {"n_filled": 5})])
def test_clean_limit_matches_the_clean_array(kind, kw):
    base = lattice(5, HALF_PI, 2.5) if kind == "gaussian_detuning" else _sites(5)
    spec = DisorderSpec(kind, base, 1, **kw)
    res = ensemble_average(spec, SHORT)
    ref = residue_transient_qubits(np.linspace(0, 10, 501), array_modes(lattice(5, HALF_PI, 2.5)),
                                   0.5, 1.0, "falling")
    assert np.abs(res.mean.intensity - ref.intensity).max() < 1e-10


def test_detuning_disorder_with_zero_width_on_every_engine():
    base = lattice(3, HALF_PI, 1.0)
    spec = DisorderSpec("gaussian_detuning", base, 1, sigma=0.0)
    sc = EnsembleScenario(0.2, 10.0, 501)
    ref = ensemble_average(spec, sc, "residue").mean
    for engine in ("spectral", "ode"):
        out = ensemble_average(spec, sc, engine).mean
        assert out.intensity[0] == pytest.approx(ref.intensity[0], abs=1e-9)
        mine = np.interp(ref.tau, out.tau, out.intensity)
        assert np.abs(mine - ref.intensity).max() < 1e-4


def test_residue_engine_refuses_detuning_disorder():
    spec = DisorderSpec("gaussian_detuning", lattice(4, HALF_PI, 1.0), 3, sigma=0.5)
    with pytest.raises(RoutingError):
        ensemble_average(spec, SHORT, "residue")
    with pytest.raises(RoutingError):
        falling_intensity(sample_disorder(spec, 0), SHORT, "residue")
    assert choose_engine(spec, SHORT) in ("spectral", "ode")


def test_unknown_engine_is_a_config_error():
    with pytest.raises(ConfigError):
        falling_intensity(lattice(2, HALF_PI, 1.0), SHORT, "magic")


def test_spectral_engine_agrees_with_ode_under_detuning_disorder():
    spec = DisorderSpec("gaussian_detuning", lattice(4, HALF_PI, 1.0), 3, 9, sigma=0.5)
    sc = EnsembleScenario(0.1, 10.0, 501)
    grid = default_grid(spec, sc)
    arr = sample_disorder(spec, 1)
    a = falling_intensity(arr, sc, "spectral", grid)
    b = falling_intensity(arr, sc, "ode", dt=grid.dt)
    n = min(a.samples.size, b.samples.size)
    assert np.abs(a.intensity[:n] - b.intensity[:n]).max() < 1e-6


def test_results_are_bit_identical_across_runs_and_threads():
    spec = DisorderSpec("random_positions", lattice(5, HALF_PI, 2.5), 40, 5, z_max=5 * math.pi)
    a = ensemble_average(spec, SHORT, threads=1)
    b = ensemble_average(spec, SHORT, threads=1)
    c = ensemble_average(spec, SHORT, threads=4)
    assert np.array_equal(a.mean.samples, b.mean.samples)
    assert np.array_equal(a.mean.samples, c.mean.samples)
    assert np.array_equal(a.std, c.std)
    assert a.seeds == c.seeds


def test_variance_of_the_mean_falls_as_one_over_realizations():
    spec = DisorderSpec("imperfect_fill", _sites(10), 6400, 5, n_filled=5)
    res = ensemble_average(spec, EnsembleScenario(0.5, 10.0, 201), keep_samples=True)
    var = {}
    for r in (25, 100, 400):
        means = res.samples.reshape(-1, r, res.samples.shape[1]).mean(axis=1)
        var[r] = means.var(axis=0, ddof=1).mean()
    for lo, hi in ((25, 100), (100, 400)):
        assert 2.0 <= var[lo] / var[hi] <= 8.0


def test_fill_and_position_disorder_resemble_the_perfect_array():
    sc = EnsembleScenario(0.5, 10.0, 1001)
    perfect = residue_transient_qubits(np.linspace(0, 10, 1001),
                                       array_modes(lattice(5, HALF_PI, 2.5)), 0.5, 1.0,
                                       "falling").intensity
    fill = ensemble_average(DisorderSpec("imperfect_fill", _sites(10), 100, 0, n_filled=5), sc)
    pos = ensemble_average(DisorderSpec("random_positions", lattice(5, HALF_PI, 2.5), 100, 0,
                                        z_max=5 * math.pi), sc)
    assert np.corrcoef(fill.mean.intensity, perfect)[0, 1] > 0.95
    assert np.corrcoef(pos.mean.intensity, perfect)[0, 1] > 0.95


def test_ensemble_csv(tmp_path):
    spec = DisorderSpec("imperfect_fill", _sites(10), 8, 0, n_filled=5)
    res = ensemble_average(spec, EnsembleScenario(0.5, 2.0, 21))
    rows = list(csv.reader(res.to_csv(tmp_path / "e.csv", gamma_prime=2.0).open()))
    assert rows[0] == ENSEMBLE_CSV_HEADER
    assert len(rows) == 22
    assert float(rows[-1][0]) == pytest.approx(4.0)
    assert float(rows[1][1]) == res.mean.intensity[0]
    assert rows[1][3] == "8"


# ---------------------------------------------------------------------------
# fitting

def _observed(n, g1, det, samples=401):
    t = np.linspace(0, 20, samples)
    return residue_transient_qubits(t, array_modes(lattice(n, HALF_PI, g1)), det, 1.0, "falling")


def test_zero_trace_is_refused():
    obs = TimeSeries(0.0, 0.0, 0.05, np.zeros(100), "synthetic", 1.0, "falling")
    with pytest.raises(FitError):
        fit_parameters(obs, n_max=3)


def test_fit_round_trip_small_arrays():
    for n, g1, det in ((2, 1.0, 0.3), (3, 0.7, -0.2)):
        rep = fit_parameters(_observed(n, g1, det), n_max=6,
                             initial=(1.0, math.copysign(0.1, det)))
        assert rep.n_atoms == n
        assert rep.gamma_1d == pytest.approx(g1, rel=1e-6)
        assert rep.detuning == pytest.approx(det, abs=1e-6)
        assert rep.relative_residual < 1e-8


def test_detuning_sign_ambiguity_is_reported():
    # quarter-wave shifts come in +- pairs, so the intensity is even in Delta
    obs = _observed(2, 1.0, 0.3)
    up = fit_parameters(obs, n_max=3, initial=(1.0, 0.1))
    down = fit_parameters(obs, n_max=3, initial=(1.0, -0.1))
    assert up.detuning == pytest.approx(0.3, abs=1e-6)
    assert down.detuning == pytest.approx(-0.3, abs=1e-6)
    assert any("sign" in w for w in up.warnings)
    # off quarter-wave the sign is fixed by the data
    t = np.linspace(0, 20, 401)
    obs = residue_transient_qubits(t, array_modes(lattice(2, 1.0, 1.0)), 0.3, 1.0, "falling")
    rep = fit_parameters(obs, n_max=3, initial=(1.0, -0.1), lattice_phase=1.0)
    assert rep.detuning == pytest.approx(0.3, abs=1e-6)
    assert not any("sign" in w for w in rep.warnings)


def test_fixed_depth_contour_diagnostic():
    obs = _observed(200, 0.025, 0.3, 1001)
    flat = contour_landscape(obs, 5.0, 0.3, [100, 150, 200, 250, 300])
    assert contour_is_flat(flat)
    small = contour_landscape(_observed(2, 2.5, 0.3), 5.0, 0.3, [1, 2, 4])
    assert not contour_is_flat(small)


def test_fit_report_json(tmp_path):
    rep = fit_parameters(_observed(2, 1.0, 0.3), n_max=3, initial=(1.0, 0.0))
    text = rep.to_json(tmp_path / "fit.json")
    data = json.loads((tmp_path / "fit.json").read_text())
    assert data == json.loads(text)
    assert data["n_atoms"] == 2
    assert {"gamma_1d", "detuning", "residual", "contour", "scan", "contour_flat"} <= set(data)
    assert len(data["scan"]) == 3
