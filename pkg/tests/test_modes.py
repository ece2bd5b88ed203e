import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wqed_precursors.errors import EigensolverError
from wqed_precursors.model import ArrayConfig, lattice
from wqed_precursors.modes import (MODES_CSV_HEADER, array_modes, classify_modes,
                                   coupling_matrix, eigenmodes, extremal_rates, write_modes_csv)

from conftest import HALF_PI


def test_single_emitter_self_coupling():
    arr = lattice(1, 0.3, 0.8)
    np.testing.assert_allclose(coupling_matrix(arr), [[-0.4j]])
    modes = array_modes(arr)
    np.testing.assert_allclose(modes.eigenvalues, [-0.4j])
    assert classify_modes(modes) == ["boundary"]


def test_two_emitters_quarter_wave():
    arr = lattice(2, HALF_PI, 1.0)
    np.testing.assert_allclose(coupling_matrix(arr), -0.5j * np.array([[1, 1j], [1j, 1]]),
                               atol=1e-15)
    modes = array_modes(arr)
    lam = np.sort_complex(modes.eigenvalues)
    np.testing.assert_allclose(lam, [-0.5 - 0.5j, 0.5 - 0.5j], atol=1e-14)
    np.testing.assert_allclose(np.sort(modes.shifts), [-0.5, 0.5], atol=1e-14)
    np.testing.assert_allclose(modes.decays, [1.0, 1.0], atol=1e-14)
    assert classify_modes(modes) == ["boundary", "boundary"]


def test_half_wave_chain_is_rank_one():
    arr = lattice(3, np.pi, 1.0)
    g = coupling_matrix(arr)
    sign = np.array([[1, -1, 1], [-1, 1, -1], [1, -1, 1]])
    np.testing.assert_allclose(g, -0.5j * sign, atol=1e-15)
    assert np.linalg.matrix_rank(g, tol=1e-12) == 1


@pytest.mark.parametrize("n", [2, 5, 20])
def test_mirror_chain_has_one_bright_mode(n):
    modes = array_modes(lattice(n, np.pi, 1.0))
    assert len(modes.zero_modes) == n - 1
    np.testing.assert_allclose(modes.active_eigenvalues, [-0.5j * n], atol=1e-12)
    labels = classify_modes(modes)
    bright = modes.active[0]
    assert labels[bright] == "superradiant"
    assert extremal_rates(modes)["max_decay"] == pytest.approx(n)


def test_eigensolver_rejects_non_finite_input():
    with pytest.raises(EigensolverError):
        eigenmodes(np.array([[np.nan]]))


def test_scaled_modes_match_fresh_decomposition():
    arr = lattice(6, 0.9, 1.0)
    got = array_modes(arr).scaled(0.3)
    ref = array_modes(lattice(6, 0.9, 0.3))
    np.testing.assert_allclose(np.sort_complex(got.eigenvalues), np.sort_complex(ref.eigenvalues),
                               atol=1e-13)


chains = st.builds(
    lambda n, phase, g1, jitter: (n, phase, g1, jitter),
    st.integers(1, 40), st.floats(0.05, 3.1), st.floats(0.01, 5.0), st.integers(0, 2**31 - 1))


def _chain(n, phase, g1, seed):
    # random but sorted positions to avoid lattice degeneracies
    rng = np.random.default_rng(seed)
    pos = np.cumsum(rng.uniform(0.2, 1.0, n) * phase) - phase
    return ArrayConfig(n, tuple(range(n)), phase, g1, explicit_positions=tuple(pos))


@settings(max_examples=60, deadline=None)
@given(chains)
def test_trace_identity_and_positive_decays(c):
    n, phase, g1, seed = c
    modes = array_modes(_chain(n, phase, g1, seed))
    assert abs(modes.eigenvalues.sum() + 0.5j * n * g1) < 1e-10 * n * g1
    assert modes.decays.sum() == pytest.approx(n * g1, rel=1e-10)
    assert abs(modes.shifts.sum()) < 1e-10 * n * g1
    assert modes.decays.min() > -1e-10 * g1


@settings(max_examples=60, deadline=None)
@given(chains)
def test_completeness_and_reconstruction(c):
    n, phase, g1, seed = c
    arr = _chain(n, phase, g1, seed)
    modes = array_modes(arr)
    if not modes.simple:
        return
    V = modes.eigenvectors
    assert np.abs(V @ V.T - np.eye(n)).max() < 1e-8
    g = coupling_matrix(arr)
    rebuilt = (V * modes.eigenvalues) @ V.T
    assert np.linalg.norm(rebuilt - g) < 1e-8 * np.linalg.norm(g)


def test_completeness_on_degenerate_cluster_subspace():
    # mirror chain: zero-mode cluster of size N - 1
    n = 12
    modes = array_modes(lattice(n, np.pi, 1.0))
    V = modes.eigenvectors
    assert not modes.degenerate_clusters  # zero modes are excluded from the check
    zero = list(modes.zero_modes)
    proj = V[:, zero] @ V[:, zero].T
    # projector property on the zero-mode subspace
    assert np.abs(proj @ proj - proj).max() < 1e-8
    full = proj + np.outer(V[:, modes.active[0]], V[:, modes.active[0]])
    assert np.abs(full - np.eye(n)).max() < 1e-8


def test_n200_lattice_completeness():
    arr = lattice(200, HALF_PI, 0.025)
    modes = array_modes(arr)
    V = modes.eigenvectors
    assert modes.simple
    assert np.abs(V @ V.T - np.eye(200)).max() < 1e-8


def test_modes_csv(tmp_path):
    modes = array_modes(lattice(3, 0.4, 1.0))
    path = write_modes_csv(modes, tmp_path / "m.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0] == MODES_CSV_HEADER
    assert len(rows) == 4
    for i, row in enumerate(rows[1:]):
        lam = modes.eigenvalues[i]
        assert complex(float(row[1]), float(row[2])) == lam
        assert float(row[4]) == pytest.approx(-2 * lam.imag)
        assert row[5] == classify_modes(modes)[i]
