import os
import subprocess
import sys

import numpy as np
import pytest

from wqed_precursors import kernels
from wqed_precursors.model import PulseSpec, lattice
from wqed_precursors.oracle import ode_propagate_qubits


def _system(n, seed=0):
    rng = np.random.default_rng(seed)
    P = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) * (0.3 / n)
    q, y0, r = (rng.normal(size=n) + 1j * rng.normal(size=n) for _ in range(3))
    drive = np.exp(1j * np.linspace(0, 3, 500))
    return P, q, drive, y0, r


compiled = pytest.mark.skipif(kernels.BACKEND != "compiled", reason="extension not built")


@compiled
@pytest.mark.parametrize("n", [1, 4, 17])
def test_compiled_steps_match_reference(n):
    args = _system(n)
    a, ya = kernels.lti_steps(*args)
    b, yb = kernels.lti_steps_py(*args)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(ya, yb, rtol=1e-12, atol=1e-14)


@compiled
def test_compiled_pole_sums_match_reference():
    rng = np.random.default_rng(1)
    poles = rng.normal(size=7) - 1j * rng.uniform(0.1, 2, 7)
    w = rng.normal(size=7) + 1j * rng.normal(size=7)
    x = np.linspace(-5, 5, 10001) + 0j
    np.testing.assert_allclose(kernels.pole_sum(x, poles, w), kernels.pole_sum_py(x, poles, w),
                               rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(kernels.exp_pole_sum(0.5, 0.01, 5000, poles, w),
                               kernels.exp_pole_sum_py(0.5, 0.01, 5000, poles, w),
                               rtol=1e-11, atol=1e-14)


def test_reference_steps_iterate_the_affine_map():
    P, q, drive, y0, r = _system(3)
    out, y = kernels.lti_steps_py(P, q, drive[:2], y0, r)
    y1 = P @ y0 + drive[0] * q
    y2 = P @ y1 + drive[1] * q
    np.testing.assert_allclose(out, [r @ y0, r @ y1, r @ y2])
    np.testing.assert_allclose(y, y2)


def test_pure_python_switch_selects_the_fallback():
    code = ("from wqed_precursors import kernels; print(kernels.BACKEND)")
    env = dict(os.environ, WQED_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "python"


def test_both_backends_give_the_same_ode_trace(tmp_path):
    code = ("import numpy as np\n"
            "from wqed_precursors.model import PulseSpec, lattice\n"
            "from wqed_precursors.oracle import ode_propagate_qubits\n"
            "ts = ode_propagate_qubits(lattice(4, 1.5707963267948966, 1.0), "
            "PulseSpec(0.3, 0.0, 10.0), t_span=(0.0, 20.0))\n"
            f"np.save({str(tmp_path / 'py.npy')!r}, ts.samples)\n")
    env = dict(os.environ, WQED_PURE_PYTHON="1")
    subprocess.run([sys.executable, "-c", code], env=env, check=True)
    ref = np.load(tmp_path / "py.npy")
    mine = ode_propagate_qubits(lattice(4, np.pi / 2, 1.0), PulseSpec(0.3, 0.0, 10.0),
                                t_span=(0.0, 20.0)).samples
    np.testing.assert_allclose(mine, ref, rtol=1e-11, atol=1e-13)
