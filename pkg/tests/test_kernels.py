import os
import subprocess
import sys

import numpy as np
import pytest

from rgcopula import _core, _fallback
from rgcopula.copulas import INFO_KAPPA_MAX, INFO_KAPPA_MIN, info_grid

kernels = pytest.importorskip("rgcopula._kernels")

KM = (INFO_KAPPA_MIN, INFO_KAPPA_MAX)


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    T = 600
    return {
        "logrv": rng.normal(size=T),
        "e": rng.normal(size=T),
        "x1": rng.standard_normal(T),
        "x2": rng.standard_normal(T),
        "gx": rng.exponential(size=T),
        "gy": rng.exponential(size=T),
        "base": rng.normal(size=T) * 0.1,
        "g": np.sqrt(8.0 / rng.chisquare(8.0, T)),
        "theta": rng.uniform(0, np.pi, T),
        "wexp": rng.exponential(size=T),
    }


def _calls(d):
    gn, gg = info_grid("normal"), info_grid("rotated_gumbel")
    return {
        "rg_logh": lambda m: m.rg_logh(d["logrv"], 0.1, 0.2, 0.5746, 0.4072),
        "garch_h": lambda m: m.garch_h(d["e"], 1.0, 0.02, 0.08, 0.9),
        "gas_normal": lambda m: m.gas_normal(d["x1"], d["x2"], 0.0121, 0.0244, 0.9911, 1.4, gn, *KM),
        "gas_student": lambda m: m.gas_student(d["x1"], d["x2"], d["base"], 8.0, 0.05, 0.06, 0.95, 1.0),
        "gas_rgumbel": lambda m: m.gas_rgumbel(d["gx"], d["gy"], -0.0466, 0.0466, 0.9139, -0.5, gg, *KM),
        "gas_sim_normal": lambda m: m.gas_sim_normal(d["x1"], d["x2"], 0.0121, 0.0244, 0.9911, 1.4, gn, *KM),
        "gas_sim_student": lambda m: m.gas_sim_student(d["x1"], d["x2"], d["g"], 8.0, 0.05, 0.06, 0.95, 1.0),
        "gas_sim_rgumbel": lambda m: m.gas_sim_rgumbel(d["theta"], d["wexp"], d["gx"], d["gy"],
                                                       -0.0466, 0.0466, 0.9139, -0.5, gg, *KM),
    }


@pytest.mark.parametrize("name", _core._NAMES)
def test_backends_agree(data, name):
    call = _calls(data)[name]
    py, cy = call(_fallback), call(kernels)
    py = py if isinstance(py, tuple) else (py,)
    cy = cy if isinstance(cy, tuple) else (cy,)
    assert len(py) == len(cy)
    for a, b in zip(py, cy):
        if np.ndim(a) == 0:
            assert a == b
        else:
            np.testing.assert_allclose(np.asarray(b), np.asarray(a), rtol=1e-12, atol=1e-13)


def test_divergence_index_agrees():
    x1 = np.full(50, 3.0)
    x2 = np.full(50, 3.0)
    args = (x1, x2, 0.5, 2.5, 0.999, 1.0, info_grid("normal"), *KM)
    _, _, bad_py = _fallback.gas_normal(*args)
    _, _, bad_cy = kernels.gas_normal(*args)
    assert bad_py == bad_cy
    assert bad_py >= 0


def test_compiled_backend_selected():
    assert _core.BACKEND == "cython"


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop("RGCOPULA_PURE_PYTHON", None)
    else:
        env["RGCOPULA_PURE_PYTHON"] = env_value
    out = subprocess.run([sys.executable, "-c", "import rgcopula; print(rgcopula.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_forces_fallback():
    assert _backend_in_subprocess("1") == "python"
    assert _backend_in_subprocess("0") == "cython"
    assert _backend_in_subprocess(None) == "cython"
