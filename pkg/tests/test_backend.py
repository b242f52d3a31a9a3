import os
import subprocess
import sys

import numpy as np
import pytest

from rrlab import _backend, fluxlab as fl
from rrlab.worldline import WorldlineSpec


def _name_with(env_value):
    env = dict(os.environ)
    env["RRLAB_PURE_PYTHON"] = env_value
    proc = subprocess.run([sys.executable, "-c", "from rrlab import _backend; print(_backend.NAME)"],
                          capture_output=True, text=True, env=env, check=True)
    return proc.stdout.strip()


def test_pure_python_override():
    assert _name_with("1") == "python"


def test_default_prefers_compiled():
    expected = "compiled" if "compiled" in _backend.BACKENDS else "python"
    assert _name_with("0") == expected


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.get("fortran")


@pytest.mark.skipif("compiled" not in _backend.BACKENDS, reason="extension not built")
def test_compiled_matches_python_nodewise():
    w = WorldlineSpec.parse("circular:omega=0.8,R=0.5", 6)
    st = w.state(0.3, 3)
    rule = fl.sphere_quadrature(4, 8)
    k, _ = fl.lab_directions(rule, st.u)
    args = (np.ascontiguousarray(k), rule.weights, st.z, st.u, st.a, st.a1, 6, 1.3)
    p1, M1 = _backend.get("python")(*args)
    p2, M2 = _backend.get("compiled")(*args)
    assert np.allclose(p1, p2, rtol=1e-12, atol=1e-16)
    assert np.allclose(M1, M2, rtol=1e-12, atol=1e-16)
