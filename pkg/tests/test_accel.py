import os
import subprocess
import sys

import numpy as np
import pytest

from lvgen import _accel
from lvgen.container import load_container, save_container

PROBE = "from lvgen._accel import backend_name; from lvgen.powerflow import solver; print(backend_name(), solver._jacobian.__name__)"


@pytest.mark.parametrize("flag,expected", [("0", "numpy jacobian_numpy"), ("off", "numpy jacobian_numpy")])
def test_env_flag_selects_numpy(flag, expected):
    env = {**os.environ, "LVGEN_NUMBA": flag}
    out = subprocess.run([sys.executable, "-c", PROBE], capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == expected


def test_default_backend_uses_numba_when_installed():
    env = {k: v for k, v in os.environ.items() if k != "LVGEN_NUMBA"}
    out = subprocess.run([sys.executable, "-c", PROBE], capture_output=True, text=True, env=env, check=True)
    assert out.stdout.split()[0] == ("numba" if _accel.HAVE_NUMBA else "numpy")


def test_container_round_trip_and_determinism(tmp_path):
    arrays = {"b": np.arange(6.0).reshape(2, 3), "a": np.array([1, 2], dtype=np.int64)}
    header = {"kind": "test", "note": "x"}
    p1 = save_container(tmp_path / "one.npz", arrays, header)
    p2 = save_container(tmp_path / "two.npz", dict(reversed(arrays.items())), header)
    assert p1.read_bytes() == p2.read_bytes()
    back, h = load_container(p1)
    assert h["kind"] == "test"
    assert all(np.array_equal(back[k], arrays[k]) for k in arrays)
