import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gphier import _pykernels, kernels

try:
    from gphier import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def direct_duhamel(F, omega, dt):
    # explicit double sum with trapezoid weights, the definition itself
    nt = F.shape[0]
    out = np.zeros_like(F)
    for i in range(1, nt):
        for j in range(i + 1):
            w = dt * (0.5 if j in (0, i) else 1.0)
            out[i] += w * np.exp(-1j * (i - j) * dt * omega) * F[j]
    return out


@pytest.mark.parametrize("impl", ["python", "cython"])
def test_duhamel_matches_definition(impl):
    if impl == "cython" and _ckernels is None:
        pytest.skip("compiled extension not built")
    mod = _pykernels if impl == "python" else _ckernels
    rng = np.random.default_rng(0)
    F = rng.standard_normal((9, 13)) + 1j * rng.standard_normal((9, 13))
    omega = rng.integers(-20, 20, 13).astype(float)
    got = mod.duhamel_accumulate(F, omega, 0.07)
    ref = direct_duhamel(F, omega, 0.07)
    assert np.max(np.abs(got - ref)) <= 1e-13 * np.max(np.abs(ref))


@needs_ext
@given(nt=st.integers(1, 12), P=st.integers(1, 40), dt=st.floats(1e-4, 1.0), seed=st.integers(0, 2**31))
def test_backends_agree_duhamel(nt, P, dt, seed):
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((nt, P)) + 1j * rng.standard_normal((nt, P))
    omega = rng.integers(-50, 50, P).astype(float)
    a = _pykernels.duhamel_accumulate(F, omega, dt)
    b = _ckernels.duhamel_accumulate(F, omega, dt)
    assert np.max(np.abs(a - b), initial=0.0) <= 1e-12 * max(1.0, np.max(np.abs(a), initial=0.0))


@needs_ext
@given(P=st.integers(1, 500), seed=st.integers(0, 2**31))
def test_backends_agree_sqnorm(P, seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(P) + 1j * rng.standard_normal(P)
    w2 = rng.uniform(0, 10, P)
    a = _pykernels.weighted_sqnorm(c, w2)
    b = _ckernels.weighted_sqnorm(c, w2)
    assert b == pytest.approx(a, rel=1e-12)


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    env.pop("GPHIER_PURE_PYTHON", None)
    if env_value is not None:
        env["GPHIER_PURE_PYTHON"] = env_value
    res = subprocess.run(
        [sys.executable, "-c", "import gphier; print(gphier.BACKEND)"],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    return res.stdout.strip()


def test_pure_python_switch():
    assert _backend_in_subprocess("1") == "python"


@needs_ext
def test_default_backend_is_compiled():
    assert _backend_in_subprocess(None) == "cython"
    assert kernels.BACKEND in ("cython", "python")
