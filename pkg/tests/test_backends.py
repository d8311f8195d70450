import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ioncorr import _backend

compiled = pytest.mark.skipif("cython" not in _backend.AVAILABLE, reason="compiled extension not built")
PY = _backend.get("python")


def random_factors(rng, n, t):
    f = rng.normal(size=(n, t, 16)) + 1j * rng.normal(size=(n, t, 16))
    f[:, :, 0] = 1.0
    return f


def test_subset_product_single_factor_is_identity():
    f = random_factors(np.random.default_rng(0), 1, 3)
    assert np.allclose(PY.subset_product(f), f[0])


def test_subset_product_brute_force():
    # expand the product term by term over disjoint monomials
    rng = np.random.default_rng(1)
    f = random_factors(rng, 3, 2)
    expected = np.zeros((2, 16), complex)
    for a in range(16):
        for b in range(16):
            for c in range(16):
                if a & b or a & c or b & c:
                    continue
                expected[:, a | b | c] += f[0, :, a] * f[1, :, b] * f[2, :, c]
    assert np.allclose(PY.subset_product(f), expected, atol=1e-12)


def test_eq2_moments_handles_empty_rows():
    g2, inten, n = PY.eq2_moments(np.zeros((2, 3)), np.array([[0, 0, 0], [1, 1, 0]], np.uint8), 0.6)
    assert g2[0] == 0 and inten[0] == 0 and n[0] == 0 and n[1] == 2


@compiled
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 20), st.floats(0.0, 50.0))
def test_eq2_moments_backends_agree(seed, n, s):
    rng = np.random.default_rng(seed)
    phases = rng.uniform(-50, 50, size=(40, n))
    active = (rng.random((40, n)) > 0.3).astype(np.uint8)
    cy = _backend.get("cython").eq2_moments(phases, active, s)
    py = PY.eq2_moments(phases, active, s)
    for a, b in zip(cy, py):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


@compiled
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 30))
def test_subset_product_backends_agree(seed, n, t):
    f = random_factors(np.random.default_rng(seed), n, t) * 0.3
    cy = _backend.get("cython").subset_product(f)
    assert np.allclose(cy, PY.subset_product(f), rtol=1e-12, atol=1e-12)


def _backend_name(value):
    env = dict(os.environ, IONCORR_BACKEND=value)
    return subprocess.run(
        [sys.executable, "-c", "from ioncorr import _backend; print(_backend.NAME)"],
        env=env, capture_output=True, text=True,
    )


def test_environment_forces_python_backend():
    out = _backend_name("python")
    assert out.returncode == 0 and out.stdout.strip() == "python"


def test_environment_rejects_unknown_backend():
    out = _backend_name("fortran")
    assert out.returncode != 0 and "IONCORR_BACKEND" in out.stderr
