import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from approxde import kernels
from approxde.bounds import lambda_bounds
from approxde.numerics import CompiledPolys
from approxde.polynomial import Polynomial, monomial

BACKENDS = kernels.available_backends()
needs_both = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


def random_polys(rng, n, count):
    polys = []
    for _ in range(count):
        terms = {}
        for _ in range(int(rng.integers(0, 6))):
            mono = monomial(*[(int(rng.integers(n)), int(rng.integers(1, 4)))
                              for _ in range(int(rng.integers(0, 4)))])
            terms[mono] = float(rng.normal())
        polys.append(Polynomial(terms))
    return polys


def test_python_backend_always_available():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS
    with pytest.raises(ValueError):
        kernels.load_backend("fortran")


@needs_both
@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=50)
def test_eval_terms_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    comp = CompiledPolys(random_polys(rng, n, int(rng.integers(1, 6))), n)
    X = rng.normal(size=(int(rng.integers(1, 8)), n))
    a = comp(X, backend=kernels.load_backend("python"))
    b = comp(X, backend=kernels.load_backend("cython"))
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


@needs_both
@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30)
def test_max_pair_norm_agree(seed):
    rng = np.random.default_rng(seed)
    K, n = int(rng.integers(1, 40)), int(rng.integers(1, 6))
    lams = rng.normal(size=(K, n, n)) + 3 * np.eye(n)
    invs = np.linalg.inv(lams)
    py = kernels.load_backend("python").max_pair_norm(lams, invs)
    cy = kernels.load_backend("cython").max_pair_norm(lams, invs)
    assert py[0] == pytest.approx(cy[0], rel=1e-12)
    brute = max((np.abs(lams[j] @ invs[i]).sum(axis=1).max(), i, j)
                for i in range(K) for j in range(i, K))
    assert py[0] == pytest.approx(brute[0], rel=1e-12)


@needs_both
def test_lambda_bounds_backend_independent():
    rng = np.random.default_rng(4)
    lams = rng.normal(size=(50, 4, 4)) + 4 * np.eye(4)
    a = lambda_bounds(lams, 2.0, 0.01, backend=kernels.load_backend("python"))
    b = lambda_bounds(lams, 2.0, 0.01, backend=kernels.load_backend("cython"))
    assert a.lambda1 == pytest.approx(b.lambda1, rel=1e-12)
    assert a.argmax1 == b.argmax1


def test_environment_forces_fallback():
    env = dict(os.environ, APPROXDE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import approxde; print(approxde.KERNEL_BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
