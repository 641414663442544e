import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from approxde.numerics import (
    CompiledPolys,
    IntegrationError,
    SingularMatrixError,
    inf_norm,
    integrate,
    invert,
    lsq_project,
    polynomial_field,
    uniform_grid,
)
from approxde.polynomial import Polynomial, evaluate, monomial


def test_inf_norm_examples():
    assert inf_norm(np.eye(3)) == 1.0
    assert inf_norm([[1, -2], [3, 4]]) == 7.0
    assert inf_norm([-0.02, 0.01]) == 0.02
    assert inf_norm(np.zeros((0, 0))) == 0.0


@given(st.integers(0, 2 ** 32 - 1))
def test_inf_norm_submultiplicative(seed):
    rng = np.random.default_rng(seed)
    A, B = rng.normal(size=(2, 4, 4))
    assert inf_norm(A @ B) <= inf_norm(A) * inf_norm(B) * (1 + 1e-12)


def test_invert_identity_and_residual():
    assert np.array_equal(invert(np.eye(4)), np.eye(4))
    rng = np.random.default_rng(1)
    M = rng.normal(size=(10, 10)) + 10 * np.eye(10)
    inv = invert(M)
    assert inf_norm(M @ inv - np.eye(10)) <= 1e-8 * inf_norm(M)


def test_invert_rejects_singular():
    with pytest.raises(SingularMatrixError):
        invert(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularMatrixError) as info:
        invert(np.diag([1.0, 1e-14]))
    assert info.value.cond > 1e12
    with pytest.raises(ValueError):
        invert(np.ones((2, 3)))


def test_lsq_project_examples():
    C = np.array([[1.0, -1.0]])
    assert np.allclose(lsq_project(C, [1.99, 2.01]), [2.0, 2.0])
    assert np.array_equal(lsq_project(np.zeros((0, 2)), [1.0, 3.0]), [1.0, 3.0])
    assert np.allclose(lsq_project(np.vstack([C, C, 2 * C]), [1.99, 2.01]), [2.0, 2.0])


@given(st.integers(0, 2 ** 32 - 1))
def test_lsq_project_properties(seed):
    rng = np.random.default_rng(seed)
    r, n = int(rng.integers(1, 5)), int(rng.integers(2, 7))
    C = rng.normal(size=(r, n))
    if rng.random() < 0.5:
        C = np.vstack([C, C[:1] * 3.0])  # redundant row
    z0 = rng.normal(size=n)
    z = lsq_project(C, z0)
    assert np.max(np.abs(C @ z)) <= 1e-10
    assert np.allclose(lsq_project(C, z), z, atol=1e-12)  # idempotent
    # residual is in the row space: orthogonal to every feasible direction
    _, s, vt = np.linalg.svd(C)
    null = vt[np.sum(s > 1e-10):]
    assert np.allclose(null @ (z0 - z), 0, atol=1e-10)


def test_uniform_grid():
    g = uniform_grid(7.0, 0.023)
    assert len(g) == 306 and g[-1] == 7.0  # K = ceil(7 / 0.023) = 305
    assert np.diff(g).max() <= 0.023
    assert len(uniform_grid(1.0, 0.25)) == 5
    with pytest.raises(ValueError):
        uniform_grid(0.0, 0.1)
    with pytest.raises(ValueError):
        uniform_grid(1.0, math.inf)


def test_integrate_exponential_decay():
    traj = integrate(lambda t, x: -x, [1.0, 2.0], 3.0, 0.1)
    assert np.allclose(traj.states[:, 0], np.exp(-traj.times), rtol=1e-8)
    assert traj.tau == 3.0
    assert np.allclose(traj(1.234), np.exp(-1.234) * np.array([1.0, 2.0]), rtol=1e-7)


def test_integrate_blowup_reports_time():
    # x' = x^2 from 1 explodes at t = 1
    with pytest.raises(IntegrationError) as info:
        integrate(lambda t, x: x * x, [1.0], 2.0, 0.1)
    assert info.value.time is not None and 0.9 < info.value.time <= 1.0


def test_halving_dt_keeps_grid_states(running):
    m, _ = running
    f = polynomial_field(m.rhs)
    a = integrate(f, m.init, 3.0, 0.02)
    b = integrate(f, m.init, 3.0, 0.01)
    scale = np.max(np.abs(a.states))
    assert np.max(np.abs(a.states - b.states[::2])) <= 1e-8 * scale


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30)
def test_compiled_polys_match_evaluate(seed):
    rng = np.random.default_rng(seed)
    n = 3
    polys = []
    for _ in range(4):
        terms = {}
        for _ in range(int(rng.integers(0, 5))):
            mono = monomial(*[(int(rng.integers(n)), int(rng.integers(1, 3)))
                              for _ in range(int(rng.integers(0, 3)))])
            terms[mono] = float(rng.normal())
        polys.append(Polynomial(terms))
    comp = CompiledPolys(polys, n)
    X = rng.normal(size=(5, n))
    want = np.array([[evaluate(p, x) for p in polys] for x in X])
    assert np.allclose(comp(X), want, rtol=1e-12, atol=1e-12)
    assert np.allclose(comp(X[0]), want[0], rtol=1e-12, atol=1e-12)
