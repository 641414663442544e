"""Numerical kernels: compiled polynomial evaluation, ODE integration on a
uniform grid with dense output, the infinity norm, inversion and the
minimum-norm projection onto the null space of a constraint matrix."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from . import kernels
from .polynomial import Polynomial

RTOL = 1e-9
ATOL = 1e-12
BLOWUP = 1e12
MAX_COND = 1e12


class IntegrationError(RuntimeError):
    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, cond: float):
        super().__init__(f"matrix is singular or ill-conditioned (condition estimate {cond:.3e})")
        self.cond = cond


class CompiledPolys:
    """A list of polynomials flattened into index arrays for the kernels.

    ``targets`` gives the output slot of every polynomial (defaults to its
    position), which lets sparse matrices of polynomials share one kernel call.
    """

    def __init__(self, polys: Sequence[Polynomial], nvars: int,
                 targets: Sequence[int] | None = None, nout: int | None = None):
        if targets is None:
            targets = range(len(polys))
        self.nvars = nvars
        self.nout = len(polys) if nout is None else nout
        coef, out, ptr, fvar, fexp = [], [], [0], [], []
        for slot, p in zip(targets, polys):
            for mono, c in p.items():
                coef.append(c)
                out.append(slot)
                for v, e in mono:
                    fvar.append(v)
                    fexp.append(e)
                ptr.append(len(fvar))
        self.coef = np.asarray(coef, dtype=np.float64)
        self.out = np.asarray(out, dtype=np.int64)
        self.ptr = np.asarray(ptr, dtype=np.int64)
        self.fvar = np.asarray(fvar, dtype=np.int64)
        self.fexp = np.asarray(fexp, dtype=np.int64)

    def __call__(self, x: np.ndarray, backend=None) -> np.ndarray:
        k = kernels if backend is None else backend
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        X = np.ascontiguousarray(x.reshape(1, -1) if single else x)
        res = k.eval_terms(X, self.coef, self.out, self.ptr, self.fvar, self.fexp, self.nout)
        return res[0] if single else res


@dataclass
class Trajectory:
    """Solution sampled on a uniform grid plus a dense interpolant."""

    times: np.ndarray
    states: np.ndarray  # (K+1, n)
    interpolant: Callable[[float], np.ndarray] | None = None

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def tau(self) -> float:
        return float(self.times[-1])

    def __call__(self, t: float) -> np.ndarray:
        if self.interpolant is None:
            return np.array([np.interp(t, self.times, col) for col in self.states.T])
        return self.interpolant(t)


def uniform_grid(tau: float, dt: float) -> np.ndarray:
    """Grid ``0 = t_0 < ... < t_K = tau`` with step ``tau/K <= dt``."""
    if not (tau > 0 and math.isfinite(tau)):
        raise ValueError("horizon must be positive and finite")
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError("grid step must be positive and finite")
    K = max(1, math.ceil(tau / dt - 1e-9))
    return np.linspace(0.0, tau, K + 1)


def integrate(f: Callable[[float, np.ndarray], np.ndarray], x0, tau: float, dt: float,
              rtol: float = RTOL, atol: float = ATOL, method: str = "RK45",
              t0: float = 0.0, grid: np.ndarray | None = None) -> Trajectory:
    """Integrate ``x' = f(t, x)`` and sample it on a uniform grid.

    ``grid`` overrides the grid built from ``tau`` and ``dt`` (it must start
    at ``t0``).  Raises :class:`IntegrationError` when the state norm passes
    ``1e12`` or the solver fails.
    """
    x0 = np.asarray(x0, dtype=float)
    if grid is None:
        grid = t0 + uniform_grid(tau, dt)
    else:
        grid = np.asarray(grid, dtype=float)
    t_end = float(grid[-1])

    def blowup(t, x):
        return BLOWUP - np.max(np.abs(x)) if x.size else 1.0

    blowup.terminal = True
    if t_end == grid[0]:
        return Trajectory(grid, x0[None, :].copy(), lambda t: x0.copy())
    sol = solve_ivp(f, (float(grid[0]), t_end), x0, method=method, t_eval=grid,
                    dense_output=True, rtol=rtol, atol=atol, events=blowup)
    if sol.status == 1:
        t_bad = float(sol.t_events[0][0])
        raise IntegrationError(f"solution diverged (state norm > {BLOWUP:g}) at t = {t_bad:.6g}", t_bad)
    if not sol.success:
        raise IntegrationError(f"integration failed: {sol.message}")
    states = sol.y.T
    if not np.all(np.isfinite(states)):
        raise IntegrationError("non-finite state encountered")
    return Trajectory(grid, np.ascontiguousarray(states), sol.sol)


def polynomial_field(polys: Sequence[Polynomial]) -> Callable[[float, np.ndarray], np.ndarray]:
    """Autonomous vector field ``x -> (p_i(x))_i`` backed by the compiled kernel."""
    comp = CompiledPolys(polys, len(polys))

    def f(t, x):
        if x.ndim == 2:  # vectorized solver calls pass (n, m)
            return comp(x.T).T
        return comp(x)

    return f


def inf_norm(M) -> float:
    """Max absolute row sum (matrices) or max absolute entry (vectors)."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    if M.ndim == 1:
        return float(np.max(np.abs(M)))
    return float(np.max(np.abs(M).sum(axis=-1)))


def invert(M, max_cond: float = MAX_COND) -> np.ndarray:
    """Inverse via LU with partial pivoting; rejects ill-conditioned input."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("matrix must be square")
    if n == 0:
        return M.copy()
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            lu = scipy.linalg.lu_factor(M, check_finite=True)
        except (scipy.linalg.LinAlgWarning, ValueError, np.linalg.LinAlgError):
            raise SingularMatrixError(math.inf) from None
    if np.any(np.diag(lu[0]) == 0):
        raise SingularMatrixError(math.inf)
    inv = scipy.linalg.lu_solve(lu, np.eye(n))
    cond = inf_norm(M) * inf_norm(inv)
    if not math.isfinite(cond) or cond > max_cond:
        raise SingularMatrixError(cond)
    return inv


def condition(M, inv) -> float:
    return inf_norm(M) * inf_norm(inv)


def row_space_basis(C) -> np.ndarray:
    """Orthonormal basis (columns) of the row space of ``C``.

    Column-pivoted QR of ``C^T``; rank cut at ``eps * max(shape) * |R_00|``.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.size == 0:
        return np.zeros((C.shape[1] if C.ndim == 2 else 0, 0))
    Q, R, _ = scipy.linalg.qr(C.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        return np.zeros((C.shape[1], 0))
    tol = np.finfo(float).eps * max(C.shape) * diag[0]
    rank = int(np.sum(diag > tol))
    return Q[:, :rank]


def lsq_project(C, z0) -> np.ndarray:
    """Closest point to ``z0`` (Euclidean) in the null space of ``C``.

    ``C`` is a dense matrix or any object with a ``matrix()`` method.
    """
    if hasattr(C, "matrix"):
        C = C.matrix()
    z0 = np.asarray(z0, dtype=float)
    C = np.asarray(C, dtype=float)
    if C.size == 0:
        return z0.copy()
    Q = row_space_basis(C)
    return z0 - Q @ (Q.T @ z0)
