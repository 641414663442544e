"""Amplifier/radius certificates for the reference model.

Along the reference trajectory the variational system ``y' = A(t) y`` is
solved for all unit vectors at once.  Grid maxima of its fundamental
matrices are inflated to rigorous bounds ``lambda0``, ``lambda1``; together
with remainder coefficients ``d_k`` they give the admissible radius
``delta`` and the amplifier ``lambda = 2 lambda0``.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .model import ExtendedPIVP
from .numerics import (
    ATOL,
    RTOL,
    CompiledPolys,
    IntegrationError,
    SingularMatrixError,
    Trajectory,
    inf_norm,
    integrate,
    invert,
    polynomial_field,
)
from .polynomial import Polynomial, ZERO, mono_degree, partial_derivative

log = logging.getLogger(__name__)

COND_WARN = 1e10
VALIDATION_SLACK = 1e-6


class CertificationError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class BoundCertificate:
    tau: float
    dt: float
    lambda0: float
    lambda1: float
    L: float
    C: float
    dk: dict[int, float]
    lam: float
    delta: float
    distance_inf: float
    distance_2: float
    verdict: bool
    warnings: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    FIELDS = ("tau", "dt", "lambda0", "lambda1", "L", "C", "dk", "lambda", "delta",
              "distance_inf", "distance_2", "verdict", "warnings", "meta")

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "dt": self.dt,
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "L": self.L,
            "C": self.C,
            "dk": {str(k): v for k, v in sorted(self.dk.items())},
            "lambda": self.lam,
            "delta": None if math.isinf(self.delta) else self.delta,
            "distance_inf": self.distance_inf,
            "distance_2": self.distance_2,
            "verdict": bool(self.verdict),
            "warnings": list(self.warnings),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BoundCertificate":
        missing = [k for k in cls.FIELDS if k not in d]
        if missing:
            raise ValueError(f"certificate is missing fields {missing}")
        return cls(
            tau=float(d["tau"]), dt=float(d["dt"]), lambda0=float(d["lambda0"]),
            lambda1=float(d["lambda1"]), L=float(d["L"]), C=float(d["C"]),
            dk={int(k): float(v) for k, v in d["dk"].items()}, lam=float(d["lambda"]),
            delta=math.inf if d["delta"] is None else float(d["delta"]),
            distance_inf=float(d["distance_inf"]), distance_2=float(d["distance_2"]),
            verdict=bool(d["verdict"]), warnings=list(d["warnings"]), meta=dict(d["meta"]),
        )


# -- Jacobian and variational system -------------------------------------------

def jacobian(e: ExtendedPIVP) -> list[list[Polynomial]]:
    """Symbolic ``A[i][j] = d rhs_i / d x_j`` over ``S ∪ Θ``."""
    N = e.size
    A = [[ZERO] * N for _ in range(N)]
    for i, q in enumerate(e.rhs_hat):
        for j in sorted(q.variables()):
            A[i][j] = partial_derivative(q, j)
    return A


def compile_matrix(A: Sequence[Sequence[Polynomial]]) -> CompiledPolys:
    N = len(A)
    polys, slots = [], []
    for i, row in enumerate(A):
        for j, p in enumerate(row):
            if p:
                polys.append(p)
                slots.append(i * N + j)
    return CompiledPolys(polys, N, targets=slots, nout=N * N)


def fundamental_matrices(A: Sequence[Sequence[Polynomial]], traj: Trajectory, start: int = 0,
                         rtol: float = RTOL, atol: float = ATOL) -> np.ndarray:
    """``Lambda(t_start, t_i)`` for every grid point ``i >= start``; shape ``(K+1-start, N, N)``."""
    N = len(A)
    comp = compile_matrix(A)
    grid = traj.times[start:]

    def rhs(t, y):
        At = comp(traj(t)).reshape(N, N)
        return (At @ y.reshape(N, N)).ravel()

    if N == 0:
        return np.zeros((len(grid), 0, 0))
    sol = integrate(rhs, np.eye(N).ravel(), 0.0, 0.0, rtol=rtol, atol=atol,
                    grid=grid) if len(grid) > 1 else None
    if sol is None:
        return np.eye(N)[None]
    return sol.states.reshape(len(grid), N, N)


def jacobian_norm_bounds(A: Sequence[Sequence[Polynomial]], traj: Trajectory,
                         safety: float = 1.01) -> tuple[float, float]:
    """``C`` bounds the trajectory's infinity norm; ``L`` bounds ``||A(t)||``
    for every state with ``||x|| <= C`` by summing ``|coeff| * C^deg`` per row."""
    if safety < 1:
        raise ValueError("safety factor must be >= 1")
    C = safety * float(np.max(np.abs(traj.states))) if traj.states.size else 0.0
    L = 0.0
    for row in A:
        s = 0.0
        for p in row:
            for mono, c in p.items():
                s += abs(c) * C ** mono_degree(mono)
        L = max(L, s)
    return L, C


@dataclass
class LambdaBounds:
    lambda0: float
    lambda1: float
    lambda0_plus: float
    lambda1_plus: float
    max_cond: float
    argmax0: int = 0
    argmax1: tuple[int, int] = (0, 0)

    def __iter__(self):
        yield self.lambda0
        yield self.lambda1


def lambda_bounds(lams: np.ndarray, L: float, dt: float, backend=None) -> LambdaBounds:
    """Grid maxima of ``||Lambda(0,t_i)||`` and ``||Lambda(t_i,t_j)||`` inflated
    to bounds valid between grid points."""
    k = kernels if backend is None else backend
    lams = np.ascontiguousarray(lams, dtype=float)
    norms0 = np.abs(lams).sum(axis=2).max(axis=1) if lams.shape[1] else np.ones(len(lams))
    lam0p = float(norms0.max())
    invs = np.empty_like(lams)
    max_cond = 1.0
    for i, M in enumerate(lams):
        invs[i] = invert(M)
        max_cond = max(max_cond, inf_norm(M) * inf_norm(invs[i]))
    lam1p, bi, bj = k.max_pair_norm(lams, invs)
    g = L * dt
    return LambdaBounds(
        lambda0=lam0p * math.exp(g),
        lambda1=lam1p * (1.0 + g * (math.exp(g) + 1.0)),
        lambda0_plus=lam0p,
        lambda1_plus=float(lam1p),
        max_cond=max_cond,
        argmax0=int(np.argmax(norms0)),
        argmax1=(int(bi), int(bj)),
    )


# -- remainder ------------------------------------------------------------------

def generic_constants(e: ExtendedPIVP) -> tuple[int, float]:
    """``M`` = most monomials of one degree >= 2 in any equation of a
    non-parameter variable; ``D`` = largest absolute coefficient there."""
    M, D = 0, 0.0
    for i in e.dynamic():
        q = e.rhs_hat[i]
        counts: dict[int, int] = {}
        for mono, c in q.items():
            dg = mono_degree(mono)
            if dg >= 2:
                counts[dg] = counts.get(dg, 0) + 1
            D = max(D, abs(c))
        M = max(M, max(counts.values(), default=0))
    return M, D


def expansion_bound(e: ExtendedPIVP, C: float) -> dict[int, float]:
    """Per-row bound from expanding each monomial around a point with norm <= C:
    ``sum |c| binom(deg, k) C^(deg-k)`` over monomials of degree >= k."""
    deg = e.degree()
    out = {k: 0.0 for k in range(2, deg + 1)}
    for q in e.rhs_hat:
        row = {k: 0.0 for k in out}
        for mono, c in q.items():
            p = mono_degree(mono)
            for k in range(2, p + 1):
                row[k] += abs(c) * math.comb(p, k) * C ** (p - k)
        for k in out:
            out[k] = max(out[k], row[k])
    return out


def hessian_d2(e: ExtendedPIVP) -> float:
    """Half the largest entrywise absolute sum of an equation's (constant) Hessian."""
    best = 0.0
    for q in e.rhs_hat:
        # c*x^2 puts 2c on the diagonal; c*x*y puts c at (x,y) and (y,x)
        s = sum(2.0 * abs(c) for mono, c in q.items() if mono_degree(mono) == 2)
        best = max(best, s)
    return 0.5 * best


def remainder_coefficients(e: ExtendedPIVP, C: float, method: str = "auto",
                           details: dict | None = None) -> dict[int, float]:
    """Coefficients ``d_k`` with ``||r(t, y)|| <= sum_k d_k ||y||^k``.

    ``generic`` uses ``C^(deg-k) M D``, raised where needed to the monomial
    expansion bound so it never understates the remainder.  ``hessian``
    (degree two only) uses the constant Hessians.
    """
    if method not in ("auto", "generic", "hessian"):
        raise ValueError(f"unknown remainder method {method!r}")
    deg = e.degree()
    if method == "auto":
        method = "hessian" if deg == 2 else "generic"
    info = {"method": method}
    if deg <= 1:
        dk: dict[int, float] = {}
    elif method == "hessian":
        if deg != 2:
            raise ValueError("the hessian remainder bound needs a degree-two system")
        dk = {2: hessian_d2(e)}
    elif method == "generic":
        M, D = generic_constants(e)
        lemma = {k: C ** (deg - k) * M * D for k in range(2, deg + 1)}
        floor = expansion_bound(e, C)
        dk = {k: max(lemma[k], floor[k]) for k in lemma}
        info.update(M=M, D=D, raised=[k for k in lemma if floor[k] > lemma[k]])
    if details is not None:
        details.update(info)
    return dk


# -- delta -------------------------------------------------------------------------

def _constraint_gap(delta: float, lambda0: float, lambda1: float, tau: float,
                    dk: Mapping[int, float]) -> float:
    lhs = sum(d * (2.0 * lambda0 * delta) ** (k - 1) for k, d in dk.items())
    return lhs - 1.0 / (2.0 * lambda1 * tau)


def delta_closed_form(lambda0: float, lambda1: float, tau: float, d2: float, d3: float = 0.0) -> float:
    surd = math.sqrt(d2 * d2 + 2.0 * d3 / (lambda1 * tau))
    return 1.0 / (2.0 * tau * lambda0 * lambda1 * (d2 + surd))


def delta_bisect(lambda0: float, lambda1: float, tau: float, dk: Mapping[int, float],
                 rel: float = 1e-12) -> float:
    lo, hi = 0.0, 1.0
    while _constraint_gap(hi, lambda0, lambda1, tau, dk) <= 0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > rel * hi:
        mid = 0.5 * (lo + hi)
        if _constraint_gap(mid, lambda0, lambda1, tau, dk) <= 0:
            lo = mid
        else:
            hi = mid
    return lo


def delta_from_constraint(lambda0: float, lambda1: float, tau: float, dk: Mapping[int, float],
                          method: str = "auto") -> float:
    """Largest ``delta`` with ``sum_k d_k (2 lambda0 delta)^(k-1) <= 1/(2 lambda1 tau)``.

    Returns ``inf`` when every ``d_k`` is zero (linear systems).
    """
    if min(lambda0, lambda1, tau) <= 0:
        raise ValueError("lambda0, lambda1 and tau must be positive")
    dk = {int(k): float(v) for k, v in dk.items() if v != 0.0}
    if any(v < 0 for v in dk.values()):
        raise ValueError("remainder coefficients must be nonnegative")
    if not dk:
        return math.inf
    if method == "auto":
        method = "closed" if max(dk) <= 3 else "bisect"
    if method == "closed":
        if max(dk) > 3:
            raise ValueError("closed form only covers degree <= 3")
        delta = delta_closed_form(lambda0, lambda1, tau, dk.get(2, 0.0), dk.get(3, 0.0))
    elif method == "bisect":
        delta = delta_bisect(lambda0, lambda1, tau, dk)
    else:
        raise ValueError(f"unknown method {method!r}")
    # round down until the inequality holds in floating point
    while delta > 0 and _constraint_gap(delta, lambda0, lambda1, tau, dk) > 0:
        delta = math.nextafter(delta, 0.0)
    return delta


# -- pipeline -----------------------------------------------------------------------

def certify(e: ExtendedPIVP, sigma_star, tau: float, dt: float, sigma0=None, *,
            safety: float = 1.01, remainder: str = "auto", rtol: float = RTOL,
            atol: float = ATOL) -> BoundCertificate:
    """Certificate relating the reference configuration ``sigma_star`` to ``sigma0``."""
    sigma_star = np.asarray(sigma_star, dtype=float)
    sigma0 = np.asarray(e.sigma0 if sigma0 is None else sigma0, dtype=float)
    timings: dict[str, float] = {}
    warn: list[str] = []

    def stage(name, fn, *args, **kw):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kw)
        except (IntegrationError, SingularMatrixError, ValueError, ArithmeticError) as exc:
            raise CertificationError(name, exc) from exc
        finally:
            timings[name] = time.perf_counter() - t0

    field_ = polynomial_field(e.rhs_hat)
    traj = stage("reference trajectory", integrate, field_, sigma_star, tau, dt, rtol=rtol, atol=atol)
    A = stage("jacobian", jacobian, e)
    lams = stage("fundamental matrices", fundamental_matrices, A, traj, rtol=rtol, atol=atol)
    L, C = stage("norm bounds", jacobian_norm_bounds, A, traj, safety)
    lb = stage("lambda bounds", lambda_bounds, lams, L, traj.dt)
    if lb.max_cond > COND_WARN:
        warn.append(f"fundamental matrix condition estimate {lb.max_cond:.3e} exceeds {COND_WARN:g}; "
                    "inversion error is not covered by the inflation")
    rem_info: dict = {}
    dk = stage("remainder", remainder_coefficients, e, C, remainder, rem_info)
    delta = stage("delta", delta_from_constraint, lb.lambda0, lb.lambda1, tau, dk)
    diff = sigma0 - sigma_star
    dist_inf = inf_norm(diff)
    dist_2 = float(np.linalg.norm(diff))
    meta = {
        "lambda0_plus": lb.lambda0_plus,
        "lambda1_plus": lb.lambda1_plus,
        "max_condition": lb.max_cond,
        "grid_points": len(traj.times),
        "requested_dt": dt,
        "safety": safety,
        "rtol": rtol,
        "atol": atol,
        "remainder": rem_info,
        "degree": e.degree(),
        "variables": e.size,
        "parameters": len(e.params),
        "kernel_backend": kernels.BACKEND,
        "timings": timings,
        "soundness_note": "C and L come from grid maxima inflated by the safety factor; "
                          "overshoot between grid points beyond it is not covered",
    }
    return BoundCertificate(
        tau=float(tau), dt=traj.dt, lambda0=lb.lambda0, lambda1=lb.lambda1, L=L, C=C, dk=dk,
        lam=2.0 * lb.lambda0, delta=delta, distance_inf=dist_inf, distance_2=dist_2,
        verdict=bool(dist_inf <= delta), warnings=warn, meta=meta,
    )


# -- Monte-Carlo validation ----------------------------------------------------------

@dataclass
class ValidationReport:
    passed: bool
    samples: int
    radius: float
    lam: float
    max_ratio: float
    ratios: np.ndarray
    witness_ratio: float | None = None
    witness_time: float | None = None
    witness_passed: bool | None = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "samples": self.samples,
            "radius": self.radius,
            "lambda": self.lam,
            "max_ratio": self.max_ratio,
            "witness_ratio": self.witness_ratio,
            "witness_time": self.witness_time,
            "witness_passed": self.witness_passed,
        }


def simulate_batch(e: ExtendedPIVP, starts: np.ndarray, tau: float, dt: float,
                   rtol: float = RTOL, atol: float = ATOL) -> np.ndarray:
    """Trajectories of the extended system from each row of ``starts`` on the
    uniform grid; shape ``(B, K+1, N)``."""
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    B, N = starts.shape
    comp = CompiledPolys(e.rhs_hat, N)

    def rhs(t, y):
        return comp(y.reshape(B, N)).ravel()

    traj = integrate(rhs, starts.ravel(), tau, dt, rtol=rtol, atol=atol)
    return traj.states.reshape(len(traj.times), B, N).transpose(1, 0, 2)


def validate_monte_carlo(e: ExtendedPIVP, sigma_star, cert: BoundCertificate, samples: int = 100,
                         seed: int | None = 0, corners: int = 16, batch: int = 64,
                         radius: float | None = None) -> ValidationReport:
    """Sample the ``delta``-ball around ``sigma_star`` and compare observed
    amplification with ``lambda``.

    Uses the certificate's ``delta`` as radius (1.0 when it is infinite, as
    for linear systems).  For degree-one systems it also builds the sign
    vector that attains the linear bound ``lambda/2``.
    """
    sigma_star = np.asarray(sigma_star, dtype=float)
    N = e.size
    r = cert.delta if radius is None else radius
    if math.isinf(r):
        r = 1.0
    if r <= 0 or N == 0:
        return ValidationReport(True, 0, r, cert.lam, 0.0, np.zeros(0))
    rng = np.random.default_rng(seed)
    n_corner = min(corners, 2 ** N, samples) if corners else 0
    pert = [rng.uniform(-r, r, size=(samples - n_corner, N))]
    if n_corner:
        signs = [np.ones(N), -np.ones(N)]
        while len(signs) < n_corner:
            signs.append(rng.choice([-1.0, 1.0], size=N))
        pert.append(r * np.array(signs[:n_corner]))
    pert = np.concatenate(pert)
    ref = simulate_batch(e, sigma_star, cert.tau, cert.dt)[0]
    ratios = []
    for b0 in range(0, len(pert), batch):
        chunk = pert[b0:b0 + batch]
        trajs = simulate_batch(e, sigma_star + chunk, cert.tau, cert.dt)
        dev = np.abs(trajs - ref[None]).max(axis=(1, 2))
        ratios.append(dev / np.abs(chunk).max(axis=1))
    ratios = np.concatenate(ratios)
    max_ratio = float(ratios.max())
    passed = bool(max_ratio <= cert.lam + VALIDATION_SLACK)
    report = ValidationReport(passed, len(pert), r, cert.lam, max_ratio, ratios)

    if e.degree() <= 1:
        traj_ref = integrate(polynomial_field(e.rhs_hat), sigma_star, cert.tau, cert.dt)
        lams = fundamental_matrices(jacobian(e), traj_ref)
        norms = np.abs(lams).sum(axis=2)
        i_star = int(np.argmax(norms.max(axis=1)))
        row = int(np.argmax(norms[i_star]))
        y0 = r * np.where(lams[i_star, row] >= 0, 1.0, -1.0)
        trajs = simulate_batch(e, sigma_star + y0, cert.tau, cert.dt)[0]
        w = float(np.abs(trajs - ref).max() / r)
        report.witness_ratio = w
        report.witness_time = float(traj_ref.times[i_star])
        report.witness_passed = bool(0.99 * cert.lam / 2 <= w <= cert.lam / 2 + VALIDATION_SLACK)
    return report
