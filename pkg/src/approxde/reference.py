"""Reference-model synthesis: the linear constraints that make a partition
exact, the nearest feasible configuration, and exact quotients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .equivalence import DistanceTable, _check_mode, redistribution
from .model import PIVP, ExtendedPIVP, Partition
from .numerics import lsq_project
from .polynomial import Polynomial, coefficient_terms, mono_degree, rename, substitute

EXACT_TOL = 1e-9


class ConstraintError(ValueError):
    """A coefficient term cannot be written as a homogeneous linear form."""


class QuotientError(ValueError):
    pass


@dataclass
class ConstraintSystem:
    """Homogeneous rows ``<row, z> = 0`` over the variables of an extended PIVP."""

    names: tuple[str, ...]
    rows: list[dict[int, float]] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)

    @property
    def variables(self) -> tuple[int, ...]:
        return tuple(range(len(self.names)))

    def add(self, row: dict[int, float], label: str = "") -> None:
        row = {v: c for v, c in row.items() if c != 0.0}
        if row:
            self.rows.append(row)
            self.labels.append(label)

    def __len__(self) -> int:
        return len(self.rows)

    def matrix(self) -> np.ndarray:
        M = np.zeros((len(self.rows), len(self.names)))
        for r, row in enumerate(self.rows):
            for v, c in row.items():
                M[r, v] = c
        return M

    def residual(self, z) -> float:
        if not self.rows:
            return 0.0
        return float(np.max(np.abs(self.matrix() @ np.asarray(z, dtype=float))))

    def format_rows(self) -> list[str]:
        out = []
        for row in self.rows:
            parts = []
            for v, c in sorted(row.items()):
                mag = abs(c)
                term = self.names[v] if mag == 1.0 else f"{mag!r}*{self.names[v]}"
                parts.append(("- " if c < 0 else "+ ") + term)
            text = " ".join(parts)
            out.append((text[2:] if text.startswith("+ ") else "-" + text[2:]) + " = 0")
        return out


def _linear_row(coef: Polynomial, params: set[int], label: str) -> dict[int, float]:
    row: dict[int, float] = {}
    for mono, c in coef.items():
        if mono_degree(mono) != 1 or mono[0][0] not in params:
            if abs(c) <= EXACT_TOL and mono_degree(mono) == 0:
                continue
            raise ConstraintError(
                f"constraint {label} is not a homogeneous linear form in the parameters"
            )
        row[mono[0][0]] = row.get(mono[0][0], 0.0) + c
    return row


def build_constraints(e: ExtendedPIVP, H: Partition, mode: str = "B") -> ConstraintSystem:
    """Linear conditions on ``S ∪ Θ`` under which ``H`` is an exact BDE/FDE."""
    mode = _check_mode(mode)
    base = e.base
    if H.n != base.n:
        raise ValueError(f"partition covers {H.n} variables, model has {base.n}")
    params = set(e.params)
    cs = ConstraintSystem(e.names)

    def inside(v: int) -> bool:
        return v not in params

    if mode == "B":
        reps = H.representative_map()
        collapsed = [rename(q, reps) for q in e.rhs_hat[: base.n]]
        for b in H.blocks:
            for a in range(len(b)):
                for c in range(a + 1, len(b)):
                    i, j = b[a], b[c]
                    diff = collapsed[i] - collapsed[j]
                    for mono, coef in sorted(coefficient_terms(diff, inside).items()):
                        label = f"B[{e.names[i]},{e.names[j]}]"
                        cs.add(_linear_row(coef, params, label), label)
            for a in range(len(b) - 1):
                cs.add({b[a]: 1.0, b[a + 1]: -1.0}, f"init[{e.names[b[a]]},{e.names[b[a + 1]]}]")
        return cs

    s = e.size
    sums = []
    for b in H.blocks:
        acc = Polynomial()
        for k in b:
            acc = acc + e.rhs_hat[k]
        sums.append(acc)

    def inside_s(v: int) -> bool:
        return v == s or v not in params

    for b in H.blocks:
        members = [v for v in b if v not in params]  # parameters are never redistributed
        for a in range(len(members)):
            for c in range(a + 1, len(members)):
                i, j = members[a], members[c]
                sub = redistribution(i, j, s)
                for k, total in enumerate(sums):
                    touched = Polynomial({mono: cf for mono, cf in total.items()
                                          if any(v == i or v == j for v, _ in mono)})
                    if not touched:
                        continue
                    wp = touched - substitute(touched, sub)
                    for mono, coef in sorted(coefficient_terms(wp, inside_s).items()):
                        label = f"F[{e.names[i]},{e.names[j]};block {k}]"
                        cs.add(_linear_row(coef, params, label), label)
    return cs


def solve_reference(e: ExtendedPIVP, C: ConstraintSystem) -> np.ndarray:
    """Configuration nearest to ``sigma0`` (Euclidean) satisfying ``C``."""
    z0 = np.asarray(e.sigma0, dtype=float)
    z = lsq_project(C, z0)
    scale = max(1.0, float(np.linalg.norm(z0)))
    if C.residual(z) > 1e-9 * scale:
        raise ArithmeticError(f"projection residual {C.residual(z):.3e} exceeds tolerance")
    return z


def _require_exact(m: PIVP, H: Partition, mode: str) -> None:
    table = DistanceTable(m, H, mode)
    for b in H.blocks:
        for a in range(len(b)):
            for c in range(a + 1, len(b)):
                d = table.distance(b[a], b[c])
                if d > EXACT_TOL:
                    kind = "BDE" if mode == "B" else "FDE"
                    raise QuotientError(
                        f"partition is not an exact {kind}: distance({m.names[b[a]]}, {m.names[b[c]]}) = {d:.3e}"
                    )


def quotient_bde(m: PIVP, H: Partition) -> PIVP:
    """One variable per block (the representative) with collapsed dynamics."""
    _require_exact(m, H, "B")
    for b in H.blocks:
        vals = [m.init[v] for v in b]
        if max(vals) - min(vals) > EXACT_TOL:
            raise QuotientError(f"block {{{' '.join(m.names[v] for v in b)}}} has unequal initial conditions")
    new_id = {v: k for k, b in enumerate(H.blocks) for v in b}
    rhs = tuple(rename(m.rhs[b[0]], new_id) for b in H.blocks)
    return PIVP(tuple(m.names[b[0]] for b in H.blocks), rhs, tuple(m.init[b[0]] for b in H.blocks))


def block_sum_name(names: Sequence[str], block: Sequence[int], taken: set[str]) -> str:
    if len(block) == 1:
        return names[block[0]]
    base = "_".join(names[v] for v in block)
    name, k = base, 1
    while name in taken:
        k += 1
        name = f"{base}_{k}"
    return name


def quotient_fde(m: PIVP, H: Partition) -> PIVP:
    """One block-sum variable per block; original variables are replaced by
    an even share of their block sum."""
    _require_exact(m, H, "F")
    taken = set(m.names)
    names = []
    for b in H.blocks:
        nm = block_sum_name(m.names, b, taken - {m.names[v] for v in b})
        taken.add(nm)
        names.append(nm)
    share = {v: Polynomial.variable(k, 1.0 / len(b)) for k, b in enumerate(H.blocks) for v in b}
    rhs = []
    for b in H.blocks:
        acc = Polynomial()
        for v in b:
            acc = acc + m.rhs[v]
        rhs.append(substitute(acc, share))
    init = tuple(float(sum(m.init[v] for v in b)) for b in H.blocks)
    return PIVP(tuple(names), tuple(rhs), init)
