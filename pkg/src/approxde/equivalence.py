"""Approximate backward/forward differential equivalences and the coarsest
partition refinement."""
from __future__ import annotations

from collections import defaultdict
from typing import Iterator

from .model import PIVP, Partition, inline_frozen
from .polynomial import Polynomial, abs_coeff_sum, rename, substitute

MODES = ("B", "F")


def _check_mode(mode: str) -> str:
    mode = mode.upper()[:1] if mode else mode
    if mode not in MODES:
        raise ValueError(f"mode must be 'B' (backward) or 'F' (forward), got {mode!r}")
    return mode


class UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            # keep the least id as root so components come out ordered
            if ry < rx:
                rx, ry = ry, rx
            self.parent[ry] = rx

    def groups(self):
        out = defaultdict(list)
        for x in self.parent:
            out[self.find(x)].append(x)
        return list(out.values())


def redistribution(i: int, j: int, s: int) -> dict[int, Polynomial]:
    """``x_i -> s (x_i + x_j)``, ``x_j -> (1 - s)(x_i + x_j)``."""
    both = Polynomial.variable(i) + Polynomial.variable(j)
    sv = Polynomial.variable(s)
    return {i: sv * both, j: (1.0 - sv) * both}


class DistanceTable:
    """Per-partition precomputation for pairwise distances.

    For mode B every equation is collapsed onto block representatives once;
    for mode F the block sums are formed once and only their terms touching
    the pair are rewritten.
    """

    def __init__(self, m: PIVP, H: Partition, mode: str):
        self.m = m
        self.H = H
        self.mode = _check_mode(mode)
        self.owner = H.block_map()
        if self.mode == "B":
            reps = H.representative_map()
            self.collapsed = [rename(q, reps) for q in m.rhs]
        else:
            self.s = m.n  # fresh symbol, never escapes this table
            self.block_sums = []
            for b in H.blocks:
                acc = Polynomial()
                for k in b:
                    acc = acc + m.rhs[k]
                self.block_sums.append(acc)
        self._cache: dict[tuple[int, int], float] = {}

    def fde_polynomials(self, i: int, j: int) -> list[Polynomial]:
        """``℘^{H_k}_{i,j}`` for every block ``H_k``."""
        sub = redistribution(i, j, self.s)
        out = []
        for total in self.block_sums:
            touched = Polynomial({mono: c for mono, c in total.items()
                                  if any(v == i or v == j for v, _ in mono)})
            out.append(touched - substitute(touched, sub))
        return out

    def distance(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        key = (i, j) if i < j else (j, i)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if self.mode == "B":
            d = abs_coeff_sum(self.collapsed[key[0]] - self.collapsed[key[1]])
        else:
            d = sum(abs_coeff_sum(p) for p in self.fde_polynomials(*key))
        self._cache[key] = d
        return d


def equiv_distance(m: PIVP, H: Partition, i: int, j: int, mode: str = "B") -> float:
    """Sum of absolute coefficients of the defining difference polynomial(s)."""
    owner = H.block_map()
    if owner[i] != owner[j]:
        raise ValueError(f"{m.names[i]!r} and {m.names[j]!r} are in different blocks")
    return DistanceTable(m, H, mode).distance(i, j)


def refine_step(m: PIVP, H: Partition, eps: float, mode: str = "B") -> Partition:
    """Split every block into the connected components of its ``distance <= eps`` graph."""
    table = DistanceTable(m, H, mode)
    blocks = []
    for b in H.blocks:
        if len(b) == 1:
            blocks.append(b)
            continue
        uf = UnionFind(b)
        for a in range(len(b)):
            for c in range(a + 1, len(b)):
                if uf.find(b[a]) == uf.find(b[c]):
                    # already connected; the edge cannot change components
                    continue
                if table.distance(b[a], b[c]) <= eps:
                    uf.union(b[a], b[c])
        blocks.extend(tuple(g) for g in uf.groups())
    return Partition(tuple(blocks))


def refinement_trace(m: PIVP, G: Partition, eps: float, mode: str = "B") -> Iterator[Partition]:
    """Yield the successive partitions of the refinement loop, ending at the fixpoint."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if G.n != m.n:
        raise ValueError(f"partition covers {G.n} variables, model has {m.n}")
    H = G
    while True:
        yield H
        nxt = refine_step(m, H, eps, mode)
        if nxt == H:
            return
        H = nxt


def coarsest_partition(m: PIVP, G: Partition, eps: float, mode: str = "B") -> Partition:
    """Coarsest eps-BDE (mode B) or eps-FDE (mode F) refining ``G``."""
    H = G
    for H in refinement_trace(m, G, eps, mode):
        pass
    return H


def coarsest_partition_frozen(m: PIVP, G: Partition, eps: float, mode: str = "B") -> Partition:
    """Coarsest partition when the zero-derivative variables encode coefficients.

    Distances are measured on the model with those variables replaced by
    their initial values, so perturbed values count as perturbed
    coefficients.  Frozen variables keep their blocks from ``G``.
    """
    if G.n != m.n:
        raise ValueError(f"partition covers {G.n} variables, model has {m.n}")
    frozen = set(m.frozen())
    if not frozen:
        return coarsest_partition(m, G, eps, mode)
    inlined, kept = inline_frozen(m)
    local = {old: new for new, old in enumerate(kept)}
    G_dyn = Partition(tuple(tuple(local[v] for v in b if v in local)
                            for b in G.blocks if any(v in local for v in b)))
    H_dyn = coarsest_partition(inlined, G_dyn, eps, mode)
    blocks = [tuple(kept[v] for v in b) for b in H_dyn.blocks]
    blocks += [tuple(v for v in b if v in frozen) for b in G.blocks if any(v in frozen for v in b)]
    return Partition(tuple(blocks))


def is_equivalence(m: PIVP, H: Partition, eps: float, mode: str = "B") -> bool:
    return refine_step(m, H, eps, mode) == H
