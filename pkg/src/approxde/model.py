"""PIVPs, their coefficient-extended form, partitions, the text model format,
and the H-tree benchmark generator."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .polynomial import (
    Monomial,
    Polynomial,
    PolynomialSyntaxError,
    ZERO,
    format_polynomial,
    normalize,
    parse_polynomial,
    substitute,
)

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class ModelError(ValueError):
    """Structural problem with a model or partition."""


class ModelSyntaxError(ModelError):
    def __init__(self, message: str, line: int, column: int = 0):
        super().__init__(f"line {line}, column {column + 1}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class PIVP:
    """Polynomial initial value problem ``x' = q(x), x(0) = init``.

    Variable ``i`` is named ``names[i]``; ``rhs[i]`` is its derivative.
    """

    names: tuple[str, ...]
    rhs: tuple[Polynomial, ...]
    init: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "rhs", tuple(self.rhs))
        object.__setattr__(self, "init", tuple(float(x) for x in self.init))
        n = len(self.names)
        if len(set(self.names)) != n:
            raise ModelError("duplicate variable names")
        if len(self.rhs) != n or len(self.init) != n:
            raise ModelError(f"{n} variables but {len(self.rhs)} equations and {len(self.init)} initial values")
        for i, q in enumerate(self.rhs):
            bad = [v for v in q.variables() if not 0 <= v < n]
            if bad:
                raise ModelError(f"equation of {self.names[i]!r} references unknown variable id {bad[0]}")

    @property
    def n(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def degree(self) -> int:
        return max((q.degree() for q in self.rhs), default=0)

    def frozen(self) -> list[int]:
        """Variables with identically zero derivative."""
        return [i for i, q in enumerate(self.rhs) if not q]

    def with_init(self, init: Sequence[float]) -> "PIVP":
        return PIVP(self.names, self.rhs, tuple(init))


@dataclass(frozen=True)
class Partition:
    """Disjoint blocks covering ``range(n)``; each block sorted, blocks ordered
    by their least member (the representative)."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=lambda b: b[0] if b else -1))
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], n: int) -> "Partition":
        blocks = [tuple(b) for b in blocks]
        seen: set[int] = set()
        for b in blocks:
            if not b:
                raise ModelError("empty block in partition")
            for v in b:
                if v in seen:
                    raise ModelError(f"variable id {v} appears in two blocks")
                if not 0 <= v < n:
                    raise ModelError(f"variable id {v} out of range")
                seen.add(v)
        if len(seen) != n:
            missing = sorted(set(range(n)) - seen)
            raise ModelError(f"partition does not cover variable ids {missing}")
        return cls(tuple(blocks))

    @classmethod
    def single(cls, n: int) -> "Partition":
        return cls((tuple(range(n)),)) if n else cls(())

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(tuple((i,) for i in range(n)))

    @classmethod
    def from_names(cls, blocks: Iterable[Iterable[str]], names: Sequence[str]) -> "Partition":
        lookup = {nm: i for i, nm in enumerate(names)}
        ids = []
        for b in blocks:
            blk = []
            for nm in b:
                if nm not in lookup:
                    raise ModelError(f"partition references undeclared variable {nm!r}")
                blk.append(lookup[nm])
            ids.append(blk)
        return cls.from_blocks(ids, len(names))

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    def block_map(self) -> dict[int, int]:
        """Variable -> index of its block."""
        return {v: k for k, b in enumerate(self.blocks) for v in b}

    def representative_map(self) -> dict[int, int]:
        return {v: b[0] for b in self.blocks for v in b}

    def refines(self, other: "Partition") -> bool:
        owner = other.block_map()
        return all(len({owner[v] for v in b}) == 1 for b in self.blocks)

    def to_names(self, names: Sequence[str]) -> list[list[str]]:
        return [[names[v] for v in b] for b in self.blocks]

    def format(self, names: Sequence[str]) -> str:
        return " ".join("{" + " ".join(b) + "}" for b in self.to_names(names))

    def __len__(self) -> int:
        return len(self.blocks)


# -- extended PIVP ---------------------------------------------------------

PARAM_MODES = ("coefficients", "frozen")


@dataclass(frozen=True)
class ExtendedPIVP:
    """PIVP over ``S`` plus frozen parameter variables ``Θ``.

    ``names``, ``rhs_hat`` and ``sigma0`` are indexed by the combined ids of
    ``S ∪ Θ``.  In ``"coefficients"`` mode ids ``0..n-1`` are the base
    variables and every (equation, monomial) coefficient gets a fresh id
    after them.  In ``"frozen"`` mode the base model is taken as already
    extended: its zero-derivative variables are the parameters and no new
    ids are created.
    """

    base: PIVP
    names: tuple[str, ...]
    params: tuple[int, ...]
    rhs_hat: tuple[Polynomial, ...]
    sigma0: tuple[float, ...]
    mode: str = "coefficients"
    # param id -> (equation var, monomial), coefficients mode only
    coefficient_slots: Mapping[int, tuple[int, Monomial]] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.names)

    def dynamic(self) -> list[int]:
        """Ids of variables that are not parameters."""
        ps = set(self.params)
        return [i for i in range(self.size) if i not in ps]

    def degree(self) -> int:
        return max((q.degree() for q in self.rhs_hat), default=0)

    def as_pivp(self, sigma: Sequence[float] | None = None) -> PIVP:
        """The extended system itself as a PIVP over ``S ∪ Θ``."""
        init = self.sigma0 if sigma is None else sigma
        return PIVP(self.names, self.rhs_hat, tuple(init))

    def vector(self, sigma: Mapping[str, float] | Sequence[float]) -> np.ndarray:
        if isinstance(sigma, Mapping):
            missing = [nm for nm in self.names if nm not in sigma]
            if missing:
                raise ModelError(f"no value assigned to {missing[0]!r}")
            return np.array([float(sigma[nm]) for nm in self.names])
        arr = np.asarray(sigma, dtype=float)
        if arr.shape != (self.size,):
            raise ModelError(f"configuration has {arr.shape} entries, expected {self.size}")
        return arr


def _mono_label(m: Monomial, names: Sequence[str]) -> str:
    if not m:
        return "1"
    return "*".join(names[v] if e == 1 else f"{names[v]}^{e}" for v, e in m)


def extend(m: PIVP, params: str = "coefficients") -> ExtendedPIVP:
    """Promote coefficients (or the frozen variables) to parameter variables."""
    if params == "frozen":
        return ExtendedPIVP(
            base=m, names=m.names, params=tuple(m.frozen()), rhs_hat=m.rhs,
            sigma0=m.init, mode="frozen",
        )
    if params != "coefficients":
        raise ValueError(f"unknown parameter mode {params!r}; expected one of {PARAM_MODES}")
    names = list(m.names)
    rhs_hat: list[Polynomial] = []
    sigma0 = list(m.init)
    slots: dict[int, tuple[int, Monomial]] = {}
    param_ids: list[int] = []
    for i, q in enumerate(m.rhs):
        terms = {}
        for mono, c in q.sorted_terms():
            pid = len(names)
            names.append(f"c({m.names[i]}|{_mono_label(mono, m.names)})")
            sigma0.append(c)
            slots[pid] = (i, mono)
            param_ids.append(pid)
            terms[tuple(sorted(mono + ((pid, 1),)))] = 1.0
        rhs_hat.append(Polynomial(terms))
    rhs_hat.extend(ZERO for _ in param_ids)
    return ExtendedPIVP(
        base=m, names=tuple(names), params=tuple(param_ids), rhs_hat=tuple(rhs_hat),
        sigma0=tuple(sigma0), mode="coefficients", coefficient_slots=slots,
    )


def instantiate(e: ExtendedPIVP, sigma: Mapping[str, float] | Sequence[float]) -> PIVP:
    """Plug a configuration of ``S ∪ Θ`` into the extended system."""
    vec = e.vector(sigma)
    base = e.base
    if e.mode == "frozen":
        return PIVP(base.names, base.rhs, tuple(vec))
    per_eq: list[list] = [[] for _ in range(base.n)]
    for pid, (i, mono) in e.coefficient_slots.items():
        per_eq[i].append((mono, float(vec[pid])))
    rhs = tuple(normalize(t) for t in per_eq)
    return PIVP(base.names, rhs, tuple(vec[: base.n]))


def inline_frozen(m: PIVP) -> tuple[PIVP, list[int]]:
    """Replace zero-derivative variables by their initial values.

    Returns the reduced model and the ids (in ``m``) of the kept variables.
    """
    frozen = set(m.frozen())
    kept = [i for i in range(m.n) if i not in frozen]
    consts = {v: Polynomial.constant(m.init[v]) for v in frozen}
    relabel = {old: new for new, old in enumerate(kept)}
    rhs = []
    for i in kept:
        q = substitute(m.rhs[i], consts)
        rhs.append(Polynomial({tuple((relabel[v], k) for v, k in mono): c for mono, c in q.items()}))
    return PIVP(tuple(m.names[i] for i in kept), tuple(rhs), tuple(m.init[i] for i in kept)), kept


# -- text format -------------------------------------------------------------

_EQ = re.compile(r"eq\s+d\(\s*([A-Za-z_][A-Za-z0-9_]*)\s*\)\s*=\s*(.*)\Z")
_INIT = re.compile(r"init\s+([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(\S+)\s*\Z")


def parse_partition_spec(text: str, names: Sequence[str], line: int = 0) -> Partition:
    """Parse ``{x1} {x2 x3}`` into a partition over ``names``."""
    blocks = re.findall(r"\{([^{}]*)\}", text)
    leftover = re.sub(r"\{[^{}]*\}", "", text).strip()
    if leftover or not blocks:
        raise ModelSyntaxError(f"malformed partition {text.strip()!r}", line)
    try:
        return Partition.from_names([b.split() for b in blocks], names)
    except ModelError as exc:
        raise ModelSyntaxError(str(exc), line) from None


def parse_model(text: str) -> tuple[PIVP, Partition | None]:
    """Parse the line-oriented model format.

    Missing ``init`` lines default to 0.  The optional ``partition`` stanza is
    returned as given; callers fall back to the single block.
    """
    names: list[str] = []
    inits: dict[str, float] = {}
    eqs: dict[str, tuple[str, int, int]] = {}
    part_line: tuple[str, int] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        col0 = len(line) - len(line.lstrip())
        head = stripped.split(None, 1)[0]
        if head == "vars":
            for nm in stripped.split()[1:]:
                if not _NAME.match(nm):
                    raise ModelSyntaxError(f"invalid variable name {nm!r}", lineno, line.find(nm))
                if nm in names:
                    raise ModelSyntaxError(f"variable {nm!r} declared twice", lineno, line.find(nm))
                names.append(nm)
        elif head == "init":
            mt = _INIT.match(stripped)
            if not mt:
                raise ModelSyntaxError("expected 'init <var> = <number>'", lineno, col0)
            nm, val = mt.groups()
            if nm not in names:
                raise ModelSyntaxError(f"undeclared variable {nm!r}", lineno, line.find(nm))
            try:
                inits[nm] = float(val)
            except ValueError:
                raise ModelSyntaxError(f"invalid number {val!r}", lineno, line.find(val)) from None
        elif head == "eq":
            mt = _EQ.match(stripped)
            if not mt:
                raise ModelSyntaxError("expected 'eq d(<var>) = <polynomial>'", lineno, col0)
            nm = mt.group(1)
            if nm not in names:
                raise ModelSyntaxError(f"undeclared variable {nm!r}", lineno, line.find(nm))
            if nm in eqs:
                raise ModelSyntaxError(f"duplicate equation for {nm!r}", lineno, col0)
            eqs[nm] = (mt.group(2), lineno, col0 + mt.start(2))
        elif head == "partition":
            if part_line is not None:
                raise ModelSyntaxError("duplicate partition stanza", lineno, col0)
            part_line = (stripped[len("partition"):], lineno)
        else:
            raise ModelSyntaxError(f"unknown statement {head!r}", lineno, col0)

    lookup = {nm: i for i, nm in enumerate(names)}
    missing = [nm for nm in names if nm not in eqs]
    if missing:
        raise ModelSyntaxError(f"no equation for {missing[0]!r}", 0)
    rhs = []
    for nm in names:
        body, lineno, col = eqs[nm]
        try:
            rhs.append(parse_polynomial(body, lookup.__getitem__))
        except PolynomialSyntaxError as exc:
            raise ModelSyntaxError(str(exc).split(": ", 1)[1], lineno, col + exc.column) from None
    model = PIVP(tuple(names), tuple(rhs), tuple(inits.get(nm, 0.0) for nm in names))
    partition = None
    if part_line is not None:
        partition = parse_partition_spec(part_line[0], names, part_line[1])
    return model, partition


def serialize_model(m: PIVP, partition: Partition | None = None, header: Sequence[str] = ()) -> str:
    lines = [f"# {h}" for h in header]
    lines.append("vars " + " ".join(m.names))
    for nm, x in zip(m.names, m.init):
        lines.append(f"init {nm} = {float(x)!r}")
    for nm, q in zip(m.names, m.rhs):
        lines.append(f"eq d({nm}) = {format_polynomial(q, m.names)}")
    if partition is not None:
        lines.append("partition " + partition.format(m.names))
    return "\n".join(lines) + "\n"


# -- H-tree -------------------------------------------------------------------

# Nominal R*_i, C*_i per depth, used as dimensionless magnitudes.
HTREE_NOMINAL = (
    (3.19, 0.280),
    (6.37, 0.300),
    (12.75, 0.130),
    (25.50, 0.140),
    (50.00, 0.070),
    (100.00, 0.070),
    (200.00, 0.035),
    (400.00, 0.035),
)


def _uniform_tol(rng: np.random.Generator, nominal: float, eta: float) -> float:
    if eta == 0:
        return nominal
    return float(rng.uniform((1.0 - eta) * nominal, (1.0 + eta) * nominal))


def sample_htree_components(depth: int, eta: float, seed: int | None):
    """Draw ``R[i][k]`` and ``C[i][k]`` (0-based depth ``i``) within ``eta`` of nominal."""
    if not 1 <= depth <= len(HTREE_NOMINAL):
        raise ValueError(f"H-tree depth must be in 1..{len(HTREE_NOMINAL)}, got {depth}")
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    rng = np.random.default_rng(seed)
    R, C = [], []
    for i in range(depth):
        r_nom, c_nom = HTREE_NOMINAL[i]
        R.append([_uniform_tol(rng, r_nom, eta) for _ in range(2 ** i)])
        C.append([_uniform_tol(rng, c_nom, eta) for _ in range(2 ** i)])
    return R, C


def gen_htree(depth: int, eta: float = 0.0, seed: int | None = 0, vs: float = 2.0) -> tuple[PIVP, Partition]:
    """Degree-two H-tree RC model with every inverse RC product as a frozen state.

    Voltages ``v<i>_<k>`` start discharged at 0.  ``w<i>_<k>`` holds
    ``1/(R_ik C_ik)``; the root additionally carries ``wr2_<k> = 1/(R_2k C_11)``
    for the currents into its children.  The returned partition groups
    voltages by depth and the ``w`` variables by depth and role.
    """
    R, C = sample_htree_components(depth, eta, seed)
    names: list[str] = []
    for i in range(1, depth + 1):
        names += [f"v{i}_{k}" for k in range(1, 2 ** (i - 1) + 1)]
    w_names = ["w1_1"]
    if depth >= 2:
        w_names += ["wr2_1", "wr2_2"]
    for i in range(2, depth + 1):
        w_names += [f"w{i}_{k}" for k in range(1, 2 ** (i - 1) + 1)]
    names += w_names
    ix = {nm: j for j, nm in enumerate(names)}

    def var(nm: str) -> Polynomial:
        return Polynomial.variable(ix[nm])

    rhs: dict[str, Polynomial] = {}
    init: dict[str, float] = {nm: 0.0 for nm in names}
    root = var("v1_1")
    q = (Polynomial.constant(vs) - root) * var("w1_1")
    init["w1_1"] = 1.0 / (R[0][0] * C[0][0])
    if depth >= 2:
        for k in (1, 2):
            q = q - (root - var(f"v2_{k}")) * var(f"wr2_{k}")
            init[f"wr2_{k}"] = 1.0 / (R[1][k - 1] * C[0][0])
    rhs["v1_1"] = q
    for i in range(2, depth + 1):
        for k in range(1, 2 ** (i - 1) + 1):
            parent = var(f"v{i - 1}_{math.ceil(k / 2)}")
            me = f"v{i}_{k}"
            rhs[me] = (parent - var(me)) * var(f"w{i}_{k}")
            init[f"w{i}_{k}"] = 1.0 / (R[i - 1][k - 1] * C[i - 1][k - 1])
    model = PIVP(tuple(names), tuple(rhs.get(nm, ZERO) for nm in names), tuple(init[nm] for nm in names))

    blocks = [[ix[f"v{i}_{k}"] for k in range(1, 2 ** (i - 1) + 1)] for i in range(1, depth + 1)]
    blocks.append([ix["w1_1"]])
    if depth >= 2:
        blocks.append([ix["wr2_1"], ix["wr2_2"]])
    for i in range(2, depth + 1):
        blocks.append([ix[f"w{i}_{k}"] for k in range(1, 2 ** (i - 1) + 1)])
    return model, Partition.from_blocks(blocks, len(names))


def voltage_blocks(m: PIVP, p: Partition) -> list[tuple[int, ...]]:
    """Blocks of an H-tree partition that hold voltage variables."""
    return [b for b in p.blocks if m.names[b[0]].startswith("v")]
