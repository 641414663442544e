"""Sparse multivariate polynomials in normal form.

Variables are plain integers (``VarId``).  A monomial is a tuple of
``(var, exponent)`` pairs sorted by variable with strictly positive
exponents; the empty tuple is the constant monomial.  A :class:`Polynomial`
maps monomials to nonzero float coefficients and is immutable once built.

E.g. ``-4 x0 + 2 x0^2 x3`` is stored as ``{((0, 1),): -4.0, ((0, 2), (3, 1)): 2.0}``.
"""
from __future__ import annotations

import re
from collections import defaultdict
from typing import Callable, Iterable, Mapping, Sequence

Monomial = tuple  # tuple[tuple[int, int], ...]

ZERO_TOL = 1e-12

CONSTANT: Monomial = ()


def monomial(*pairs: tuple[int, int]) -> Monomial:
    """Build a monomial from ``(var, exp)`` pairs, merging repeats."""
    acc: dict[int, int] = defaultdict(int)
    for v, e in pairs:
        if e < 0:
            raise ValueError(f"negative exponent {e} for variable {v}")
        acc[v] += e
    return tuple(sorted((v, e) for v, e in acc.items() if e))


def var_monomial(v: int, exp: int = 1) -> Monomial:
    return ((v, exp),) if exp else CONSTANT


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        va, ea = a[i]
        vb, eb = b[j]
        if va == vb:
            out.append((va, ea + eb))
            i += 1
            j += 1
        elif va < vb:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out)


def mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


def mono_split(m: Monomial, keep: Callable[[int], bool]) -> tuple[Monomial, Monomial]:
    """Split ``m`` into the part over variables with ``keep(v)`` and the rest."""
    inside = tuple(p for p in m if keep(p[0]))
    outside = tuple(p for p in m if not keep(p[0]))
    return inside, outside


def grlex_key(m: Monomial):
    return (mono_degree(m), m)


class Polynomial:
    """Immutable sparse polynomial in normal form."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, float] | None = None):
        # Caller-supplied mappings are assumed normal already; use normalize()
        # for arbitrary term lists.
        self._terms: dict[Monomial, float] = (
            {m: float(c) for m, c in terms.items() if c != 0.0} if terms else {}
        )
        self._hash = None

    # -- construction -----------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "Polynomial":
        return cls({CONSTANT: c})

    @classmethod
    def variable(cls, v: int, coeff: float = 1.0) -> "Polynomial":
        return cls({((v, 1),): coeff})

    # -- mapping-like access ----------------------------------------------
    @property
    def terms(self) -> dict[Monomial, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def monomials(self):
        return self._terms.keys()

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self, tol: float = ZERO_TOL) -> bool:
        return all(abs(c) <= tol for c in self._terms.values())

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, float)):
            other = Polynomial.constant(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # -- structure --------------------------------------------------------
    def degree(self) -> int:
        return max((mono_degree(m) for m in self._terms), default=0)

    def variables(self) -> set[int]:
        return {v for m in self._terms for v, _ in m}

    def sorted_terms(self) -> list[tuple[Monomial, float]]:
        return sorted(self._terms.items(), key=lambda kv: grlex_key(kv[0]))

    # -- arithmetic -------------------------------------------------------
    def __neg__(self) -> "Polynomial":
        return Polynomial({m: -c for m, c in self._terms.items()})

    def __add__(self, other) -> "Polynomial":
        other = _coerce(other)
        acc = dict(self._terms)
        for m, c in other._terms.items():
            acc[m] = acc.get(m, 0.0) + c
        return Polynomial(acc)

    __radd__ = __add__

    def __sub__(self, other) -> "Polynomial":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return _coerce(other) - self

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            if other == 0:
                return Polynomial()
            return Polynomial({m: c * other for m, c in self._terms.items()})
        other = _coerce(other)
        acc: dict[Monomial, float] = defaultdict(float)
        for ma, ca in self._terms.items():
            for mb, cb in other._terms.items():
                acc[mono_mul(ma, mb)] += ca * cb
        return Polynomial(acc)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise ValueError("negative power")
        result = Polynomial.constant(1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __repr__(self) -> str:
        return f"Polynomial({format_polynomial(self)!r})"


def _coerce(x) -> Polynomial:
    if isinstance(x, Polynomial):
        return x
    if isinstance(x, (int, float)):
        return Polynomial.constant(float(x))
    raise TypeError(f"cannot treat {type(x).__name__} as a polynomial")


ZERO = Polynomial()


def normalize(terms: Iterable[tuple[Monomial, float]]) -> Polynomial:
    """Sum like monomials and drop exact zeros; order-independent."""
    acc: dict[Monomial, float] = defaultdict(float)
    for m, c in terms:
        acc[monomial(*m)] += c
    return Polynomial(acc)


def coefficient_of(p: Polynomial, alpha: Monomial) -> float:
    return p._terms.get(monomial(*alpha), 0.0)


def abs_coeff_sum(p: Polynomial) -> float:
    return float(sum(abs(c) for c in p._terms.values()))


def substitute(p: Polynomial, mapping: Mapping[int, Polynomial]) -> Polynomial:
    """Simultaneous substitution ``v -> mapping[v]``; unmapped vars pass through."""
    if not mapping:
        return p
    powers: dict[tuple[int, int], Polynomial] = {}

    def power(v: int, e: int) -> Polynomial:
        key = (v, e)
        if key not in powers:
            powers[key] = _coerce(mapping[v]) ** e
        return powers[key]

    acc: dict[Monomial, float] = defaultdict(float)
    for m, c in p._terms.items():
        kept = []
        partial = {CONSTANT: c}
        for v, e in m:
            if v in mapping:
                sub = power(v, e)
                nxt: dict[Monomial, float] = defaultdict(float)
                for ma, ca in partial.items():
                    for mb, cb in sub._terms.items():
                        nxt[mono_mul(ma, mb)] += ca * cb
                partial = nxt
            else:
                kept.append((v, e))
        kept_m = tuple(kept)
        for ma, ca in partial.items():
            acc[mono_mul(ma, kept_m)] += ca
    return Polynomial(acc)


def rename(p: Polynomial, mapping: Mapping[int, int]) -> Polynomial:
    """Variable-to-variable substitution; cheaper than :func:`substitute`."""
    acc: dict[Monomial, float] = defaultdict(float)
    for m, c in p._terms.items():
        acc[monomial(*((mapping.get(v, v), e) for v, e in m))] += c
    return Polynomial(acc)


def partial_derivative(p: Polynomial, v: int) -> Polynomial:
    acc: dict[Monomial, float] = defaultdict(float)
    for m, c in p._terms.items():
        for idx, (w, e) in enumerate(m):
            if w == v:
                rest = m[:idx] + (((v, e - 1),) if e > 1 else ()) + m[idx + 1:]
                acc[rest] += c * e
                break
    return Polynomial(acc)


def evaluate(p: Polynomial, point: Mapping[int, float] | Sequence[float],
             names: Sequence[str] | None = None) -> float:
    """Evaluate ``p`` at ``point`` (a mapping or a sequence indexed by VarId)."""
    total = 0.0
    for m, c in p._terms.items():
        val = c
        for v, e in m:
            try:
                x = point[v]
            except (KeyError, IndexError):
                label = names[v] if names is not None and v < len(names) else f"x{v}"
                raise KeyError(f"no value assigned to variable {label!r}") from None
            val *= x ** e
        total += val
    return total


def coefficient_terms(p: Polynomial, inside: Callable[[int], bool]) -> dict[Monomial, Polynomial]:
    """Normal form of ``p`` treating variables outside ``inside`` as parameters.

    Returns a map from monomials over the inside variables to their
    coefficient polynomials over the outside ones.
    """
    groups: dict[Monomial, dict[Monomial, float]] = defaultdict(lambda: defaultdict(float))
    for m, c in p._terms.items():
        mi, mo = mono_split(m, inside)
        groups[mi][mo] += c
    out = {}
    for mi, t in groups.items():
        q = Polynomial(t)
        if q:
            out[mi] = q
    return out


# -- text syntax ---------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*^]))"
)


class PolynomialSyntaxError(ValueError):
    def __init__(self, message: str, column: int):
        super().__init__(f"column {column + 1}: {message}")
        self.column = column


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise PolynomialSyntaxError(f"unexpected character {text[col]!r}", col)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    return tokens


def parse_polynomial(text: str, resolve: Callable[[str], int]) -> Polynomial:
    """Parse an expanded sum of monomials such as ``-4.0*x1 + x2^2*c``.

    ``resolve`` maps a variable name to its VarId and raises ``KeyError`` for
    unknown names.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise PolynomialSyntaxError("empty expression", 0)
    terms = []
    i = 0
    n = len(tokens)
    first = True
    while i < n:
        sign = 1.0
        kind, val, col = tokens[i]
        if kind == "op" and val in "+-":
            sign = -1.0 if val == "-" else 1.0
            i += 1
        elif not first:
            raise PolynomialSyntaxError(f"expected '+' or '-' before {val!r}", col)
        first = False
        coeff = sign
        pairs = []
        expect_factor = True
        while i < n:
            kind, val, col = tokens[i]
            if expect_factor:
                if kind == "num":
                    coeff *= float(val)
                    i += 1
                elif kind == "name":
                    try:
                        v = resolve(val)
                    except KeyError:
                        raise PolynomialSyntaxError(f"undeclared variable {val!r}", col) from None
                    i += 1
                    exp = 1
                    if i < n and tokens[i][1] == "^":
                        if i + 1 >= n or tokens[i + 1][0] != "num" or not tokens[i + 1][1].isdigit():
                            raise PolynomialSyntaxError("exponent must be a nonnegative integer", tokens[i][2])
                        exp = int(tokens[i + 1][1])
                        i += 2
                    pairs.append((v, exp))
                else:
                    raise PolynomialSyntaxError(f"expected a number or variable, got {val!r}", col)
                expect_factor = False
            elif val == "*":
                i += 1
                expect_factor = True
            else:
                break
        if expect_factor:
            col = tokens[i][2] if i < n else len(text)
            raise PolynomialSyntaxError("incomplete term", col)
        terms.append((monomial(*pairs), coeff))
    return normalize(terms)


def _format_number(c: float) -> str:
    return repr(float(c))


def format_polynomial(p: Polynomial, names: Sequence[str] | None = None) -> str:
    """Render ``p`` in graded order; coefficients use ``repr`` so text round-trips."""
    if not p:
        return "0"

    def name(v: int) -> str:
        return names[v] if names is not None else f"x{v}"

    parts = []
    for m, c in p.sorted_terms():
        mono = "*".join(name(v) if e == 1 else f"{name(v)}^{e}" for v, e in m)
        neg = c < 0 or (c == 0 and str(c).startswith("-"))
        mag = -c if neg else c
        if not mono:
            body = _format_number(mag)
        elif mag == 1.0:
            body = mono
        else:
            body = f"{_format_number(mag)}*{mono}"
        if not parts:
            parts.append(f"-{body}" if neg else body)
        else:
            parts.append(f"- {body}" if neg else f"+ {body}")
    return " ".join(parts)
