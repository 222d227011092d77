"""Sparse multivariate polynomials over exact rationals.

Coefficients are ``gmpy2.mpq`` values.  A :class:`Poly` is immutable once
built and stores only nonzero coefficients, so structural equality of the
term maps is mathematical equality.
"""

from __future__ import annotations

import itertools
import math
import random
import re
from typing import Iterable, Mapping, Sequence

from gmpy2 import mpq

Exponent = tuple[int, ...]

ZERO_Q = mpq(0)
ONE_Q = mpq(1)


def Q(num, den=1) -> mpq:
    """Build a canonical rational from ints, strings or rationals."""
    if isinstance(num, str):
        num = mpq(num)
    if den == 1:
        return mpq(num)
    return mpq(num) / mpq(den)


class PolyError(ValueError):
    pass


class ParseError(PolyError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.message = message
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class Poly:
    """Polynomial in ``dimension`` chart coordinates x1..xd."""

    __slots__ = ("dim", "terms", "_hash")

    def __init__(self, dim: int, terms: Mapping[Exponent, object] | None = None, *, _trusted: bool = False):
        if dim <= 0:
            raise PolyError("dimension must be positive")
        self.dim = dim
        self._hash = None
        if _trusted:
            self.terms = terms
            return
        clean: dict[Exponent, mpq] = {}
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != dim:
                raise PolyError(f"exponent {exp} does not have length {dim}")
            if any(e < 0 for e in exp):
                raise PolyError(f"negative exponent in {exp}")
            c = mpq(c)
            if c:
                clean[exp] = clean.get(exp, ZERO_Q) + c
                if not clean[exp]:
                    del clean[exp]
        self.terms = clean

    # constructors -------------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> Poly:
        return cls(dim, {}, _trusted=True)

    @classmethod
    def const(cls, dim: int, c) -> Poly:
        c = mpq(c)
        return cls(dim, {(0,) * dim: c} if c else {}, _trusted=True)

    @classmethod
    def var(cls, dim: int, i: int) -> Poly:
        """The coordinate x_i, 1-based."""
        if not 1 <= i <= dim:
            raise PolyError(f"variable index {i} out of range 1..{dim}")
        e = [0] * dim
        e[i - 1] = 1
        return cls(dim, {tuple(e): ONE_Q}, _trusted=True)

    @classmethod
    def monomial(cls, exp: Sequence[int], c=1) -> Poly:
        return cls(len(exp), {tuple(exp): c})

    # basic queries ------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and (0,) * self.dim in self.terms)

    def constant_term(self) -> mpq:
        return self.terms.get((0,) * self.dim, ZERO_Q)

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self.terms), default=-1)

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self.dim == other.dim and self.terms == other.terms
        if isinstance(other, (int, mpq)) or type(other).__name__ == "Fraction":
            return self.terms == Poly.const(self.dim, other).terms
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.dim, frozenset(self.terms.items())))
        return self._hash

    # arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> Poly:
        if isinstance(other, Poly):
            if other.dim != self.dim:
                raise PolyError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return other
        return Poly.const(self.dim, other)

    def __add__(self, other) -> Poly:
        other = self._coerce(other)
        if not other.terms:
            return self
        if not self.terms:
            return other
        out = dict(self.terms)
        for e, c in other.terms.items():
            v = out.get(e)
            if v is None:
                out[e] = c
            else:
                v = v + c
                if v:
                    out[e] = v
                else:
                    del out[e]
        return Poly(self.dim, out, _trusted=True)

    __radd__ = __add__

    def __neg__(self) -> Poly:
        return Poly(self.dim, {e: -c for e, c in self.terms.items()}, _trusted=True)

    def __sub__(self, other) -> Poly:
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> Poly:
        return self._coerce(other) - self

    def scale(self, c) -> Poly:
        c = mpq(c)
        if not c:
            return Poly.zero(self.dim)
        if c == 1:
            return self
        return Poly(self.dim, {e: v * c for e, v in self.terms.items()}, _trusted=True)

    def __mul__(self, other) -> Poly:
        if not isinstance(other, Poly):
            return self.scale(other)
        if other.dim != self.dim:
            raise PolyError(f"dimension mismatch: {self.dim} vs {other.dim}")
        if not self.terms or not other.terms:
            return Poly.zero(self.dim)
        if len(other.terms) == 1:
            ((eb, cb),) = other.terms.items()
            return Poly(
                self.dim,
                {tuple(x + y for x, y in zip(ea, eb)): ca * cb for ea, ca in self.terms.items()},
                _trusted=True,
            )
        out: dict[Exponent, mpq] = {}
        for ea, ca in self.terms.items():
            for eb, cb in other.terms.items():
                e = tuple(x + y for x, y in zip(ea, eb))
                v = out.get(e)
                out[e] = ca * cb if v is None else v + ca * cb
        return Poly(self.dim, {e: c for e, c in out.items() if c}, _trusted=True)

    def __rmul__(self, other) -> Poly:
        return self.scale(other)

    def __truediv__(self, other) -> Poly:
        if isinstance(other, Poly):
            if not other.is_constant():
                raise PolyError("division by a non-constant polynomial")
            other = other.constant_term()
        other = mpq(other)
        if not other:
            raise ZeroDivisionError("polynomial division by zero")
        return self.scale(1 / other)

    def __pow__(self, n: int) -> Poly:
        if n < 0:
            raise PolyError("negative exponent")
        result = Poly.const(self.dim, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # calculus -----------------------------------------------------------

    def diff(self, i: int, times: int = 1) -> Poly:
        """Partial derivative along x_i (1-based)."""
        if not 1 <= i <= self.dim:
            raise PolyError(f"derivative index {i} out of range 1..{self.dim}")
        k = i - 1
        out = {}
        for e, c in self.terms.items():
            p = e[k]
            if p < times:
                continue
            f = math.perm(p, times)
            ne = e[:k] + (p - times,) + e[k + 1:]
            out[ne] = c * f
        return Poly(self.dim, out, _trusted=True)

    def d(self, k: int) -> Poly:
        """Partial derivative along the 0-based coordinate k."""
        out = {}
        for e, c in self.terms.items():
            p = e[k]
            if p:
                out[e[:k] + (p - 1,) + e[k + 1:]] = c * p
        return Poly(self.dim, out, _trusted=True)

    def diff_multi(self, alpha: Sequence[int]) -> Poly:
        """Apply the multi-index derivative d^alpha."""
        out = {}
        for e, c in self.terms.items():
            f = 1
            for p, a in zip(e, alpha):
                if p < a:
                    break
                f *= math.perm(p, a)
            else:
                out[tuple(p - a for p, a in zip(e, alpha))] = c * f
        return Poly(self.dim, out, _trusted=True)

    def radial_integral(self, weight: int = 0) -> Poly:
        """Integral over t in [0, 1] of p(t x) t^weight."""
        if weight < 0:
            raise PolyError("weight must be non-negative")
        return Poly(
            self.dim,
            {e: c / (sum(e) + weight + 1) for e, c in self.terms.items()},
            _trusted=True,
        )

    def compose(self, subs: Sequence[Poly]) -> Poly:
        """Substitute x_i -> subs[i-1]."""
        if len(subs) != self.dim:
            raise PolyError("composition needs one polynomial per coordinate")
        target_dim = subs[0].dim
        out = Poly.zero(target_dim)
        cache: dict[tuple[int, int], Poly] = {}
        for e, c in self.terms.items():
            term = Poly.const(target_dim, c)
            for k, p in enumerate(e):
                if p:
                    key = (k, p)
                    if key not in cache:
                        cache[key] = subs[k] ** p
                    term = term * cache[key]
            out = out + term
        return out

    def evaluate(self, point: Sequence) -> mpq:
        total = ZERO_Q
        for e, c in self.terms.items():
            v = c
            for x, p in zip(point, e):
                if p:
                    v *= mpq(x) ** p
            total += v
        return total

    # printing -----------------------------------------------------------

    def sorted_terms(self) -> list[tuple[Exponent, mpq]]:
        """Terms in graded-lex order, highest first."""
        return sorted(self.terms.items(), key=lambda t: (sum(t[0]),) + t[0], reverse=True)

    def to_string(self, names: Sequence[str] | None = None) -> str:
        if not self.terms:
            return "0"
        names = names or [f"x{i + 1}" for i in range(self.dim)]
        pieces = []
        for e, c in self.sorted_terms():
            mono = "*".join(
                names[k] if p == 1 else f"{names[k]}^{p}" for k, p in enumerate(e) if p
            )
            mag = abs(c)
            if not mono:
                body = str(mag)
            elif mag == 1:
                body = mono
            else:
                body = f"{mag}*{mono}"
            sign = "-" if c < 0 else "+"
            pieces.append((sign, body))
        first_sign, first_body = pieces[0]
        out = ("-" if first_sign == "-" else "") + first_body
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out

    def __str__(self) -> str:
        return self.to_string()

    def __repr__(self) -> str:
        return f"Poly({self.dim}, {self.to_string()!r})"


def partial_derivative(p: Poly, i: int) -> Poly:
    """Exact partial derivative along x_i, with 1 <= i <= dimension."""
    return p.diff(i)


def radial_homotopy_integral(p: Poly, weight: int = 0) -> Poly:
    """Map x^g to x^g / (|g| + weight + 1), i.e. integrate p(t x) t^weight over [0, 1]."""
    return p.radial_integral(weight)


def poly_sum(items: Iterable[Poly], dim: int) -> Poly:
    """Sum many polynomials with a single accumulation dict."""
    out: dict[Exponent, mpq] = {}
    for p in items:
        for e, c in p.terms.items():
            v = out.get(e)
            out[e] = c if v is None else v + c
    return Poly(dim, {e: c for e, c in out.items() if c}, _trusted=True)


# parsing -------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\S))")


class _Parser:
    """Precedence climbing over + - * / ^ with unary minus."""

    def __init__(self, text: str, dim: int, names: Sequence[str] | None):
        self.text = text
        self.dim = dim
        if names is None:
            names = [f"x{i + 1}" for i in range(dim)]
        self.names = {n: i + 1 for i, n in enumerate(names)}
        self.tokens = self._tokenize()
        self.pos = 0

    def _tokenize(self):
        toks = []
        i = 0
        text = self.text
        while i < len(text):
            m = _TOKEN.match(text, i)
            if not m or m.end() == i:
                break
            if m.group(1) is not None:
                toks.append(("num", int(m.group(1)), m.start(1)))
            elif m.group(2) is not None:
                toks.append(("name", m.group(2), m.start(2)))
            elif m.group(3) is not None:
                ch = m.group(3)
                if ch not in "+-*/^()":
                    raise ParseError(f"unexpected character {ch!r}", m.start(3), text)
                toks.append(("op", ch, m.start(3)))
            i = m.end()
        toks.append(("end", None, len(text)))
        return toks

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, tok[2], self.text)

    def parse(self) -> Poly:
        if self.peek()[0] == "end":
            self.error("empty expression")
        result = self.expr(0)
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return result

    _BINARY = {"+": 1, "-": 1, "*": 2, "/": 2}

    def expr(self, min_prec: int) -> Poly:
        lhs = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind != "op" or val not in self._BINARY or self._BINARY[val] < min_prec:
                return lhs
            op_tok = self.advance()
            rhs = self.expr(self._BINARY[val] + 1)
            if val == "+":
                lhs = lhs + rhs
            elif val == "-":
                lhs = lhs - rhs
            elif val == "*":
                lhs = lhs * rhs
            else:
                if not rhs.is_constant():
                    self.error("division by a non-constant expression", op_tok)
                if rhs.is_zero():
                    self.error("division by zero", op_tok)
                lhs = lhs / rhs

    def unary(self) -> Poly:
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.advance()
            operand = self.expr(2)
            return -operand if val == "-" else operand
        return self.power()

    def power(self) -> Poly:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            tok = self.peek()
            if tok[0] == "op" and tok[1] == "-":
                self.error("negative exponent", tok)
            if tok[0] == "op" and tok[1] == "(":
                exp_poly = self.atom()
                if not exp_poly.is_constant():
                    self.error("exponent must be a non-negative integer", tok)
                c = exp_poly.constant_term()
                if c < 0:
                    self.error("negative exponent", tok)
                if c.denominator != 1:
                    self.error("exponent must be a non-negative integer", tok)
                n = int(c)
            elif tok[0] == "num":
                self.advance()
                n = tok[1]
            else:
                self.error("exponent must be a non-negative integer", tok)
            if self.peek()[0] == "op" and self.peek()[1] == "^":
                self.error("chained exponents are not supported")
            return base ** n
        return base

    def atom(self) -> Poly:
        tok = self.advance()
        kind, val, _ = tok
        if kind == "num":
            return Poly.const(self.dim, val)
        if kind == "name":
            if val not in self.names:
                m = re.fullmatch(r"x(\d+)", val)
                if m:
                    self.error(f"variable index {m.group(1)} out of range 1..{self.dim}", tok)
                self.error(f"unknown variable {val!r}", tok)
            return Poly.var(self.dim, self.names[val])
        if kind == "op" and val == "(":
            inner = self.expr(0)
            if self.peek()[1] != ")":
                self.error("expected ')'")
            self.advance()
            return inner
        if kind == "end":
            self.error("unexpected end of expression", tok)
        self.error(f"unexpected token {val!r}", tok)


def parse_poly(text: str, dim: int, names: Sequence[str] | None = None) -> Poly:
    """Parse a polynomial expression such as ``"x1*x2 + 1/2"``.

    Raises :class:`ParseError` carrying the character position of the fault.
    """
    if not isinstance(text, str):
        raise ParseError("expression must be a string", 0, repr(text))
    return _Parser(text, dim, names).parse()


def random_poly(rng: random.Random, dim: int, max_degree: int = 2, n_terms: int = 3, coeff_range: int = 3) -> Poly:
    """Random polynomial with small integer-over-small-integer coefficients."""
    terms = {}
    for _ in range(n_terms):
        deg = rng.randint(0, max_degree)
        e = [0] * dim
        for _ in range(deg):
            e[rng.randrange(dim)] += 1
        c = mpq(rng.randint(-coeff_range, coeff_range), rng.randint(1, 3))
        terms[tuple(e)] = terms.get(tuple(e), 0) + c
    return Poly(dim, terms)


def monomials_up_to(dim: int, degree: int) -> list[Exponent]:
    """All exponent tuples of total degree <= degree, in graded order."""
    out = [e for e in itertools.product(range(degree + 1), repeat=dim) if sum(e) <= degree]
    return sorted(out, key=lambda e: (sum(e), tuple(-x for x in e)))


def multinomial(gamma: Sequence[int], alpha: Sequence[int]) -> int:
    """Product of binomial(gamma_i, alpha_i)."""
    out = 1
    for g, a in zip(gamma, alpha):
        out *= math.comb(g, a)
    return out


def factorial_multi(alpha: Sequence[int]) -> int:
    out = 1
    for a in alpha:
        out *= math.factorial(a)
    return out
