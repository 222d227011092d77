"""Differential Hochschild cochains on a polynomial chart.

Operators are stored as coefficient tables over multi-indices: a
:class:`DiffOperator` is ``E(u) = sum e^a d^a u`` and a
:class:`BidiffOperator` is ``C(u, v) = sum c^{a,b} d^a u d^b v``.

Sign conventions used throughout:

* ``hochschild_coboundary(E)(u, v) = E(u) v - E(uv) + u E(v)``,
* ``(ad E C)(u, v) = E(C(u, v)) - C(Eu, v) - C(u, Ev)``, so ``ad E m = -dE``,
* a natural product's first cochain is ``C_1 = br - dE_1`` with ``br`` its
  skew part.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from gmpy2 import mpq

from .polycore import Poly, factorial_multi, multinomial

MultiIndex = tuple[int, ...]


class CochainError(ValueError):
    pass


class EquivalenceError(CochainError):
    pass


class ExtractionError(CochainError):
    pass


def _unit(dim: int, i: int) -> MultiIndex:
    e = [0] * dim
    e[i] = 1
    return tuple(e)


def _add_mi(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x + y for x, y in zip(a, b))


def _sub_mi(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x - y for x, y in zip(a, b))


def sub_indices(gamma: MultiIndex) -> Iterable[MultiIndex]:
    """All multi-indices alpha <= gamma componentwise."""
    return itertools.product(*(range(g + 1) for g in gamma))


def _acc(table: dict, key, value: Poly):
    if not value:
        return
    if key in table:
        s = table[key] + value
        if s:
            table[key] = s
        else:
            del table[key]
    else:
        table[key] = value


# --------------------------------------------------------------------------
# formal functions


class FormalFunction:
    """Truncated series sum_{k <= N} nu^k f_k with polynomial coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[Poly]):
        if not coeffs:
            raise CochainError("a formal function needs at least one coefficient")
        dim = coeffs[0].dim
        if any(c.dim != dim for c in coeffs):
            raise CochainError("coefficient dimension mismatch")
        self.coeffs = list(coeffs)

    @classmethod
    def from_poly(cls, p: Poly, nu_order: int) -> FormalFunction:
        return cls([p] + [Poly.zero(p.dim)] * nu_order)

    @classmethod
    def zero(cls, dim: int, nu_order: int) -> FormalFunction:
        return cls([Poly.zero(dim)] * (nu_order + 1))

    @property
    def dim(self) -> int:
        return self.coeffs[0].dim

    @property
    def nu_order(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, k: int) -> Poly:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else Poly.zero(self.dim)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FormalFunction):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(tuple(self.coeffs))

    def is_zero(self) -> bool:
        return all(not c for c in self.coeffs)

    def _check(self, other: FormalFunction):
        if other.nu_order != self.nu_order:
            raise CochainError(f"truncation mismatch: nu^{self.nu_order} vs nu^{other.nu_order}")

    def __add__(self, other: FormalFunction) -> FormalFunction:
        self._check(other)
        return FormalFunction([a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other: FormalFunction) -> FormalFunction:
        self._check(other)
        return FormalFunction([a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __neg__(self) -> FormalFunction:
        return FormalFunction([-a for a in self.coeffs])

    def scale(self, c) -> FormalFunction:
        return FormalFunction([a.scale(c) for a in self.coeffs])

    def truncated(self, n: int) -> FormalFunction:
        return FormalFunction([self[k] for k in range(n + 1)])

    def shift_down(self) -> FormalFunction:
        """Divide by nu; the nu^0 coefficient must vanish and the order drops by one."""
        if self.coeffs[0]:
            raise CochainError("series is not divisible by nu")
        if self.nu_order == 0:
            raise CochainError("nothing left after dividing by nu")
        return FormalFunction(self.coeffs[1:])

    def map(self, fn) -> FormalFunction:
        return FormalFunction([fn(c) for c in self.coeffs])

    def lowest_nonzero(self) -> int | None:
        for k, c in enumerate(self.coeffs):
            if c:
                return k
        return None

    def __repr__(self):
        return "FormalFunction(" + ", ".join(f"nu^{k}: {c}" for k, c in enumerate(self.coeffs) if c) + ")"


# --------------------------------------------------------------------------
# operator tables


@dataclass
class DiffOperator:
    dim: int
    table: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for a, c in self.table.items():
            a = tuple(a)
            if len(a) != self.dim:
                raise CochainError(f"multi-index {a} does not have length {self.dim}")
            if c:
                clean[a] = c
        self.table = clean

    @classmethod
    def zero(cls, dim: int) -> DiffOperator:
        return cls(dim, {})

    @classmethod
    def from_vector_field(cls, X: Sequence[Poly]) -> DiffOperator:
        d = len(X)
        return cls(d, {_unit(d, i): X[i] for i in range(d) if X[i]})

    @classmethod
    def identity(cls, dim: int) -> DiffOperator:
        return cls(dim, {(0,) * dim: Poly.const(dim, 1)})

    @property
    def order(self) -> int:
        return max((sum(a) for a in self.table), default=-1)

    def is_zero(self) -> bool:
        return not self.table

    def annihilates_constants(self) -> bool:
        return (0,) * self.dim not in self.table

    def is_vector_field(self) -> bool:
        return all(sum(a) == 1 for a in self.table)

    def part_of_order(self, k: int) -> DiffOperator:
        return DiffOperator(self.dim, {a: c for a, c in self.table.items() if sum(a) == k})

    def without_first_order(self) -> DiffOperator:
        return DiffOperator(self.dim, {a: c for a, c in self.table.items() if sum(a) != 1})

    def apply(self, u: Poly) -> Poly:
        out = Poly.zero(self.dim)
        for a, c in self.table.items():
            du = u.diff_multi(a)
            if du:
                out = out + c * du
        return out

    def __call__(self, u):
        if isinstance(u, FormalFunction):
            return u.map(self.apply)
        return self.apply(u)

    def __add__(self, other: DiffOperator) -> DiffOperator:
        t = dict(self.table)
        for a, c in other.table.items():
            _acc(t, a, c)
        return DiffOperator(self.dim, t)

    def __neg__(self) -> DiffOperator:
        return DiffOperator(self.dim, {a: -c for a, c in self.table.items()})

    def __sub__(self, other: DiffOperator) -> DiffOperator:
        return self + (-other)

    def scale(self, c) -> DiffOperator:
        return DiffOperator(self.dim, {a: v.scale(c) for a, v in self.table.items()})

    def compose(self, other: DiffOperator) -> DiffOperator:
        """The operator u -> self(other(u))."""
        t: dict = {}
        for gamma, a in self.table.items():
            for g1 in sub_indices(gamma):
                rest = _sub_mi(gamma, g1)
                binom = multinomial(gamma, g1)
                for delta, b in other.table.items():
                    db = b.diff_multi(g1)
                    if db:
                        _acc(t, _add_mi(rest, delta), (a * db).scale(binom))
        return DiffOperator(self.dim, t)

    def commutator(self, other: DiffOperator) -> DiffOperator:
        return self.compose(other) - other.compose(self)

    def __eq__(self, other):
        return isinstance(other, DiffOperator) and self.dim == other.dim and self.table == other.table


@dataclass
class BidiffOperator:
    dim: int
    table: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (a, b), c in self.table.items():
            a, b = tuple(a), tuple(b)
            if len(a) != self.dim or len(b) != self.dim:
                raise CochainError("multi-index length mismatch")
            if c:
                clean[(a, b)] = c
        self.table = clean

    @classmethod
    def zero(cls, dim: int) -> BidiffOperator:
        return cls(dim, {})

    @classmethod
    def multiplication(cls, dim: int) -> BidiffOperator:
        z = (0,) * dim
        return cls(dim, {(z, z): Poly.const(dim, 1)})

    @classmethod
    def from_bivector(cls, P: Sequence[Sequence[Poly]]) -> BidiffOperator:
        """P^{ij} d_i u d_j v."""
        d = len(P)
        return cls(d, {(_unit(d, i), _unit(d, j)): P[i][j] for i in range(d) for j in range(d) if P[i][j]})

    @property
    def orders(self) -> tuple[int, int]:
        return (
            max((sum(a) for a, _ in self.table), default=-1),
            max((sum(b) for _, b in self.table), default=-1),
        )

    def is_zero(self) -> bool:
        return not self.table

    def transpose(self) -> BidiffOperator:
        return BidiffOperator(self.dim, {(b, a): c for (a, b), c in self.table.items()})

    def symmetric_part(self) -> BidiffOperator:
        return (self + self.transpose()).scale(mpq(1, 2))

    def skew_part(self) -> BidiffOperator:
        return (self - self.transpose()).scale(mpq(1, 2))

    def part_of_orders(self, p: int, q: int) -> BidiffOperator:
        return BidiffOperator(self.dim, {k: c for k, c in self.table.items() if sum(k[0]) == p and sum(k[1]) == q})

    def entries_exceeding(self, p: int, q: int) -> dict:
        return {k: c for k, c in self.table.items() if sum(k[0]) > p or sum(k[1]) > q}

    def apply(self, u: Poly, v: Poly) -> Poly:
        out = Poly.zero(self.dim)
        du_cache: dict = {}
        dv_cache: dict = {}
        for (a, b), c in self.table.items():
            if a not in du_cache:
                du_cache[a] = u.diff_multi(a)
            du = du_cache[a]
            if not du:
                continue
            if b not in dv_cache:
                dv_cache[b] = v.diff_multi(b)
            dv = dv_cache[b]
            if dv:
                out = out + c * du * dv
        return out

    def __call__(self, u, v):
        if isinstance(u, FormalFunction) or isinstance(v, FormalFunction):
            n = u.nu_order if isinstance(u, FormalFunction) else v.nu_order
            if not isinstance(u, FormalFunction):
                u = FormalFunction.from_poly(u, n)
            if not isinstance(v, FormalFunction):
                v = FormalFunction.from_poly(v, n)
            out = [Poly.zero(self.dim) for _ in range(n + 1)]
            for i in range(n + 1):
                if not u[i]:
                    continue
                for j in range(n + 1 - i):
                    if v[j]:
                        out[i + j] = out[i + j] + self.apply(u[i], v[j])
            return FormalFunction(out)
        return self.apply(u, v)

    def __add__(self, other: BidiffOperator) -> BidiffOperator:
        t = dict(self.table)
        for k, c in other.table.items():
            _acc(t, k, c)
        return BidiffOperator(self.dim, t)

    def __neg__(self) -> BidiffOperator:
        return BidiffOperator(self.dim, {k: -c for k, c in self.table.items()})

    def __sub__(self, other: BidiffOperator) -> BidiffOperator:
        return self + (-other)

    def scale(self, c) -> BidiffOperator:
        if isinstance(c, Poly):
            return BidiffOperator(self.dim, {k: v * c for k, v in self.table.items()})
        return BidiffOperator(self.dim, {k: v.scale(c) for k, v in self.table.items()})

    def __eq__(self, other):
        return isinstance(other, BidiffOperator) and self.dim == other.dim and self.table == other.table

    def first_entry(self):
        for k in sorted(self.table):
            return k, self.table[k]
        return None


def apply_cochain(op, *args):
    """Evaluate a DiffOperator on one argument or a BidiffOperator on two."""
    if isinstance(op, DiffOperator):
        if len(args) != 1:
            raise CochainError("a differential operator takes one argument")
        (u,) = args
        if (u.dim if not isinstance(u, FormalFunction) else u.dim) != op.dim:
            raise CochainError("dimension mismatch")
        return op(u)
    if isinstance(op, BidiffOperator):
        if len(args) != 2:
            raise CochainError("a bidifferential operator takes two arguments")
        if any(a.dim != op.dim for a in args):
            raise CochainError("dimension mismatch")
        return op(*args)
    raise CochainError(f"not a cochain: {type(op).__name__}")


# --------------------------------------------------------------------------
# Hochschild and Gerstenhaber operations


def hochschild_coboundary(E: DiffOperator) -> BidiffOperator:
    """Table of E(u) v - E(uv) + u E(v), expanded by the Leibniz rule."""
    d = E.dim
    t: dict = {}
    z = (0,) * d
    for gamma, e in E.table.items():
        if gamma == z:
            _acc(t, (z, z), e)
            continue
        for alpha in sub_indices(gamma):
            if alpha == z or alpha == gamma:
                continue
            beta = _sub_mi(gamma, alpha)
            _acc(t, (alpha, beta), e.scale(-multinomial(gamma, alpha)))
    return BidiffOperator(d, t)


def _compose_after(E: DiffOperator, C: BidiffOperator) -> dict:
    """Table of u, v -> E(C(u, v))."""
    t: dict = {}
    for gamma, e in E.table.items():
        for g1 in sub_indices(gamma):
            rest = _sub_mi(gamma, g1)
            for g2 in sub_indices(rest):
                g3 = _sub_mi(rest, g2)
                coef = factorial_multi(gamma) // (factorial_multi(g1) * factorial_multi(g2) * factorial_multi(g3))
                for (a, b), c in C.table.items():
                    dc = c.diff_multi(g1)
                    if dc:
                        _acc(t, (_add_mi(a, g2), _add_mi(b, g3)), (e * dc).scale(coef))
    return t


def _compose_before(C: BidiffOperator, E: DiffOperator, slot: int) -> dict:
    """Table of u, v -> C(Eu, v) (slot 0) or C(u, Ev) (slot 1)."""
    t: dict = {}
    for (a, b), c in C.table.items():
        inner = a if slot == 0 else b
        for a1 in sub_indices(inner):
            a2 = _sub_mi(inner, a1)
            binom = multinomial(inner, a1)
            for gamma, e in E.table.items():
                de = e.diff_multi(a1)
                if not de:
                    continue
                new = _add_mi(a2, gamma)
                key = (new, b) if slot == 0 else (a, new)
                _acc(t, key, (c * de).scale(binom))
    return t


def gerstenhaber_ad(E: DiffOperator, C: BidiffOperator, check_orders: bool = True) -> BidiffOperator:
    """(ad E C)(u, v) = E(C(u, v)) - C(Eu, v) - C(u, Ev)."""
    if E.dim != C.dim:
        raise CochainError("dimension mismatch")
    t = _compose_after(E, C)
    for slot in (0, 1):
        for k, c in _compose_before(C, E, slot).items():
            _acc(t, k, -c)
    out = BidiffOperator(E.dim, t)
    if check_orders and E.annihilates_constants() and not E.is_zero() and not C.is_zero():
        r, (p, q) = E.order, C.orders
        bound = r + max(p, q) - 1
        op, oq = out.orders
        if op > bound or oq > bound:
            raise CochainError(f"order law violated: ad of order {r} on order ({p},{q}) gave ({op},{oq})")
    return out


# --------------------------------------------------------------------------
# star products as cochain tables


@dataclass
class StarProduct:
    dim: int
    nu_order: int
    cochains: list

    def __post_init__(self):
        if len(self.cochains) != self.nu_order + 1:
            raise CochainError("need one cochain per order 0..N")

    def C(self, r: int) -> BidiffOperator:
        return self.cochains[r] if r <= self.nu_order else BidiffOperator.zero(self.dim)

    def multiply(self, u, v) -> FormalFunction:
        N = self.nu_order
        if not isinstance(u, FormalFunction):
            u = FormalFunction.from_poly(u, N)
        if not isinstance(v, FormalFunction):
            v = FormalFunction.from_poly(v, N)
        out = [Poly.zero(self.dim) for _ in range(N + 1)]
        for r, C in enumerate(self.cochains):
            if C.is_zero():
                continue
            for i in range(N + 1 - r):
                if not u[i]:
                    continue
                for j in range(N + 1 - r - i):
                    if v[j]:
                        out[r + i + j] = out[r + i + j] + C.apply(u[i], v[j])
        return FormalFunction(out)

    def commutator(self, u, v) -> FormalFunction:
        """(1/nu)(u*v - v*u) through nu^{N-1}, from the skew parts of C_r, r >= 1."""
        N = self.nu_order
        if not isinstance(u, FormalFunction):
            u = FormalFunction.from_poly(u, N)
        if not isinstance(v, FormalFunction):
            v = FormalFunction.from_poly(v, N)
        out = [Poly.zero(self.dim) for _ in range(max(N, 1))]
        for r in range(1, N + 1):
            C = self.cochains[r]
            if C.is_zero():
                continue
            for i in range(N + 1 - r):
                for j in range(N + 1 - r - i):
                    if u[i] or v[j]:
                        val = C.apply(u[i], v[j]) - C.apply(v[j], u[i])
                        if val:
                            out[r - 1 + i + j] = out[r - 1 + i + j] + val
        return FormalFunction(out[:N] if N else out)

    def poisson_tensor(self) -> list[list[Poly]]:
        """P^{ij} read off the skew part of C_1."""
        d = self.dim
        sk = self.C(1).skew_part()
        return [[sk.table.get((_unit(d, i), _unit(d, j)), Poly.zero(d)) for j in range(d)] for i in range(d)]

    def __eq__(self, other):
        return isinstance(other, StarProduct) and self.cochains == other.cochains

    def truncated(self, n: int) -> StarProduct:
        return StarProduct(self.dim, n, self.cochains[: n + 1])


def moyal_product(lam: Sequence[Sequence[Poly]], nu_order: int) -> StarProduct:
    """Closed-form tables of sum (1/2)^m / m! Lambda^{i1 j1}..Lambda^{im jm} d_I u d_J v."""
    d = len(lam)
    cochains = []
    layer = {((0,) * d, (0,) * d): Poly.const(d, 1)}
    for m in range(nu_order + 1):
        scale = mpq(1, (2 ** m) * math.factorial(m))
        cochains.append(BidiffOperator(d, {k: v.scale(scale) for k, v in layer.items()}))
        nxt: dict = {}
        for (a, b), c in layer.items():
            for i in range(d):
                for j in range(d):
                    if lam[i][j]:
                        _acc(nxt, (_add_mi(a, _unit(d, i)), _add_mi(b, _unit(d, j))), c * lam[i][j])
        layer = nxt
    return StarProduct(d, nu_order, cochains)


# --------------------------------------------------------------------------
# equivalences


@dataclass
class EquivalenceSeries:
    """E = sum_{r=1}^N nu^r E_r with order(E_r) <= r + 1 and E_r(1) = 0."""

    nu_order: int
    generators: list  # generators[r - 1] = E_r

    def __post_init__(self):
        if len(self.generators) != self.nu_order:
            raise EquivalenceError("need generators E_1..E_N")

    @classmethod
    def zero(cls, dim: int, nu_order: int) -> EquivalenceSeries:
        return cls(nu_order, [DiffOperator.zero(dim) for _ in range(nu_order)])

    def E(self, r: int) -> DiffOperator:
        return self.generators[r - 1]

    @property
    def dim(self) -> int:
        return self.generators[0].dim if self.generators else 0

    def validate(self, natural: bool = True) -> None:
        for r, Er in enumerate(self.generators, start=1):
            if not Er.annihilates_constants():
                raise EquivalenceError(f"E_{r}(1) != 0")
            if natural and Er.order > r + 1:
                raise EquivalenceError(f"order bound violated: E_{r} has order {Er.order} > {r + 1}")

    def negated(self) -> EquivalenceSeries:
        return EquivalenceSeries(self.nu_order, [-E for E in self.generators])

    def apply_linear(self, f: FormalFunction) -> FormalFunction:
        """E acting nu-linearly on a formal function."""
        N = f.nu_order
        out = [Poly.zero(f.dim) for _ in range(N + 1)]
        for r in range(1, min(self.nu_order, N) + 1):
            Er = self.E(r)
            if Er.is_zero():
                continue
            for k in range(N + 1 - r):
                if f[k]:
                    out[k + r] = out[k + r] + Er.apply(f[k])
        return FormalFunction(out)

    def exp_apply(self, f: FormalFunction) -> FormalFunction:
        """(Exp E) f, exact through the truncation of f."""
        total = f
        term = f
        for n in range(1, f.nu_order + 1):
            term = self.apply_linear(term).scale(mpq(1, n))
            if term.is_zero():
                break
            total = total + term
        return total


def _ad_series(E: EquivalenceSeries, series: list, N: int) -> list:
    out = [BidiffOperator.zero(series[0].dim) for _ in range(N + 1)]
    for r in range(1, min(E.nu_order, N) + 1):
        Er = E.E(r)
        if Er.is_zero():
            continue
        for s in range(N + 1 - r):
            if series[s].is_zero():
                continue
            out[r + s] = out[r + s] + gerstenhaber_ad(Er, series[s], check_orders=False)
    return out


def apply_equivalence(s: StarProduct, E: EquivalenceSeries, natural: bool = True) -> StarProduct:
    """Tables of Exp(ad E) applied to the product, order by order in nu."""
    if E.generators and E.dim != s.dim:
        raise EquivalenceError("dimension mismatch")
    if E.nu_order < s.nu_order and any(not g.is_zero() for g in E.generators):
        E = EquivalenceSeries(s.nu_order, E.generators + [DiffOperator.zero(s.dim)] * (s.nu_order - E.nu_order))
    E.validate(natural)
    N = s.nu_order
    total = list(s.cochains)
    term = list(s.cochains)
    for n in range(1, N + 1):
        term = [c.scale(mpq(1, n)) for c in _ad_series(E, term, N)]
        if all(c.is_zero() for c in term):
            break
        total = [a + b for a, b in zip(total, term)]
    return StarProduct(s.dim, N, total)


def conjugated_multiply(s: StarProduct, E: EquivalenceSeries, u: FormalFunction, v: FormalFunction) -> FormalFunction:
    """Exp E (Exp(-E) u * Exp(-E) v): the two-sided evaluation of the transformed product."""
    neg = E.negated()
    return E.exp_apply(s.multiply(neg.exp_apply(u), neg.exp_apply(v)))


def cobound_symmetric_cocycle(B: BidiffOperator) -> DiffOperator:
    """E with dE = B, no first-order part and E(1) = 0.

    Each e^g is read from b^{a,b} / binomial(g, a) over every split g = a + b
    with a, b nonzero; the splits must agree, which is the cocycle condition
    for symmetric cochains.
    """
    d = B.dim
    z = (0,) * d
    for (a, b) in B.table:
        if a == z or b == z:
            raise CochainError(f"entry ({a}, {b}) has a zero-order argument")
    skew = B.skew_part()
    if not skew.is_zero():
        raise CochainError(f"has antisymmetric part: {skew.first_entry()}")
    gammas = {_add_mi(a, b) for (a, b) in B.table}
    table = {}
    zero = Poly.zero(d)
    for gamma in sorted(gammas):
        value = None
        for alpha in sub_indices(gamma):
            if alpha == z or alpha == gamma:
                continue
            beta = _sub_mi(gamma, alpha)
            candidate = B.table.get((alpha, beta), zero).scale(mpq(-1, multinomial(gamma, alpha)))
            if value is None:
                value = candidate
            elif candidate != value:
                raise CochainError(f"not a cocycle: splits of {gamma} disagree")
        if value:
            table[gamma] = value
    return DiffOperator(d, table)


def _invert_constant_matrix(P: Sequence[Sequence[Poly]]) -> list[list[Poly]] | None:
    d = len(P)
    if not all(p.is_constant() for row in P for p in row):
        return None
    A = [[P[i][j].constant_term() for j in range(d)] + [mpq(1 if i == j else 0) for j in range(d)] for i in range(d)]
    for col in range(d):
        piv = next((r for r in range(col, d) if A[r][col]), None)
        if piv is None:
            return None
        A[col], A[piv] = A[piv], A[col]
        inv = 1 / A[col][col]
        A[col] = [x * inv for x in A[col]]
        for r in range(d):
            if r != col and A[r][col]:
                f = A[r][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return [[Poly.const(d, A[i][d + j]) for j in range(d)] for i in range(d)]


def _skew_correction_field(skew: BidiffOperator, P, Pinv) -> list[Poly]:
    """Vector field Y with ad Y br = -skew, found through the Poincare lemma.

    ad Y br is the Lie derivative of the bivector P, so lowering indices
    with P^{-1} turns the equation into d(i(Y) P^{-1}) = P^{-1} skew P^{-1}.
    """
    from .geom import d_two_form_violation, primitive_of_two_form

    d = skew.dim
    if skew.entries_exceeding(1, 1) or skew.part_of_orders(0, 1).table or skew.part_of_orders(1, 0).table:
        raise EquivalenceError("products not equivalent as given: skew defect is not a bivector")
    sigma = [[skew.table.get((_unit(d, a), _unit(d, b)), Poly.zero(d)) for b in range(d)] for a in range(d)]
    tau = [[Poly.zero(d) for _ in range(d)] for _ in range(d)]
    for c in range(d):
        for e in range(d):
            s = Poly.zero(d)
            for a in range(d):
                if not Pinv[c][a]:
                    continue
                for b in range(d):
                    if sigma[a][b] and Pinv[b][e]:
                        s = s + Pinv[c][a] * sigma[a][b] * Pinv[b][e]
            tau[c][e] = s
    if d_two_form_violation(tau) is not None:
        raise EquivalenceError("products not equivalent as given: skew defect is not closed")
    theta = primitive_of_two_form(tau)
    Y = []
    for e in range(d):
        s = Poly.zero(d)
        for k in range(d):
            if theta[k] and P[k][e]:
                s = s + theta[k] * P[k][e]
        Y.append(s)
    return Y


def construct_equivalence(s: StarProduct, target: StarProduct, absorb_skew: bool = True) -> EquivalenceSeries:
    """Find E with apply_equivalence(s, E) == target through nu^N.

    Generators are built order by order by cobounding the symmetric defect.
    A skew defect at order k+1 is cancelled, when ``absorb_skew`` is set, by
    adding a vector field to E_k; a skew defect that is not a closed
    bivector means the products are not equivalent.
    """
    if s.dim != target.dim or s.nu_order != target.nu_order:
        raise EquivalenceError("products must share dimension and order")
    if s.C(0) != target.C(0):
        raise EquivalenceError("products have different C_0")
    if s.nu_order >= 1 and s.C(1).skew_part() != target.C(1).skew_part():
        raise EquivalenceError("products not equivalent as given: C_1 skew parts differ")
    d, N = s.dim, s.nu_order
    gens = [DiffOperator.zero(d) for _ in range(N)]
    P = s.poisson_tensor()
    Pinv = None
    for k in range(N):
        current = apply_equivalence(s, EquivalenceSeries(N, gens), natural=False)
        defect = current.C(k + 1) - target.C(k + 1)
        skew = defect.skew_part()
        if not skew.is_zero():
            if not absorb_skew or k == 0:
                raise EquivalenceError(f"products not equivalent as given: skew defect at order {k + 1}")
            if Pinv is None:
                Pinv = _invert_constant_matrix(P)
                if Pinv is None:
                    raise EquivalenceError("skew absorption needs a constant Poisson tensor")
            Y = _skew_correction_field(skew, P, Pinv)
            gens[k - 1] = gens[k - 1] + DiffOperator.from_vector_field(Y)
            current = apply_equivalence(s, EquivalenceSeries(N, gens), natural=False)
            defect = current.C(k + 1) - target.C(k + 1)
            if not defect.skew_part().is_zero():
                raise EquivalenceError(f"products not equivalent as given: skew defect at order {k + 1} persists")
        try:
            gens[k] = cobound_symmetric_cocycle(defect)
        except CochainError as exc:
            raise EquivalenceError(f"products not equivalent as given at order {k + 1}: {exc}") from exc
    E = EquivalenceSeries(N, gens)
    if apply_equivalence(s, E, natural=False) != target:
        raise EquivalenceError("constructed equivalence does not reproduce the target product")
    return E


# --------------------------------------------------------------------------
# naturality and connection extraction


@dataclass
class OrderReport:
    r: int
    orders: tuple[int, int]
    passed: bool
    offending: tuple | None = None


def naturality_check(s: StarProduct) -> list[OrderReport]:
    out = []
    for r, C in enumerate(s.cochains):
        bad = C.entries_exceeding(r, r)
        first = min(bad) if bad else None
        out.append(OrderReport(r, C.orders, not bad, first))
    return out


@dataclass
class ConnectionExtraction:
    gamma: list
    e1: DiffOperator
    remainder: BidiffOperator
    diagnostics: dict


def _hessian_ops(gamma, dim: int) -> dict:
    """nabla^2_{ab} as DiffOperators: d_a d_b - Gamma^k_{ab} d_k."""
    ops = {}
    for a in range(dim):
        for b in range(dim):
            t = {_add_mi(_unit(dim, a), _unit(dim, b)): Poly.const(dim, 1)}
            for k in range(dim):
                if gamma[k][a][b]:
                    _acc(t, _unit(dim, k), -gamma[k][a][b])
            ops[(a, b)] = t
    return ops


def hessian_pairing(P, gamma) -> BidiffOperator:
    """1/2 P^{ij} P^{i'j'} nabla^2_{ii'} u nabla^2_{jj'} v."""
    d = len(P)
    ops = _hessian_ops(gamma, d)
    t: dict = {}
    half = mpq(1, 2)
    for i, j, i2, j2 in itertools.product(range(d), repeat=4):
        if not P[i][j] or not P[i2][j2]:
            continue
        w = (P[i][j] * P[i2][j2]).scale(half)
        for a, ca in ops[(i, i2)].items():
            for b, cb in ops[(j, j2)].items():
                _acc(t, (a, b), w * ca * cb)
    return BidiffOperator(d, t)


def extract_connection(
    s: StarProduct,
    omega: Sequence[Sequence[Poly]],
    lam: Sequence[Sequence[Poly]],
    bracket_scale=1,
    e1_shift: Sequence[Poly] | None = None,
) -> ConnectionExtraction:
    """Recover the symplectic connection attached to a natural product.

    ``bracket_scale`` is the factor in C_1(u, v) - C_1(v, u) = scale {u, v};
    the product's Poisson tensor is then P = (scale / 2) Lambda.
    ``e1_shift`` adds a vector field to the E_1 representative.
    """
    from .geom import ChartGeometry

    d = s.dim
    if s.nu_order < 2:
        raise ExtractionError("need cochains through order 2")
    diag: dict = {}
    for r in (1, 2):
        bad = s.C(r).entries_exceeding(r, r)
        if bad:
            raise ExtractionError(f"not natural: C_{r} has entry of order {max(bad)}")
    half_scale = mpq(bracket_scale) / 2
    P = [[lam[i][j].scale(half_scale) for j in range(d)] for i in range(d)]
    Pinv = [[omega[i][j].scale(1 / half_scale) for j in range(d)] for i in range(d)]
    for i in range(d):
        for k in range(d):
            acc = Poly.zero(d)
            for j in range(d):
                if P[i][j] and Pinv[j][k]:
                    acc = acc + P[i][j] * Pinv[j][k]
            if acc != (1 if i == k else 0):
                raise ExtractionError("omega and Lambda are not exact inverses")

    C1 = s.C(1)
    br = C1.skew_part()
    if br != BidiffOperator.from_bivector(P):
        raise ExtractionError("skew part of C_1 is not the Poisson bracket at the given scale")
    E1 = cobound_symmetric_cocycle(br - C1)
    if e1_shift is not None:
        E1 = E1 + DiffOperator.from_vector_field(e1_shift)
    diag["e1_order"] = E1.order
    m = BidiffOperator.multiplication(d)
    adm = gerstenhaber_ad(E1, m)
    delta2 = s.C(2) - gerstenhaber_ad(E1, adm).scale(mpq(1, 2)) - gerstenhaber_ad(E1, br)

    zero_gamma = [[[Poly.zero(d) for _ in range(d)] for _ in range(d)] for _ in range(d)]
    top = hessian_pairing(P, zero_gamma).part_of_orders(2, 2)
    if delta2.part_of_orders(2, 2) != top:
        raise ExtractionError("not of natural second-order shape: (2,2) part mismatch")
    if delta2.entries_exceeding(2, 2):
        raise ExtractionError("not of natural second-order shape: order above 2")

    # (2,1) entries: coefficient of d_i d_i' u d_l v is -mult * (P P Gamma)^{i i' l}
    M = {}
    for i in range(d):
        for i2 in range(i, d):
            alpha = _add_mi(_unit(d, i), _unit(d, i2))
            mult = 1 if i == i2 else 2
            for l in range(d):
                c = delta2.table.get((alpha, _unit(d, l)), Poly.zero(d))
                val = c.scale(mpq(-2, mult) if i == i2 else mpq(-1, 1))
                M[(i, i2, l)] = val
                M[(i2, i, l)] = val
    gamma = [[[Poly.zero(d) for _ in range(d)] for _ in range(d)] for _ in range(d)]
    for l in range(d):
        for a in range(d):
            for b in range(d):
                acc = Poly.zero(d)
                for i in range(d):
                    if not Pinv[a][i]:
                        continue
                    for i2 in range(d):
                        if Pinv[b][i2] and M[(i, i2, l)]:
                            acc = acc + Pinv[a][i] * Pinv[b][i2] * M[(i, i2, l)]
                gamma[l][a][b] = acc

    for l in range(d):
        for a in range(d):
            for b in range(d):
                if gamma[l][a][b] != gamma[l][b][a]:
                    raise ExtractionError("no symplectic connection fits: Gamma not symmetric")
    geom = ChartGeometry(d, [list(r) for r in omega], [list(r) for r in lam], gamma)
    nw = geom.nabla_omega()
    if nw:
        raise ExtractionError(f"no symplectic connection fits: nabla omega != 0 at {min(nw)}")
    remainder = delta2 - hessian_pairing(P, gamma)
    if remainder.entries_exceeding(1, 1):
        raise ExtractionError(
            f"no symplectic connection fits: remainder has entry {min(remainder.entries_exceeding(1, 1))}"
        )
    diag["remainder_orders"] = remainder.orders
    diag["remainder_skew_zero"] = remainder.skew_part().is_zero()
    return ConnectionExtraction(gamma, E1, remainder, diag)
