"""Truncated sections of the Weyl bundle tensored with differential forms.

A section is a finite sum of terms ``nu^k * c(x) * y^alpha * dx^J`` where
``J`` is a strictly increasing tuple of 0-based form indices.  Terms are
kept only when ``k <= nu_order`` and the Weyl degree ``2k + |alpha|`` is at
most ``weyl_degree_cap``; every operation here truncates eagerly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from gmpy2 import mpq

from .polycore import Poly, random_poly

Key = tuple[int, tuple[int, ...], tuple[int, ...]]


class WeylError(ValueError):
    pass


@dataclass(frozen=True)
class Truncation:
    nu_order: int
    weyl_degree_cap: int

    def __post_init__(self):
        if self.nu_order < 0 or self.weyl_degree_cap < 0:
            raise WeylError("truncation bounds must be non-negative")

    @classmethod
    def for_order(cls, n: int, extra: int = 2) -> Truncation:
        """Default cap 2N + 2 for a star product computed to order N."""
        return cls(n, 2 * n + extra)

    def keeps(self, k: int, ydeg: int) -> bool:
        return k <= self.nu_order and 2 * k + ydeg <= self.weyl_degree_cap

    def raised(self, by: int = 2) -> Truncation:
        return Truncation(self.nu_order, self.weyl_degree_cap + by)


def weyl_degree(key: Key) -> int:
    return 2 * key[0] + sum(key[1])


def wedge_sign(j1: Sequence[int], j2: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Sign and sorted index tuple of dx^j1 ^ dx^j2; sign 0 if they overlap."""
    if not j1:
        return 1, tuple(j2)
    if not j2:
        return 1, tuple(j1)
    s2 = set(j2)
    if any(j in s2 for j in j1):
        return 0, ()
    inversions = 0
    for a in j1:
        for b in j2:
            if a > b:
                inversions += 1
    return (-1 if inversions & 1 else 1), tuple(sorted(j1 + tuple(j2)))


def _insert_front(i: int, J: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
    """dx^i ^ dx^J as (sign, J')."""
    if i in J:
        return 0, J
    before = sum(1 for j in J if j < i)
    return (-1 if before & 1 else 1), tuple(sorted(J + (i,)))


class WeylSection:
    """Immutable truncated section of W (x) Lambda^*."""

    __slots__ = ("dim", "trunc", "terms")

    def __init__(self, dim: int, trunc: Truncation, terms: Mapping[Key, Poly] | None = None, *, _trusted: bool = False):
        self.dim = dim
        self.trunc = trunc
        if _trusted:
            self.terms = terms
            return
        clean: dict[Key, Poly] = {}
        for (k, alpha, J), c in (terms or {}).items():
            alpha = tuple(alpha)
            J = tuple(J)
            if len(alpha) != dim:
                raise WeylError(f"y-multidegree {alpha} does not have length {dim}")
            if any(a < 0 for a in alpha):
                raise WeylError(f"negative y exponent in {alpha}")
            if list(J) != sorted(set(J)) or any(not 0 <= j < dim for j in J):
                raise WeylError(f"form index tuple {J} must be strictly increasing in 0..{dim - 1}")
            if not isinstance(c, Poly):
                c = Poly.const(dim, c)
            if c.dim != dim:
                raise WeylError("coefficient dimension mismatch")
            if c and trunc.keeps(k, sum(alpha)):
                key = (k, alpha, J)
                clean[key] = clean[key] + c if key in clean else c
                if not clean[key]:
                    del clean[key]
        self.terms = clean

    # constructors -------------------------------------------------------

    @classmethod
    def zero(cls, dim: int, trunc: Truncation) -> WeylSection:
        return cls(dim, trunc, {}, _trusted=True)

    @classmethod
    def scalar(cls, f: Poly, trunc: Truncation, nu: int = 0) -> WeylSection:
        return cls(f.dim, trunc, {(nu, (0,) * f.dim, ()): f})

    @classmethod
    def y(cls, dim: int, i: int, trunc: Truncation) -> WeylSection:
        """The fiber coordinate y^i (0-based)."""
        alpha = [0] * dim
        alpha[i] = 1
        return cls(dim, trunc, {(0, tuple(alpha), ()): Poly.const(dim, 1)})

    @classmethod
    def dx(cls, dim: int, i: int, trunc: Truncation) -> WeylSection:
        return cls(dim, trunc, {(0, (0,) * dim, (i,)): Poly.const(dim, 1)})

    @classmethod
    def term(cls, dim: int, trunc: Truncation, nu: int, alpha, J, coef) -> WeylSection:
        return cls(dim, trunc, {(nu, tuple(alpha), tuple(J)): coef})

    # queries ------------------------------------------------------------

    def __bool__(self) -> bool:
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeylSection):
            return NotImplemented
        return self.dim == other.dim and self.terms == other.terms

    def __hash__(self):
        return hash((self.dim, frozenset(self.terms.items())))

    def form_degrees(self) -> set[int]:
        return {len(J) for (_, _, J) in self.terms}

    @property
    def form_degree(self) -> int:
        """The uniform form degree; zero section counts as degree 0."""
        degs = self.form_degrees()
        if len(degs) > 1:
            raise WeylError(f"mixed form degrees {sorted(degs)}")
        return degs.pop() if degs else 0

    def min_degree(self) -> int | None:
        return min((weyl_degree(k) for k in self.terms), default=None)

    def max_degree(self) -> int | None:
        return max((weyl_degree(k) for k in self.terms), default=None)

    def homogeneous(self, d: int) -> WeylSection:
        return WeylSection(
            self.dim, self.trunc, {k: c for k, c in self.terms.items() if weyl_degree(k) == d}, _trusted=True
        )

    def up_to_degree(self, d: int) -> WeylSection:
        return WeylSection(
            self.dim, self.trunc, {k: c for k, c in self.terms.items() if weyl_degree(k) <= d}, _trusted=True
        )

    def bidegree_part(self, p: int, q: int) -> WeylSection:
        """Terms with p y's and q dx's (all nu powers)."""
        return WeylSection(
            self.dim,
            self.trunc,
            {k: c for k, c in self.terms.items() if sum(k[1]) == p and len(k[2]) == q},
            _trusted=True,
        )

    def scalar_part(self) -> list[Poly]:
        """The y-free, form-free part as a list of nu coefficients."""
        out = [Poly.zero(self.dim) for _ in range(self.trunc.nu_order + 1)]
        zero = (0,) * self.dim
        for (k, alpha, J), c in self.terms.items():
            if alpha == zero and not J:
                out[k] = out[k] + c
        return out

    def retruncate(self, trunc: Truncation) -> WeylSection:
        return WeylSection(
            self.dim, trunc, {k: c for k, c in self.terms.items() if trunc.keeps(k[0], sum(k[1]))}, _trusted=True
        )

    # linear structure ---------------------------------------------------

    def _check(self, other: WeylSection):
        if self.dim != other.dim:
            raise WeylError(f"dimension mismatch: {self.dim} vs {other.dim}")
        if self.trunc != other.trunc:
            raise WeylError(f"truncation mismatch: {self.trunc} vs {other.trunc}")

    def __add__(self, other: WeylSection) -> WeylSection:
        self._check(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            if k in out:
                s = out[k] + c
                if s:
                    out[k] = s
                else:
                    del out[k]
            else:
                out[k] = c
        return WeylSection(self.dim, self.trunc, out, _trusted=True)

    def __neg__(self) -> WeylSection:
        return WeylSection(self.dim, self.trunc, {k: -c for k, c in self.terms.items()}, _trusted=True)

    def __sub__(self, other: WeylSection) -> WeylSection:
        return self + (-other)

    def scale(self, c) -> WeylSection:
        if isinstance(c, Poly):
            if not c:
                return WeylSection.zero(self.dim, self.trunc)
            out = {}
            for k, v in self.terms.items():
                p = v * c
                if p:
                    out[k] = p
            return WeylSection(self.dim, self.trunc, out, _trusted=True)
        c = mpq(c)
        if not c:
            return WeylSection.zero(self.dim, self.trunc)
        return WeylSection(self.dim, self.trunc, {k: v.scale(c) for k, v in self.terms.items()}, _trusted=True)

    def __mul__(self, c) -> WeylSection:
        return self.scale(c)

    __rmul__ = __mul__

    def shift_nu(self, n: int) -> WeylSection:
        """Multiply by nu^n (n may be negative when every term allows it)."""
        out = {}
        for (k, a, J), c in self.terms.items():
            if k + n < 0:
                raise WeylError("negative nu power")
            if self.trunc.keeps(k + n, sum(a)):
                out[(k + n, a, J)] = c
        return WeylSection(self.dim, self.trunc, out, _trusted=True)

    # printing -----------------------------------------------------------

    def sorted_items(self) -> list[tuple[Key, Poly]]:
        return sorted(self.terms.items(), key=lambda kv: (weyl_degree(kv[0]), kv[0][0], kv[0][2], tuple(-a for a in kv[0][1])))

    def to_string(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (k, alpha, J), c in self.sorted_items():
            bits = []
            if k:
                bits.append(f"nu^{k}")
            bits.append(f"({c})")
            ys = "*".join(f"y{i + 1}" if a == 1 else f"y{i + 1}^{a}" for i, a in enumerate(alpha) if a)
            if ys:
                bits.append(ys)
            if J:
                bits.append("^".join(f"dx{j + 1}" for j in J))
            parts.append(" * ".join(bits))
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"WeylSection({self.to_string()})"


# --------------------------------------------------------------------------
# operators not needing the symplectic structure


def delta(a: WeylSection) -> WeylSection:
    """dx^k ^ d/dy^k: raises form degree by one, lowers y-degree by one."""
    out: dict[Key, Poly] = {}
    for (k, alpha, J), c in a.terms.items():
        for i, ai in enumerate(alpha):
            if not ai:
                continue
            sign, J2 = _insert_front(i, J)
            if not sign:
                continue
            a2 = alpha[:i] + (ai - 1,) + alpha[i + 1:]
            _acc(out, (k, a2, J2), c.scale(sign * ai))
    return WeylSection(a.dim, a.trunc, _prune(out), _trusted=True)


def delta_inv(a: WeylSection) -> WeylSection:
    """(1/(p+q)) y^k i(d/dx^k) on each (p, q) component; zero when p + q = 0."""
    out: dict[Key, Poly] = {}
    trunc = a.trunc
    for (k, alpha, J), c in a.terms.items():
        p, q = sum(alpha), len(J)
        if p + q == 0 or q == 0:
            continue
        if not trunc.keeps(k, p + 1):
            continue
        for pos, i in enumerate(J):
            J2 = J[:pos] + J[pos + 1:]
            a2 = alpha[:i] + (alpha[i] + 1,) + alpha[i + 1:]
            sign = -1 if pos & 1 else 1
            _acc(out, (k, a2, J2), c.scale(mpq(sign, p + q)))
    return WeylSection(a.dim, a.trunc, _prune(out), _trusted=True)


def interior_product(X: Sequence[Poly], a: WeylSection) -> WeylSection:
    """Contract the vector field X into the form part, y part untouched."""
    if len(X) != a.dim:
        raise WeylError("vector field dimension mismatch")
    out: dict[Key, Poly] = {}
    for (k, alpha, J), c in a.terms.items():
        for pos, i in enumerate(J):
            if not X[i]:
                continue
            sign = -1 if pos & 1 else 1
            _acc(out, (k, alpha, J[:pos] + J[pos + 1:]), (c * X[i]).scale(sign))
    return WeylSection(a.dim, a.trunc, _prune(out), _trusted=True)


def exterior_d(a: WeylSection) -> WeylSection:
    """The x-exterior derivative dx^i ^ d/dx^i acting on the coefficients."""
    out: dict[Key, Poly] = {}
    for (k, alpha, J), c in a.terms.items():
        for i in range(a.dim):
            sign, J2 = _insert_front(i, J)
            if not sign:
                continue
            dc = c.d(i)
            if dc:
                _acc(out, (k, alpha, J2), dc.scale(sign) if sign < 0 else dc)
    return WeylSection(a.dim, a.trunc, _prune(out), _trusted=True)


def wedge_form(a: WeylSection, form: Mapping[tuple[int, ...], Poly]) -> WeylSection:
    """Right exterior multiplication by a scalar form {J: coefficient}."""
    out: dict[Key, Poly] = {}
    for (k, alpha, J), c in a.terms.items():
        for J2, f in form.items():
            sign, J3 = wedge_sign(J, J2)
            if sign and f:
                _acc(out, (k, alpha, J3), (c * f).scale(sign))
    return WeylSection(a.dim, a.trunc, _prune(out), _trusted=True)


def _acc(out: dict, key, value: Poly):
    if key in out:
        out[key] = out[key] + value
    else:
        out[key] = value


def _prune(out: dict) -> dict:
    return {k: v for k, v in out.items() if v}


# --------------------------------------------------------------------------
# the fiberwise product


class WeylAlgebra:
    """Fiberwise Moyal-type product built from a Poisson matrix Lambda.

    ``lam[i][j]`` holds Lambda^{ij} as polynomials in x.  When every entry is
    constant the contraction kernel is rational and cached per pair of
    y-monomials.
    """

    def __init__(self, lam: Sequence[Sequence[Poly]]):
        self.dim = len(lam)
        self.lam = [list(row) for row in lam]
        self.constant = all(p.is_constant() for row in lam for p in row)
        if self.constant:
            self._lamc = [[p.constant_term() for p in row] for row in lam]
            self._pairs = [
                (i, j, self._lamc[i][j]) for i in range(self.dim) for j in range(self.dim) if self._lamc[i][j]
            ]
        else:
            self._pairs = [(i, j, lam[i][j]) for i in range(self.dim) for j in range(self.dim) if lam[i][j]]
        self._kernel_cache: dict = {}

    def kernel(self, alpha: tuple[int, ...], beta: tuple[int, ...]) -> list[tuple[int, tuple[int, ...], object]]:
        """Expansion of Exp(1/2 Lambda^{ij} d_{y^i} d_{z^j}) y^alpha z^beta at y = z.

        Returns ``(m, gamma, coefficient)`` triples; ``m`` is the number of
        contractions, i.e. the nu power gained.
        """
        key = (alpha, beta)
        hit = self._kernel_cache.get(key)
        if hit is not None:
            return hit
        dim = self.dim
        one = mpq(1) if self.constant else Poly.const(dim, 1)
        layer = {(alpha, beta): one}
        result = []
        m = 0
        fact = 1
        while layer:
            scale = mpq(1, (2 ** m) * fact)
            for (a, b), c in layer.items():
                gamma = tuple(x + y for x, y in zip(a, b))
                result.append((m, gamma, c * scale if self.constant else c.scale(scale)))
            nxt: dict = {}
            for (a, b), c in layer.items():
                for i, j, l in self._pairs:
                    if a[i] and b[j]:
                        a2 = a[:i] + (a[i] - 1,) + a[i + 1:]
                        b2 = b[:j] + (b[j] - 1,) + b[j + 1:]
                        v = c * l * (a[i] * b[j])
                        k2 = (a2, b2)
                        nxt[k2] = nxt[k2] + v if k2 in nxt else v
            layer = {k: v for k, v in nxt.items() if v}
            m += 1
            fact *= m
        merged: dict = {}
        for m_, g, c in result:
            kk = (m_, g)
            merged[kk] = merged[kk] + c if kk in merged else c
        out = [(m_, g, c) for (m_, g), c in merged.items() if c]
        self._kernel_cache[key] = out
        return out

    def _product(self, a: WeylSection, b: WeylSection, mode: str) -> WeylSection:
        """mode 'full' for a o b, 'bracket' for (1/nu)[a, b]."""
        if a.dim != b.dim or a.dim != self.dim:
            raise WeylError("dimension mismatch in fiber product")
        if a.trunc != b.trunc:
            raise WeylError(f"truncation mismatch: {a.trunc} vs {b.trunc}")
        trunc = a.trunc
        cap, nmax = trunc.weyl_degree_cap, trunc.nu_order
        bracket = mode == "bracket"
        shift = 1 if bracket else 0
        acc: dict[Key, dict] = {}
        dim = self.dim
        b_items = [(key, c, 2 * key[0] + sum(key[1])) for key, c in b.terms.items()]
        for (k1, al, J1), c1 in a.terms.items():
            d1 = 2 * k1 + sum(al)
            for (k2, be, J2), c2, d2 in b_items:
                if d1 + d2 - 2 * shift > cap or k1 + k2 > nmax + shift:
                    continue
                sign, J = wedge_sign(J1, J2)
                if not sign:
                    continue
                cc = None
                for m, gamma, kc in self.kernel(al, be):
                    if bracket and not (m & 1):
                        continue
                    k = k1 + k2 + m - shift
                    if k > nmax:
                        continue
                    if cc is None:
                        cc = c1 * c2
                        if not cc:
                            break
                    factor = 2 * sign if bracket else sign
                    if self.constant:
                        term_terms = cc.terms
                        f = kc * factor
                        slot = acc.setdefault((k, gamma, J), {})
                        for e, v in term_terms.items():
                            w = slot.get(e)
                            slot[e] = v * f if w is None else w + v * f
                    else:
                        p = (cc * kc).scale(factor)
                        slot = acc.setdefault((k, gamma, J), {})
                        for e, v in p.terms.items():
                            w = slot.get(e)
                            slot[e] = v if w is None else w + v
        out = {}
        for key, slot in acc.items():
            poly = Poly(dim, {e: v for e, v in slot.items() if v}, _trusted=True)
            if poly:
                out[key] = poly
        return WeylSection(dim, trunc, out, _trusted=True)

    def product(self, a: WeylSection, b: WeylSection) -> WeylSection:
        """a o b with wedge multiplication of the form parts."""
        return self._product(a, b, "full")

    def bracket(self, a: WeylSection, b: WeylSection) -> WeylSection:
        """Graded bracket a o b - (-1)^{q1 q2} b o a."""
        q1, q2 = a.form_degree, b.form_degree
        sign = -1 if (q1 * q2) & 1 else 1
        return self.product(a, b) - self.product(b, a).scale(sign)

    def bracket_over_nu(self, a: WeylSection, b: WeylSection) -> WeylSection:
        """(1/nu)[a, b] computed directly, so no order is lost to truncation.

        Only odd contraction counts survive the graded commutator, each with
        a factor 2, whatever the form degrees.
        """
        return self._product(a, b, "bracket")

    def scalar_contraction(self, a: WeylSection, b: WeylSection) -> list[Poly]:
        """The y-free part of a o b for 0-forms, as nu coefficients."""
        trunc = a.trunc
        nmax = trunc.nu_order
        dim = self.dim
        out = [dict() for _ in range(nmax + 1)]
        zero = (0,) * dim
        by_deg: dict[int, list] = {}
        for (k2, be, J2), c2 in b.terms.items():
            if not J2:
                by_deg.setdefault(sum(be), []).append((k2, be, c2))
        for (k1, al, J1), c1 in a.terms.items():
            if J1:
                continue
            p = sum(al)
            for k2, be, c2 in by_deg.get(p, ()):
                k = k1 + k2 + p
                if k > nmax:
                    continue
                for m, gamma, kc in self.kernel(al, be):
                    if m != p:
                        continue
                    prod = c1 * c2 * kc if not self.constant else (c1 * c2).scale(kc)
                    slot = out[k]
                    for e, v in prod.terms.items():
                        w = slot.get(e)
                        slot[e] = v if w is None else w + v
        return [Poly(dim, {e: v for e, v in s.items() if v}, _trusted=True) for s in out]


def random_section(
    rng: random.Random,
    dim: int,
    trunc: Truncation,
    form_degree: int = 0,
    n_terms: int = 4,
    max_ydeg: int = 3,
    max_xdeg: int = 2,
    max_nu: int = 1,
) -> WeylSection:
    """A random probe section of uniform form degree."""
    terms = {}
    for _ in range(n_terms):
        k = rng.randint(0, min(max_nu, trunc.nu_order))
        yd = rng.randint(0, max_ydeg)
        alpha = [0] * dim
        for _ in range(yd):
            alpha[rng.randrange(dim)] += 1
        J = tuple(sorted(rng.sample(range(dim), form_degree)))
        c = random_poly(rng, dim, max_xdeg, 2)
        if c:
            terms[(k, tuple(alpha), J)] = c
    return WeylSection(dim, trunc, terms)


def sum_sections(items: Iterable[WeylSection], dim: int, trunc: Truncation) -> WeylSection:
    acc: dict[Key, dict] = {}
    for s in items:
        for key, c in s.terms.items():
            slot = acc.setdefault(key, {})
            for e, v in c.terms.items():
                w = slot.get(e)
                slot[e] = v if w is None else w + v
    out = {}
    for key, slot in acc.items():
        p = Poly(dim, {e: v for e, v in slot.items() if v}, _trusted=True)
        if p:
            out[key] = p
    return WeylSection(dim, trunc, out, _trusted=True)


def iter_degrees(a: WeylSection) -> Iterator[tuple[int, WeylSection]]:
    degs = sorted({weyl_degree(k) for k in a.terms})
    for d in degs:
        yield d, a.homogeneous(d)
