"""Fedosov construction: the abelian connection, flat sections and the product.

Everything is exact and carried out inside a fixed :class:`Truncation`.
Equations are solved one Weyl degree at a time, since ``delta^{-1}`` raises
the degree by exactly one while the curvature-side operators preserve it.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Sequence

from gmpy2 import mpq

from .cochain import BidiffOperator, FormalFunction, StarProduct
from .geom import ChartGeometry, Connection, GeometryError, curvature_rbar, two_form_section, validate_geometry
from .polycore import Poly, factorial_multi, monomials_up_to, random_poly
from .weylalg import Truncation, WeylSection, delta, delta_inv, random_section, sum_sections


class FedosovError(RuntimeError):
    pass


def omega_section(g: ChartGeometry, trunc: Truncation) -> WeylSection:
    """Omega = sum_r nu^r Omega_r as a Weyl-valued 2-form."""
    parts = [two_form_section(w, trunc, nu=r) for r, w in g.omega_series if r <= trunc.nu_order]
    return sum_sections(parts, g.dim, trunc)


@dataclass
class FedosovData:
    geometry: ChartGeometry
    trunc: Truncation
    r: WeylSection
    connection: Connection
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self._r_by_degree = {d: self.r.homogeneous(d) for d in range(self.trunc.weyl_degree_cap + 1)}
        self._r_by_degree = {d: s for d, s in self._r_by_degree.items() if s}
        self._flat_cache: dict = {}

    @property
    def dim(self) -> int:
        return self.geometry.dim

    @property
    def algebra(self):
        return self.geometry.algebra

    def r_degree(self, d: int) -> WeylSection:
        return self._r_by_degree.get(d, WeylSection.zero(self.dim, self.trunc))

    def D(self, a: WeylSection) -> WeylSection:
        """The Fedosov connection: partial a - delta a - (1/nu)[r, a]."""
        out = self.connection.partial(a) - delta(a)
        if self.r:
            out = out - self.algebra.bracket_over_nu(self.r, a)
        return out

    def with_r(self, r: WeylSection) -> FedosovData:
        """Same geometry with a replaced r, for negative controls."""
        return FedosovData(self.geometry, self.trunc, r, self.connection, {"modified": True})


def solve_r(g: ChartGeometry, trunc: Truncation, validate: bool = True) -> FedosovData:
    """Solve r = delta^{-1}(Omega - Rbar + partial r - (1/2nu)[r, r]) degree by degree."""
    if validate:
        report = validate_geometry(g)
        if not report.passed:
            names = ", ".join(c.name for c in report.failures())
            raise GeometryError(f"geometry fails validation: {names}")
    conn = Connection(g, trunc)
    alg = g.algebra
    source = omega_section(g, trunc) - curvature_rbar(g, trunc)
    src_by_deg = {d: source.homogeneous(d) for d in range(trunc.weyl_degree_cap + 1)}
    parts: dict[int, WeylSection] = {}
    zero = WeylSection.zero(g.dim, trunc)
    for d in range(2, trunc.weyl_degree_cap + 1):
        # the right side at degree d - 1
        rhs = src_by_deg.get(d - 1, zero)
        if d - 1 in parts:
            rhs = rhs + conn.partial(parts[d - 1]).homogeneous(d - 1)
        # (1/nu)[r_a, r_b] has degree a + b - 2 = d - 1
        quad = []
        for a in sorted(parts):
            b = d + 1 - a
            if b < a:
                break
            if b not in parts:
                continue
            term = alg.bracket_over_nu(parts[a], parts[b]).homogeneous(d - 1)
            quad.append(term if a == b else term.scale(2))
        if quad:
            rhs = rhs - sum_sections(quad, g.dim, trunc).scale(mpq(1, 2))
        rd = delta_inv(rhs).homogeneous(d)
        if rd:
            parts[d] = rd
    r = sum_sections(parts.values(), g.dim, trunc)
    if r and r.form_degree != 1:
        raise FedosovError("r is not a 1-form")
    if delta_inv(r):
        raise FedosovError("normalization delta^{-1} r = 0 violated")
    low = r.min_degree()
    if low is not None and low < 2:
        raise FedosovError(f"r has a component of degree {low} < 2")
    diag = {"lowest_degree": low, "degrees": sorted(parts), "terms": len(r.terms)}
    return FedosovData(g, trunc, r, conn, diag)


# --------------------------------------------------------------------------
# flatness


@dataclass
class FlatnessReport:
    reliable_degree: int
    residual: WeylSection
    probe_degree: int
    probe_residuals: list
    passed: bool

    def first_failure(self) -> str | None:
        if self.residual:
            return f"Dr residual: {self.residual.to_string()[:200]}"
        for i, p in enumerate(self.probe_residuals):
            if p:
                return f"D(D(probe {i})) = {p.to_string()[:200]}"
        return None


def flatness_check(fd: FedosovData, n_probes: int = 3, seed: int = 0) -> FlatnessReport:
    """Check D r = Rbar - Omega - (1/2nu)[r, r] and D(D a) = 0 on probes.

    The identities are compared only in Weyl degrees the truncation
    determines: one below the cap for the equation on r, two below for D o D.
    """
    g, trunc = fd.geometry, fd.trunc
    cap = trunc.weyl_degree_cap
    alg = fd.algebra
    rhs = curvature_rbar(g, trunc) - omega_section(g, trunc)
    if fd.r:
        rhs = rhs - alg.bracket_over_nu(fd.r, fd.r).scale(mpq(1, 2))
    residual = (fd.D(fd.r) - rhs).up_to_degree(cap - 1)
    rng = random.Random(seed)
    probes = []
    for _ in range(n_probes):
        probe = random_section(rng, g.dim, trunc, form_degree=0, n_terms=3, max_ydeg=2, max_xdeg=2, max_nu=0)
        probes.append(fd.D(fd.D(probe)).up_to_degree(cap - 2))
    passed = not residual and all(not p for p in probes)
    return FlatnessReport(cap - 1, residual, cap - 2, probes, passed)


# --------------------------------------------------------------------------
# flat sections and the product


def flat_section(fd: FedosovData, f) -> WeylSection:
    """Q(f): the unique D-flat section whose y-free part is f.

    ``f`` is a Poly or a FormalFunction.  Solved degree by degree from
    a = f + delta^{-1}(partial a - (1/nu)[r, a]).
    """
    if isinstance(f, Poly):
        key = f
        f = FormalFunction.from_poly(f, fd.trunc.nu_order)
    else:
        key = tuple(f.coeffs)
    hit = fd._flat_cache.get(key)
    if hit is not None:
        return hit
    g, trunc = fd.geometry, fd.trunc
    dim, cap = g.dim, trunc.weyl_degree_cap
    alg = fd.algebra
    zero = WeylSection.zero(dim, trunc)
    parts: dict[int, WeylSection] = {}
    for d in range(cap + 1):
        piece = zero
        if d % 2 == 0 and d // 2 <= min(trunc.nu_order, f.nu_order) and f[d // 2]:
            piece = WeylSection.scalar(f[d // 2], trunc, nu=d // 2)
        if d >= 1:
            rhs = zero
            if d - 1 in parts:
                rhs = fd.connection.partial(parts[d - 1]).homogeneous(d - 1)
            brs = []
            for e, re in fd._r_by_degree.items():
                c = d + 1 - e
                if c in parts:
                    brs.append(alg.bracket_over_nu(re, parts[c]).homogeneous(d - 1))
            if brs:
                rhs = rhs - sum_sections(brs, dim, trunc)
            if rhs:
                piece = piece + delta_inv(rhs).homogeneous(d)
        if piece:
            parts[d] = piece
    out = sum_sections(parts.values(), dim, trunc)
    fd._flat_cache[key] = out
    return out


def star_multiply(fd: FedosovData, u, v) -> FormalFunction:
    """u * v: the y-free part of Q(u) o Q(v), exact through nu^N."""
    a, b = flat_section(fd, u), flat_section(fd, v)
    return FormalFunction(fd.algebra.scalar_contraction(a, b))


# --------------------------------------------------------------------------
# cochain tables


@dataclass
class CochainExtraction:
    product: StarProduct
    max_diff_order: int
    verified_on: int
    verification_failures: list


def extract_cochains(
    fd: FedosovData, max_diff_order: int | None = None, verify: int = 3, seed: int = 0
) -> CochainExtraction:
    """Recover the tables of C_r by probing the product on monomials.

    C_r(x^g, x^h) = sum_{a <= g, b <= h} c^{a,b} g!/(g-a)! h!/(h-b)! x^{g-a+h-b},
    which is triangular in (a, b); the top entry is solved after the lower
    ones are subtracted.  The tables are then compared with direct products
    on fresh random inputs of higher degree.
    """
    dim, N = fd.dim, fd.trunc.nu_order
    if max_diff_order is None:
        max_diff_order = N
    monos = monomials_up_to(dim, max_diff_order)
    xs = {m: Poly.monomial(m) for m in monos}
    tables = [dict() for _ in range(N + 1)]
    for g_, h_ in sorted(itertools.product(monos, monos), key=lambda p: (sum(p[0]) + sum(p[1]), p)):
        prod = star_multiply(fd, xs[g_], xs[h_])
        for r in range(N + 1):
            val = prod[r]
            for (a, b), c in tables[r].items():
                if all(x <= y for x, y in zip(a, g_)) and all(x <= y for x, y in zip(b, h_)):
                    val = val - c * xs[g_].diff_multi(a) * xs[h_].diff_multi(b)
            if not val:
                continue
            scale = factorial_multi(g_) * factorial_multi(h_)
            tables[r][(g_, h_)] = val.scale(mpq(1, scale))
    s = StarProduct(dim, N, [BidiffOperator(dim, t) for t in tables])
    rng = random.Random(seed)
    failures = []
    for i in range(verify):
        u = random_poly(rng, dim, max_diff_order + 2, 3)
        v = random_poly(rng, dim, max_diff_order + 2, 3)
        if s.multiply(u, v) != star_multiply(fd, u, v):
            failures.append((str(u), str(v)))
    return CochainExtraction(s, max_diff_order, verify, failures)


# --------------------------------------------------------------------------
# associativity


@dataclass
class AssociativityReport:
    triples: list
    associators: list
    passed: bool


def associator(mult, u, v, w) -> FormalFunction:
    return mult(mult(u, v), w) - mult(u, mult(v, w))


def check_associativity(target, triples: Sequence[tuple]) -> AssociativityReport:
    """(u*v)*w - u*(v*w) through nu^N for each triple, on engine data or cochain tables."""
    if isinstance(target, StarProduct):
        mult = target.multiply
    else:
        mult = lambda a, b: star_multiply(target, a, b)  # noqa: E731
    assoc = [associator(mult, *t) for t in triples]
    return AssociativityReport(list(triples), assoc, all(a.is_zero() for a in assoc))


def build_fedosov(g: ChartGeometry, trunc: Truncation, validate: bool = True) -> FedosovData:
    return solve_r(g, trunc, validate)
