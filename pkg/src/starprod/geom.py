"""Symplectic geometry on a single polynomial chart.

Index conventions: coordinates are 0-based internally.  ``gamma[k][i][j]``
is the Christoffel symbol Gamma^k_{ij}, ``omega[i][j]`` is omega_{ij} and
``lam[i][j]`` is Lambda^{ij} with Lambda^{ij} omega_{jk} = delta^i_k.
Curvature is R^l_{ijk} = d_i G^l_{jk} - d_j G^l_{ik} + G^l_{ir} G^r_{jk} - G^l_{jr} G^r_{ik},
the component of R(d_i, d_j) d_k.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

from gmpy2 import mpq

from .polycore import Poly
from .weylalg import Truncation, WeylAlgebra, WeylError, WeylSection, _acc, _insert_front, _prune, exterior_d

Matrix = list[list[Poly]]


class GeometryError(ValueError):
    pass


# --------------------------------------------------------------------------
# tensors and vector fields


class VectorField(Sequence):
    """Polynomial vector field X = X^i d_i."""

    def __init__(self, components: Sequence[Poly]):
        comps = list(components)
        if not comps:
            raise GeometryError("vector field needs components")
        dim = comps[0].dim
        if len(comps) != dim or any(c.dim != dim for c in comps):
            raise GeometryError("vector field must have one component per coordinate")
        self.dim = dim
        self.components = comps

    def __getitem__(self, i):
        return self.components[i]

    def __len__(self):
        return self.dim

    def __eq__(self, other):
        return isinstance(other, VectorField) and self.components == other.components

    def __hash__(self):
        return hash(tuple(self.components))

    def apply(self, f: Poly) -> Poly:
        """X(f) = X^i d_i f."""
        out = Poly.zero(self.dim)
        for i, c in enumerate(self.components):
            if c:
                out = out + c * f.d(i)
        return out

    def bracket(self, other: VectorField) -> VectorField:
        return VectorField([self.apply(other[k]) - other.apply(self[k]) for k in range(self.dim)])

    def __repr__(self):
        return f"VectorField({[str(c) for c in self.components]})"


@dataclass
class TensorField:
    """Tensor with ``upper`` contravariant then ``lower`` covariant slots.

    ``symmetries`` lists (kind, slots) pairs with kind 'sym' or 'anti'
    and slots as positions in the full index tuple.
    """

    dim: int
    upper: int
    lower: int
    components: dict = field(default_factory=dict)
    symmetries: list = field(default_factory=list)

    def __post_init__(self):
        self.components = {tuple(k): v for k, v in self.components.items() if v}
        for k in self.components:
            if len(k) != self.rank or any(not 0 <= i < self.dim for i in k):
                raise GeometryError(f"bad tensor index {k}")

    @property
    def rank(self) -> int:
        return self.upper + self.lower

    def __getitem__(self, idx) -> Poly:
        return self.components.get(tuple(idx), Poly.zero(self.dim))

    def indices(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(range(self.dim), repeat=self.rank)

    def is_zero(self) -> bool:
        return not self.components

    def first_nonzero(self):
        for k in sorted(self.components):
            return k, self.components[k]
        return None

    def __eq__(self, other):
        return (
            isinstance(other, TensorField)
            and (self.dim, self.upper, self.lower) == (other.dim, other.upper, other.lower)
            and self.components == other.components
        )

    def __sub__(self, other: TensorField) -> TensorField:
        comps = dict(self.components)
        for k, v in other.components.items():
            comps[k] = comps.get(k, Poly.zero(self.dim)) - v
        return TensorField(self.dim, self.upper, self.lower, comps)

    def symmetry_violation(self):
        """First (slots, index) where a declared symmetry fails, else None."""
        for kind, slots in self.symmetries:
            for idx in self.indices():
                for a, b in itertools.combinations(slots, 2):
                    swapped = list(idx)
                    swapped[a], swapped[b] = swapped[b], swapped[a]
                    expected = self[swapped] if kind == "sym" else -self[swapped]
                    if self[idx] != expected:
                        return (kind, slots), idx
        return None

    @classmethod
    def from_matrix(cls, mat: Sequence[Sequence[Poly]], upper: int, lower: int, symmetries=None) -> TensorField:
        dim = len(mat)
        comps = {(i, j): mat[i][j] for i in range(dim) for j in range(dim) if mat[i][j]}
        return cls(dim, upper, lower, comps, list(symmetries or []))

    def to_matrix(self) -> Matrix:
        if self.rank != 2:
            raise GeometryError("not a rank-2 tensor")
        return [[self[(i, j)] for j in range(self.dim)] for i in range(self.dim)]


def lie_derivative_tensor(X: VectorField, t: TensorField) -> TensorField:
    """L_X t with one correction per slot."""
    if X.dim != t.dim:
        raise GeometryError("dimension mismatch")
    dim = t.dim
    dX = [[X[r].d(i) for i in range(dim)] for r in range(dim)]  # dX[r][i] = d_i X^r
    out = {}
    for idx in t.indices():
        val = X.apply(t[idx])
        for slot in range(t.rank):
            for r in range(dim):
                swapped = idx[:slot] + (r,) + idx[slot + 1:]
                comp = t[swapped]
                if not comp:
                    continue
                if slot < t.upper:
                    # -d_r X^{i_slot} t^{..r..}
                    f = dX[idx[slot]][r]
                    if f:
                        val = val - f * comp
                else:
                    f = dX[r][idx[slot]]
                    if f:
                        val = val + f * comp
        if val:
            out[idx] = val
    return TensorField(dim, t.upper, t.lower, out, list(t.symmetries))


# --------------------------------------------------------------------------
# differential forms on the chart (components as antisymmetric arrays)


def d_function(f: Poly) -> list[Poly]:
    return [f.d(i) for i in range(f.dim)]


def d_one_form(theta: Sequence[Poly]) -> Matrix:
    """(d theta)_{ij} = d_i theta_j - d_j theta_i."""
    dim = len(theta)
    return [[theta[j].d(i) - theta[i].d(j) for j in range(dim)] for i in range(dim)]


def d_two_form_violation(w: Sequence[Sequence[Poly]]):
    """First (i, j, k) with d_i w_jk + d_j w_ki + d_k w_ij != 0, else None."""
    dim = len(w)
    for i, j, k in itertools.combinations(range(dim), 3):
        v = w[j][k].d(i) + w[k][i].d(j) + w[i][j].d(k)
        if v:
            return (i, j, k), v
    return None


def contract_vector_two_form(X: Sequence[Poly], w: Sequence[Sequence[Poly]]) -> list[Poly]:
    """(i(X) w)_j = X^i w_{ij}."""
    dim = len(w)
    out = []
    for j in range(dim):
        s = Poly.zero(dim)
        for i in range(dim):
            if X[i] and w[i][j]:
                s = s + X[i] * w[i][j]
        out.append(s)
    return out


def primitive_of_one_form(theta: Sequence[Poly]) -> Poly:
    """Radial Poincare primitive lambda = int_0^1 x^i theta_i(t x) dt."""
    dim = len(theta)
    out = Poly.zero(dim)
    for i in range(dim):
        if theta[i]:
            out = out + Poly.var(dim, i + 1) * theta[i].radial_integral(0)
    return out


def primitive_of_two_form(w: Sequence[Sequence[Poly]]) -> list[Poly]:
    """Radial Poincare primitive theta_j = int_0^1 t x^i w_{ij}(t x) dt."""
    dim = len(w)
    out = []
    for j in range(dim):
        s = Poly.zero(dim)
        for i in range(dim):
            if w[i][j]:
                s = s + Poly.var(dim, i + 1) * w[i][j].radial_integral(1)
        out.append(s)
    return out


# --------------------------------------------------------------------------
# chart geometry


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]


@dataclass
class ChartGeometry:
    """omega, its inverse, a torsion-free connection and the 2-form series Omega."""

    dim: int
    omega: Matrix
    lam: Matrix
    gamma: list[list[list[Poly]]]
    omega_series: list[tuple[int, Matrix]] = field(default_factory=list)

    def __post_init__(self):
        d = self.dim
        if d <= 0 or d % 2:
            raise GeometryError(f"dimension must be positive and even, got {d}")
        for name, m in (("omega", self.omega), ("lambda", self.lam)):
            if len(m) != d or any(len(row) != d for row in m):
                raise GeometryError(f"{name} must be a {d}x{d} matrix")
        if len(self.gamma) != d or any(len(a) != d or any(len(b) != d for b in a) for a in self.gamma):
            raise GeometryError(f"gamma must be a {d}x{d}x{d} array")
        for r, w in self.omega_series:
            if r < 1:
                raise GeometryError("Omega terms start at nu^1")
            if len(w) != d or any(len(row) != d for row in w):
                raise GeometryError("Omega components must be square matrices")

    @classmethod
    def darboux(cls, n: int, gamma=None, omega_series=None, pairing: str = "adjacent") -> ChartGeometry:
        """Constant omega with omega_{2a,2a+1} = 1 (adjacent) or omega_{a,a+n} = 1 (split)."""
        dim = 2 * n
        z = lambda: Poly.zero(dim)  # noqa: E731
        omega = [[z() for _ in range(dim)] for _ in range(dim)]
        for a in range(n):
            i, j = (2 * a, 2 * a + 1) if pairing == "adjacent" else (a, a + n)
            omega[i][j] = Poly.const(dim, 1)
            omega[j][i] = Poly.const(dim, -1)
        lam = [[-omega[i][j] for j in range(dim)] for i in range(dim)]
        if gamma is None:
            gamma = [[[z() for _ in range(dim)] for _ in range(dim)] for _ in range(dim)]
        return cls(dim, omega, lam, gamma, list(omega_series or []))

    @classmethod
    def from_symmetric_tensor(cls, n: int, sym: dict, omega_series=None) -> ChartGeometry:
        """Darboux chart with the symplectic connection omega_{kl} G^l_{ij} = S_{kij}.

        ``sym`` maps sorted index triples to polynomials; the tensor is
        completed by total symmetry.
        """
        base = cls.darboux(n, omega_series=omega_series)
        dim = base.dim
        S = {}
        for idx, val in sym.items():
            for perm in set(itertools.permutations(idx)):
                S[perm] = val
        gamma = [[[Poly.zero(dim) for _ in range(dim)] for _ in range(dim)] for _ in range(dim)]
        for l in range(dim):
            for i in range(dim):
                for j in range(dim):
                    s = Poly.zero(dim)
                    for k in range(dim):
                        if base.lam[l][k] and (k, i, j) in S:
                            s = s + base.lam[l][k] * S[(k, i, j)]
                    gamma[l][i][j] = s
        base.gamma = gamma
        return base

    def zero(self) -> Poly:
        return Poly.zero(self.dim)

    @cached_property
    def algebra(self) -> WeylAlgebra:
        return WeylAlgebra(self.lam)

    def omega_tensor(self) -> TensorField:
        return TensorField.from_matrix(self.omega, 0, 2, [("anti", (0, 1))])

    def lambda_tensor(self) -> TensorField:
        return TensorField.from_matrix(self.lam, 2, 0, [("anti", (0, 1))])

    def gamma_tensor(self) -> TensorField:
        d = self.dim
        comps = {(k, i, j): self.gamma[k][i][j] for k in range(d) for i in range(d) for j in range(d)}
        return TensorField(d, 1, 2, comps, [("sym", (1, 2))])

    def Omega_at(self, r: int) -> Matrix:
        z = [[self.zero() for _ in range(self.dim)] for _ in range(self.dim)]
        for rr, w in self.omega_series:
            if rr == r:
                z = [[z[i][j] + w[i][j] for j in range(self.dim)] for i in range(self.dim)]
        return z

    def Omega_orders(self) -> list[int]:
        return sorted({r for r, _ in self.omega_series})

    def poisson(self, f: Poly, g: Poly) -> Poly:
        """{f, g} = Lambda^{ij} d_i f d_j g."""
        out = self.zero()
        df, dg = d_function(f), d_function(g)
        for i in range(self.dim):
            if not df[i]:
                continue
            for j in range(self.dim):
                if self.lam[i][j] and dg[j]:
                    out = out + self.lam[i][j] * df[i] * dg[j]
        return out

    def nabla_omega(self):
        """Components (k, i, j) -> (nabla_k omega)_{ij}."""
        d = self.dim
        G = self.gamma
        W = self.omega
        out = {}
        for k in range(d):
            for i in range(d):
                for j in range(d):
                    v = W[i][j].d(k)
                    for l in range(d):
                        if G[l][k][i] and W[l][j]:
                            v = v - G[l][k][i] * W[l][j]
                        if G[l][k][j] and W[i][l]:
                            v = v - G[l][k][j] * W[i][l]
                    if v:
                        out[(k, i, j)] = v
        return out

    @cached_property
    def curvature(self) -> list:
        """R[l][i][j][k] = R^l_{ijk}."""
        d = self.dim
        G = self.gamma
        R = [[[[self.zero() for _ in range(d)] for _ in range(d)] for _ in range(d)] for _ in range(d)]
        for l, i, j, k in itertools.product(range(d), repeat=4):
            if i == j:
                continue
            v = G[l][j][k].d(i) - G[l][i][k].d(j)
            for r in range(d):
                if G[l][i][r] and G[r][j][k]:
                    v = v + G[l][i][r] * G[r][j][k]
                if G[l][j][r] and G[r][i][k]:
                    v = v - G[l][j][r] * G[r][i][k]
            R[l][i][j][k] = v
        return R

    def is_flat(self) -> bool:
        return all(not p for a in self.curvature for b in a for c in b for p in c)


def validate_geometry(g: ChartGeometry) -> ValidationReport:
    """Exact checks of every standing hypothesis on the chart data."""
    d = g.dim
    checks = []

    bad = None
    for i in range(d):
        for k in range(d):
            s = g.zero()
            for j in range(d):
                if g.lam[i][j] and g.omega[j][k]:
                    s = s + g.lam[i][j] * g.omega[j][k]
            if s != (1 if i == k else 0):
                bad = (i + 1, k + 1, s)
                break
        if bad:
            break
    checks.append(Check("lambda_inverts_omega", bad is None, "" if bad is None else f"(Lambda omega)^{bad[0]}_{bad[1]} = {bad[2]}"))

    anti = None
    for name, m in (("omega", g.omega), ("lambda", g.lam)):
        for i in range(d):
            for j in range(d):
                if m[i][j] != -m[j][i]:
                    anti = anti or f"{name}[{i + 1}][{j + 1}] != -{name}[{j + 1}][{i + 1}]"
    checks.append(Check("antisymmetry", anti is None, anti or ""))

    closed = d_two_form_violation(g.omega)
    checks.append(
        Check(
            "omega_closed",
            closed is None,
            "" if closed is None else f"d omega component {tuple(x + 1 for x in closed[0])} = {closed[1]}",
        )
    )

    torsion = None
    for k in range(d):
        for i in range(d):
            for j in range(i + 1, d):
                if g.gamma[k][i][j] != g.gamma[k][j][i]:
                    torsion = torsion or f"Gamma^{k + 1}_{{{i + 1}{j + 1}}} != Gamma^{k + 1}_{{{j + 1}{i + 1}}}"
    checks.append(Check("gamma_symmetric", torsion is None, torsion or ""))

    nw = g.nabla_omega()
    first = min(nw) if nw else None
    checks.append(
        Check(
            "nabla_omega_zero",
            not nw,
            "" if not nw else f"(nabla_{first[0] + 1} omega)_{{{first[1] + 1}{first[2] + 1}}} = {nw[first]}",
        )
    )

    omega_bad = None
    for r, w in g.omega_series:
        if any(w[i][j] != -w[j][i] for i in range(d) for j in range(d)):
            omega_bad = omega_bad or f"Omega_{r} not antisymmetric"
            continue
        v = d_two_form_violation(w)
        if v is not None:
            omega_bad = omega_bad or f"d Omega_{r} component {tuple(x + 1 for x in v[0])} = {v[1]}"
    checks.append(Check("Omega_closed", omega_bad is None, omega_bad or ""))
    return ValidationReport(checks)


# --------------------------------------------------------------------------
# Weyl-valued forms attached to the connection


def gamma_bar(g: ChartGeometry, trunc: Truncation) -> WeylSection:
    """1/2 omega_{ki} Gamma^k_{rj} y^i y^j dx^r."""
    d = g.dim
    terms: dict = {}
    for r in range(d):
        for i in range(d):
            for j in range(d):
                c = g.zero()
                for k in range(d):
                    if g.omega[k][i] and g.gamma[k][r][j]:
                        c = c + g.omega[k][i] * g.gamma[k][r][j]
                if c:
                    alpha = [0] * d
                    alpha[i] += 1
                    alpha[j] += 1
                    _acc(terms, (0, tuple(alpha), (r,)), c.scale(mpq(1, 2)))
    return WeylSection(d, trunc, _prune(terms))


def curvature_rbar(g: ChartGeometry, trunc: Truncation) -> WeylSection:
    """1/4 omega_{rl} R^l_{ijk} y^r y^k dx^i ^ dx^j."""
    d = g.dim
    R = g.curvature
    terms: dict = {}
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            sign = 1 if i < j else -1
            J = (min(i, j), max(i, j))
            for r in range(d):
                for k in range(d):
                    c = g.zero()
                    for l in range(d):
                        if g.omega[r][l] and R[l][i][j][k]:
                            c = c + g.omega[r][l] * R[l][i][j][k]
                    if c:
                        alpha = [0] * d
                        alpha[r] += 1
                        alpha[k] += 1
                        _acc(terms, (0, tuple(alpha), J), c.scale(mpq(sign, 4)))
    return WeylSection(d, trunc, _prune(terms))


class Connection:
    """Caches Gamma-bar per truncation for the covariant derivative."""

    def __init__(self, g: ChartGeometry, trunc: Truncation):
        self.g = g
        self.trunc = trunc
        self.gbar = gamma_bar(g, trunc)
        self.alg = g.algebra

    def partial(self, a: WeylSection) -> WeylSection:
        """da - (1/nu)[Gamma-bar, a]."""
        if a.trunc != self.trunc:
            raise WeylError("truncation mismatch")
        out = exterior_d(a)
        if self.gbar:
            out = out - self.alg.bracket_over_nu(self.gbar, a)
        return out


def covariant_exterior_derivative(g: ChartGeometry, a: WeylSection) -> WeylSection:
    return Connection(g, a.trunc).partial(a)


def lie_derivative_connection(X: VectorField, g: ChartGeometry) -> TensorField:
    """(L_X Gamma)^k_{ij} as a (1, 2) tensor symmetric in the lower slots."""
    if X.dim != g.dim:
        raise GeometryError("dimension mismatch")
    d = g.dim
    G = g.gamma
    dX = [[X[k].d(i) for i in range(d)] for k in range(d)]
    out = {}
    for k in range(d):
        for i in range(d):
            for j in range(d):
                v = X.apply(G[k][i][j]) + dX[k][i].d(j)
                for r in range(d):
                    if dX[k][r] and G[r][i][j]:
                        v = v - dX[k][r] * G[r][i][j]
                    if dX[r][i] and G[k][r][j]:
                        v = v + dX[r][i] * G[k][r][j]
                    if dX[r][j] and G[k][i][r]:
                        v = v + dX[r][j] * G[k][i][r]
                if v:
                    out[(k, i, j)] = v
    return TensorField(d, 1, 2, out, [("sym", (1, 2))])


def lie_derivative_weyl(X: VectorField, a: WeylSection) -> WeylSection:
    """Tensorial Lie derivative: y^i and dx^i both transform covariantly."""
    if X.dim != a.dim:
        raise GeometryError("dimension mismatch")
    d = a.dim
    dX = [[X[r].d(i) for i in range(d)] for r in range(d)]  # dX[r][i] = d_i X^r
    out: dict = {}
    for (k, alpha, J), c in a.terms.items():
        v = X.apply(c)
        if v:
            _acc(out, (k, alpha, J), v)
        for r in range(d):
            if not alpha[r]:
                continue
            for i in range(d):
                f = dX[r][i]
                if not f:
                    continue
                a2 = list(alpha)
                a2[r] -= 1
                a2[i] += 1
                _acc(out, (k, tuple(a2), J), (c * f).scale(alpha[r]))
        for pos, j in enumerate(J):
            rest = J[:pos] + J[pos + 1:]
            for s in range(d):
                f = dX[j][s]
                if not f:
                    continue
                # replace dx^j at position pos by dx^s
                sign, J2 = _insert_front(s, rest)
                if not sign:
                    continue
                sign *= -1 if pos & 1 else 1
                _acc(out, (k, alpha, J2), (c * f).scale(sign))
    return WeylSection(d, a.trunc, _prune(out))


def one_form_section(theta: Sequence[Poly], trunc: Truncation, nu: int = 0) -> WeylSection:
    d = len(theta)
    return WeylSection(d, trunc, {(nu, (0,) * d, (j,)): theta[j] for j in range(d) if theta[j]})


def two_form_section(w: Sequence[Sequence[Poly]], trunc: Truncation, nu: int = 0) -> WeylSection:
    """The form 1/2 w_{ij} dx^i ^ dx^j."""
    d = len(w)
    return WeylSection(d, trunc, {(nu, (0,) * d, (i, j)): w[i][j] for i in range(d) for j in range(i + 1, d) if w[i][j]})
