"""Symmetries, Hamiltonians and quantum moment maps for Fedosov products.

A vector field X is an inner derivation of the product when
X(u) = (1/nu)(lambda * u - u * lambda) for a formal function lambda.
Signs are never fixed by hand here: every Hamiltonian is checked against
d(lambda) = i(X)(omega - Omega) and against the commutator identity.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from gmpy2 import mpq

from .cochain import DiffOperator, EquivalenceSeries, FormalFunction, StarProduct
from .fedosov import FedosovData, star_multiply
from .geom import (
    ChartGeometry,
    VectorField,
    contract_vector_two_form,
    d_function,
    d_one_form,
    lie_derivative_connection,
    lie_derivative_tensor,
    lie_derivative_weyl,
    one_form_section,
    primitive_of_one_form,
    TensorField,
)
from .polycore import Poly, monomials_up_to, random_poly
from .weylalg import WeylSection, interior_product, random_section, sum_sections


class MomentError(RuntimeError):
    pass


def _multiplier(target) -> tuple[Callable, int, int]:
    """(multiply, nu_order, dim) for a StarProduct or FedosovData."""
    if isinstance(target, StarProduct):
        return target.multiply, target.nu_order, target.dim
    if isinstance(target, FedosovData):
        return (lambda u, v: star_multiply(target, u, v)), target.trunc.nu_order, target.dim
    raise TypeError(f"expected StarProduct or FedosovData, got {type(target).__name__}")


def _as_series(u, n: int) -> FormalFunction:
    return u if isinstance(u, FormalFunction) else FormalFunction.from_poly(u, n)


def star_commutator(u, v, target) -> FormalFunction:
    """[u, v] = (1/nu)(u * v - v * u), exact through nu^{N-1}."""
    mult, n, _ = _multiplier(target)
    u, v = _as_series(u, n), _as_series(v, n)
    diff = mult(u, v) - mult(v, u)
    if n == 0:
        if not diff.is_zero():
            raise MomentError("commutative truncation expected at order 0")
        return diff
    return diff.shift_down()


# --------------------------------------------------------------------------
# derivation criterion


@dataclass
class DerivationReport:
    lie_omega_zero: bool
    lie_Omega_zero: bool
    lie_nabla_zero: bool
    failures: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.lie_omega_zero and self.lie_Omega_zero and self.lie_nabla_zero


def _first(t: TensorField):
    hit = t.first_nonzero()
    if hit is None:
        return None
    idx, val = hit
    return (tuple(i + 1 for i in idx), str(val))


def check_derivation(X: VectorField, g: ChartGeometry) -> DerivationReport:
    """L_X omega = 0, L_X Omega_r = 0 for every r, and L_X Gamma = 0."""
    if X.dim != g.dim:
        raise MomentError("dimension mismatch")
    failures = {}
    lw = lie_derivative_tensor(X, g.omega_tensor())
    if not lw.is_zero():
        failures["lie_omega"] = _first(lw)
    ok_Omega = True
    for r, w in sorted(g.omega_series, key=lambda t: t[0]):
        lo = lie_derivative_tensor(X, TensorField.from_matrix(w, 0, 2))
        if not lo.is_zero():
            ok_Omega = False
            failures.setdefault("lie_Omega", (r,) + _first(lo))
    lg = lie_derivative_connection(X, g)
    if not lg.is_zero():
        failures["lie_nabla"] = _first(lg)
    return DerivationReport(lw.is_zero(), ok_Omega, lg.is_zero(), failures)


# --------------------------------------------------------------------------
# T(X) and the Cartan formula


def _iX_omega_section(X, g: ChartGeometry, trunc) -> WeylSection:
    """-i(X)omega + i(X)Omega as a Weyl 1-form with no y."""
    parts = [one_form_section([-c for c in contract_vector_two_form(X, g.omega)], trunc)]
    for r, w in g.omega_series:
        if r <= trunc.nu_order:
            parts.append(one_form_section(contract_vector_two_form(X, w), trunc, nu=r))
    return sum_sections(parts, g.dim, trunc)


def t_of_x(X: VectorField, fd: FedosovData, check: bool = True, quadratic: bool = True) -> WeylSection:
    """T(X) = i(X) r + omega_{ij} X^i y^j + 1/2 (nabla_i theta)_j y^i y^j, theta = i(X) omega.

    With ``check`` the identity D T(X) = -i(X) omega + i(X) Omega is verified on
    the degrees the truncation determines.  ``quadratic=False`` drops the
    quadratic term and exists for negative controls.
    """
    g, trunc = fd.geometry, fd.trunc
    d = g.dim
    if X.dim != d:
        raise MomentError("dimension mismatch")
    theta = contract_vector_two_form(X, g.omega)
    terms: dict = {}
    for j in range(d):
        if theta[j]:
            alpha = tuple(1 if k == j else 0 for k in range(d))
            terms[(0, alpha, ())] = theta[j]
    if quadratic:
        for i in range(d):
            for j in range(d):
                c = theta[j].d(i)
                for k in range(d):
                    if g.gamma[k][i][j] and theta[k]:
                        c = c - g.gamma[k][i][j] * theta[k]
                if not c:
                    continue
                alpha = [0] * d
                alpha[i] += 1
                alpha[j] += 1
                key = (0, tuple(alpha), ())
                val = c.scale(mpq(1, 2))
                terms[key] = terms[key] + val if key in terms else val
    T = WeylSection(d, trunc, {k: v for k, v in terms.items() if v})
    if fd.r:
        T = T + interior_product(list(X), fd.r)
    if check:
        residual = (fd.D(T) - _iX_omega_section(X, g, trunc)).up_to_degree(trunc.weyl_degree_cap - 1)
        if residual:
            raise MomentError(f"D T(X) identity violated: {residual.to_string()[:200]}")
    return T


@dataclass
class CartanReport:
    reliable_degree: int
    residuals: list
    passed: bool


def cartan_residual(
    X: VectorField, fd: FedosovData, probes: Sequence[WeylSection], T: WeylSection | None = None
) -> CartanReport:
    """L_X a - D i(X) a - i(X) D a - (1/nu)[T(X), a] on each probe."""
    if T is None:
        T = t_of_x(X, fd)
    alg = fd.algebra
    Xl = list(X)
    cap = fd.trunc.weyl_degree_cap
    out = []
    for a in probes:
        res = lie_derivative_weyl(X, a) - interior_product(Xl, fd.D(a)) - alg.bracket_over_nu(T, a)
        ia = interior_product(Xl, a)
        if ia:
            res = res - fd.D(ia)
        out.append(res.up_to_degree(cap - 1))
    return CartanReport(cap - 1, out, all(not r for r in out))


def probe_battery(fd: FedosovData, n: int, seed: int = 0) -> list[WeylSection]:
    """Random 0-form and 1-form probes of low degree."""
    rng = random.Random(seed)
    probes = []
    for i in range(n):
        q = i % 2
        probes.append(random_section(rng, fd.dim, fd.trunc, form_degree=q, n_terms=3, max_ydeg=2, max_xdeg=2, max_nu=1))
    return probes


# --------------------------------------------------------------------------
# Hamiltonians


@dataclass
class MomentResult:
    closed: bool
    beta: list  # beta[r] = 1-form components at nu^r
    lam: FormalFunction | None
    residual_max: object = None


def moment_form(X: VectorField, g: ChartGeometry, nu_order: int) -> list[list[Poly]]:
    """beta = i(X)(omega - Omega), one list of components per nu-order."""
    d = g.dim
    beta = [contract_vector_two_form(X, g.omega)]
    for r in range(1, nu_order + 1):
        w = g.Omega_at(r)
        beta.append([-c for c in contract_vector_two_form(X, w)])
    return beta


def hamiltonian_lambda(X: VectorField, g: ChartGeometry, nu_order: int) -> MomentResult:
    """lambda with d lambda = i(X)(omega - Omega), by the radial homotopy."""
    beta = moment_form(X, g, nu_order)
    for b in beta:
        dm = d_one_form(b)
        if any(c for row in dm for c in row):
            return MomentResult(False, beta, None)
    lam = FormalFunction([primitive_of_one_form(b) for b in beta])
    for k, b in enumerate(beta):
        if d_function(lam[k]) != list(b):
            raise MomentError(f"d lambda != beta at nu^{k}")
    return MomentResult(True, beta, lam)


@dataclass
class InnerReport:
    residuals: list
    passed: bool
    first_failure: tuple | None = None


def verify_inner(X: VectorField, lam: FormalFunction, target, tests: Sequence[Poly]) -> InnerReport:
    """X(u) - (1/nu)(lambda * u - u * lambda) through every retained order."""
    _, n, _ = _multiplier(target)
    res = []
    first = None
    for i, u in enumerate(tests):
        lhs = FormalFunction.from_poly(X.apply(u), max(n - 1, 0))
        r = lhs - star_commutator(lam, u, target)
        res.append(r)
        if first is None and not r.is_zero():
            first = (i, r.lowest_nonzero())
    return InnerReport(res, first is None, first)


def _nullspace_solve(rows: list[list[mpq]], rhs: list[mpq]) -> list[mpq] | None:
    """A particular solution of rows * z = rhs (free variables zero), or None."""
    m = len(rows)
    n = len(rows[0]) if rows else 0
    A = [list(r) + [b] for r, b in zip(rows, rhs)]
    pivots = []
    row = 0
    for col in range(n):
        piv = next((i for i in range(row, m) if A[i][col]), None)
        if piv is None:
            continue
        A[row], A[piv] = A[piv], A[row]
        inv = 1 / A[row][col]
        A[row] = [x * inv for x in A[row]]
        for i in range(m):
            if i != row and A[i][col]:
                f = A[i][col]
                A[i] = [x - f * y for x, y in zip(A[i], A[row])]
        pivots.append(col)
        row += 1
        if row == m:
            break
    if any(A[i][n] for i in range(row, m)):
        return None
    z = [mpq(0)] * n
    for i, col in enumerate(pivots):
        z[col] = A[i][n]
    return z


def find_hamiltonian_by_ansatz(X: VectorField, target, degree: int, tests: Sequence[Poly]) -> FormalFunction | None:
    """Search for lambda_0..lambda_{N-1} of bounded degree solving the inner-derivation equations.

    The commutator is linear in lambda, so the equations on the test
    functions form an exact linear system; None when it is inconsistent.
    lambda_N never enters the retained orders and is returned as zero.
    """
    mult, n, dim = _multiplier(target)
    if n == 0:
        raise MomentError("need nu-order at least 1")
    monos = monomials_up_to(dim, degree)
    unknowns = [(k, m) for k in range(n) for m in monos]
    columns = []
    for k, m in unknowns:
        coeffs = [Poly.zero(dim)] * (n + 1)
        coeffs[k] = Poly.monomial(m)
        basis = FormalFunction(coeffs)
        columns.append([star_commutator(basis, u, target) for u in tests])
    rows, rhs = [], []
    keys = set()
    for col in columns:
        for ti, ser in enumerate(col):
            for order, c in enumerate(ser.coeffs):
                for e in c.terms:
                    keys.add((ti, order, e))
    targets = {}
    for ti, u in enumerate(tests):
        for e, c in X.apply(u).terms.items():
            targets[(ti, 0, e)] = c
            keys.add((ti, 0, e))
    for key in sorted(keys):
        ti, order, e = key
        rows.append([columns[j][ti][order].terms.get(e, mpq(0)) for j in range(len(unknowns))])
        rhs.append(targets.get(key, mpq(0)))
    z = _nullspace_solve(rows, rhs)
    if z is None:
        return None
    coeffs = [Poly.zero(dim) for _ in range(n + 1)]
    for (k, m), c in zip(unknowns, z):
        if c:
            coeffs[k] = coeffs[k] + Poly.monomial(m, c)
    return FormalFunction(coeffs)


def necessity_check(X: VectorField, lam: FormalFunction, g: ChartGeometry, orders: int) -> tuple[bool, int | None]:
    """d lambda_k = beta_k for k < orders; returns (passed, first failing order)."""
    beta = moment_form(X, g, lam.nu_order)
    for k in range(orders):
        if d_function(lam[k]) != list(beta[k]):
            return False, k
    return True, None


def bracket_compatibility(lx: FormalFunction, ly: FormalFunction, lxy: FormalFunction, target) -> list[bool]:
    """Per order, whether [lambda_X, lambda_Y] - lambda_{[X,Y]} is constant."""
    diff = star_commutator(lx, ly, target) - lxy.truncated(lx.nu_order - 1)
    return [all(not p for p in d_function(c)) for c in diff.coeffs]


# --------------------------------------------------------------------------
# transport and invariance


def is_equivariant(E: EquivalenceSeries, X: VectorField) -> bool:
    """[X, E_r] = 0 as differential operators for every r."""
    Xop = DiffOperator.from_vector_field(list(X))
    return all(Xop.commutator(Er).is_zero() for Er in E.generators)


@dataclass
class TransportResult:
    mu: FormalFunction
    report: InnerReport

    @property
    def passed(self) -> bool:
        return self.report.passed


def transport_moment(
    E: EquivalenceSeries, lam: FormalFunction, target: StarProduct, X: VectorField, tests: Sequence[Poly]
) -> TransportResult:
    """mu = (Exp E) lambda, verified against the transformed product."""
    mu = E.exp_apply(lam)
    return TransportResult(mu, verify_inner(X, mu, target, tests))


@dataclass
class InvarianceReport:
    inverse_ok: bool
    per_order: list  # per_order[r] = True when C_r commutes with the pullback on the battery
    failures: list

    @property
    def passed(self) -> bool:
        return self.inverse_ok and all(self.per_order)


def _pullback(u: Poly, tau: Sequence[Poly]) -> Poly:
    return u.compose(tau)


def check_invariance(
    s: StarProduct, tau: Sequence[Poly], tau_inv: Sequence[Poly], n_pairs: int = 6, seed: int = 0, max_degree: int = 3
) -> InvarianceReport:
    """C_r(u o tau, v o tau) = C_r(u, v) o tau on random pairs, order by order."""
    d = s.dim
    ident = [Poly.var(d, i + 1) for i in range(d)]
    ok = [t.compose(tau_inv) for t in tau] == ident and [t.compose(tau) for t in tau_inv] == ident
    if not ok:
        raise MomentError("supplied maps are not mutual inverses")
    rng = random.Random(seed)
    per_order = [True] * (s.nu_order + 1)
    failures = []
    for _ in range(n_pairs):
        u = random_poly(rng, d, max_degree, 3)
        v = random_poly(rng, d, max_degree, 3)
        uu, vv = _pullback(u, tau), _pullback(v, tau)
        for r, C in enumerate(s.cochains):
            lhs = C.apply(uu, vv)
            rhs = _pullback(C.apply(u, v), tau)
            if lhs != rhs:
                if per_order[r]:
                    failures.append((r, str(u), str(v)))
                per_order[r] = False
    return InvarianceReport(ok, per_order, failures)
