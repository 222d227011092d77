import itertools
import random

import pytest
from gmpy2 import mpq

from starprod.battery import curved_battery, curved_four, curved_scaling
from starprod.geom import (
    ChartGeometry,
    Connection,
    TensorField,
    VectorField,
    covariant_exterior_derivative,
    curvature_rbar,
    lie_derivative_connection,
    lie_derivative_tensor,
    lie_derivative_weyl,
    validate_geometry,
)
from starprod.polycore import Poly, parse_poly, random_poly
from starprod.weylalg import Truncation, WeylSection, delta, random_section

T = Truncation(3, 8)


def P(text, dim=2):
    return parse_poly(text, dim)


def vf(*comps, dim=2):
    return VectorField([parse_poly(c, dim) for c in comps])


def test_flat_darboux_validates():
    rep = validate_geometry(ChartGeometry.darboux(1))
    assert rep.passed
    assert [c.name for c in rep.checks] == [
        "lambda_inverts_omega",
        "antisymmetry",
        "omega_closed",
        "gamma_symmetric",
        "nabla_omega_zero",
        "Omega_closed",
    ]


def test_symmetric_tensor_connection_is_symplectic():
    g = curved_scaling().geometry
    assert g.gamma[0][0][0] == P("x2")
    assert validate_geometry(g).passed


def test_non_symplectic_connection_rejected():
    g = ChartGeometry.darboux(1)
    g.gamma[0][0][0] = P("x2")  # Gamma^1_11 alone breaks nabla omega = 0
    rep = validate_geometry(g)
    bad = [c.name for c in rep.failures()]
    assert bad == ["nabla_omega_zero"]


def test_non_closed_omega_rejected():
    g = ChartGeometry.darboux(2)
    g.omega[0][1] = P("x3", 4)
    g.omega[1][0] = -g.omega[0][1]
    rep = validate_geometry(g)
    names = {c.name: c for c in rep.checks}
    assert not names["omega_closed"].passed
    assert "d omega component" in names["omega_closed"].detail


def test_torsion_rejected():
    g = ChartGeometry.darboux(1)
    g.gamma[0][0][1] = P("1")
    assert "gamma_symmetric" in [c.name for c in validate_geometry(g).failures()]


def test_rbar_zero_for_flat():
    assert not curvature_rbar(ChartGeometry.darboux(1), T)


def _sympy_curvature(g):
    sp = pytest.importorskip("sympy")
    d = g.dim
    xs = sp.symbols(f"x1:{d + 1}")
    G = [[[sp.sympify(str(g.gamma[k][i][j]).replace("^", "**")) for j in range(d)] for i in range(d)] for k in range(d)]
    R = {}
    for l, i, j, k in itertools.product(range(d), repeat=4):
        v = sp.diff(G[l][j][k], xs[i]) - sp.diff(G[l][i][k], xs[j])
        v += sum(G[l][i][r] * G[r][j][k] - G[l][j][r] * G[r][i][k] for r in range(d))
        R[(l, i, j, k)] = sp.expand(v)
    return sp, R


@pytest.mark.parametrize("entry", curved_battery(), ids=lambda e: e.name)
def test_curvature_against_sympy(entry):
    g = entry.geometry
    sp, R = _sympy_curvature(g)
    for (l, i, j, k), v in R.items():
        ours = sp.sympify(str(g.curvature[l][i][j][k]).replace("^", "**"))
        assert sp.expand(ours - v) == 0


@pytest.mark.parametrize("entry", curved_battery(), ids=lambda e: e.name)
def test_curvature_antisymmetric_in_first_pair(entry):
    R = entry.geometry.curvature
    d = entry.geometry.dim
    for l, i, j, k in itertools.product(range(d), repeat=4):
        assert R[l][i][j][k] == -R[l][j][i][k]


def test_flat_partial_is_d():
    g = ChartGeometry.darboux(1)
    a = WeylSection.scalar(P("x1"), T)
    assert covariant_exterior_derivative(g, a) == WeylSection.dx(2, 0, T)


@pytest.mark.parametrize("entry", curved_battery(), ids=lambda e: e.name)
def test_partial_of_symplectic_quadratic_vanishes(entry):
    g = entry.geometry
    d = g.dim
    terms = {}
    for i in range(d):
        for j in range(d):
            if g.omega[i][j]:
                alpha = [0] * d
                alpha[i] += 1
                alpha[j] += 1
                key = (0, tuple(alpha), ())
                val = g.omega[i][j].scale(mpq(1, 2))
                terms[key] = terms[key] + val if key in terms else val
    q = WeylSection(d, T, {k: v for k, v in terms.items() if v})
    assert not Connection(g, T).partial(q)


@pytest.mark.parametrize("entry", curved_battery(), ids=lambda e: e.name)
def test_partial_squared_is_curvature_bracket(entry):
    g = entry.geometry
    conn = Connection(g, T)
    rbar = curvature_rbar(g, T)
    rng = random.Random(entry.name)
    for q in (0, 1):
        for _ in range(3):
            a = random_section(rng, g.dim, T, form_degree=q, n_terms=3, max_ydeg=3, max_xdeg=2, max_nu=1)
            assert conn.partial(conn.partial(a)) == g.algebra.bracket_over_nu(rbar, a)


def test_lie_derivative_tensor_examples():
    g = ChartGeometry.darboux(1)
    w = g.omega_tensor()
    assert lie_derivative_tensor(vf("1", "0"), w).is_zero()
    assert lie_derivative_tensor(vf("-x2", "x1"), w).is_zero()
    scaled = lie_derivative_tensor(vf("x1", "0"), w)
    assert scaled == w
    f = TensorField(2, 0, 0, {(): P("x1^2*x2")})
    X = vf("x2", "x1^2")
    assert lie_derivative_tensor(X, f)[()] == X.apply(P("x1^2*x2"))


def test_lie_derivative_connection_examples():
    g = ChartGeometry.darboux(1)
    assert lie_derivative_connection(vf("x1 + 2*x2", "3*x1"), g).is_zero()
    lg = lie_derivative_connection(vf("x1^2", "0"), g)
    assert lg.components == {(0, 0, 0): P("2")}


def _nabla_nabla_X(g, X):
    d = g.dim
    G = g.gamma
    cov = [[X[l].d(k) + sum((G[l][k][m] * X[m] for m in range(d)), Poly.zero(d)) for l in range(d)] for k in range(d)]
    out = {}
    for j, k, l in itertools.product(range(d), repeat=3):
        v = cov[k][l].d(j)
        for m in range(d):
            v = v + G[l][j][m] * cov[k][m] - G[m][j][k] * cov[m][l]
        out[(l, j, k)] = v
    return out


@pytest.mark.parametrize("entry", curved_battery(), ids=lambda e: e.name)
def test_lie_derivative_connection_affine_identity(entry):
    # (L_X Gamma)^l_{jk} = (nabla_j nabla_k X)^l + X^i R^l_{ijk} for every X
    g = entry.geometry
    d = g.dim
    rng = random.Random(7)
    for _ in range(3):
        X = VectorField([random_poly(rng, d, 2, 2) for _ in range(d)])
        lg = lie_derivative_connection(X, g)
        nn = _nabla_nabla_X(g, X)
        R = g.curvature
        for l, j, k in itertools.product(range(d), repeat=3):
            rhs = nn[(l, j, k)] + sum((X[i] * R[l][i][j][k] for i in range(d)), Poly.zero(d))
            assert lg[(l, j, k)] == rhs


def test_lie_derivative_connection_vanishes_on_symmetries():
    for entry in curved_battery():
        for _, X in entry.symmetries:
            assert lie_derivative_connection(X, entry.geometry).is_zero()


def test_lie_derivative_weyl_examples():
    a = WeylSection.term(2, T, 0, (1, 1), (0,), 3)
    assert not lie_derivative_weyl(vf("1", "0"), a)
    rng = random.Random(2)
    for _ in range(5):
        X = VectorField([random_poly(rng, 2, 2, 2) for _ in range(2)])
        comps = [random_poly(rng, 2, 2, 2) for _ in range(2)]
        a = WeylSection(2, T, {(0, (1, 0), ()): comps[0], (0, (0, 1), ()): comps[1]})
        res = lie_derivative_weyl(X, a)
        for i in range(2):
            expected = X.apply(comps[i]) + sum((comps[r] * X[r].d(i) for r in range(2)), Poly.zero(2))
            alpha = (1, 0) if i == 0 else (0, 1)
            assert res.terms.get((0, alpha, ()), Poly.zero(2)) == expected


def test_lie_derivative_weyl_commutes_with_delta():
    rng = random.Random(5)
    for X in (vf("x1 + x2", "2*x1 - x2"), VectorField([random_poly(rng, 2, 3, 3) for _ in range(2)])):
        for q in (0, 1):
            for _ in range(3):
                a = random_section(rng, 2, T, form_degree=q, n_terms=3, max_ydeg=3, max_xdeg=2)
                assert lie_derivative_weyl(X, delta(a)) == delta(lie_derivative_weyl(X, a))


def test_dim4_geometry_valid():
    assert validate_geometry(curved_four().geometry).passed
