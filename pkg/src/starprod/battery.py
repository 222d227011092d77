"""Standard test geometries with known affine symplectic symmetries.

Every connection is of the form Gamma^l_{ij} = Lambda^{lk} S_{kij} with S
totally symmetric, which is the general symplectic connection on a
Darboux chart.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .geom import ChartGeometry, VectorField
from .polycore import Poly, parse_poly


@dataclass
class BatteryEntry:
    name: str
    geometry: ChartGeometry
    symmetries: list = field(default_factory=list)  # (label, VectorField)


def _vf(dim: int, *comps: str) -> VectorField:
    return VectorField([parse_poly(c, dim) for c in comps])


def _const_two_form(dim: int, c: str) -> list[list[Poly]]:
    w = [[Poly.zero(dim) for _ in range(dim)] for _ in range(dim)]
    w[0][1] = parse_poly(c, dim)
    w[1][0] = -w[0][1]
    return w


def flat_plane(omega_c: str | None = None) -> BatteryEntry:
    series = [(1, _const_two_form(2, omega_c))] if omega_c else []
    g = ChartGeometry.darboux(1, omega_series=series)
    syms = [("translation-1", _vf(2, "1", "0")), ("translation-2", _vf(2, "0", "1")), ("rotation", _vf(2, "-x2", "x1"))]
    if not omega_c:
        syms.append(("hyperbolic", _vf(2, "x1", "-x2")))
    return BatteryEntry("flat-plane" + ("-Omega" if omega_c else ""), g, syms)


def curved_scaling() -> BatteryEntry:
    """S_112 = -x2, i.e. Gamma^1_11 = x2: invariant under d1 and the hyperbolic flow."""
    S = {(0, 0, 1): parse_poly("-x2", 2)}
    g = ChartGeometry.from_symmetric_tensor(1, S)
    return BatteryEntry("curved-scaling", g, [("translation-1", _vf(2, "1", "0")), ("hyperbolic", _vf(2, "x1", "-x2"))])


def curved_with_Omega() -> BatteryEntry:
    """S_111 = x2, S_222 = x2^2 and Omega = nu/3 dx1^dx2: invariant under d1."""
    S = {(0, 0, 0): parse_poly("x2", 2), (1, 1, 1): parse_poly("x2^2", 2)}
    g = ChartGeometry.from_symmetric_tensor(1, S, omega_series=[(1, _const_two_form(2, "1/3"))])
    return BatteryEntry("curved-Omega", g, [("translation-1", _vf(2, "1", "0"))])


def curved_generic() -> BatteryEntry:
    """Mixed S with x1 and x2 dependence and a non-constant Omega; no symmetries."""
    S = {
        (0, 0, 1): parse_poly("x1 - x2", 2),
        (0, 0, 0): parse_poly("x1*x2", 2),
        (1, 1, 1): parse_poly("1/2*x1^2 + 1", 2),
    }
    g = ChartGeometry.from_symmetric_tensor(1, S, omega_series=[(1, _const_two_form(2, "x1")), (2, _const_two_form(2, "x2^2"))])
    return BatteryEntry("curved-generic", g, [])


def curved_four() -> BatteryEntry:
    """Dimension four, omega_12 = omega_34 = 1, S_111 = x3, S_123 = x4: invariant under d1 and d2."""
    S = {(0, 0, 0): parse_poly("x3", 4), (0, 1, 2): parse_poly("x4", 4)}
    g = ChartGeometry.from_symmetric_tensor(2, S)
    return BatteryEntry("curved-four", g, [("translation-1", _vf(4, "1", "0", "0", "0")), ("translation-2", _vf(4, "0", "1", "0", "0"))])


def curved_battery(include_four: bool = True) -> list[BatteryEntry]:
    out = [curved_scaling(), curved_with_Omega(), curved_generic()]
    if include_four:
        out.append(curved_four())
    return out


def full_battery(include_four: bool = True) -> list[BatteryEntry]:
    return [flat_plane(), flat_plane("1/2")] + curved_battery(include_four)
