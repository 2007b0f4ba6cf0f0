"""Curve families, differentials, and cube-root analytic continuation.

The genus-3 family is y^3 = x(x-s)(x-b1)(x-b2) =: f(x), with branch
points B0 = (0,0), B1 = (b1,0), B2 = (b2,0), B3 = (s,0) and one more at
infinity.  Setting s = 0 and normalizing gives the genus-2 space curve
cut out by y^2 = x z, z y = x k(x), z^2 = k(x) y with k = (x-b1)(x-b2).

Sheets of the 3:1 cover x: X -> P^1 are continued along paths by the
nearest-root rule with mandatory refinement near branch points.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ZETA3",
    "TrigonalFamilyParams",
    "CurvePoint",
    "Contour",
    "SheetAmbiguity",
    "AtBranchPoint",
    "OutOfChart",
    "y_fibre",
    "nearest_root",
    "track_sheet",
    "diff_first_kind_g3",
    "diff_second_kind_g3",
    "diff_first_kind_g2",
    "diff_second_kind_g2",
    "infinity_parametrization",
    "zeta_action_first_kind",
    "zeta_action_second_kind",
]

ZETA3 = np.exp(2j * np.pi / 3)

# x-coefficient of the weight -5 second-kind differential.  The family
# paper prints 2*lambda3; residue duality at infinity (and the Legendre
# suite) force 3*lambda3.  See tests/test_periods.py for the numerical
# adjudication.
SECOND_KIND_X_COEFF = 3.0


class SheetAmbiguity(RuntimeError):
    """Refinement could not separate the cube roots along an edge."""


class AtBranchPoint(ZeroDivisionError):
    """Differential evaluated where its denominator vanishes."""


class OutOfChart(ValueError):
    """Local parameter too large for unambiguous root selection."""


@dataclass(frozen=True)
class TrigonalFamilyParams:
    """Moduli (b1, b2, s) of the fiber X_s; s = 0 marks the normalization."""

    b1: complex
    b2: complex
    s: complex = 0.0

    def __post_init__(self):
        pts = [0.0, self.b1, self.b2] + ([self.s] if self.s != 0 else [])
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if abs(pts[i] - pts[j]) < 1e-12 * max(1.0, abs(pts[i]), abs(pts[j])):
                    raise ValueError("coincident branch points")

    @property
    def genus(self):
        return 3 if self.s != 0 else 2

    @property
    def lambda3(self):
        return -(self.s + self.b1 + self.b2)

    @property
    def lambda2(self):
        return self.s * self.b1 + self.s * self.b2 + self.b1 * self.b2

    @property
    def lambda1(self):
        return -self.s * self.b1 * self.b2

    @property
    def branch_points(self):
        """Finite branch points in column order B0..B3 (g=3) or B0..B2 (g=2)."""
        if self.genus == 3:
            return (0.0 + 0.0j, complex(self.b1), complex(self.b2), complex(self.s))
        return (0.0 + 0.0j, complex(self.b1), complex(self.b2))

    def f(self, x):
        x = np.asarray(x, dtype=complex)
        return x * (x - self.s) * (x - self.b1) * (x - self.b2)

    def k(self, x):
        x = np.asarray(x, dtype=complex)
        return (x - self.b1) * (x - self.b2)

    def fprime(self, x):
        x = np.asarray(x, dtype=complex)
        l3, l2, l1 = self.lambda3, self.lambda2, self.lambda1
        return 4 * x ** 3 + 3 * l3 * x ** 2 + 2 * l2 * x + l1

    def curve_rhs(self, x):
        """y^3 as a function of x for the current genus."""
        if self.genus == 3:
            return self.f(x)
        x = np.asarray(x, dtype=complex)
        return x ** 2 * self.k(x)


@dataclass(frozen=True)
class CurvePoint:
    x: complex
    y: complex
    z: complex | None = None  # genus-2 third coordinate

    def residual(self, params):
        """Max relative defect of the defining equations."""
        if self.z is None:
            fx = complex(params.f(self.x))
            return abs(self.y ** 3 - fx) / (1.0 + abs(fx))
        kx = complex(params.k(self.x))
        eqs = [self.y ** 2 - self.x * self.z,
               self.z * self.y - self.x * kx,
               self.z ** 2 - kx * self.y]
        scale = 1.0 + max(abs(self.x), abs(self.y), abs(self.z)) ** 2 * (1 + abs(kx))
        return max(abs(e) for e in eqs) / scale


@dataclass(frozen=True)
class Contour:
    """Polyline in the x-plane with a tracked starting sheet.

    ``endpoint_kind`` is one of ``regular``, ``branch_point``, ``infinity``;
    when a terminal leg uses the x = t^-3 chart, ``infinity_param`` holds
    the t-value of the far end.
    """

    vertices: tuple
    start_sheet: complex
    endpoint_kind: str = "regular"
    infinity_param: float | None = None

    def __post_init__(self):
        if self.endpoint_kind not in ("regular", "branch_point", "infinity"):
            raise ValueError(f"bad endpoint_kind {self.endpoint_kind!r}")


def y_fibre(params, x):
    """The three y-values above x, as an array (fixed but arbitrary order)."""
    rhs = complex(params.curve_rhs(x))
    r = rhs ** (1.0 / 3.0)
    return np.array([r, r * ZETA3, r * ZETA3 ** 2])


def nearest_root(params, x, y_guess):
    """Pick the cube root of the curve RHS above ``x`` nearest ``y_guess``."""
    fib = y_fibre(params, x)
    return fib[np.argmin(np.abs(fib - y_guess))]


def _min_separation(fib):
    return min(abs(fib[0] - fib[1]), abs(fib[0] - fib[2]), abs(fib[1] - fib[2]))


def _march_edge(params, xa, xb, y0, steps):
    """March y along [xa, xb]; returns (points, ok)."""
    xs = xa + (xb - xa) * np.linspace(0.0, 1.0, steps + 1)
    ys = np.empty(steps + 1, dtype=complex)
    ys[0] = y0
    for i in range(1, steps + 1):
        fib = y_fibre(params, xs[i])
        j = np.argmin(np.abs(fib - ys[i - 1]))
        sep = _min_separation(fib)
        if abs(fib[j] - ys[i - 1]) > 0.25 * sep:
            return None, False
        ys[i] = fib[j]
    return list(zip(xs, ys)), True


def track_sheet(params, contour, steps_per_edge=32):
    """Continuously continue y along a contour's polyline.

    Returns the list of (x, y) samples.  Each edge is refined (doubling
    the step count) until consecutive y-values stay within 25% of the
    minimal root separation; failure raises :class:`SheetAmbiguity`.
    """
    if steps_per_edge < 8:
        raise ValueError("steps_per_edge must be >= 8")
    verts = [complex(v) for v in contour.vertices]
    y = complex(contour.start_sheet)
    if abs(nearest_root(params, verts[0], y) - y) > 1e-6 * (1.0 + abs(y)):
        raise ValueError("start_sheet does not satisfy the curve equation")
    out = [(verts[0], y)]
    for xa, xb in zip(verts[:-1], verts[1:]):
        steps = steps_per_edge
        while True:
            pts, ok = _march_edge(params, xa, xb, y, steps)
            if ok:
                break
            steps *= 2
            if steps > 1 << 16:
                raise SheetAmbiguity(
                    f"cannot separate sheets on edge {xa} -> {xb}")
        out.extend(pts[1:])
        y = pts[-1][1]
    return out


def diff_first_kind_g3(params, point, i):
    """Value of nu^I_i / dx at a genus-3 point: (1, x, y)/(3y^2)."""
    x, y = point.x, point.y
    if abs(y) == 0.0:
        raise AtBranchPoint("first-kind differential needs y != 0")
    if i == 1:
        return 1.0 / (3.0 * y ** 2)
    if i == 2:
        return x / (3.0 * y ** 2)
    if i == 3:
        return 1.0 / (3.0 * y)
    raise ValueError("i must be 1, 2 or 3")


def diff_second_kind_g3(params, point, i, x_coeff=None):
    """Value of nu^II_i / dx at a genus-3 point.

    ``x_coeff`` overrides the x-coefficient in the weight -5 entry; the
    default is the duality-corrected module constant.
    """
    x, y = point.x, point.y
    if abs(y) == 0.0:
        raise AtBranchPoint("second-kind differential needs y != 0")
    c = SECOND_KIND_X_COEFF if x_coeff is None else x_coeff
    if i == 1:
        return -(5 * x ** 2 + c * params.lambda3 * x + params.lambda2) / (3.0 * y)
    if i == 2:
        return -2.0 * x / (3.0 * y)
    if i == 3:
        return -(x ** 2) / (3.0 * y ** 2)
    raise ValueError("i must be 1, 2 or 3")


def diff_first_kind_g2(params, point, i):
    """Value of nu-hat^I_i / dx on the normalization: 1/(3z), 1/(3y)."""
    if i == 1:
        if abs(point.z) == 0.0:
            raise AtBranchPoint("needs z != 0")
        return 1.0 / (3.0 * point.z)
    if i == 2:
        if abs(point.y) == 0.0:
            raise AtBranchPoint("needs y != 0")
        return 1.0 / (3.0 * point.y)
    raise ValueError("i must be 1 or 2")


def diff_second_kind_g2(params, point, i):
    """Value of nu-hat^II_i / dx: -2x/(3y), -x/(3z)."""
    if i == 1:
        if abs(point.y) == 0.0:
            raise AtBranchPoint("needs y != 0")
        return -2.0 * point.x / (3.0 * point.y)
    if i == 2:
        if abs(point.z) == 0.0:
            raise AtBranchPoint("needs z != 0")
        return -point.x / (3.0 * point.z)
    raise ValueError("i must be 1 or 2")


def zeta_action_first_kind(genus):
    """Diagonal factors picked up by nu^I under (x,y) -> (x, zeta3*y)."""
    if genus == 3:
        return np.array([ZETA3, ZETA3, ZETA3 ** 2])
    return np.array([ZETA3, ZETA3 ** 2])


def zeta_action_second_kind(genus):
    if genus == 3:
        return np.array([ZETA3 ** 2, ZETA3 ** 2, ZETA3])
    return np.array([ZETA3 ** 2, ZETA3])


def _series_pow(coeffs, alpha, nterms):
    """(1 + c1 q + c2 q^2 + ...)**alpha as a truncated power series."""
    c = np.zeros(nterms, dtype=complex)
    c[: len(coeffs)] = coeffs
    out = np.zeros(nterms, dtype=complex)
    out[0] = 1.0
    # J.C.P. Miller recurrence from P'F = alpha F'P
    for n in range(1, nterms):
        acc = 0.0 + 0.0j
        for k in range(1, n + 1):
            acc += (alpha * k - (n - k)) * c[k] * out[n - k]
        out[n] = acc / n
    return out


def infinity_chart_series(params, nterms=48):
    """Series in q = t^3 of F^{-1/3} and F^{-2/3}, F = t^{4g} * y^3(t^{-3}).

    Genus 3: F = (1 - s q)(1 - b1 q)(1 - b2 q); genus 2 drops the s factor.
    Returns (G1, G2) coefficient arrays with G_a = F^{-a/3}.
    """
    if params.genus == 3:
        poly = np.array([1.0, params.lambda3, params.lambda2, params.lambda1],
                        dtype=complex)
    else:
        poly = np.array([1.0, -(params.b1 + params.b2), params.b1 * params.b2],
                        dtype=complex)
    g1 = _series_pow(poly, -1.0 / 3.0, nterms)
    g2 = _series_pow(poly, -2.0 / 3.0, nterms)
    return g1, g2


def infinity_parametrization(params, t, genus=None):
    """Point of the curve in the chart x = 1/t^3 near infinity.

    The y-branch is pinned by y * t^4 -> 1 as t -> 0 (and z * t^5 -> 1
    for the genus-2 normalization).
    """
    genus = genus or params.genus
    t = complex(t)
    if t == 0:
        raise OutOfChart("t = 0 is the point at infinity itself")
    pts = [abs(p) for p in params.branch_points if p != 0]
    if abs(t) ** 3 * max(pts) > 0.5 ** 3:
        raise OutOfChart(f"|t| = {abs(t)} too large for the infinity chart")
    x = t ** (-3)
    g1, g2 = infinity_chart_series(params)
    q = t ** 3
    qpow = q ** np.arange(len(g1))
    c = 1.0 / np.dot(g1, qpow)  # F^{1/3}
    y = c * t ** (-4)
    if genus == 3:
        return CurvePoint(x=x, y=y)
    z = (c ** 2) * t ** (-5)
    return CurvePoint(x=x, y=y, z=z)


def g2_point_from_x(params, x, y):
    """Complete (x, y) on y^3 = x^2 k(x) to the space-curve point."""
    x = complex(x)
    y = complex(y)
    if abs(x) < 1e-13:
        raise AtBranchPoint("z = y^2/x is singular at x = 0; use the t-chart")
    return CurvePoint(x=x, y=y, z=y ** 2 / x)
