"""Complex-arithmetic primitives shared by every other module.

Adaptive Gauss-Legendre contour quadrature, convergent series summation,
small dense complex linear algebra (n <= 3, explicit cofactors), and a
Lanczos Gamma function.  All routines are pure functions of their inputs.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "QuadratureConfig",
    "NonConvergence",
    "Singular",
    "integrate_segment",
    "integrate_function",
    "sum_series",
    "mat_det",
    "mat_inverse",
    "gamma_fn",
]

ABS_FLOOR = 1e-15


class NonConvergence(RuntimeError):
    """Quadrature or series did not reach the requested tolerance."""


class Singular(RuntimeError):
    """Matrix numerically singular."""


@dataclass(frozen=True)
class QuadratureConfig:
    panel_order: int = 16
    tol: float = 1e-12
    max_subdivision_depth: int = 40

    def __post_init__(self):
        if self.panel_order < 4:
            raise ValueError("panel_order must be >= 4")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_subdivision_depth < 1:
            raise ValueError("max_subdivision_depth must be >= 1")


@lru_cache(maxsize=32)
def _gauss_nodes(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _panel(f, a, b, n):
    x, w = _gauss_nodes(n)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return half * _weighted_sum(f(mid + half * x), w)


def _weighted_sum(vals, w):
    vals = np.asarray(vals)
    if vals.ndim == 1:
        return np.dot(w, vals)
    # vectorised integrands return shape (npts, k)
    return w @ vals


def integrate_function(f, cfg=QuadratureConfig(), scale_hint=0.0):
    """Integrate a vectorised integrand f(x: ndarray) over [0, 1].

    ``f`` takes an array of parameters in (0, 1) and returns an array of
    values, either shape ``(npts,)`` or ``(npts, k)`` for k simultaneous
    integrands.  Adaptive bisection accepts a panel once the order-n and
    order-2n estimates agree to ``cfg.tol`` relative to the running scale.
    """
    n = cfg.panel_order

    def recurse(a, b, coarse, depth):
        fine_l = _panel(f, a, 0.5 * (a + b), n)
        fine_r = _panel(f, 0.5 * (a + b), b, n)
        fine = fine_l + fine_r
        err = np.max(np.abs(fine - coarse))
        tol_here = cfg.tol * max(float(np.max(np.abs(fine))), scale_hint, ABS_FLOOR)
        if err <= tol_here or (b - a) < 1e-14:
            return fine
        if depth >= cfg.max_subdivision_depth:
            raise NonConvergence(
                f"quadrature stalled on [{a}, {b}] (err {err:.2e} > {tol_here:.2e})")
        return (recurse(a, 0.5 * (a + b), fine_l, depth + 1)
                + recurse(0.5 * (a + b), b, fine_r, depth + 1))

    coarse = _panel(f, 0.0, 1.0, n)
    return recurse(0.0, 1.0, coarse, 0)


def integrate_segment(f, a, b, cfg=QuadratureConfig()):
    """Integrate ``f`` along the straight segment from ``a`` to ``b``.

    Endpoint singularities must already be removed by the caller's
    substitution; the rule never evaluates at the endpoints themselves.
    """
    a = complex(a)
    b = complex(b)
    span = b - a

    def g(ts):
        return np.asarray(f(a + span * ts))

    return span * integrate_function(g, cfg)


def sum_series(term, tol=1e-14, max_terms=10000):
    """Sum term(0) + term(1) + ... until three consecutive terms are tiny.

    Stops once three consecutive terms have magnitude below
    ``tol * |partial sum|`` (with an absolute floor).  Raises
    :class:`NonConvergence` if ``max_terms`` is exhausted first.
    """
    total = 0.0 + 0.0j
    small = 0
    for k in range(max_terms):
        t = complex(term(k))
        total += t
        if abs(t) < tol * max(abs(total), ABS_FLOOR):
            small += 1
            if small >= 3:
                return total
        else:
            small = 0
    raise NonConvergence(f"series did not converge in {max_terms} terms")


def mat_det(m):
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    if m.shape != (n, n) or n > 3 or n < 1:
        raise ValueError("mat_det handles square matrices of size 1..3")
    if n == 1:
        return m[0, 0]
    if n == 2:
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    return (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
            - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
            + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))


def mat_inverse(m):
    """Invert a 1x1 .. 3x3 complex matrix by explicit cofactors."""
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    det = mat_det(m)
    norm = np.max(np.abs(m)) or 1.0
    if abs(det) < 1e-14 * norm ** n:
        raise Singular(f"matrix numerically singular (|det| = {abs(det):.2e})")
    if n == 1:
        return np.array([[1.0 / m[0, 0]]], dtype=complex)
    if n == 2:
        return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]], dtype=complex) / det
    cof = np.empty((3, 3), dtype=complex)
    for i in range(3):
        for j in range(3):
            r = [k for k in range(3) if k != i]
            c = [k for k in range(3) if k != j]
            minor = m[np.ix_(r, c)]
            cof[i, j] = (-1) ** (i + j) * (minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0])
    return cof.T / det


# Lanczos approximation, g = 7, n = 9 (double precision classic).
_LANCZOS_G = 7.0
_LANCZOS_C = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])


def gamma_fn(z):
    """Gamma function for complex argument (Lanczos, ~1e-13 relative)."""
    z = complex(z)
    if z.imag == 0.0 and z.real <= 0.0 and z.real == int(z.real):
        raise ValueError(f"gamma_fn pole at z = {z}")
    if z.real < 0.5:
        # reflection into the right half plane
        return np.pi / (np.sin(np.pi * z) * gamma_fn(1.0 - z))
    z -= 1.0
    x = _LANCZOS_C[0]
    for i in range(1, len(_LANCZOS_C)):
        x += _LANCZOS_C[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return np.sqrt(2.0 * np.pi) * t ** (z + 0.5) * np.exp(-t) * x
