"""Riemann theta function with characteristics for genus 1..3.

Classical convention

    theta[a; b](z; tau) = sum_{n in Z^g} exp(pi i (n+a)^T tau (n+a)
                                             + 2 pi i (n+a)^T (z+b)),

truncated to a lattice ball around the Gaussian peak with a tail bound
below ``tol`` times the largest retained term.  Deterministic for fixed
inputs.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ThetaParams",
    "TruncationOverflow",
    "theta",
    "theta_brute",
    "quasi_periodicity_defect",
    "characteristic_parity",
]

_MAX_POINTS = 4_000_000


class TruncationOverflow(RuntimeError):
    """Truncation radius exceeded the hard cap (ill-conditioned Im tau)."""


@dataclass(frozen=True)
class ThetaParams:
    tau: object  # (g, g) complex ndarray
    a: object = None  # characteristic delta'' (top), real vector
    b: object = None  # characteristic delta'  (bottom)
    tol: float = 1e-12

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=complex)
        if tau.ndim != 2 or tau.shape[0] != tau.shape[1]:
            raise ValueError("tau must be square")
        g = tau.shape[0]
        if np.max(np.abs(tau - tau.T)) > 1e-8 * max(1.0, np.max(np.abs(tau))):
            raise ValueError("tau not symmetric")
        ev = np.linalg.eigvalsh(tau.imag)
        if ev.min() <= 0:
            raise ValueError("Im(tau) not positive definite")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "a", _char_vec(self.a, g))
        object.__setattr__(self, "b", _char_vec(self.b, g))

    @property
    def g(self):
        return self.tau.shape[0]


def _char_vec(v, g):
    if v is None:
        return np.zeros(g)
    v = np.asarray(v, dtype=float).reshape(g)
    return v


def _lattice_points(center, radii):
    """Integer grid in a box around ``center`` with per-axis half-widths."""
    axes = [np.arange(int(np.floor(c - r)), int(np.ceil(c + r)) + 1)
            for c, r in zip(center, radii)]
    total = 1
    for ax in axes:
        total *= len(ax)
    if total > _MAX_POINTS:
        raise TruncationOverflow(f"lattice ball needs {total} points")
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([gr.ravel() for gr in grids], axis=1).astype(float)


def theta(z, p):
    """Evaluate theta[a;b](z; tau); z is a length-g complex vector."""
    z = np.asarray(z, dtype=complex).reshape(p.g)
    tau = p.tau
    Y = tau.imag
    Yinv = np.linalg.inv(Y)
    lam_min = np.linalg.eigvalsh(Y).min()

    y = z.imag
    shift = p.a + Yinv @ y          # peak sits at n = -shift
    center = -shift
    # radius: discard exp(-pi lam_min r^2) below tol with head-count margin
    r = np.sqrt(max(np.log(1.0 / (p.tol * 1e-3)), 1.0) / (np.pi * lam_min)) + np.sqrt(p.g)
    radii = np.full(p.g, r)
    n = _lattice_points(center, radii)

    na = n + p.a
    quad = np.einsum("ij,jk,ik->i", na, tau, na)
    lin = na @ (z + p.b)
    expo = 1j * np.pi * quad + 2j * np.pi * lin
    m = expo.real.max()
    return np.exp(m) * np.sum(np.exp(expo - m))


def theta_brute(z, p, radius=12):
    """Naive full-box enumeration, for oracle use at g <= 2."""
    z = np.asarray(z, dtype=complex).reshape(p.g)
    axes = [np.arange(-radius, radius + 1)] * p.g
    grids = np.meshgrid(*axes, indexing="ij")
    n = np.stack([gr.ravel() for gr in grids], axis=1).astype(float)
    na = n + p.a
    quad = np.einsum("ij,jk,ik->i", na, p.tau, na)
    lin = na @ (z + p.b)
    return np.sum(np.exp(1j * np.pi * quad + 2j * np.pi * lin))


def quasi_periodicity_defect(z, p, m, n):
    """Relative defect of the z -> z + m + tau n transformation law.

    The phase factor is forced by shifting the summation index:

        theta(z + m + tau n) = exp(2 pi i (a.m - b.n) - pi i n.tau.n
                                   - 2 pi i n.z) * theta(z).
    """
    z = np.asarray(z, dtype=complex).reshape(p.g)
    m = np.asarray(m, dtype=float).reshape(p.g)
    n = np.asarray(n, dtype=float).reshape(p.g)
    lhs = theta(z + m + p.tau @ n, p)
    factor = np.exp(2j * np.pi * (p.a @ m - p.b @ n)
                    - 1j * np.pi * (n @ p.tau @ n) - 2j * np.pi * (n @ z))
    rhs = factor * theta(z, p)
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return abs(lhs - rhs) / scale


def characteristic_parity(a, b):
    """(-1)^(4 a.b) for a half-integer characteristic [a; b]."""
    val = 4.0 * np.dot(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return -1 if int(round(val)) % 2 else 1
