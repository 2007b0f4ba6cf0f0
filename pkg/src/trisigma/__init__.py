"""Numerics for the cyclic trigonal family y^3 = x(x-s)(x-b1)(x-b2).

Subpackages cover contour quadrature and sheet tracking (curves), period
matrices and Riemann constants (periods), Riemann theta with
characteristics (theta), sigma and al functions (sigma), the s -> 0
degeneration suite (degen), and the Kodaira-IV elliptic model (elliptic).
"""

__version__ = "0.1.0"
