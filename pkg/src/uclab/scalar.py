"""Complex special factors and weight functions shared by all builders.

Branch conventions are fixed once here: every square root and logarithm is
taken on the principal branch, so ``principal_sqrt(z)`` has nonnegative real
part and lands on the positive imaginary axis for negative real ``z``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Eigenvalue",
    "WeightFunction",
    "principal_sqrt",
    "mu",
    "mu_log",
    "phi_ab",
    "phi_ab_derivatives",
    "carleman_weight",
]


def principal_sqrt(z: complex) -> complex:
    """Principal square root: result**2 == z and Re(result) >= 0."""
    w = cmath.sqrt(z)
    if w.real < 0.0:  # cmath.sqrt already picks Re >= 0; guard -0.0 edge
        w = -w
    return w


@dataclass(frozen=True)
class Eigenvalue:
    """Complex eigenvalue with its principal argument in [-pi, pi)."""

    value: complex

    @property
    def argument(self) -> float:
        a = cmath.phase(self.value)
        if a == math.pi:  # phase() returns +pi on the cut; convention is [-pi, pi)
            a = -math.pi
        return a

    @property
    def on_nonneg_real_axis(self) -> bool:
        return self.value.imag == 0.0 and self.value.real >= 0.0


def _as_lambda(lam) -> complex:
    if isinstance(lam, Eigenvalue):
        return complex(lam.value)
    return complex(lam)


def mu_log(n: float, lam, r):
    """log of the eigenvalue-correcting amplitude factor for mode index n.

    Valid while |lam| r^2 < n^2 (principal square root stays off the cut).
    Vectorized over r.
    """
    lamc = _as_lambda(lam)
    r = np.asarray(r, dtype=float)
    if lamc == 0:
        return np.zeros(r.shape, dtype=complex) if r.shape else 0.0 + 0.0j
    bad = np.abs(lamc) * r * r >= n * n
    if np.any(bad):
        raise ValueError(
            f"mode factor undefined: |lambda| r^2 must stay below n^2 "
            f"(n={n}, worst r={float(np.max(np.abs(r))):.6g})"
        )
    s = np.sqrt(1.0 - lamc * r * r / (n * n))
    out = n * (np.log1p(s) - s - math.log(2.0) + 1.0)
    return out if out.shape else complex(out)


def mu(n: float, lam, r):
    """Amplitude factor exp(n [log(1+s) - s - log 2 + 1]), s = sqrt(1 - lam r^2/n^2)."""
    w = mu_log(n, lam, r)
    return np.exp(w) if isinstance(w, np.ndarray) else cmath.exp(w)


def phi_ab(a: float, b: float, lam, r):
    """Closed-form antiderivative of -lam r / (2 sqrt(a^2-lam r^2) sqrt(b^2-lam r^2)).

    Evaluated as -(1/2) log(A - B) with A - B = (a^2-b^2)/(A+B): since A and B
    both have positive real part, A - B stays in the slit plane and the
    principal logarithm is continuous in r.  This differs from other closed
    forms of the same integral by an additive constant only.  Returns 0 when
    lam == 0.
    """
    lamc = _as_lambda(lam)
    r = np.asarray(r, dtype=float)
    if lamc == 0:
        return np.zeros(r.shape, dtype=complex) if r.shape else 0.0 + 0.0j
    if a == b:
        # A - B degenerates; the integrand is -lam r/(2(a^2-lam r^2)) with
        # antiderivative (1/4) log(a^2 - lam r^2).
        arg = a * a - lamc * r * r
        out = 0.25 * np.log(arg + 0j)
        return out if out.shape else complex(out)
    A = np.sqrt(a * a - lamc * r * r + 0j)
    B = np.sqrt(b * b - lamc * r * r + 0j)
    out = -0.5 * np.log((a * a - b * b) / (A + B))
    return out if out.shape else complex(out)


def phi_ab_derivatives(a: float, b: float, lam, r):
    """First and second r-derivatives of phi_ab (exact closed forms)."""
    lamc = _as_lambda(lam)
    r = np.asarray(r, dtype=float)
    if lamc == 0:
        z = np.zeros(r.shape, dtype=complex) if r.shape else 0.0 + 0.0j
        return z, z
    A = np.sqrt(a * a - lamc * r * r + 0j)
    B = np.sqrt(b * b - lamc * r * r + 0j)
    d1 = -lamc * r / (2.0 * A * B)
    d2 = -lamc / (2.0 * A * B) * (1.0 + lamc * r * r * (A * A + B * B) / (A * A * B * B))
    if d1.shape:
        return d1, d2
    return complex(d1), complex(d2)


def carleman_weight(nu: float, r):
    """w(r) = integral of exp(-nu s^2) from 0 to r  (= sqrt(pi/(4 nu)) erf(sqrt(nu) r))."""
    if nu <= 0:
        raise ValueError("conformal parameter nu must be positive")
    r = np.asarray(r, dtype=float)
    c = math.sqrt(math.pi / (4.0 * nu))
    rt = math.sqrt(nu)
    if r.shape:
        from scipy.special import erf

        return c * erf(rt * r)
    return c * math.erf(rt * float(r))


@dataclass
class WeightFunction:
    """Increasing radial weight w(r) with its comparability constant on (0, 6)."""

    nu: float = 1.0
    _grid: np.ndarray = field(default_factory=lambda: np.linspace(1e-6, 6.0, 4001), repr=False)

    def __call__(self, r):
        return carleman_weight(self.nu, r)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        out = np.exp(-self.nu * r * r)
        return out if out.shape else float(out)

    @property
    def c1(self) -> float:
        """Smallest C with 1/C <= w(r)/r <= C on (0, 6)."""
        ratio = self(self._grid) / self._grid
        return float(max(np.max(ratio), 1.0 / np.min(ratio)))

    @property
    def w54(self) -> float:
        return float(self(1.25))
