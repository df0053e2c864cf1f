"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

Backend selection: env var UCLAB_BACKEND in {"numba", "numpy", "auto"}
(default "auto" = numba when importable).  Both implementations are kept
importable so tests and benchmarks can compare them directly.
"""

from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("UCLAB_BACKEND", "auto").strip().lower()

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and _FLAG != "numpy"


# ---------------------------------------------------------------------------
# ninth-degree smoothstep: C^4 contact at both ends, so fourth-order
# difference stencils crossing a transition edge keep their accuracy.
#   s(t)  = 126 t^5 - 420 t^6 + 540 t^7 - 315 t^8 + 70 t^9
#   s'(t) = 630 t^4 (1-t)^4
#   s''(t)= 2520 t^3 (1-t)^3 (1-2t)
# and  int_0^1 s = 1/2 exactly.
# ---------------------------------------------------------------------------

def _smoothstep_scalar(x: float) -> tuple[float, float, float]:
    if x <= 0.0:
        return 0.0, 0.0, 0.0
    if x >= 1.0:
        return 1.0, 0.0, 0.0
    omx = 1.0 - x
    s = x ** 5 * (126.0 + x * (-420.0 + x * (540.0 + x * (-315.0 + 70.0 * x))))
    d1 = 630.0 * (x * omx) ** 4
    d2 = 2520.0 * (x * omx) ** 3 * (1.0 - 2.0 * x)
    return s, d1, d2


def _smoothstep_int_scalar(x: float) -> float:
    """Exact antiderivative of the smoothstep, 0 at t=0 and 1/2 at t=1."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 0.5
    return x ** 6 * (21.0 + x * (-60.0 + x * (67.5 + x * (-35.0 + 7.0 * x))))


def _smoothstep_numpy(t):
    t = np.clip(t, 0.0, 1.0)
    omt = 1.0 - t
    s = t ** 5 * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + 70.0 * t))))
    d1 = 630.0 * (t * omt) ** 4
    d2 = 2520.0 * (t * omt) ** 3 * (1.0 - 2.0 * t)
    return s, d1, d2


def _smoothstep_loop(t):
    n = t.size
    s = np.empty(n)
    d1 = np.empty(n)
    d2 = np.empty(n)
    for i in range(n):
        x = t[i]
        if x <= 0.0:
            x = 0.0
        elif x >= 1.0:
            x = 1.0
        omx = 1.0 - x
        s[i] = x ** 5 * (126.0 + x * (-420.0 + x * (540.0 + x * (-315.0 + 70.0 * x))))
        d1[i] = 630.0 * (x * omx) ** 4
        d2[i] = 2520.0 * (x * omx) ** 3 * (1.0 - 2.0 * x)
    return s, d1, d2


# ---------------------------------------------------------------------------
# mean-zero angular profile on one period, in units of (k, T):
#   value -4 on [0, 1/5] and [4/5, 1], C^4 smoothstep ramps of width 7/45 up
#   to a plateau at +5 of width 13/45.  The ramp integral is exactly half of
#   (height change) x (width), so the profile integrates to zero exactly with
#   these rational breakpoints.
# Returns (f/k, f' . T/k, Phi/(kT)) at phase fraction x in [0, 1).
# ---------------------------------------------------------------------------

_X0 = 1.0 / 5.0
_W = 7.0 / 45.0
_X1 = _X0 + _W              # 16/45
_X2 = _X1 + 13.0 / 45.0     # 29/45
_X3 = _X2 + _W              # 4/5
_P = 5.0
_PHI_X0 = -4.0 * _X0
_PHI_X1 = _PHI_X0 + _W * (-4.0 + 9.0 * 0.5)
_PHI_X2 = _PHI_X1 + _P * (13.0 / 45.0)
_PHI_X3 = _PHI_X2 + _W * (_P - 9.0 * 0.5)


def _phase_profile_numpy(x):
    x = np.mod(x, 1.0)
    f = np.empty_like(x)
    fp = np.empty_like(x)
    phi = np.empty_like(x)

    lo = x < _X0
    f[lo] = -4.0
    fp[lo] = 0.0
    phi[lo] = -4.0 * x[lo]

    m = (x >= _X0) & (x < _X1)
    t = (x[m] - _X0) / _W
    s, d1, _ = _smoothstep_numpy(t)
    p = t ** 6 * (21.0 + t * (-60.0 + t * (67.5 + t * (-35.0 + 7.0 * t))))
    f[m] = -4.0 + 9.0 * s
    fp[m] = 9.0 * d1 / _W
    phi[m] = _PHI_X0 + _W * (-4.0 * t + 9.0 * p)

    m = (x >= _X1) & (x < _X2)
    f[m] = _P
    fp[m] = 0.0
    phi[m] = _PHI_X1 + _P * (x[m] - _X1)

    m = (x >= _X2) & (x < _X3)
    t = (x[m] - _X2) / _W
    s, d1, _ = _smoothstep_numpy(t)
    p = t ** 6 * (21.0 + t * (-60.0 + t * (67.5 + t * (-35.0 + 7.0 * t))))
    f[m] = _P - 9.0 * s
    fp[m] = -9.0 * d1 / _W
    phi[m] = _PHI_X2 + _W * (_P * t - 9.0 * p)

    hi = x >= _X3
    f[hi] = -4.0
    fp[hi] = 0.0
    phi[hi] = _PHI_X3 - 4.0 * (x[hi] - _X3)
    return f, fp, phi


def _phase_profile_loop(x):
    n = x.size
    f = np.empty(n)
    fp = np.empty(n)
    phi = np.empty(n)
    for i in range(n):
        xi = x[i] % 1.0
        if xi < _X0:
            f[i] = -4.0
            fp[i] = 0.0
            phi[i] = -4.0 * xi
        elif xi < _X1:
            t = (xi - _X0) / _W
            s, d1, _ = _smoothstep_scalar(t)
            p = _smoothstep_int_scalar(t)
            f[i] = -4.0 + 9.0 * s
            fp[i] = 9.0 * d1 / _W
            phi[i] = _PHI_X0 + _W * (-4.0 * t + 9.0 * p)
        elif xi < _X2:
            f[i] = _P
            fp[i] = 0.0
            phi[i] = _PHI_X1 + _P * (xi - _X1)
        elif xi < _X3:
            t = (xi - _X2) / _W
            s, d1, _ = _smoothstep_scalar(t)
            p = _smoothstep_int_scalar(t)
            f[i] = _P - 9.0 * s
            fp[i] = -9.0 * d1 / _W
            phi[i] = _PHI_X2 + _W * (_P * t - 9.0 * p)
        else:
            f[i] = -4.0
            fp[i] = 0.0
            phi[i] = _PHI_X3 - 4.0 * (xi - _X3)
    return f, fp, phi


# ---------------------------------------------------------------------------
# compactly supported radial bump exp(1 - 1/(1-t^2)) with first and second
# derivatives in t; zero (with zero derivatives) for |t| >= 1.
# ---------------------------------------------------------------------------

def _bump_numpy(t):
    b = np.zeros_like(t)
    d1 = np.zeros_like(t)
    d2 = np.zeros_like(t)
    m = np.abs(t) < 1.0
    tm = t[m]
    q = 1.0 - tm * tm
    e = np.exp(1.0 - 1.0 / q)
    g1 = -2.0 * tm / (q * q)          # d/dt of (1 - 1/q)
    g2 = (-2.0 - 6.0 * tm * tm) / (q * q * q)
    b[m] = e
    d1[m] = e * g1
    d2[m] = e * (g2 + g1 * g1)
    return b, d1, d2


def _bump_loop(t):
    n = t.size
    b = np.zeros(n)
    d1 = np.zeros(n)
    d2 = np.zeros(n)
    for i in range(n):
        ti = t[i]
        if -1.0 < ti < 1.0:
            q = 1.0 - ti * ti
            e = math.exp(1.0 - 1.0 / q)
            g1 = -2.0 * ti / (q * q)
            g2 = (-2.0 - 6.0 * ti * ti) / (q * q * q)
            b[i] = e
            d1[i] = e * g1
            d2[i] = e * (g2 + g1 * g1)
    return b, d1, d2


# ---------------------------------------------------------------------------
# complex mode helpers over radius arrays: A = sqrt(nu^2 - lam r^2) on the
# principal branch, plus log mu_nu and the log-derivative pieces used by the
# annulus builder.  nu - A is evaluated as lam r^2 / (nu + A) to avoid
# cancellation when |lam| r^2 << nu^2.
# ---------------------------------------------------------------------------

def _mode_pieces_numpy(nu, lam, r):
    r2 = r * r
    arg = np.full(r.shape, nu * nu + 0j) - lam * r2
    a = np.sqrt(arg)
    nu_minus = lam * r2 / (nu + a)            # nu - A, stable form
    s = a / nu
    w = nu * (np.log1p(s) - s - math.log(2.0) + 1.0)
    l1 = nu_minus / r
    l2 = lam / a - nu_minus / r2
    return a, w, l1, l2


def _mode_pieces_loop(nu, lam, r):
    n = r.size
    a = np.empty(n, dtype=np.complex128)
    w = np.empty(n, dtype=np.complex128)
    l1 = np.empty(n, dtype=np.complex128)
    l2 = np.empty(n, dtype=np.complex128)
    log2 = math.log(2.0)
    for i in range(n):
        r2 = r[i] * r[i]
        ai = np.sqrt(complex(nu * nu, 0.0) - lam * r2)
        nm = lam * r2 / (nu + ai)
        si = ai / nu
        a[i] = ai
        # complex log1p via the stable real-part identity
        sr = si.real
        sj = si.imag
        lre = 0.5 * math.log1p(2.0 * sr + sr * sr + sj * sj)
        lim = math.atan2(sj, 1.0 + sr)
        w[i] = nu * (complex(lre, lim) - si - log2 + 1.0)
        l1[i] = nm / r[i]
        l2[i] = lam / ai - nm / r2
    return a, w, l1, l2


# ---------------------------------------------------------------------------
# weighted log-sum-exp reduction for quadrature in log space:
#   returns log(sum_i w_i * exp(g_i)) for g with large dynamic range.
# All w_i > 0 is assumed.
# ---------------------------------------------------------------------------

def _logsum_weighted_numpy(g, w):
    m = np.max(g)
    if not np.isfinite(m):
        return -np.inf
    return m + math.log(float(np.sum(w * np.exp(g - m))))


def _logsum_weighted_loop(g, w):
    m = -np.inf
    for i in range(g.size):
        if g[i] > m:
            m = g[i]
    if not np.isfinite(m):
        return -np.inf
    acc = 0.0
    for i in range(g.size):
        acc += w[i] * math.exp(g[i] - m)
    return m + math.log(acc)


if USE_NUMBA:
    _smoothstep_scalar_numba = _njit(cache=True)(_smoothstep_scalar)
    _smoothstep_int_scalar_numba = _njit(cache=True)(_smoothstep_int_scalar)

    def _bind_phase_loop():
        ss = _smoothstep_scalar_numba
        si = _smoothstep_int_scalar_numba

        def _loop(x):
            n = x.size
            f = np.empty(n)
            fp = np.empty(n)
            phi = np.empty(n)
            for i in range(n):
                xi = x[i] % 1.0
                if xi < _X0:
                    f[i] = -4.0
                    fp[i] = 0.0
                    phi[i] = -4.0 * xi
                elif xi < _X1:
                    t = (xi - _X0) / _W
                    s, d1, _ = ss(t)
                    p = si(t)
                    f[i] = -4.0 + 9.0 * s
                    fp[i] = 9.0 * d1 / _W
                    phi[i] = _PHI_X0 + _W * (-4.0 * t + 9.0 * p)
                elif xi < _X2:
                    f[i] = _P
                    fp[i] = 0.0
                    phi[i] = _PHI_X1 + _P * (xi - _X1)
                elif xi < _X3:
                    t = (xi - _X2) / _W
                    s, d1, _ = ss(t)
                    p = si(t)
                    f[i] = _P - 9.0 * s
                    fp[i] = -9.0 * d1 / _W
                    phi[i] = _PHI_X2 + _W * (_P * t - 9.0 * p)
                else:
                    f[i] = -4.0
                    fp[i] = 0.0
                    phi[i] = _PHI_X3 - 4.0 * (xi - _X3)
            return f, fp, phi

        return _njit(cache=True)(_loop)

    smoothstep = _njit(cache=True)(_smoothstep_loop)
    phase_profile = _bind_phase_loop()
    bump = _njit(cache=True)(_bump_loop)
    mode_pieces = _njit(cache=True)(_mode_pieces_loop)
else:
    smoothstep = _smoothstep_numpy
    phase_profile = _phase_profile_numpy
    bump = _bump_numpy
    mode_pieces = _mode_pieces_numpy

# the reduction is faster vectorized than as a compiled loop (measured in
# benchmarks/bench_backends.py), so it dispatches to numpy on both backends
logsum_weighted = _logsum_weighted_numpy


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
