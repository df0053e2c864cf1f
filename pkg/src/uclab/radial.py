"""Radial eigenfunctions by exact Laurent-coefficient induction.

Builds exponents f_m(r) = c1 r + c2 log r + sum_{j>=3} c_j r^{2-j} whose
residual potential is an exact Laurent polynomial in 1/r with lowest power m,
then assembles globally defined decaying eigenfunctions (fast-decay regime)
with either a scalar potential or a gradient-term potential.

All coefficient arithmetic is generic over the scalar type: builtin complex
by default, mpmath.mpc in the optional high-precision mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import PotentialDecay, beta_exponents
from .report import VerificationReport
from .scalar import Eigenvalue, principal_sqrt

__all__ = [
    "LaurentExpansion",
    "ResidualCoeffs",
    "base_f1",
    "log_step",
    "residual_laurent",
    "extend",
    "induct",
    "induct_mp",
    "residual_fit_oracle",
    "RadialSolution",
    "assemble",
    "fd_residual",
    "verify_radial",
]


@dataclass
class LaurentExpansion:
    """f(r) = c_linear r + c_log log r + sum_k c_neg[k] r^{2-k}, k >= 3."""

    c_linear: complex
    c_log: complex = 0
    c_neg: dict[int, complex] = field(default_factory=dict)
    n_dim: int = 2

    @property
    def order(self) -> int:
        """Current induction order m (f contains terms down to r^{2-m})."""
        return max([2 if self.c_log != 0 else 1] + list(self.c_neg.keys()))

    def value(self, r):
        r = np.asarray(r, dtype=float)
        out = self.c_linear * r + self.c_log * np.log(r)
        for k, c in self.c_neg.items():
            out = out + c * r ** (2.0 - k)
        return out

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        out = self.c_linear + self.c_log / r
        for k, c in self.c_neg.items():
            out = out + (2.0 - k) * c * r ** (1.0 - k)
        return out

    def second_derivative(self, r):
        r = np.asarray(r, dtype=float)
        out = -self.c_log / r ** 2
        for k, c in self.c_neg.items():
            out = out + (2.0 - k) * (1.0 - k) * c * r ** (-float(k))
        return out

    def conjugate(self) -> "LaurentExpansion":
        conj = lambda z: z.conjugate()
        return LaurentExpansion(conj(self.c_linear), conj(self.c_log),
                                {k: conj(c) for k, c in self.c_neg.items()},
                                self.n_dim)


@dataclass
class ResidualCoeffs:
    """Residual potential sum_p d[p] r^{-p} of an exponent expansion."""

    d: dict[int, complex] = field(default_factory=dict)

    @property
    def lowest(self) -> int:
        return min(self.d.keys()) if self.d else 0

    @property
    def highest(self) -> int:
        return max(self.d.keys()) if self.d else 0

    def value(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape, dtype=complex) if r.shape else 0.0 + 0.0j
        for p, c in self.d.items():
            out = out + c * r ** (-float(p))
        return out


def _deriv_coeffs(f: LaurentExpansion) -> dict[int, complex]:
    """f'(r) as a map {power p: coefficient of r^{-p}} (p >= 0)."""
    out: dict[int, complex] = {}
    if f.c_linear != 0:
        out[0] = f.c_linear
    if f.c_log != 0:
        out[1] = f.c_log
    for k, c in f.c_neg.items():
        if c != 0:
            out[k - 1] = out.get(k - 1, 0) + (2 - k) * c
    return out


def residual_laurent(f: LaurentExpansion, lam) -> ResidualCoeffs:
    """Exact coefficients of ((n-1)/r) f' + f'' + (f')^2 + lam.

    The zero-power coefficient must cancel (c_linear^2 = -lam by
    construction); a surviving coefficient at power <= 0 signals a broken
    invariant and raises.
    """
    lamc = lam.value if isinstance(lam, Eigenvalue) else lam
    n = f.n_dim
    d: dict[int, complex] = {}

    def add(p: int, c) -> None:
        if c != 0:
            d[p] = d.get(p, 0) + c

    fp = _deriv_coeffs(f)
    for p, c in fp.items():                      # (n-1) f'/r
        add(p + 1, (n - 1) * c)
    if f.c_log != 0:                             # f''
        add(2, -f.c_log)
    for k, c in f.c_neg.items():
        add(k, (2 - k) * (1 - k) * c)
    for p1, c1 in fp.items():                    # (f')^2
        for p2, c2 in fp.items():
            add(p1 + p2, c1 * c2)
    add(0, lamc)

    d = {p: c for p, c in d.items() if c != 0}
    bad = [p for p in d if p <= 0]
    if bad:
        worst = max(abs(complex(d[p])) for p in bad)
        if worst > 1e-12:
            raise ArithmeticError(
                f"residual has coefficients at nonnegative powers {sorted(bad)}; "
                "the exponent expansion violates its construction invariant")
        for p in bad:
            del d[p]
    return ResidualCoeffs(d)


def base_f1(lam, n_dim: int = 2):
    """Base exponent f_1 = sgn(arg lam) sqrt(-lam) r with its residual.

    Requires lam off the nonnegative real axis so that Re(c1) < 0.
    """
    ev = lam if isinstance(lam, Eigenvalue) else Eigenvalue(complex(lam))
    if ev.on_nonneg_real_axis:
        raise ValueError("eigenvalue on the nonnegative real axis: "
                         "no decaying radial exponent exists on this branch")
    # the square root of -lam with negative real part (unique off the cut)
    c1 = principal_sqrt(-ev.value)
    if c1.real > 0:
        c1 = -c1
    f = LaurentExpansion(c1, 0, {}, n_dim)
    return f, residual_laurent(f, ev.value)


def log_step(f: LaurentExpansion, lam):
    """Order 1 -> 2: add the log-coefficient -(n-1)/2 that kills the 1/r term."""
    if f.c_log != 0 or f.c_neg:
        raise ValueError("log step applies to the order-1 base exponent only")
    g = LaurentExpansion(f.c_linear, -(f.n_dim - 1) / 2.0, {}, f.n_dim)
    return g, residual_laurent(g, lam)


def extend(f: LaurentExpansion, residual: ResidualCoeffs, lam):
    """Order m -> m+1 (m >= 2): add c_{m+1} r^{1-m} with c_{m+1} = d_m/(2(m-1)c1)."""
    m = f.order
    if m < 2:
        raise ValueError("extension step requires order >= 2 (use log_step first)")
    d_m = residual.d.get(m, 0)
    c_next = d_m / (2 * (m - 1) * f.c_linear)
    c_neg = dict(f.c_neg)
    c_neg[m + 1] = c_next
    g = LaurentExpansion(f.c_linear, f.c_log, c_neg, f.n_dim)
    return g, residual_laurent(g, lam)


def induct(lam, m: int, n_dim: int = 2) -> tuple[LaurentExpansion, ResidualCoeffs]:
    """Run the induction up to order m (m >= 1)."""
    f, res = base_f1(lam, n_dim)
    if m == 1:
        return f, res
    f, res = log_step(f, lam)
    for _ in range(m - 2):
        f, res = extend(f, res, lam)
    return f, res


def residual_fit_oracle(f: LaurentExpansion, lam, radii=None,
                        dps: int = 50) -> dict[int, complex]:
    """Independent residual coefficients by numeric evaluation + linear solve.

    Evaluates ((n-1)/r) f' + f'' + (f')^2 + lam pointwise on a radius grid in
    high-precision arithmetic and solves the square Vandermonde system in the
    powers r^{-p}, p = 1..2(m-1); the power-basis conditioning is absorbed by
    the working precision.
    """
    import mpmath as mp

    lamc = lam.value if isinstance(lam, Eigenvalue) else complex(lam)
    m = f.order
    pmax = max(2 * (m - 1), 1)
    if radii is None:
        radii = np.geomspace(1.2, 50.0, pmax)
    radii = np.asarray(radii, dtype=float)
    if radii.size != pmax:
        raise ValueError(f"need exactly {pmax} radii for the square system")
    n = f.n_dim
    with mp.workdps(dps):
        lam_mp = mp.mpc(lamc)
        c1 = mp.mpc(complex(f.c_linear))
        c2 = mp.mpc(complex(f.c_log))

        def fp(r):
            out = c1 + c2 / r
            for k, c in f.c_neg.items():
                out += (2 - k) * mp.mpc(complex(c)) * r ** (1 - k)
            return out

        def fpp(r):
            out = -c2 / r ** 2
            for k, c in f.c_neg.items():
                out += (2 - k) * (1 - k) * mp.mpc(complex(c)) * r ** (-k)
            return out

        # the basis includes power 0: rounded coefficients leave a tiny
        # constant component (c1^2 + lam), which must not alias onto the
        # inverse powers through the Vandermonde conditioning
        rows = []
        rhs = []
        for r in radii:
            r = mp.mpf(float(r))
            rows.append([r ** (-int(p)) for p in range(0, pmax + 1)])
            rhs.append((n - 1) / r * fp(r) + fpp(r) + fp(r) ** 2 + lam_mp)
        r_extra = mp.mpf(float(radii[-1]) * 2.0)
        rows.append([r_extra ** (-int(p)) for p in range(0, pmax + 1)])
        rhs.append((n - 1) / r_extra * fp(r_extra) + fpp(r_extra)
                   + fp(r_extra) ** 2 + lam_mp)
        sol = mp.lu_solve(mp.matrix(rows), mp.matrix(rhs))
        return {p: complex(sol[p]) for p in range(1, pmax + 1)}


def induct_mp(lam, m: int, n_dim: int = 2, dps: int = 50):
    """High-precision induction using mpmath complex coefficients."""
    import mpmath as mp

    mp.mp.dps = dps
    lamc = lam.value if isinstance(lam, Eigenvalue) else complex(lam)
    lam_mp = mp.mpc(lamc.real, lamc.imag)
    ev = Eigenvalue(complex(lamc))
    if ev.on_nonneg_real_axis:
        raise ValueError("eigenvalue on the nonnegative real axis")
    c1 = mp.sqrt(-lam_mp)
    if mp.re(c1) > 0:
        c1 = -c1
    f = LaurentExpansion(c1, 0, {}, n_dim)
    res = residual_laurent(f, lam_mp)
    if m == 1:
        return f, res
    f = LaurentExpansion(c1, mp.mpc(-(n_dim - 1)) / 2, {}, n_dim)
    res = residual_laurent(f, lam_mp)
    for _ in range(m - 2):
        mm = f.order
        d_m = res.d.get(mm, mp.mpc(0))
        c_next = d_m / (2 * (mm - 1) * f.c_linear)
        c_neg = dict(f.c_neg)
        c_neg[mm + 1] = c_next
        f = LaurentExpansion(f.c_linear, f.c_log, c_neg, n_dim)
        res = residual_laurent(f, lam_mp)
    return f, res


# ---------------------------------------------------------------------------
# global assembly
# ---------------------------------------------------------------------------

@dataclass
class RadialSolution:
    """Globally defined radial eigenfunction with its potential.

    Outside the matching radius the solution is exp(f_m); inside it is either
    constant (scalar-potential case) or a Gaussian profile (gradient case).
    """

    lam: complex
    case_kind: str               # "V" or "W"
    f: LaurentExpansion
    residual: ResidualCoeffs
    m: int
    R_match: float
    C_decay: float
    r_max: float
    inner_log_c: complex         # log of the inner-profile prefactor (W case)

    @property
    def n_dim(self) -> int:
        return self.f.n_dim

    def log_u(self, r):
        """log u(r), vectorized; handles both regions."""
        r = np.asarray(r, dtype=float)
        out = np.empty(r.shape, dtype=complex)
        outer = r >= self.R_match
        out[outer] = self.f.value(r[outer])
        inner = ~outer
        if self.case_kind == "V":
            out[inner] = self.f.value(self.R_match)
        else:
            out[inner] = self.inner_log_c - self.lam * r[inner] ** 2 / (2.0 * self.n_dim)
        return out

    def u(self, r):
        return np.exp(self.log_u(r))

    def potential_v(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty(r.shape, dtype=complex)
        outer = r >= self.R_match
        out[outer] = self.residual.value(r[outer])
        out[~outer] = self.lam
        return out

    def potential_w_radial(self, r):
        """Radial component of the gradient-term potential (direction e_r)."""
        r = np.asarray(r, dtype=float)
        out = np.empty(r.shape, dtype=complex)
        outer = r >= self.R_match
        fp = self.f.derivative(r[outer])
        guard = np.abs(fp)
        if np.any(guard < self.C_decay * 0.5):
            raise ArithmeticError(
                "radial log-derivative fell below its guaranteed lower bound; "
                "gradient-term potential would be unbounded")
        out[outer] = self.residual.value(r[outer]) / fp
        out[~outer] = -self.lam * r[~outer] / self.n_dim
        return out


def _find_match_radius(f: LaurentExpansion, r_hi: float = 400.0) -> tuple[float, float]:
    """Smallest grid radius past which Re f' stays at or below -|Re c1|/2."""
    c_target = abs(f.c_linear.real) / 2.0
    grid = np.linspace(0.05, r_hi, 16000)
    re_fp = np.real(f.derivative(grid))
    ok = re_fp <= -c_target
    idx = len(grid)
    for i in range(len(grid) - 1, -1, -1):
        if not ok[i]:
            idx = i + 1
            break
    else:
        idx = 0
    if idx >= len(grid):
        raise ArithmeticError("no matching radius found: Re f' never settles "
                              "below half its asymptotic value on the grid")
    r_match = max(float(grid[idx]), 1.0)
    return r_match, c_target


def assemble(m: int, lam, decay: PotentialDecay, case_kind: str,
             n_dim: int = 2, truncation_factor: float = 20.0) -> RadialSolution:
    """Build the global example for the fast-decay regime.

    m defaults to ceil(N) (scalar case) or ceil(P) (gradient case) when passed
    as 0; requires the relevant critical exponent below 1 and an eigenvalue
    off the nonnegative real axis.
    """
    if case_kind not in ("V", "W"):
        raise ValueError("case_kind must be 'V' or 'W'")
    beta_c, _ = beta_exponents(decay)
    lamc = lam.value if isinstance(lam, Eigenvalue) else complex(lam)
    if m <= 0:
        m = math.ceil(decay.N) if case_kind == "V" else math.ceil(decay.P)
        m = max(m, 1)
    f, res = induct(lamc, m, n_dim)
    r_match, c_decay = _find_match_radius(f)
    inner_log_c = 0.0 + 0.0j
    if case_kind == "W":
        inner_log_c = f.value(r_match) + lamc * r_match ** 2 / (2.0 * n_dim)
    return RadialSolution(lamc, case_kind, f, res, m, r_match, c_decay,
                          truncation_factor * r_match, inner_log_c)


def fd_residual(sol: RadialSolution, r, h_rel: float = 1e-3) -> np.ndarray:
    """Relative residual of the eigen-equation by 4th-order radial differences."""
    r = np.asarray(r, dtype=float)
    h = h_rel * r
    stencil = [-2, -1, 0, 1, 2]
    u = {s: sol.u(r + s * h) for s in stencil}
    d2 = (-u[2] + 16 * u[1] - 30 * u[0] + 16 * u[-1] - u[-2]) / (12 * h * h)
    d1 = (-u[2] + 8 * u[1] - 8 * u[-1] + u[-2]) / (12 * h)
    lap = d2 + (sol.n_dim - 1) / r * d1
    if sol.case_kind == "V":
        res = lap + sol.lam * u[0] - sol.potential_v(r) * u[0]
        scale = np.abs(lap) + np.abs(sol.lam * u[0]) + np.abs(sol.potential_v(r) * u[0])
    else:
        res = lap + sol.lam * u[0] - sol.potential_w_radial(r) * d1
        scale = np.abs(lap) + np.abs(sol.lam * u[0]) + np.abs(sol.potential_w_radial(r) * d1)
    return np.abs(res) / np.maximum(scale, 1e-300)


def verify_radial(sol: RadialSolution, decay: PotentialDecay) -> VerificationReport:
    """Decay/boundedness/stability checks for an assembled radial example."""
    rep = VerificationReport(f"radial-{sol.case_kind}-m{sol.m}")
    r0, r1 = sol.R_match, sol.r_max

    # start a few steps past the matching radius: the radial derivative jumps
    # there by construction, which a straddling stencil would misread
    r = np.linspace(r0 * 1.01, min(10.0 * r0, r1), 400)
    worst_fd = float(np.max(fd_residual(sol, r)))
    rep.check_le("fd-residual-outer", "eigen-equation-residual", worst_fd, 1e-8)

    # power-decay stability at the potential's own leading power (= the
    # induction order), plus boundedness at the requested decay rate
    rate_req = math.ceil(decay.N) if sol.case_kind == "V" else math.ceil(decay.P)

    def window_sups(rate):
        sups = []
        lo = r0
        while lo * 2.0 <= r1 * 1.0001:
            win = np.linspace(lo, lo * 2.0, 200)
            if sol.case_kind == "V":
                vals = np.abs(sol.potential_v(win)) * win ** rate
            else:
                vals = np.abs(sol.potential_w_radial(win)) * win ** rate
            sups.append(float(np.max(vals)))
            lo *= 2.0
        return sups

    sups = window_sups(sol.m)
    ratio = max(sups) / max(min(sups), 1e-300) if sups else math.inf
    rep.check_le("potential-decay-stability", "power-decay-window-stability",
                 ratio, 1.5,
                 detail=f"sup r^{sol.m}|potential| over doubling windows")
    sup_req = max(window_sups(rate_req)) if rate_req > 0 else max(window_sups(0))
    rep.add("potential-decay-bounded", "requested-decay-rate-bounded",
            sup_req, math.inf, 0.0, math.isfinite(sup_req),
            detail=f"sup r^{rate_req}|potential| over the verified range")

    # |u| e^{C r} bounded past the matching radius
    r = np.linspace(r0, r1, 2000)
    log_mod = np.real(sol.log_u(r)) + sol.C_decay * r
    rep.check_le("exponential-decay", "decay-rate-lower-bound",
                 float(np.max(log_mod) - log_mod[0]), 0.0, 1e-9,
                 detail="log|u| + C r must not rise past the matching radius")

    # log-derivative guard
    fp = np.abs(sol.f.derivative(np.linspace(r0, r1, 2000)))
    rep.check_le("log-derivative-floor", "log-derivative-lower-bound",
                 sol.C_decay, float(np.min(fp)), 1e-12,
                 detail="|f'| stays above the decay constant")
    rep.metadata["m"] = sol.m
    rep.metadata["R_match"] = sol.R_match
    rep.metadata["C_decay"] = sol.C_decay
    return rep
