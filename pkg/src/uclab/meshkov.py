"""Annulus-by-annulus complex eigenfunction counterexamples in the plane.

Over each annulus [rho, rho + 6 rho^alpha] the solution is rearranged from a
pure rotating mode of index n to one of index n+k through intermediate modes
n-2k and n+2k, using a mean-zero angular phase profile, smooth radial
cutoffs, and eigenvalue-correcting amplitude factors.  The scalar-potential
variant reads the potential off as the exact ratio (lap u + lam u)/u; the
gradient-term variant solves for the prescribed direction fields so the
equation holds identically.

All radial amplitudes are carried as complex logarithms: a single annulus
spans hundreds of orders of magnitude, so every evaluation is relative to an
explicit log-offset.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from . import _kernels as K
from .report import VerificationReport
from .scalar import mu_log, phi_ab, phi_ab_derivatives

__all__ = [
    "ConstructionError",
    "AnnulusSpec",
    "PhaseProfile",
    "Cutoff",
    "CutoffBank",
    "Annulus",
    "PiecewiseSolution",
    "choose_nk",
    "build_phase",
    "build_annulus",
    "build_solution",
    "im_part_check",
    "SIN_PI_7",
]

SIN_PI_7 = math.sin(math.pi / 7.0)


class ConstructionError(RuntimeError):
    """A construction guard failed; the message names the violated bound."""


# ---------------------------------------------------------------------------
# phase profile
# ---------------------------------------------------------------------------

@dataclass
class PhaseProfile:
    """Mean-zero angular profile f with antiderivative Phi, period pi/(n+k)."""

    n: int
    k: int

    @property
    def T(self) -> float:
        return math.pi / (self.n + self.k)

    def f(self, phi):
        phi = np.asarray(phi, dtype=float)
        fv, fp, _ = K.phase_profile(np.ravel(phi / self.T))
        fv = fv.reshape(phi.shape) * self.k
        fp = fp.reshape(phi.shape) * (self.k / self.T)
        return fv, fp

    def Phi(self, phi):
        phi = np.asarray(phi, dtype=float)
        _, _, ph = K.phase_profile(np.ravel(phi / self.T))
        return ph.reshape(phi.shape) * (self.k * self.T)

    def F(self, phi):
        """Transition phase (n+2k) phi + Phi(phi)."""
        return (self.n + 2 * self.k) * np.asarray(phi, dtype=float) + self.Phi(phi)

    def S(self, phi):
        """Relative phase F(phi) + n phi = (2n+2k) phi + Phi(phi)."""
        return (2 * self.n + 2 * self.k) * np.asarray(phi, dtype=float) + self.Phi(phi)


def build_phase(n: int, k: int) -> PhaseProfile:
    """Phase profile for mode indices (n, k); needs 9n >= 19k + margin so the
    relative phase keeps clear of full turns on the middle of each period."""
    if not (n > 0 and k > 0):
        raise ConstructionError("mode indices must be positive")
    if 9 * n < 19 * k * 1.02:
        raise ConstructionError(
            f"sector bound violated: need 9n >= 19k with margin (n={n}, k={k})")
    return PhaseProfile(n, k)


# ---------------------------------------------------------------------------
# radial cutoffs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cutoff:
    """C^4 smoothstep transition on [r0, r1]; value `lo` below r0, `hi` above r1.

    A falling 1 -> 0 profile is evaluated through the symmetric complement
    s(1-t) rather than 1 - s(t): near the vanishing end the value is then
    exact to relative precision, which matters when the cutoff multiplies an
    exponentially larger mode.
    """

    r0: float
    r1: float
    lo: float
    hi: float

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        w = self.r1 - self.r0
        t = (np.ravel(r) - self.r0) / w
        if self.lo == 1.0 and self.hi == 0.0:
            s, d1, d2 = K.smoothstep(1.0 - t)
            return (s.reshape(r.shape), -d1.reshape(r.shape) / w,
                    d2.reshape(r.shape) / (w * w))
        s, d1, d2 = K.smoothstep(t)
        amp = self.hi - self.lo
        return (self.lo + amp * s.reshape(r.shape),
                amp * d1.reshape(r.shape) / w,
                amp * d2.reshape(r.shape) / (w * w))


@dataclass(frozen=True)
class CutoffBank:
    """The transition profiles used inside one annulus, keyed by breakpoints
    in units of rho^alpha past the inner radius."""

    rho: float
    alpha: float

    def at(self, c0: float, c1: float, falling: bool) -> Cutoff:
        ra = self.rho + c0 * self.rho ** self.alpha
        rb = self.rho + c1 * self.rho ** self.alpha
        return Cutoff(ra, rb, 1.0 if falling else 0.0, 0.0 if falling else 1.0)


# ---------------------------------------------------------------------------
# annulus parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnnulusSpec:
    rho: float
    alpha: float
    n: int
    k: int
    lam: complex
    case_kind: str  # "V" or "W"

    @property
    def beta0(self) -> float:
        return 2.0 * (1.0 - self.alpha)

    def validate_window(self) -> None:
        b0 = self.beta0
        lr = math.log(self.rho)
        if self.case_kind == "V":
            target_n = self.rho ** b0 / lr
            target_k = 6.0 * (b0 - 1.0 / lr) * self.rho ** (b0 / 2.0) / lr
            if abs(self.n - target_n) > 1.0 + 1e-9:
                raise ConstructionError(f"mode index n={self.n} outside unit window "
                                        f"around {target_n:.3f}")
            if abs(self.k - target_k) > 10.0 + 1e-9:
                raise ConstructionError(f"mode gap k={self.k} outside +-10 window "
                                        f"around {target_k:.3f}")
        else:
            target_n = self.rho ** b0
            target_k = 6.0 * b0 * self.rho ** (b0 / 2.0)
            if abs(self.n - target_n) > 1.0 + 1e-9:
                raise ConstructionError(f"mode index n={self.n} outside unit window "
                                        f"around {target_n:.3f}")
            if abs(self.k - target_k) > 40.0 + 1e-9:
                raise ConstructionError(f"mode gap k={self.k} outside +-40 window "
                                        f"around {target_k:.3f}")


def choose_nk(rho: float, beta0: float, case_kind: str) -> tuple[int, int]:
    """Mode index at rho and its increment to the next annulus.

    n is the floor of rho^{beta0}/log rho (scalar case) or rho^{beta0}
    (gradient case); k is the increment of that quantity to
    rho' = rho + 6 rho^{1 - beta0/2}.  Raises when the increment falls outside
    its guaranteed window (rho too small).
    """
    alpha = 1.0 - beta0 / 2.0

    def index(r: float) -> int:
        if case_kind == "V":
            return math.floor(r ** beta0 / math.log(r))
        return math.floor(r ** beta0)

    n = index(rho)
    rho_next = rho + 6.0 * rho ** alpha
    k = index(rho_next) - n
    spec = AnnulusSpec(rho, alpha, n, k, 0j, case_kind)
    spec.validate_window()
    return n, k


# ---------------------------------------------------------------------------
# per-term field evaluation
# ---------------------------------------------------------------------------

@dataclass
class TermFields:
    t: np.ndarray      # term value (relative to the offset)
    t_r: np.ndarray
    t_rr: np.ndarray
    t_p: np.ndarray    # d/dphi
    t_pp: np.ndarray


@dataclass
class Fields:
    u: np.ndarray
    u_r: np.ndarray
    u_rr: np.ndarray
    u_p: np.ndarray
    u_pp: np.ndarray
    offset: np.ndarray
    terms: list[TermFields]
    r: np.ndarray = None  # set by the evaluator

    @property
    def lap(self) -> np.ndarray:
        return self.u_rr + self.u_r / self.r + self.u_pp / (self.r * self.r)


def _assemble_term(psi, w, l1, l2, theta, theta_p, theta_pp, offset) -> TermFields:
    """Fields of psi(r) * exp(w(r) + i theta(phi)) relative to exp(offset)."""
    p0, p1, p2 = psi
    e = np.exp(w - offset + 1j * theta)
    t = p0 * e
    t_r = (p1 + p0 * l1) * e
    t_rr = (p2 + 2.0 * p1 * l1 + p0 * (l2 + l1 * l1)) * e
    t_p = p0 * (1j * theta_p) * e
    t_pp = p0 * (1j * theta_pp - theta_p * theta_p) * e
    return TermFields(t, t_r, t_rr, t_p, t_pp)


_ONE = (1.0, 0.0, 0.0)


class Annulus:
    """One constructed annulus [rho, rho + 6 rho^alpha]."""

    def __init__(self, spec: AnnulusSpec):
        spec.validate_window()
        self.spec = spec
        rho, alpha = spec.rho, spec.alpha
        n, k, lam = spec.n, spec.k, spec.lam
        self.n, self.k, self.lam = n, k, complex(lam)
        self.rho, self.alpha = rho, alpha
        self.case_kind = spec.case_kind
        self.scale = rho ** alpha
        self.r_lo = rho
        self.r_hi = rho + 6.0 * self.scale

        nu_min = n - 2 * k
        if nu_min <= 0:
            raise ConstructionError(f"mode ladder broken: n - 2k = {nu_min} <= 0")
        if abs(self.lam) * self.r_hi ** 2 >= 0.95 * nu_min ** 2:
            raise ConstructionError(
                "mode-factor domain violated: |lambda| r^2 must stay below "
                f"(n-2k)^2 (= {nu_min ** 2}); raise the starting radius for this "
                "eigenvalue")

        self.phase = build_phase(n, k)
        bank = CutoffBank(rho, alpha)
        # step 1 cutoffs
        self.psi1_1 = bank.at(4.0 / 3.0, 5.0 / 3.0, falling=True)
        self.psi2_1 = bank.at(1.0 / 3.0, 2.0 / 3.0, falling=False)
        self.psi3_1 = bank.at(5.0 / 3.0, 1.9, falling=True)
        self.psi4_1 = bank.at(0.1, 1.0 / 3.0, falling=False)
        # step 2 / step 3 single cutoffs (step 3 also carries its complement)
        self.psi_s2 = bank.at(7.0 / 3.0, 8.0 / 3.0, falling=True)
        self.psi_s3 = bank.at(10.0 / 3.0, 11.0 / 3.0, falling=True)
        self.psi_s3c = bank.at(10.0 / 3.0, 11.0 / 3.0, falling=False)
        # step 4 cutoffs
        self.psi1_4 = bank.at(16.0 / 3.0, 17.0 / 3.0, falling=True)
        self.psi2_4 = bank.at(13.0 / 3.0, 14.0 / 3.0, falling=False)
        self.psi3_4 = bank.at(17.0 / 3.0, 5.9, falling=True)
        self.psi4_4 = bank.at(4.1, 13.0 / 3.0, falling=False)

        x = self.x
        # amplitude-matching constants, kept as complex logarithms
        self.log_b = (-2.0 * k * math.log(x(1.0))
                      + complex(mu_log(n, lam, x(1.0)))
                      - complex(mu_log(n - 2 * k, lam, x(1.0))))
        self.log_d = (4.0 * k * math.log(x(3.0))
                      + complex(mu_log(n - 2 * k, lam, x(3.0)))
                      - complex(mu_log(n + 2 * k, lam, x(3.0))))
        self.log_b1 = self.log_b + self.log_d
        self.log_a = (self.log_b1 - k * math.log(x(5.0))
                      + complex(mu_log(n + 2 * k, lam, x(5.0)))
                      - complex(mu_log(n + k, lam, x(5.0))))
        self.log_neg_b = self.log_b + 1j * math.pi
        self.log_neg_b1 = self.log_b1 + 1j * math.pi

    # -- geometry helpers ---------------------------------------------------

    def x(self, c: float) -> float:
        return self.rho + c * self.scale

    def c_of(self, r) -> np.ndarray:
        return (np.asarray(r, dtype=float) - self.rho) / self.scale

    # -- radial factor triples ----------------------------------------------

    def _mode_w(self, nu: int, r: np.ndarray):
        """(w, w', w'') of log[r^{-nu} mu_nu(r)] as flat complex arrays."""
        a, w_mu, l1_mu, l2_mu = K.mode_pieces(float(nu), self.lam, np.ravel(r))
        lnr = np.log(np.ravel(r))
        w = -nu * lnr + w_mu
        l1 = l1_mu - nu / np.ravel(r)
        l2 = l2_mu + nu / np.ravel(r) ** 2
        return w, l1, l2

    def _phiab_w(self, pair: tuple[int, int], cutoff: Cutoff, r: np.ndarray):
        """(q, q', q'') of cutoff(r) * phi_{a,b}(r) as flat complex arrays."""
        rr = np.ravel(r)
        if self.lam == 0:
            z = np.zeros(rr.shape, dtype=complex)
            return z, z, z
        a, b = pair
        p0, p1, p2 = cutoff(rr)
        ph = phi_ab(a, b, self.lam, rr)
        d1, d2 = phi_ab_derivatives(a, b, self.lam, rr)
        return (p0 * ph,
                p1 * ph + p0 * d1,
                p2 * ph + 2.0 * p1 * d1 + p0 * d2)

    # -- term tables per step -----------------------------------------------

    def _terms(self, region: int, r: np.ndarray, phi: np.ndarray,
               offset: np.ndarray) -> list[TermFields]:
        n, k = self.n, self.k
        rr, pp = np.ravel(r), np.ravel(phi)
        off = np.ravel(np.broadcast_to(offset, r.shape))
        shape = r.shape
        zero = np.zeros(rr.shape)
        out: list[TermFields] = []

        def pack(tf: TermFields) -> TermFields:
            return TermFields(*(a.reshape(shape) for a in
                                (tf.t, tf.t_r, tf.t_rr, tf.t_p, tf.t_pp)))

        if region == 1:
            with_exp = self.case_kind == "V"
            # term A: mode -n
            w, l1, l2 = self._mode_w(n, rr)
            if with_exp:
                q, q1, q2 = self._phiab_w((n, n - 2 * k), self.psi4_1, rr)
                w, l1, l2 = w + q, l1 + q1, l2 + q2
            psi = self.psi1_1(rr)
            out.append(pack(_assemble_term(psi, w, l1, l2,
                                           -n * pp, -n + zero, zero, off)))
            # term B: transition mode with the angular profile
            w, l1, l2 = self._mode_w(n - 2 * k, rr)
            w = w + self.log_neg_b
            if with_exp:
                q, q1, q2 = self._phiab_w((n, n - 2 * k), self.psi3_1, rr)
                w, l1, l2 = w + q, l1 + q1, l2 + q2
            psi = self.psi2_1(rr)
            fv, fp = self.phase.f(pp)
            theta = (n + 2 * k) * pp + self.phase.Phi(pp)
            out.append(pack(_assemble_term(psi, w, l1, l2,
                                           theta, (n + 2 * k) + fv, fp, off)))
        elif region == 2:
            w, l1, l2 = self._mode_w(n - 2 * k, rr)
            w = w + self.log_neg_b
            p0, p1, p2 = self.psi_s2(rr)
            big_phi = self.phase.Phi(pp)
            fv, fp = self.phase.f(pp)
            w = w + 1j * p0 * big_phi
            l1 = l1 + 1j * p1 * big_phi
            l2 = l2 + 1j * p2 * big_phi
            theta = (n + 2 * k) * pp
            out.append(pack(_assemble_term(_ONE, w, l1, l2, theta,
                                           (n + 2 * k) + p0 * fv, p0 * fp, off)))
        elif region == 3:
            theta = (n + 2 * k) * pp
            th1 = (n + 2 * k) + zero
            w, l1, l2 = self._mode_w(n - 2 * k, rr)
            w = w + self.log_neg_b
            out.append(pack(_assemble_term(self.psi_s3(rr), w, l1, l2,
                                           theta, th1, zero, off)))
            w, l1, l2 = self._mode_w(n + 2 * k, rr)
            w = w + self.log_neg_b1
            out.append(pack(_assemble_term(self.psi_s3c(rr), w, l1, l2,
                                           theta, th1, zero, off)))
        elif region == 4:
            with_exp = self.case_kind == "V"
            # term A: mode +(n+2k)
            w, l1, l2 = self._mode_w(n + 2 * k, rr)
            w = w + self.log_neg_b1
            if with_exp:
                q, q1, q2 = self._phiab_w((n + k, n + 2 * k), self.psi4_4, rr)
                w, l1, l2 = w + q, l1 + q1, l2 + q2
            psi = self.psi1_4(rr)
            out.append(pack(_assemble_term(psi, w, l1, l2,
                                           (n + 2 * k) * pp, (n + 2 * k) + zero,
                                           zero, off)))
            # term B: final mode -(n+k)
            w, l1, l2 = self._mode_w(n + k, rr)
            w = w + self.log_a
            if with_exp:
                q, q1, q2 = self._phiab_w((n + k, n + 2 * k), self.psi3_4, rr)
                w, l1, l2 = w + q, l1 + q1, l2 + q2
            psi = self.psi2_4(rr)
            out.append(pack(_assemble_term(psi, w, l1, l2,
                                           -(n + k) * pp, -(n + k) + zero,
                                           zero, off)))
        else:  # pragma: no cover
            raise ValueError(f"unknown region {region}")
        return out

    def region_of(self, r) -> np.ndarray:
        c = self.c_of(r)
        reg = np.ones(np.shape(c), dtype=np.int64)
        reg = np.where(c >= 2.0, 2, reg)
        reg = np.where(c >= 3.0, 3, reg)
        reg = np.where(c >= 4.0, 4, reg)
        return reg

    def fields(self, r, phi, offset=None, region=None) -> Fields:
        """Evaluate u and its derivatives relative to exp(offset).

        Points are grouped by step region; at interior region boundaries both
        formulas agree, so the dispatch choice there is immaterial.
        """
        r = np.asarray(r, dtype=float)
        # all angular dependence is 2 pi periodic (integer modes and the
        # period profile); wrapping keeps huge phases off the trig rounding
        phi = np.mod(np.asarray(phi, dtype=float), 2.0 * math.pi)
        r, phi = np.broadcast_arrays(r, phi)
        if offset is None:
            offset = self.log_magnitude(r)
        offset = np.broadcast_to(np.asarray(offset, dtype=float), r.shape)
        regions = np.broadcast_to(np.asarray(
            self.region_of(r) if region is None else region), r.shape)

        n_terms = 2 if int(np.max(regions)) != 2 or int(np.min(regions)) != 2 else 1
        shape = r.shape
        acc = [np.zeros(shape, dtype=complex) for _ in range(5)]
        terms = [TermFields(*(np.zeros(shape, dtype=complex) for _ in range(5)))
                 for _ in range(2)]
        for reg in np.unique(regions):
            m = regions == reg
            sub = self._terms(int(reg), r[m], phi[m], offset[m])
            for ti, tf in enumerate(sub):
                for ai, name in enumerate(("t", "t_r", "t_rr", "t_p", "t_pp")):
                    val = getattr(tf, name)
                    acc[ai][m] += val
                    getattr(terms[ti], name)[m] = val
        out = Fields(*acc, offset=np.asarray(offset), terms=terms[:max(1, n_terms)])
        out.r = r
        return out

    # -- modulus profile ----------------------------------------------------

    def log_magnitude(self, r) -> np.ndarray:
        """log of the dominant-mode modulus profile (continuous, piecewise smooth)."""
        return self._log_mag(r)[0]

    def log_magnitude_derivative(self, r) -> np.ndarray:
        return self._log_mag(r)[1]

    def _log_mag(self, r):
        r = np.asarray(r, dtype=float)
        rr = np.ravel(r)
        c = np.ravel(self.c_of(r))
        n, k = self.n, self.k
        out = np.empty(rr.shape)
        dout = np.empty(rr.shape)
        with_exp = self.case_kind == "V"

        segs = [
            (c < 1.0, n, self.psi4_1, (n, n - 2 * k), 0.0),
            ((c >= 1.0) & (c < 2.0), n - 2 * k, self.psi3_1, (n, n - 2 * k),
             self.log_b.real),
            ((c >= 2.0) & (c < 3.0), n - 2 * k, None, None, self.log_b.real),
            ((c >= 3.0) & (c < 4.0), n - 2 * k, None, None, self.log_b.real),
            ((c >= 4.0) & (c < 5.0), n + 2 * k, self.psi4_4, (n + k, n + 2 * k),
             self.log_b1.real),
            (c >= 5.0, n + k, self.psi3_4, (n + k, n + 2 * k), self.log_a.real),
        ]
        for mask, nu, cutoff, pair, base in segs:
            if not np.any(mask):
                continue
            rm = rr[mask]
            _, w_mu, l1_mu, _ = K.mode_pieces(float(nu), self.lam, rm)
            val = base - nu * np.log(rm) + w_mu.real
            dva = l1_mu.real - nu / rm
            if with_exp and cutoff is not None:
                q, q1, _ = self._phiab_w(pair, cutoff, rm)
                val = val + q.real
                dva = dva + q1.real
            out[mask] = val
            dout[mask] = dva
        # amplitude-swap factor on step 3
        m3 = (c >= 3.0) & (c < 4.0)
        if np.any(m3):
            rm = rr[m3]
            p0, p1, _ = self.psi_s3(rm)
            _, wm, l1m, _ = K.mode_pieces(float(n - 2 * k), self.lam, rm)
            _, wp, l1p, _ = K.mode_pieces(float(n + 2 * k), self.lam, rm)
            log_g = (self.log_d - 4.0 * k * np.log(rm) + wp - wm)
            g = np.exp(log_g)
            gp = g * (l1p - l1m - 4.0 * k / rm)
            h = p0 + (1.0 - p0) * g
            hp = p1 * (1.0 - g) + (1.0 - p0) * gp
            out[m3] += np.log(np.abs(h))
            dout[m3] += (hp / h).real
        return out.reshape(r.shape), dout.reshape(r.shape)

    # -- potentials ----------------------------------------------------------

    def potential_v(self, r, phi, fields: Fields | None = None) -> np.ndarray:
        if self.case_kind != "V":
            raise ValueError("scalar potential is defined for the V-type annulus")
        fl = fields or self.fields(r, phi)
        num = fl.lap + self.lam * fl.u
        floor = sum(np.abs(t.t) for t in fl.terms)
        bad = np.abs(fl.u) < 1e-3 * np.maximum(floor, 1e-300)
        if np.any(bad):
            raise ConstructionError(
                "solution modulus fell below its guaranteed floor "
                "(two-term cancellation); the smallness/sector bounds are violated")
        return num / fl.u

    def potential_w(self, r, phi, fields: Fields | None = None):
        """Frame components (w_radial, w_tangential) of the gradient-term field.

        The field is w_r * e_r + w_t * (i sin phi, -i cos phi); its pairing
        with the gradient is w_r u_r - i w_t u_phi / r.
        """
        if self.case_kind != "W":
            raise ValueError("gradient-term potential is defined for the W-type annulus")
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        r, phi = np.broadcast_arrays(r, phi)
        fl = fields or self.fields(r, phi)
        num = fl.lap + self.lam * fl.u
        c = self.c_of(r)
        w_r = np.zeros(r.shape, dtype=complex)
        w_t = np.zeros(r.shape, dtype=complex)

        radial_band = (c >= 2.0) & (c < 4.0)
        tangential = ((c < 2.0 / 3.0) | ((c >= 4.0 / 3.0) & (c < 2.0))
                      | ((c >= 4.0) & (c < 14.0 / 3.0)) | (c >= 16.0 / 3.0))
        mixed = ~radial_band & ~tangential

        if np.any(radial_band):
            m = radial_band
            den = fl.u_r[m]
            self._check_floor(np.abs(den), np.abs(fl.u[m]) * (self.n - 2 * self.k) / r[m],
                              "radial log-derivative")
            w_r[m] = num[m] / den
        if np.any(tangential):
            m = tangential
            den = -1j * fl.u_p[m] / r[m]
            scale = (sum(np.abs(t.t[m]) for t in fl.terms)) * self.n / r[m]
            self._check_floor(np.abs(den), scale, "angular log-derivative")
            w_t[m] = num[m] / den
        if np.any(mixed):
            m = mixed
            ta, tb = fl.terms
            j1 = ta.t_r[m] / ta.t[m]
            j2 = -1j * ta.t_p[m] / (r[m] * ta.t[m])
            jt1 = tb.t_r[m] / tb.t[m]
            jt2 = -1j * tb.t_p[m] / (r[m] * tb.t[m])
            lam = self.lam
            ja = ((ta.t_rr[m] + ta.t_r[m] / r[m] + ta.t_pp[m] / r[m] ** 2)
                  / ta.t[m] + lam)
            jb = ((tb.t_rr[m] + tb.t_r[m] / r[m] + tb.t_pp[m] / r[m] ** 2)
                  / tb.t[m] + lam)
            det = j1 * jt2 - j2 * jt1
            self._check_floor(np.abs(det), (self.n / r[m]) ** 2, "frame determinant")
            w_r[m] = (ja * jt2 - jb * j2) / det
            w_t[m] = (j1 * jb - jt1 * ja) / det
        return w_r, w_t

    @staticmethod
    def _check_floor(value: np.ndarray, scale: np.ndarray, name: str,
                     rel: float = 1e-3) -> None:
        if np.any(value < rel * np.maximum(scale, 1e-300)):
            raise ConstructionError(
                f"{name} fell below its guaranteed lower bound; the mode-ratio "
                "guards are violated at this radius")

    def potential_magnitude(self, r, phi) -> np.ndarray:
        if self.case_kind == "V":
            return np.abs(self.potential_v(r, phi))
        w_r, w_t = self.potential_w(r, phi)
        phi_b = np.broadcast_arrays(np.asarray(r, float), np.asarray(phi, float))[1]
        wx = w_r * np.cos(phi_b) + 1j * w_t * np.sin(phi_b)
        wy = w_r * np.sin(phi_b) - 1j * w_t * np.cos(phi_b)
        return np.sqrt(np.abs(wx) ** 2 + np.abs(wy) ** 2)

    # -- guard validation ----------------------------------------------------

    def validate(self) -> dict:
        """Measure the mode-ratio, swap-factor, sector, and phase guards.

        Raises ConstructionError (naming the bound) on any violation; returns
        the measured constants otherwise.
        """
        n, k, lam = self.n, self.k, self.lam
        out: dict[str, float] = {}

        def log_ratio(nu_hi, nu_lo, log_cst, r):
            _, w_hi, _, _ = K.mode_pieces(float(nu_hi), lam, r)
            _, w_lo, _, _ = K.mode_pieces(float(nu_lo), lam, r)
            return (log_cst.real + (2 * k) * np.log(r) + w_hi.real - w_lo.real)

        # step-1 swap ratios |u2/u1|
        r = np.linspace(self.x(0.0), self.x(2.0 / 3.0), 200)
        _, wb, _, _ = K.mode_pieces(float(n - 2 * k), lam, r)
        _, wa, _, _ = K.mode_pieces(float(n), lam, r)
        lr = self.log_b.real + 2 * k * np.log(r) + wb.real - wa.real
        c_low = float(-np.max(lr))
        r = np.linspace(self.x(4.0 / 3.0), self.x(2.0), 200)
        _, wb, _, _ = K.mode_pieces(float(n - 2 * k), lam, r)
        _, wa, _, _ = K.mode_pieces(float(n), lam, r)
        c_high = float(np.min(self.log_b.real + 2 * k * np.log(r) + wb.real - wa.real))
        if c_low <= 0 or c_high <= 0:
            raise ConstructionError(
                "mode-swap smallness bound violated on the first rearrangement "
                f"(measured log-ratios {-c_low:.3g}, {c_high:.3g})")
        out["step1_ratio_log_low"] = c_low
        out["step1_ratio_log_high"] = c_high

        # step-4 swap ratios |u5/u4|
        r = np.linspace(self.x(4.0), self.x(14.0 / 3.0), 200)
        _, wb, _, _ = K.mode_pieces(float(n + k), lam, r)
        _, wa, _, _ = K.mode_pieces(float(n + 2 * k), lam, r)
        lr = (self.log_a.real - self.log_b1.real + k * np.log(r) + wb.real - wa.real)
        c4_low = float(-np.max(lr))
        r = np.linspace(self.x(16.0 / 3.0), self.x(6.0), 200)
        _, wb, _, _ = K.mode_pieces(float(n + k), lam, r)
        _, wa, _, _ = K.mode_pieces(float(n + 2 * k), lam, r)
        c4_high = float(np.min(self.log_a.real - self.log_b1.real
                               + k * np.log(r) + wb.real - wa.real))
        if c4_low <= 0 or c4_high <= 0:
            raise ConstructionError(
                "mode-swap smallness bound violated on the final rearrangement "
                f"(measured log-ratios {-c4_low:.3g}, {c4_high:.3g})")
        out["step4_ratio_log_low"] = c4_low
        out["step4_ratio_log_high"] = c4_high

        # amplitude-swap factor range on step 3
        r = np.linspace(self.x(3.0), self.x(4.0), 400)
        _, wm, _, _ = K.mode_pieces(float(n - 2 * k), lam, r)
        _, wp, _, _ = K.mode_pieces(float(n + 2 * k), lam, r)
        log_g = self.log_d.real - 4.0 * k * np.log(r) + wp.real - wm.real
        if np.max(log_g) > 1e-9:
            raise ConstructionError("amplitude-swap factor exceeded unit modulus")
        out["swap_factor_log_min"] = float(np.min(log_g))

        # angular phase: relative phase stays in the protected sector, and the
        # phase speed stays above the base mode index
        t_per = self.phase.T
        mids = np.linspace(0.2 * t_per, 0.8 * t_per, 101)
        s = self.phase.S(mids)
        margin = min(float(np.min(s)) - math.pi / 7.0,
                     2.0 * math.pi - math.pi / 7.0 - float(np.max(s)))
        if margin < 0:
            raise ConstructionError("protected phase sector violated on the "
                                    "middle of the period")
        out["sector_margin"] = margin
        grid = np.linspace(0.0, t_per, 400)
        fv, _ = self.phase.f(grid)
        s_speed = 2 * n + 2 * k + fv
        if np.min(s_speed) <= n:
            raise ConstructionError("phase speed dropped to the base mode index")
        out["min_phase_speed_over_n"] = float(np.min(s_speed)) / n

        # imaginary-part margin of the mode-ratio on the middle band
        im_sup = self.im_ratio_sup()
        if im_sup > 0.5 * SIN_PI_7:
            raise ConstructionError(
                f"imaginary part of the mode ratio ({im_sup:.4g}) exceeds "
                f"half of sin(pi/7); eigenvalue too large for this radius")
        out["im_ratio_sup"] = im_sup
        out["im_ratio_budget"] = 0.5 * SIN_PI_7
        return out

    def im_ratio_sup(self, n_samples: int = 256) -> float:
        """sup of |Im(r^{-2k} mu_n / (b mu_{n-2k}))| where the ratio has
        modulus in [1/2, 2] on the middle band.

        Away from unit modulus the distance of the ratio to any unit phasor
        already exceeds 1/2, so only the near-unit stretch constrains the
        modulus floor.
        """
        r = np.linspace(self.x(2.0 / 3.0), self.x(4.0 / 3.0), n_samples)
        _, wn, _, _ = K.mode_pieces(float(self.n), self.lam, r)
        _, wm, _, _ = K.mode_pieces(float(self.n - 2 * self.k), self.lam, r)
        log_q = -2.0 * self.k * np.log(r) + wn - wm - self.log_b
        near_unit = np.abs(np.real(log_q)) <= math.log(2.0)
        if not np.any(near_unit):
            return 0.0
        return float(np.max(np.abs(np.imag(np.exp(log_q[near_unit])))))


def build_annulus(spec: AnnulusSpec) -> tuple[Annulus, dict]:
    """Construct one annulus and run its guard validation."""
    ann = Annulus(spec)
    return ann, ann.validate()


# ---------------------------------------------------------------------------
# inner cap and global assembly
# ---------------------------------------------------------------------------

class InnerCap:
    """Smooth positive radial profile on [0, rho1] matching the first annulus.

    The profile is exp(n1 chi(r) log r) with chi sliding from +1 to -1 over a
    window well inside the disk, so the solution rises like r^{n1} near the
    origin and equals r^{-n1} at the junction.
    """

    def __init__(self, n1: int, rho1: float, lam: complex, case_kind: str):
        self.n1, self.rho1, self.lam = n1, rho1, complex(lam)
        self.case_kind = case_kind
        if abs(self.lam) * rho1 ** 2 >= 0.95 * n1 ** 2:
            raise ConstructionError(
                "mode-factor domain violated on the inner cap: |lambda| rho1^2 "
                "must stay below n1^2")
        r_a = min(0.5, rho1 / 8.0)
        r_b = min(2.0, rho1 / 2.0)
        self.blend = Cutoff(r_a, r_b, 1.0, -1.0)

    def _chi(self, r):
        return self.blend(r)

    def fields(self, r, phi, offset=None) -> Fields:
        r = np.asarray(r, dtype=float)
        phi = np.mod(np.asarray(phi, dtype=float), 2.0 * math.pi)
        r, phi = np.broadcast_arrays(r, phi)
        rr, pp = np.ravel(r), np.ravel(phi)
        n1 = self.n1
        c0, c1, c2 = self._chi(rr)
        lnr = np.log(rr)
        g = n1 * c0 * lnr
        g1 = n1 * (c1 * lnr + c0 / rr)
        g2 = n1 * (c2 * lnr + 2.0 * c1 / rr - c0 / rr ** 2)
        _, w_mu, l1_mu, l2_mu = K.mode_pieces(float(n1), self.lam, rr)
        w = g + w_mu
        l1 = g1 + l1_mu
        l2 = g2 + l2_mu
        if offset is None:
            offset = w.real.reshape(r.shape)
        off = np.ravel(np.broadcast_to(np.asarray(offset, dtype=float), r.shape))
        zero = np.zeros(rr.shape)
        tf = _assemble_term(_ONE, w, l1, l2, -n1 * pp, -n1 + zero, zero, off)
        shape = r.shape
        tf = TermFields(*(a.reshape(shape) for a in (tf.t, tf.t_r, tf.t_rr,
                                                     tf.t_p, tf.t_pp)))
        out = Fields(tf.t, tf.t_r, tf.t_rr, tf.t_p, tf.t_pp,
                     offset=np.broadcast_to(np.asarray(offset, float), shape),
                     terms=[tf])
        out.r = r
        return out

    def log_magnitude(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        rr = np.ravel(r)
        c0, _, _ = self._chi(rr)
        _, w_mu, _, _ = K.mode_pieces(float(self.n1), self.lam, rr)
        return (self.n1 * c0 * np.log(rr) + w_mu.real).reshape(r.shape)

    def potential_v(self, r, phi, fields: Fields | None = None) -> np.ndarray:
        fl = fields or self.fields(r, phi)
        return (fl.lap + self.lam * fl.u) / fl.u

    def potential_w(self, r, phi, fields: Fields | None = None):
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        r, phi = np.broadcast_arrays(r, phi)
        fl = fields or self.fields(r, phi)
        num = fl.lap + self.lam * fl.u
        w_t = num / (-1j * fl.u_p / r)
        return np.zeros_like(w_t), w_t


@dataclass
class PiecewiseSolution:
    """Solution assembled over an inner cap and finitely many annuli."""

    case_kind: str
    lam: complex
    beta0: float
    cap: InnerCap
    annuli: list[Annulus]
    guards: list[dict]
    log_prefixes: list[float] = field(default_factory=list)
    arg_prefixes: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.log_prefixes:
            lp, ap = 0.0, 0.0
            for ann in self.annuli:
                self.log_prefixes.append(lp)
                self.arg_prefixes.append(ap)
                lp += ann.log_a.real
                ap += ann.log_a.imag
        self.radii = [a.r_lo for a in self.annuli] + [self.annuli[-1].r_hi]

    @property
    def r_min(self) -> float:
        return 0.0

    @property
    def r_max(self) -> float:
        return self.annuli[-1].r_hi

    def annulus_index(self, r) -> np.ndarray:
        """-1 for the cap, else index into the annulus list (clamped at top)."""
        r = np.asarray(r, dtype=float)
        idx = np.searchsorted(np.asarray(self.radii), np.ravel(r), side="right") - 1
        idx = np.clip(idx, -1, len(self.annuli) - 1)
        return idx.reshape(r.shape)

    def _piece(self, i: int):
        if i < 0:
            return self.cap, 0.0, 0.0
        return self.annuli[i], self.log_prefixes[i], self.arg_prefixes[i]

    def fields(self, r, phi, offset=None, piece=None) -> Fields:
        """Global fields relative to exp(offset); prefixes folded in."""
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        r, phi = np.broadcast_arrays(r, phi)
        idx = np.broadcast_to(self.annulus_index(r) if piece is None else piece,
                              r.shape)
        if offset is None:
            offset = self.log_magnitude(r)
        offset = np.broadcast_to(np.asarray(offset, dtype=float), r.shape)
        shape = r.shape
        acc = [np.zeros(shape, dtype=complex) for _ in range(5)]
        for i in np.unique(idx):
            m = idx == i
            piece_obj, lp, ap = self._piece(int(i))
            local = piece_obj.fields(r[m], phi[m], offset=offset[m] - lp)
            rot = cmath.exp(1j * ap)
            for ai, name in enumerate(("u", "u_r", "u_rr", "u_p", "u_pp")):
                acc[ai][m] = getattr(local, name) * rot
        out = Fields(*acc, offset=np.asarray(offset), terms=[])
        out.r = r
        return out

    def log_magnitude(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        idx = self.annulus_index(r)
        out = np.empty(r.shape)
        for i in np.unique(idx):
            m = idx == i
            piece_obj, lp, _ = self._piece(int(i))
            out[m] = piece_obj.log_magnitude(r[m]) + lp
        return out

    # -- public evaluation api ----------------------------------------------

    def eval_u(self, r, phi, offset=None):
        """Normalized solution value u * exp(-offset) and the offset used."""
        r = np.asarray(r, dtype=float)
        self._check_range(r)
        if offset is None:
            offset = self.log_magnitude(r)
        fl = self.fields(r, phi, offset=offset)
        return fl.u, fl.offset

    def eval_grad_u(self, r, phi, offset=None):
        """Normalized polar-frame gradient (u_r, u_phi / r)."""
        r = np.asarray(r, dtype=float)
        self._check_range(r)
        if offset is None:
            offset = self.log_magnitude(r)
        fl = self.fields(r, phi, offset=offset)
        return fl.u_r, fl.u_p / np.asarray(r, dtype=float), fl.offset

    def _check_range(self, r) -> None:
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0) or np.any(r > self.r_max + 1e-9):
            raise ValueError(f"radius outside the built range (0, {self.r_max:.4g}]")

    def eval_potential(self, r, phi):
        """Scalar potential (V case) or frame pair (W case) at the points."""
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        r, phi = np.broadcast_arrays(r, phi)
        self._check_range(r)
        idx = self.annulus_index(r)
        if self.case_kind == "V":
            out = np.empty(r.shape, dtype=complex)
            for i in np.unique(idx):
                m = idx == i
                piece_obj, _, _ = self._piece(int(i))
                out[m] = piece_obj.potential_v(r[m], phi[m])
            return out
        w_r = np.empty(r.shape, dtype=complex)
        w_t = np.empty(r.shape, dtype=complex)
        for i in np.unique(idx):
            m = idx == i
            piece_obj, _, _ = self._piece(int(i))
            a, b = piece_obj.potential_w(r[m], phi[m])
            w_r[m], w_t[m] = a, b
        return w_r, w_t

    def potential_magnitude(self, r, phi) -> np.ndarray:
        if self.case_kind == "V":
            return np.abs(self.eval_potential(r, phi))
        r, phi = np.broadcast_arrays(np.asarray(r, float), np.asarray(phi, float))
        w_r, w_t = self.eval_potential(r, phi)
        wx = w_r * np.cos(phi) + 1j * w_t * np.sin(phi)
        wy = w_r * np.sin(phi) - 1j * w_t * np.cos(phi)
        return np.sqrt(np.abs(wx) ** 2 + np.abs(wy) ** 2)

    # -- residual oracle ------------------------------------------------------

    def residual(self, r, phi, h_factor: float = 0.012):
        """Independent finite-difference check of the governing equation.

        Returns |FD-laplacian u + lam u - potential term| normalized by the
        sum of the magnitudes of the constituent terms; the potential itself
        comes from the analytic construction.  The fourth-order step is
        h_factor / (local frequency), balancing truncation against rounding.
        """
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        r, phi = np.broadcast_arrays(r, phi)
        r = np.array(r, dtype=float)
        phi = np.array(phi, dtype=float)
        idx = self.annulus_index(r)
        freq = np.empty(r.shape)
        for i in np.unique(idx):
            m = idx == i
            piece_obj, _, _ = self._piece(int(i))
            nn = piece_obj.n1 if isinstance(piece_obj, InnerCap) else piece_obj.n
            kk = 0 if isinstance(piece_obj, InnerCap) else piece_obj.k
            freq[m] = nn + 7 * kk
            if isinstance(piece_obj, Annulus):
                # The profiles have C^4 contact at finitely many loci (the
                # amplitude-swap cutoff edge in r, the ramp joints in phi)
                # where the next derivative is too large for any fixed
                # stencil; sample points are nudged a few steps clear so the
                # stencil never straddles those loci.
                ann = piece_obj
                x_edge = ann.x(11.0 / 3.0)
                pad = 16.0 * h_factor * x_edge / freq[m][0]
                near = m & (np.abs(r - x_edge) < pad)
                if np.any(near):
                    side = np.where(r[near] >= x_edge, 1.0, -1.0)
                    r[near] = x_edge + side * pad
                t_per = ann.phase.T
                pad_x = 12.0 * (h_factor / freq[m][0]) / t_per
                x_frac = np.mod(phi, t_per) / t_per
                for joint in (0.2, 16.0 / 45.0, 29.0 / 45.0, 0.8):
                    near = m & (np.abs(x_frac - joint) < pad_x)
                    if np.any(near):
                        side = np.where(x_frac[near] >= joint, 1.0, -1.0)
                        phi[near] += (joint + side * pad_x - x_frac[near]) * t_per
                        x_frac[near] = joint + side * pad_x
        h_r = h_factor * r / freq
        h_r = np.minimum(h_r, (self.r_max - r) / 2.1)
        h_r = np.minimum(h_r, r / 2.1)
        h_p = h_factor / freq

        offset = self.log_magnitude(r)
        u = {}
        for s in (-2, -1, 0, 1, 2):
            u[("r", s)] = self.fields(r + s * h_r, phi, offset=offset).u
            if s != 0:
                u[("p", s)] = self.fields(r, phi + s * h_p, offset=offset).u
        u0 = u[("r", 0)]
        d2r = (-u[("r", 2)] + 16 * u[("r", 1)] - 30 * u0 + 16 * u[("r", -1)]
               - u[("r", -2)]) / (12 * h_r * h_r)
        d1r = (-u[("r", 2)] + 8 * u[("r", 1)] - 8 * u[("r", -1)]
               + u[("r", -2)]) / (12 * h_r)
        d2p = (-u[("p", 2)] + 16 * u[("p", 1)] - 30 * u0 + 16 * u[("p", -1)]
               - u[("p", -2)]) / (12 * h_p * h_p)
        d1p = (-u[("p", 2)] + 8 * u[("p", 1)] - 8 * u[("p", -1)]
               + u[("p", -2)]) / (12 * h_p)
        lap = d2r + d1r / r + d2p / (r * r)
        if self.case_kind == "V":
            v = self.eval_potential(r, phi)
            res = lap + self.lam * u0 - v * u0
            scale = (np.abs(d2r) + np.abs(d1r / r) + np.abs(d2p / (r * r))
                     + np.abs(self.lam * u0) + np.abs(v * u0))
        else:
            w_r, w_t = self.eval_potential(r, phi)
            wterm = w_r * d1r - 1j * w_t * d1p / r
            res = lap + self.lam * u0 - wterm
            scale = (np.abs(d2r) + np.abs(d1r / r) + np.abs(d2p / (r * r))
                     + np.abs(self.lam * u0) + np.abs(wterm))
        return np.abs(res) / np.maximum(scale, 1e-300)

    # -- verification ----------------------------------------------------------

    def max_modulus(self, r, n_phi: int = 256):
        """m(r) = max over angles of |u|, returned as log m(r).

        The angular dependence of |u| repeats with the relative-phase period,
        so sampling two periods densely suffices.
        """
        r = np.asarray(r, dtype=float)
        out = np.empty(r.shape)
        flat = np.ravel(r)
        res = np.empty(flat.shape)
        idx = np.ravel(self.annulus_index(r))
        for i in np.unique(idx):
            m = idx == i
            piece_obj, lp, _ = self._piece(int(i))
            if isinstance(piece_obj, InnerCap):
                res[m] = piece_obj.log_magnitude(flat[m]) + lp
                continue
            t_per = piece_obj.phase.T
            phis = np.linspace(0.0, 2.0 * t_per, n_phi, endpoint=False)
            rm = flat[m]
            offset = piece_obj.log_magnitude(rm) + lp
            fl = self.fields(rm[:, None], phis[None, :],
                             offset=offset[:, None])
            res[m] = offset + np.log(np.max(np.abs(fl.u), axis=1))
        out = res.reshape(r.shape)
        return out

    def verify_decay(self, n_radii: int = 120) -> VerificationReport:
        """Decay along the annuli: modulus comparison, derivative sign, and a
        least-squares fit of the decay exponent."""
        rep = VerificationReport(f"decay-{self.case_kind}")
        b0 = self.beta0
        rs, log_m, log_big = [], [], []
        for ann, lp in zip(self.annuli, self.log_prefixes):
            grid = np.linspace(ann.r_lo * 1.0001, ann.r_hi * 0.9999, n_radii)
            rs.append(grid)
            log_big.append(ann.log_magnitude(grid) + lp)
            log_m.append(self.max_modulus(grid))
        rs = np.concatenate(rs)
        log_m = np.concatenate(log_m)
        log_big = np.concatenate(log_big)

        # the modulus stays within a factor 2 of the smooth comparison profile
        rep.check_le("modulus-vs-profile", "modulus-comparison-function",
                     float(np.max(log_m - log_big)), math.log(2.0), 1e-9)

        # junction values: the max modulus equals the profile at each inner edge
        worst = 0.0
        for ann, lp in zip(self.annuli, self.log_prefixes):
            lm = float(self.max_modulus(np.asarray(ann.r_lo + 1e-9)))
            lb = float(ann.log_magnitude(np.asarray(ann.r_lo + 1e-9))) + lp
            worst = max(worst, abs(lm - lb))
        rep.check_le("junction-modulus", "annulus-start-modulus-match",
                     worst, 1e-6)

        # profile log-derivative stays below a negative power envelope
        worst_c = math.inf
        for ann in self.annuli:
            grid = np.linspace(ann.r_lo * 1.001, ann.r_hi * 0.999, 400)
            dv = ann.log_magnitude_derivative(grid)
            env = grid ** (b0 - 1.0)
            if self.case_kind == "V":
                env = env / np.log(grid)
            worst_c = min(worst_c, float(np.min(-dv / env)))
        rep.add("profile-derivative", "profile-log-derivative-envelope",
                worst_c, 0.0, 0.0, worst_c > 0.0,
                detail="measured c in d/dr log M <= -c r^{beta0-1} (/log r)")

        # least-squares decay exponent of -log m(r).  The fit runs over the
        # junction radii plus mid-annulus samples taken where the solution is
        # a single rotating mode, so the frozen-index staircase inside each
        # annulus does not bias the exponent.
        fit_r, fit_y = [], []
        for ann in self.annuli:
            for c in (0.0, 0.05):
                rj = ann.x(c) + 1e-9
                fit_r.append(rj)
                fit_y.append(-float(self.max_modulus(np.asarray(rj))))
        fit_r.append(self.r_max - 1e-9)
        fit_y.append(-float(self.max_modulus(np.asarray(self.r_max - 1e-9))))
        fit_r = np.asarray(fit_r)
        fit_y = np.asarray(fit_y)

        if self.case_kind == "V":
            def model(r, lc, beta, d):
                return np.exp(lc) * r ** beta / np.log(r) + d

            growth = fit_r ** b0 / np.log(fit_r)
        else:
            def model(r, lc, beta, d):
                return np.exp(lc) * r ** beta + d

            growth = fit_r ** b0
        c0 = (fit_y[-1] - fit_y[0]) / (growth[-1] - growth[0])
        p0 = (math.log(max(c0, 1e-12)), b0, float(fit_y[0] - c0 * growth[0]))
        popt, _ = curve_fit(model, fit_r, fit_y, p0=p0, maxfev=20000)
        rep.check_le("decay-exponent", "fitted-decay-exponent",
                     abs(popt[1] - b0), 0.15,
                     detail=f"fitted beta = {popt[1]:.4f}, target {b0:.4f}")
        rep.metadata["fitted_beta"] = float(popt[1])
        return rep

    def continuity_report(self, n_phi: int = 720) -> VerificationReport:
        """Relative mismatch across every internal seam, all angles."""
        rep = VerificationReport(f"continuity-{self.case_kind}")
        phis = np.linspace(0.0, 2.0 * math.pi, n_phi, endpoint=False)
        worst_global = 0.0
        # seams between pieces (cap/annulus and annulus/annulus)
        for j, ann in enumerate(self.annuli):
            r0 = ann.r_lo
            offset = float(self.log_magnitude(np.asarray(r0)))
            left_piece = j - 1
            lo = self.fields(np.full(phis.shape, r0), phis, offset=offset,
                             piece=np.full(phis.shape, left_piece, dtype=int))
            hi = self.fields(np.full(phis.shape, r0), phis, offset=offset,
                             piece=np.full(phis.shape, j, dtype=int))
            scale = np.maximum(np.abs(lo.u), np.abs(hi.u))
            worst = float(np.max(np.abs(lo.u - hi.u) / np.maximum(scale, 1e-300)))
            worst_global = max(worst_global, worst)
        # seams between step regions inside each annulus
        for j, ann in enumerate(self.annuli):
            for c in (2.0, 3.0, 4.0):
                r0 = ann.x(c)
                offset = float(self.log_magnitude(np.asarray(r0))) - self.log_prefixes[j]
                lo = ann.fields(np.full(phis.shape, r0), phis, offset=offset,
                                region=np.full(phis.shape, int(c) - 1, dtype=int))
                hi = ann.fields(np.full(phis.shape, r0), phis, offset=offset,
                                region=np.full(phis.shape, int(c), dtype=int))
                scale = np.maximum(np.abs(lo.u), np.abs(hi.u))
                worst = float(np.max(np.abs(lo.u - hi.u) / np.maximum(scale, 1e-300)))
                worst_global = max(worst_global, worst)
        rep.check_le("seam-continuity", "piecewise-formula-agreement",
                     worst_global, 1e-8)
        return rep

    def residual_report(self, n_points: int = 10000, seed: int = 0,
                        tol_pure: float = 1e-6, tol_mixed: float = 1e-4) -> VerificationReport:
        """Stratified FD residual check over the built annuli."""
        rep = VerificationReport(f"residual-{self.case_kind}")
        rng = np.random.default_rng(seed)
        strata = [(0.0, 0.095), (0.105, 0.66), (0.67, 1.32), (1.34, 1.99),
                  (2.02, 2.98), (3.02, 3.98), (4.02, 4.65), (4.68, 5.31),
                  (5.34, 5.89), (5.91, 5.99)]
        pure = {0, 9}
        n_each = max(1, n_points // (len(strata) * len(self.annuli)))
        worst_pure, worst_mixed = 0.0, 0.0
        for ann, lp in zip(self.annuli, self.log_prefixes):
            for si, (c0, c1) in enumerate(strata):
                r = ann.x(c0) + (ann.x(c1) - ann.x(c0)) * rng.random(n_each)
                phi = 2.0 * math.pi * rng.random(n_each)
                res = self.residual(r, phi)
                if si in pure:
                    worst_pure = max(worst_pure, float(np.max(res)))
                else:
                    worst_mixed = max(worst_mixed, float(np.max(res)))
        rep.check_le("fd-residual-pure", "eigen-equation-residual-pure-mode",
                     worst_pure, tol_pure)
        rep.check_le("fd-residual-transition", "eigen-equation-residual-transition",
                     worst_mixed, tol_mixed)
        return rep

    def potential_decay_report(self, n_r: int = 60, n_phi: int = 48) -> VerificationReport:
        """sup r^rate |potential| per annulus; stability across annuli."""
        rep = VerificationReport(f"potential-decay-{self.case_kind}")
        b0 = self.beta0
        # decay exponent: |potential| <= C r^{-rate}
        rate = 2.0 - 1.5 * b0 if self.case_kind == "V" else 1.0 - 0.5 * b0
        sups = []
        for ann in self.annuli:
            grid_r = np.linspace(ann.r_lo * 1.0005, ann.r_hi * 0.9995, n_r)
            t_per = ann.phase.T
            grid_p = np.linspace(0.0, 2.0 * t_per, n_phi, endpoint=False)
            rr = np.broadcast_to(grid_r[:, None], (n_r, n_phi))
            pp = np.broadcast_to(grid_p[None, :], (n_r, n_phi))
            mag = ann.potential_magnitude(rr, pp)
            sups.append(float(np.max(mag * rr ** rate)))
        ratio = max(sups) / min(sups)
        rep.check_le("potential-decay-stability", "power-decay-annulus-stability",
                     ratio, 2.0, detail=f"sup r^{rate:.3f}|potential| per annulus: "
                     + ", ".join(f"{s:.4g}" for s in sups))
        rep.metadata["per_annulus_sup"] = sups
        return rep

    def sector_bound_report(self) -> VerificationReport:
        """Protected-sector and modulus floor on the middle transition band."""
        rep = VerificationReport(f"sector-{self.case_kind}")
        worst_margin = math.inf
        worst_floor = math.inf
        for ann, lp in zip(self.annuli, self.log_prefixes):
            t_per = ann.phase.T
            mids = np.linspace(0.2 * t_per, 0.8 * t_per, 64)
            s = ann.phase.S(mids)
            worst_margin = min(worst_margin,
                               float(np.min(s)) - math.pi / 7.0,
                               2.0 * math.pi - math.pi / 7.0 - float(np.max(s)))
            # modulus floor |u| >= 0.5 |transition term| sin(pi/7) on the
            # protected sectors (middle three fifths of each angular period)
            rg = np.linspace(ann.x(2.0 / 3.0) + 1e-9, ann.x(4.0 / 3.0) - 1e-9, 24)
            phis = np.linspace(0.2 * t_per, 0.8 * t_per, 64)
            rr = np.broadcast_to(rg[:, None], (rg.size, phis.size))
            pp = np.broadcast_to(phis[None, :], rr.shape)
            offset = np.broadcast_to((ann.log_magnitude(rg) + lp)[:, None], rr.shape)
            loc = ann.fields(rr, pp, offset=offset - lp)
            u = loc.u
            t2 = np.abs(loc.terms[1].t)
            ratio = np.abs(u) / np.maximum(t2, 1e-300)
            worst_floor = min(worst_floor, float(np.min(ratio)))
        rep.add("sector-margin", "protected-phase-sector", worst_margin, 0.0,
                0.0, worst_margin > 0.0)
        rep.check_le("midband-floor", "midband-modulus-floor",
                     0.5 * SIN_PI_7, worst_floor, 1e-9,
                     detail="min |u| / |transition term| across the middle band")
        return rep


def build_solution(case_kind: str, lam: complex, beta0: float, rho1: float,
                   n_annuli: int = 3) -> PiecewiseSolution:
    """Assemble the solution over an inner cap and n_annuli annuli."""
    if case_kind == "V" and not (1.0 < beta0 < 4.0 / 3.0 + 1e-12):
        raise ConstructionError("scalar-potential construction needs the decay "
                                "exponent in (1, 4/3]")
    if case_kind == "W" and not (1.0 < beta0 < 2.0):
        raise ConstructionError("gradient-term construction needs the decay "
                                "exponent in (1, 2)")
    alpha = 1.0 - beta0 / 2.0
    annuli = []
    guards = []
    rho = rho1
    for _ in range(n_annuli):
        n, k = choose_nk(rho, beta0, case_kind)
        spec = AnnulusSpec(rho, alpha, n, k, complex(lam), case_kind)
        ann, g = build_annulus(spec)
        annuli.append(ann)
        guards.append(g)
        rho = rho + 6.0 * rho ** alpha
    cap = InnerCap(annuli[0].n, rho1, complex(lam), case_kind)
    return PiecewiseSolution(case_kind, complex(lam), beta0, cap, annuli, guards)


def im_part_check(ns: list[int], lam: complex, k_of_n=None, rho_of_n=None,
                  band: float = 1.0, n_samples: int = 256) -> dict:
    """Imaginary-part sweep of the mode ratio r^{-2k} mu_n / (b mu_{n-2k}).

    By default the sweep uses k = round(sqrt(n)) and rho = sqrt(n), the
    square-root mode-gap regime of the constructions, with the matching
    constant b chosen at rho + band as in the annulus builder.  Returns the
    per-n suprema, the sup * n products, and the log-log slope.
    """
    k_of_n = k_of_n or (lambda n: max(1, round(math.sqrt(n))))
    rho_of_n = rho_of_n or (lambda n: math.sqrt(n))
    sups = []
    for n in ns:
        k = k_of_n(n)
        rho = rho_of_n(n)
        x1 = rho + band
        log_b = (-2.0 * k * math.log(x1) + complex(mu_log(n, lam, x1))
                 - complex(mu_log(n - 2 * k, lam, x1)))
        r = np.linspace(rho + 2.0 * band / 3.0, rho + 4.0 * band / 3.0, n_samples)
        _, wn, _, _ = K.mode_pieces(float(n), complex(lam), r)
        _, wm, _, _ = K.mode_pieces(float(n - 2 * k), complex(lam), r)
        log_q = -2.0 * k * np.log(r) + wn - wm - log_b
        sups.append(float(np.max(np.abs(np.imag(np.exp(log_q))))))
    ns_arr = np.asarray(ns, dtype=float)
    sups_arr = np.asarray(sups)
    slope = float(np.polyfit(np.log(ns_arr), np.log(sups_arr), 1)[0]) \
        if len(ns) >= 2 and np.all(sups_arr > 0) else math.nan
    products = [s * n for s, n in zip(sups, ns)]
    return {"n": list(ns), "sup_im": sups, "sup_im_times_n": products,
            "slope": slope}
