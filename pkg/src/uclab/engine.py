"""Recursive exponent iteration driving the unique-continuation envelope.

Implements the decreasing exponent sequences beta_j with their growth rates
gamma_j, the radius ladder T_{j+1} = T_j^{gamma_j} (kept in log space), the
three branch regimes with the clamp rule, the simplified hatted comparison
sequences, envelope evaluation, and a lemma-style checking harness over
computed trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations

import numpy as np
from scipy.optimize import brentq

from .report import VerificationReport
from .scalar import carleman_weight

__all__ = [
    "PotentialDecay",
    "EngineConstants",
    "SequenceState",
    "Branch",
    "CaseTag",
    "Trajectory",
    "beta_exponents",
    "delta_step",
    "omega_step",
    "iterate",
    "choose_m",
    "solve_T1",
    "envelope",
    "EnvelopeResult",
    "c6_theory",
    "hat_sequences",
    "hat_gamma",
    "hat_betas",
    "geometric_sum",
    "case3_v",
    "hat_identity_residual",
    "verify_trajectory",
    "gamma_product_expansion",
    "base_case_log_bound",
    "breakdown_diagnostic",
    "RegimeError",
    "LargenessError",
]

SQRT3 = math.sqrt(3.0)


class RegimeError(ValueError):
    """Raised for parameter regimes the scheme does not support."""


class LargenessError(ValueError):
    """Raised when a starting radius is too small for the scheme's assumptions."""


@dataclass(frozen=True)
class PotentialDecay:
    """Decay rates and amplitudes of the zeroth- and first-order potentials."""

    N: float = 0.0
    P: float = 0.0
    A1: float = 1.0
    A2: float = 1.0

    def __post_init__(self):
        if min(self.N, self.P, self.A1, self.A2) < 0:
            raise ValueError("decay parameters must be nonnegative")

    @property
    def gradient_term_present(self) -> bool:
        return self.A2 > 0.0


def beta_exponents(decay: PotentialDecay) -> tuple[float, float]:
    """Critical exponents (beta_c, beta0) = (max{2-2P, (4-2N)/3}, max{beta_c, 1})."""
    beta_c = max(2.0 - 2.0 * decay.P, (4.0 - 2.0 * decay.N) / 3.0)
    return beta_c, max(beta_c, 1.0)


@dataclass(frozen=True)
class EngineConstants:
    C2: float = 1.0
    C3: float = 1.0
    C4: float = 1.0
    C5: float = 1.0
    c_n: float = 0.25
    w54: float = float(carleman_weight(1.0, 1.25))

    def tilde_c4(self, decay: PotentialDecay) -> float:
        return (3.0 * 4.0 ** (1.0 + decay.P + decay.N / 3.0) * self.C3
                * self.w54 ** (2.0 / 3.0) * (decay.A1 ** (2.0 / 3.0) + decay.A2 ** 2))

    def k_first(self, decay: PotentialDecay) -> float:
        """Coefficient K in T_1^{delta_1} = K log T_1."""
        return 18.0 * self.C4 / (
            4.0 ** (3.0 + decay.P + decay.N / 3.0) * self.C3
            * self.w54 ** (2.0 / 3.0)
            * (decay.A1 ** (2.0 / 3.0) + decay.A2 ** 2) * self.c_n)

    def k_later(self) -> float:
        """Coefficient K in T_j^{delta_j} = K log T_j for j >= 2."""
        return 27.0 / (8.0 * self.c_n)

    def with_matched_first_step(self, decay: PotentialDecay) -> "EngineConstants":
        """Replace C4 so the first-step K equals the later-step 27/(8 c_n)."""
        c4 = (3.0 / 16.0) * 4.0 ** (3.0 + decay.P + decay.N / 3.0) * self.C3 \
            * self.w54 ** (2.0 / 3.0) * (decay.A1 ** (2.0 / 3.0) + decay.A2 ** 2)
        return EngineConstants(self.C2, self.C3, c4, self.C5, self.c_n, self.w54)


def delta_step(T: float, j: int, decay: PotentialDecay,
               consts: EngineConstants) -> tuple[float, bool]:
    """delta with T^delta = K log T; K depends on whether this is the first step.

    Returns (delta, flagged) where flagged means K log T <= 1, i.e. delta <= 0
    and the largeness assumptions fail.
    """
    log_t = math.log(T)
    return delta_step_log(log_t, j, decay, consts)


def delta_step_log(log_t: float, j: int, decay: PotentialDecay,
                   consts: EngineConstants) -> tuple[float, bool]:
    if log_t <= 0:
        raise ValueError("need T > 1 (and T > e for the log log T diagnostics)")
    k = consts.k_first(decay) if j == 1 else consts.k_later()
    arg = k * log_t
    if arg <= 1.0:
        return (0.0 if arg == 1.0 else math.log(arg) / log_t), True
    return math.log(arg) / log_t, False


def omega_step(T: float, decay: PotentialDecay) -> float:
    """omega solving T^{3P-N} + T = T^{3P-N+omega}, computed stably in logs."""
    return omega_step_log(math.log(T), decay)


def omega_step_log(log_t: float, decay: PotentialDecay) -> float:
    if log_t <= 0:
        raise ValueError("need T > 1")
    x = (1.0 - (3.0 * decay.P - decay.N)) * log_t
    return float(np.logaddexp(0.0, x)) / log_t


class Branch(Enum):
    FIRST = "first"
    SECOND = "second"
    CLAMPED = "clamped"


@dataclass(frozen=True)
class CaseTag:
    variant: int          # 1, 2 or 3
    J: int | None = None  # first second-choice index, Case 3 only

    def __str__(self) -> str:
        if self.variant == 3:
            return f"Case3(J={self.J})"
        return f"Case{self.variant}"


@dataclass
class SequenceState:
    j: int
    log_t: float
    gap_raw: float        # beta - 1 as produced by the previous step's formula
    gap: float            # beta - 1 after the clamp rule
    delta: float
    omega: float
    h: float
    ell: float
    branch: Branch
    gamma: float
    log_gamma_prod: float # log Gamma_j = sum of log gamma_k, k <= j

    @property
    def beta_raw(self) -> float:
        return 1.0 + self.gap_raw

    @property
    def beta(self) -> float:
        return 1.0 + self.gap

    @property
    def T(self) -> float:
        return math.exp(self.log_t) if self.log_t < 700 else math.inf

    @property
    def clamped(self) -> bool:
        return self.branch is Branch.CLAMPED


@dataclass
class Trajectory:
    decay: PotentialDecay
    consts: EngineConstants
    states: list[SequenceState]
    final_gap_raw: float      # beta_{m+1} - 1 produced by the last step
    final_log_t: float        # log T_{m+1}
    diagnostics: list[str] = field(default_factory=list)
    truncated: bool = False

    @property
    def final_beta_raw(self) -> float:
        return 1.0 + self.final_gap_raw

    def __len__(self) -> int:
        return len(self.states)

    @property
    def case(self) -> CaseTag:
        branches = [s.branch for s in self.states]
        if all(b is Branch.SECOND for b in branches):
            return CaseTag(2)
        if all(b is not Branch.SECOND for b in branches):
            return CaseTag(1)
        j_switch = next(i + 1 for i, b in enumerate(branches) if b is Branch.SECOND)
        return CaseTag(3, J=j_switch)

    @property
    def gammas(self) -> np.ndarray:
        return np.array([s.gamma for s in self.states])

    @property
    def betas(self) -> np.ndarray:
        return np.array([s.beta for s in self.states])

    @property
    def deltas(self) -> np.ndarray:
        return np.array([s.delta for s in self.states])

    @property
    def log_gamma_final(self) -> float:
        return self.states[-1].log_gamma_prod if self.states else 0.0

    @property
    def max_gamma(self) -> float:
        return float(np.max(self.gammas)) if self.states else 1.0

    def rows(self) -> list[dict]:
        out = []
        for s in self.states:
            out.append({"j": s.j, "T": s.T, "logT": s.log_t, "beta": s.beta,
                        "gamma": s.gamma, "delta": s.delta, "omega": s.omega,
                        "branch": s.branch.value})
        out.append({"j": len(self.states) + 1, "T": math.exp(self.final_log_t)
                    if self.final_log_t < 700 else math.inf,
                    "logT": self.final_log_t, "beta": self.final_beta_raw,
                    "gamma": math.nan, "delta": math.nan, "omega": math.nan,
                    "branch": "final"})
        return out


def iterate(decay: PotentialDecay, consts: EngineConstants, T1: float,
            max_steps: int, log_t1: float | None = None,
            enforce_validity: bool = True) -> Trajectory:
    """Run the exponent recursion for max_steps steps starting at radius T1.

    beta_1 is 2 when the gradient potential is present and 4/3 otherwise; with
    no gradient potential the second-choice formulas are used throughout.
    The clamp rule replaces beta_j by h_j whenever beta_j lands strictly
    between ell_j and h_j, or drops below h_j immediately after a step with
    beta_{j-1} > h_{j-1}; ties beta_j == h_j stay on the first choice.

    The state tracks the gap beta_j - 1; both branch formulas reduce to
    gap_{j+1} = (gap_j + delta_j) / gamma_j, which keeps the stepwise
    log-exponent balance exact to rounding even when the gap is tiny.

    With enforce_validity=False the recursion runs formally through largeness
    violations (for breakdown diagnostics), still collecting them.
    """
    log_t = math.log(T1) if log_t1 is None else log_t1
    w_present = decay.gradient_term_present
    gap_raw = 1.0 if w_present else 1.0 / 3.0
    states: list[SequenceState] = []
    diagnostics: list[str] = []
    truncated = False
    log_gamma = 0.0
    # a first-step beta below h is replaced by h (no prior step to compare)
    prev_strictly_above_h = True

    for j in range(1, max_steps + 1):
        delta, flagged = delta_step_log(log_t, j, decay, consts)
        if flagged:
            diagnostics.append(
                f"step {j}: K log T = {math.exp(delta * log_t):.6g} <= 1, "
                "delta not positive")
            if enforce_validity:
                truncated = True
                break
        omega = omega_step_log(log_t, decay)
        gap_h = decay.P - decay.N + omega - delta          # h_j - 1
        gap_ell = decay.P - decay.N + omega / 3.0 - delta  # ell_j - 1

        gap = gap_raw
        if w_present:
            if gap_ell < gap < gap_h or (gap < gap_h and prev_strictly_above_h):
                gap = gap_h
                branch = Branch.CLAMPED
            elif gap >= gap_h:
                branch = Branch.FIRST
            else:
                branch = Branch.SECOND
        else:
            branch = Branch.SECOND

        if branch is Branch.SECOND:
            gamma = 3.0 * gap + 2.0 * decay.N + 3.0 * delta
        else:
            gamma = gap + 2.0 * decay.P + delta
        gap_next = (gap + delta) / gamma
        if gamma <= 1.0:
            diagnostics.append(f"step {j}: gamma = {gamma:.6g} <= 1")
            if enforce_validity:
                truncated = True
                break

        log_gamma += math.log(abs(gamma))
        states.append(SequenceState(j, log_t, gap_raw, gap, delta, omega,
                                    1.0 + gap_h, 1.0 + gap_ell, branch, gamma,
                                    log_gamma))
        if len(states) >= 2 and states[-1].gap >= states[-2].gap:
            diagnostics.append(
                f"step {j}: beta did not strictly decrease "
                f"({states[-2].beta:.6g} -> {states[-1].beta:.6g}); starting radius "
                "below the scheme's largeness regime")
        prev_strictly_above_h = gap > gap_h
        log_t *= gamma
        gap_raw = gap_next

    return Trajectory(decay, consts, states, gap_raw, log_t, diagnostics, truncated)


def _case_variant(decay: PotentialDecay) -> int:
    """Branch regime predicted from (N, P, gradient-term presence)."""
    if not decay.gradient_term_present:
        return 2
    first_dominates = 2.0 - 2.0 * decay.P >= (4.0 - 2.0 * decay.N) / 3.0
    if first_dominates or decay.P <= decay.N:
        return 1
    return 3


def choose_m(R: float, decay: PotentialDecay, case: CaseTag) -> int:
    """Iteration count reaching the target radius in the slow-decay regime."""
    beta_c, _ = beta_exponents(decay)
    if beta_c <= 1.0:
        raise RegimeError("iteration-count rule applies to beta_c > 1 only")
    llr = math.log(math.log(R))
    if case.variant == 1:
        q = 2.0 * decay.P
        if q >= 1.0:
            raise RegimeError("first-choice rate 2P must be below 1 here")
        return math.ceil(llr / math.log(1.0 / q))
    q = 2.0 * decay.N
    if q >= 1.0:
        raise RegimeError("second-choice rate 2N must be below 1 here")
    m = math.ceil(llr / math.log(1.0 / q)) if q > 0.0 else 1
    if case.variant == 3:
        if case.J is None:
            raise ValueError("switch index J required for the mixed regime")
        m += case.J
    return m


def _min_valid_log_t1(decay: PotentialDecay, consts: EngineConstants) -> float:
    """Smallest log T1 with delta_1 > 0, padded by 5%."""
    k1 = consts.k_first(decay)
    return max(1.05 / k1, 2.0)


def solve_T1(R: float, decay: PotentialDecay, consts: EngineConstants,
             m: int) -> float:
    """Starting radius with T1^{Gamma_m(T1)} = R to relative 1e-8.

    The product radius is increasing in T1 deep inside the valid regime but
    can invert near the validity floor, where the perturbation exponents
    inflate as T1 shrinks; the root is therefore bracketed by a scan over
    log T1 in [validity floor, log R] before the bisection refines it.
    """
    log_r = math.log(R)
    if m == 0:
        return R
    lo = _min_valid_log_t1(decay, consts)
    if lo >= log_r:
        raise LargenessError(
            f"target radius too small: validity floor log T1 = {lo:.4g} "
            f"already exceeds log R = {log_r:.4g}")

    def f(log_t1: float) -> float:
        traj = iterate(decay, consts, 0.0, m, log_t1=log_t1)
        if traj.truncated or len(traj) < m:
            raise LargenessError(
                "trajectory left the valid regime during the solve: "
                + "; ".join(traj.diagnostics))
        return traj.final_log_t - log_r

    grid = np.geomspace(lo, log_r, 64)
    vals = np.array([f(g) for g in grid])
    sign_change = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    if len(sign_change) == 0:
        if np.all(vals > 0):
            raise LargenessError(
                f"no starting radius reaches R: the {m}-step product radius "
                f"exceeds R everywhere on the valid bracket (m too large)")
        raise LargenessError("no root in bracket: product radius below R at T1=R")
    i = int(sign_change[-1])  # largest root = the in-regime branch
    log_t1 = brentq(f, grid[i], grid[i + 1], xtol=1e-12, rtol=1e-13, maxiter=200)
    return math.exp(log_t1)


def base_case_log_bound(T1: float, beta1: float, consts: EngineConstants) -> float:
    """log of the first-rung lower bound: log C5 - C4 T1^{beta1} log T1."""
    return math.log(consts.C5) - consts.C4 * T1 ** beta1 * math.log(T1)


def c6_theory(decay: PotentialDecay, traj: Trajectory, case: CaseTag) -> float:
    """Explicit C6 assembled from the comparison-sequence constants.

    Uses the per-case gamma-gap constant, the delta bracket factor 2/sqrt(3),
    and the trajectory's own gamma upper bound.  Valid when the relevant
    geometric rate 2Q is below 1.
    """
    if case.variant == 1:
        q = decay.P
        c_gamma = (7.0 + 2.0 * q) / (3.0 * (1.0 - 2.0 * q))
    else:
        q = decay.N
        c_gamma = (7.0 + 2.0 * q) / (1.0 - 2.0 * q)
    g = traj.max_gamma
    return 1.0 + 2.0 * q * (1.0 + (2.0 / SQRT3) * c_gamma * g)


@dataclass
class EnvelopeResult:
    R: float
    beta_c: float
    beta0: float
    case: CaseTag
    m: int
    T1: float
    C6: float
    C7: float
    log_c5_tilde: float
    log_bound: float
    trajectory: Trajectory
    m_prescribed: int | None = None


def _max_feasible_m(R: float, decay: PotentialDecay, consts: EngineConstants,
                    cap: int) -> int:
    """Largest m <= cap for which some valid T1 reaches R in m steps."""
    lo = _min_valid_log_t1(decay, consts)
    log_r = math.log(R)
    if lo >= log_r:
        return 0
    grid = np.geomspace(lo, log_r, 48)
    m = 0
    while m < cap:
        reachable = False
        for g in grid:
            traj = iterate(decay, consts, 0.0, m + 1, log_t1=g)
            if not traj.truncated and len(traj) == m + 1 \
                    and traj.final_log_t <= log_r:
                reachable = True
                break
        if not reachable:
            break
        m += 1
    return m


def envelope(R: float, decay: PotentialDecay, consts: EngineConstants,
             max_steps_cap: int = 400) -> EnvelopeResult:
    """Full pipeline: pick m, solve T1, iterate, and evaluate the envelope.

    Returns the log of the lower-bound envelope for the infimal unit-ball
    mass at radius R, together with the exponent C6 of the polylog factor
    measured from the achieved final exponent (so the reported bound equals
    the final iteration rung exactly and never overstates it).  When the
    asymptotic iteration-count prescription does not fit below the target
    radius, the largest feasible count is used and both are reported.
    Unsupported at beta_c == 1, where the iteration breaks down.
    """
    beta_c, beta0 = beta_exponents(decay)
    if beta_c == 1.0:
        raise RegimeError(
            "beta_c == 1 (min{N, P} = 1/2): the exponent sequence decays only "
            "polynomially and the iterative scheme breaks down")
    tilde_c4 = consts.tilde_c4(decay)
    c7 = tilde_c4 / 2.0
    log_c5_tilde = 0.5 * math.log(consts.C5)
    log_r = math.log(R)
    llr = math.log(log_r)
    w_present = decay.gradient_term_present
    beta1 = 2.0 if w_present else 4.0 / 3.0

    def finish(m: int, m_presc: int | None) -> EnvelopeResult:
        if m == 0:
            t1 = R
            traj = Trajectory(decay, consts, [], beta1 - 1.0, log_r)
            gap_final = beta1 - 1.0
            c_last = consts.C4
            case = CaseTag(_case_variant(decay))
        else:
            t1 = solve_T1(R, decay, consts, m)
            traj = iterate(decay, consts, t1, m)
            gap_final = traj.final_gap_raw
            c_last = tilde_c4
            case = traj.case
        # final rung: log M >= log C5~ - (c_last/2) R^{1+gap_final} log R
        log_mag = math.log(c_last / 2.0) + (1.0 + gap_final) * log_r \
            + math.log(log_r)
        log_bound = log_c5_tilde - math.exp(log_mag)
        if beta_c > 1.0:
            # match c7 R^{beta0} (log R)^{C6}
            c6 = (math.log(c_last / (2.0 * c7)) + llr
                  + (1.0 + gap_final - beta0) * log_r) / llr
        else:
            # match c7 R (log R)^{C6 log log R}
            c6 = (math.log(c_last / (2.0 * c7)) + llr
                  + gap_final * log_r) / llr ** 2
        return EnvelopeResult(R, beta_c, beta0, case, m, t1, c6, c7,
                              log_c5_tilde, log_bound, traj, m_prescribed=m_presc)

    if beta_c > 1.0:
        variant = _case_variant(decay)
        if variant == 3:
            # switch index from a pilot run, then re-solve until stable
            case = CaseTag(3, J=2)
            m_presc = choose_m(R, decay, case)
            m = min(m_presc, _max_feasible_m(R, decay, consts, m_presc))
            for _ in range(4):
                if m == 0:
                    break
                t1 = solve_T1(R, decay, consts, m)
                traj = iterate(decay, consts, t1, m)
                case_obs = traj.case
                if case_obs.variant != 3:
                    break
                m_presc = choose_m(R, decay, case_obs)
                m_new = min(m_presc, _max_feasible_m(R, decay, consts, m_presc))
                if m_new == m:
                    break
                m = m_new
            return finish(m, m_presc)
        m_presc = choose_m(R, decay, CaseTag(variant))
        m = min(m_presc, _max_feasible_m(R, decay, consts, m_presc))
        return finish(m, m_presc)

    # fast-decay regime: largest m whose product radius at the floor stays <= R
    m = _max_feasible_m(R, decay, consts, max_steps_cap)
    return finish(m, None)


# ---------------------------------------------------------------------------
# simplified (hatted) comparison sequences and their closed forms
# ---------------------------------------------------------------------------

def geometric_sum(q, j: int):
    """S_j = 1 + q + ... + q^j (works for float and Fraction)."""
    s = q ** 0
    p = q ** 0
    for _ in range(j):
        p = p * q
        s = s + p
    return s


def hat_gamma(q, j: int):
    """Ratio of consecutive geometric sums S_j / S_{j-1} for rate q = 2Q."""
    if j < 1:
        raise ValueError("index must be >= 1")
    return geometric_sum(q, j) / geometric_sum(q, j - 1)


def hat_sequences(decay: PotentialDecay, j: int, first_choice: bool | None = None) -> dict:
    """Closed-form comparison quantities at index j.

    Returns the geometric sums S_j for both rates, the hatted ratio and
    exponent at index j, and the mixed-regime products V_j.
    """
    if first_choice is None:
        first_choice = _case_variant(decay) == 1
    q = 2.0 * decay.P if first_choice else 2.0 * decay.N
    return {
        "S_P": float(geometric_sum(2.0 * decay.P, j)),
        "S_N": float(geometric_sum(2.0 * decay.N, j)),
        "hat_gamma": float(hat_gamma(q, j)) if j >= 1 else math.nan,
        "hat_beta": float(hat_betas(decay, j + 1, first_choice)[j]),
        "V": float(case3_v(decay, j)),
    }


def hat_betas(decay: PotentialDecay, count: int, first_choice: bool) -> np.ndarray:
    """hat beta_1..hat beta_count for the delta-free comparison recursion."""
    if first_choice:
        beta = 2.0
        q = 2.0 * decay.P
    else:
        beta = 4.0 / 3.0
        q = 2.0 * decay.N
    out = [beta]
    for _ in range(count - 1):
        hg = 3.0 * (beta - 1.0) + q if not first_choice else beta - 1.0 + q
        beta = (2.0 - q / hg) if first_choice else (4.0 / 3.0 - q / (3.0 * hg))
        out.append(beta)
    return np.array(out)


def case3_v(decay: PotentialDecay, ell: int):
    """V_ell = 1 + S_{ell-1} * Delta with Delta = 3P - N - 1 (mixed regime)."""
    delta_gap = 3.0 * decay.P - decay.N - 1.0
    if ell == 0:
        return 1.0
    return 1.0 + geometric_sum(2.0 * decay.N, ell - 1) * delta_gap


def hat_identity_residual(q: Fraction, j: int) -> Fraction:
    """Exact residual of S_j S_1 - S_{j-1} 2Q - S_{j+1} in rational arithmetic."""
    s = lambda i: geometric_sum(q, i)
    return s(j) * s(1) - s(j - 1) * q - s(j + 1)


def gamma_product_expansion(deltas: np.ndarray, q: float, a: float) -> float:
    """Combinatorial expansion of Gamma_j for a no-switch trajectory.

    Sum over index subsets {k_1 < ... < k_n} of a^n S_{k_1-1} S_{k_2-k_1-1}
    ... S_{j-k_n} delta_{k_1} ... delta_{k_n}, with S the geometric sums of
    rate q; the empty subset contributes S_j.
    """
    j = len(deltas)
    s_cache = [float(geometric_sum(q, i)) for i in range(j + 1)]
    total = s_cache[j]
    idx = range(1, j + 1)
    for n in range(1, j + 1):
        for subset in combinations(idx, n):
            term = a ** n
            prev = 0
            for k in subset:
                term *= s_cache[k - 1 - prev] * deltas[k - 1]
                prev = k
            term *= s_cache[j - subset[-1]]
            total += term
    return total


def _case3_product_bound(traj: Trajectory, J: int, j_rel: int, decay: PotentialDecay) -> float:
    """Upper-bound expansion for Gamma_{J-2+j}/Gamma_{J-2} in the mixed regime."""
    q = 2.0 * decay.N
    a = 3.0
    deltas = [traj.states[J - 2 + i].delta for i in range(j_rel)]
    s_cache = [float(geometric_sum(q, i)) for i in range(j_rel + 1)]
    v_cache = [float(case3_v(decay, i)) for i in range(j_rel + 1)]
    total = v_cache[j_rel]
    idx = range(1, j_rel + 1)
    for n in range(1, j_rel + 1):
        for subset in combinations(idx, n):
            term = a ** n * v_cache[subset[0] - 1]
            prev = subset[0]
            for k in subset[1:]:
                term *= s_cache[k - prev - 1]
                prev = k
            term *= s_cache[j_rel - subset[-1]]
            for k in subset:
                term *= deltas[k - 1]
            total += term
    return total


def verify_trajectory(traj: Trajectory, case: CaseTag | None = None,
                      expansion_max_j: int = 12) -> VerificationReport:
    """Check the per-step identities and comparison bounds on a trajectory."""
    decay = traj.decay
    case = case or traj.case
    rep = VerificationReport(f"trajectory-{case}")
    states = traj.states
    if not states:
        rep.add("traj-nonempty", "trajectory-produced", 0, 1, 0, False, "empty trajectory")
        return rep
    beta_c, _ = beta_exponents(decay)

    # (i) telescoping identity (beta_{j+1}-1) log T_{j+1} = (beta_j-1+delta_j) log T_j
    worst = 0.0
    for i, s in enumerate(states):
        nxt_gap = states[i + 1].gap_raw if i + 1 < len(states) else traj.final_gap_raw
        nxt_log_t = states[i + 1].log_t if i + 1 < len(states) else traj.final_log_t
        lhs = nxt_gap * nxt_log_t
        rhs = (s.gap + s.delta) * s.log_t
        scale = max(abs(lhs), abs(rhs), 1.0)
        worst = max(worst, abs(lhs - rhs) / scale)
    rep.check_le("telescoping-identity", "stepwise-log-exponent-balance",
                 worst, 1e-12, detail="max relative residual over steps")

    # (ii)+(iii) comparison with the delta-free hatted sequences
    if case.variant in (1, 2):
        q2 = 2.0 * decay.P if case.variant == 1 else 2.0 * decay.N
        if q2 < 1.0:
            j_count = len(states)
            hats = hat_betas(decay, j_count + 1, first_choice=(case.variant == 1))
            if case.variant == 1:
                c_beta = (4.0 + 8.0 * decay.P) / (3.0 * (1.0 - q2))
                c8 = (1.0 + q2) / (2.0 * q2)
            else:
                c_beta = (4.0 + 8.0 * decay.N) / (3.0 * (1.0 - q2))
                c8 = (1.0 + q2) / (2.0 * q2)
            worst_beta = -math.inf
            worst_gamma = -math.inf
            for i, s in enumerate(states):
                worst_beta = max(worst_beta, s.beta - (hats[i] + c_beta * s.delta))
                hg = float(hat_gamma(q2, i + 1))
                worst_gamma = max(worst_gamma, s.gamma / hg ** 2)
            rep.check_le("beta-vs-hat", "delta-perturbation-bound",
                         worst_beta, 0.0, 1e-12,
                         detail="max of beta_j - hat beta_j - c_Q delta_j")
            rep.check_le("gamma-over-hat-sq", "gamma-ratio-bound",
                         worst_gamma, c8, 1e-12, detail=f"bound C = {c8:.6g}")
    elif case.variant == 3 and case.J is not None and 2.0 * decay.N < 1.0:
        J = case.J
        q2 = 2.0 * decay.N
        c_beta = (4.0 + 8.0 * decay.N) / (3.0 * (1.0 - q2))
        c9 = (1.0 + q2) / (2.0 * q2)
        worst_beta = -math.inf
        worst_gamma = -math.inf
        tail = [s for s in states if s.j > J]
        for i, s in enumerate(tail):
            hat_b = float(hat_betas(decay, i + 1, first_choice=False)[i])
            worst_beta = max(worst_beta, s.beta - (hat_b + c_beta * s.delta))
            hg = float(hat_gamma(q2, i + 1))
            worst_gamma = max(worst_gamma, s.gamma / hg ** 2)
        if tail:
            rep.check_le("beta-vs-hat-postswitch", "delta-perturbation-bound",
                         worst_beta, 0.0, 1e-12)
            rep.check_le("gamma-over-hat-sq-postswitch", "gamma-ratio-bound",
                         worst_gamma, c9, 1e-12, detail=f"bound C = {c9:.6g}")

    # (iv) product expansion against the directly computed product
    if case.variant in (1, 2):
        q2 = 2.0 * decay.P if case.variant == 1 else 2.0 * decay.N
        a = 1.0 if case.variant == 1 else 3.0
        j_top = min(len(states), expansion_max_j)
        worst = 0.0
        for j in range(1, j_top + 1):
            direct = math.exp(states[j - 1].log_gamma_prod)
            expanded = gamma_product_expansion(traj.deltas[:j], q2, a)
            worst = max(worst, abs(direct - expanded) / abs(expanded))
        rep.check_le("product-expansion", "gamma-product-combinatorial-expansion",
                     worst, 1e-10, detail=f"checked j <= {j_top}")
    elif case.variant == 3 and case.J is not None and case.J >= 2:
        J = case.J
        j_top = min(len(states) - (J - 2), expansion_max_j)
        worst_excess = -math.inf
        for j in range(1, j_top + 1):
            log_ref = states[J - 3].log_gamma_prod if J >= 3 else 0.0
            direct = math.exp(states[J - 2 + j - 1].log_gamma_prod - log_ref)
            bound = _case3_product_bound(traj, J, j, decay)
            worst_excess = max(worst_excess, direct / bound - 1.0)
        rep.check_le("product-expansion-upper", "gamma-product-mixed-regime-bound",
                     worst_excess, 0.0, 1e-10, detail=f"checked j <= {j_top}")

    # (v) regime-specific product growth
    if beta_c < 1.0 and case.variant in (1, 2):
        q2 = 2.0 * decay.P if case.variant == 1 else 2.0 * decay.N
        ratios = [math.exp(s.log_gamma_prod) / float(geometric_sum(q2, s.j))
                  for s in states]
        c_meas = max(ratios)
        half = len(ratios) // 2
        stable = max(ratios[half:]) <= 2.0 * max(ratios[: max(half, 1)])
        rep.add("product-linear-growth", "product-vs-geometric-sum-bound",
                c_meas, c_meas, 0.0, math.isfinite(c_meas) and stable,
                detail="measured C with second-half stability under factor 2")
    if beta_c == 1.0:
        vals = [math.exp(s.log_gamma_prod) / (s.j ** 3 * s.delta) for s in states
                if s.j >= 3]
        if vals:
            c_meas = min(vals)
            rep.add("product-cubic-lower", "critical-case-cubic-growth",
                    c_meas, 0.0, 0.0, c_meas > 0.0, detail="measured c")
        gaps = []
        for i, s in enumerate(states[:-1]):
            gaps.append((states[i + 1].beta - 1.0) * (s.j))
        if gaps:
            c_gap = min(gaps)
            rep.add("beta-gap-lower", "critical-case-beta-gap",
                    c_gap, 0.0, 0.0, c_gap > 0.0, detail="measured c in beta_{j+1}-1 >= c/j")

    # (vi) once below ell, stays below ell
    if case.variant == 3 and case.J is not None:
        ok = all(s.beta <= s.ell + 1e-12 for s in states if s.j >= case.J)
        rep.add("stays-below-ell", "post-switch-containment", 0.0 if ok else 1.0,
                0.0, 0.0, ok)

    rep.metadata["case"] = str(case)
    rep.metadata["max_gamma"] = traj.max_gamma
    rep.metadata["diagnostics"] = list(traj.diagnostics)
    return rep


def breakdown_diagnostic(decay: PotentialDecay, consts: EngineConstants,
                         radii: list[float],
                         step_rule=None) -> dict:
    """Critical-regime diagnostic at m = ceil(log R / (log log R)^2).

    The radius equation T1^{Gamma_m(T1)} = R is solved FORMALLY: the recursion
    runs through the largeness flags, because exhibiting that the solved T1
    violates them is exactly the breakdown being diagnosed.  Reports the
    solved log T1 per target radius (the vanishing trend), whether the
    largeness floor is violated, and the measured cubic-growth constant of
    the product sequence on a long in-regime trajectory.
    """
    beta_c, _ = beta_exponents(decay)
    if beta_c != 1.0:
        raise RegimeError("breakdown diagnostic is for beta_c == 1")
    step_rule = step_rule or (lambda lr: math.ceil(lr / math.log(lr) ** 2))
    floor = _min_valid_log_t1(decay, consts)
    rows = []
    for r in radii:
        lr = math.log(r)
        m = step_rule(lr)

        def f(log_t1: float) -> float:
            traj = iterate(decay, consts, 0.0, m, log_t1=log_t1,
                           enforce_validity=False)
            return traj.final_log_t - lr

        grid = np.geomspace(1e-3, lr, 300)
        vals = np.array([f(g) for g in grid])
        finite = np.isfinite(vals)
        sign_change = np.nonzero(np.diff(np.sign(vals[finite])) != 0)[0]
        if len(sign_change) == 0:
            rows.append({"R": r, "m": m, "log_T1": math.nan,
                         "floor_violated": True, "solved": False})
            continue
        gf = grid[finite]
        i = int(sign_change[-1])
        log_t1 = brentq(f, gf[i], gf[i + 1], xtol=1e-13, maxiter=200)
        traj = iterate(decay, consts, 0.0, m, log_t1=log_t1,
                       enforce_validity=False)
        rows.append({"R": r, "m": m, "log_T1": log_t1,
                     "floor_violated": log_t1 < floor, "solved": True,
                     "diagnostics": list(traj.diagnostics)})
    log_t1s = [row["log_T1"] for row in rows if row["solved"]]
    decreasing = (len(log_t1s) == len(rows)
                  and all(b < a for a, b in zip(log_t1s, log_t1s[1:])))

    # cubic product growth on a long valid trajectory
    t1 = math.exp(floor + 2.0)
    traj = iterate(decay, consts, t1, 24)
    c_cubic = math.inf
    for s in traj.states:
        if s.j >= 3:
            c_cubic = min(c_cubic,
                          math.exp(s.log_gamma_prod) / (s.j ** 3 * s.delta))
    return {"rows": rows, "log_T1_decreasing": decreasing,
            "validity_floor": floor,
            "cubic_growth_constant": c_cubic if math.isfinite(c_cubic) else None}
