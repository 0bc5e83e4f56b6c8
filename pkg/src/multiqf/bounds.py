"""Analytical protocol mathematics.

Closed-form photon-number upper bounds and referee thresholds for the two
realistic referee strategies, the ideal-case bound, qubit counting, the
iterative two-user threshold search, and the naive repeated-pairwise
multi-user composition.

Photon-number accounting: every returned ``alpha2`` is the *transmitted*
mean photon number per user.  The combined efficiency ``eta`` (channel loss
times detector efficiency) divides the bound once; referee thresholds are
computed from the detector-side number ``eta * alpha2`` because clicks
happen after the losses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from statistics import NormalDist

import numpy as np

from .errors import ConvergenceError, FeasibilityError, ParameterError
from .gains import GainSet

STRATEGY_FIRST = "first-K-minus-1"
STRATEGY_LAST = "last-only"
STRATEGY_IDEAL = "ideal"
STRATEGY_TWO_USER = "two-user-iterative"
STRATEGY_NAIVE = "naive"

#: Photon-regime guard: K * alpha2 / M must stay below this for the
#: linearized click model behind the closed-form bounds to apply.
PHOTON_REGIME_LIMIT = 0.1

#: Dark-count addend must exceed this multiple of the 4q^2 addend before the
#: bound is flagged as dark-count dominated (diagnostic only).
DOMINANCE_FACTOR = 10.0

_NORMAL = NormalDist()


@dataclass(frozen=True)
class ECCParams:
    """Distance parameter delta and rate c = M/N of the error-amplifying code."""

    delta: float
    c: float

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ParameterError("delta must lie in (0, 1)")
        if self.c <= 1.0:
            raise ParameterError("code rate c must exceed 1")

    @classmethod
    def from_delta(cls, delta: float) -> "ECCParams":
        """Rate implied by the distance parameter for random linear codes."""
        if not 0.0 < delta < 1.0:
            raise ParameterError("delta must lie in (0, 1)")
        inv = 1.0 + delta * math.log2(delta) + (1.0 - delta) * math.log2(1.0 - delta)
        if inv <= 0.0:
            raise ParameterError("the code rate diverges at delta = 1/2")
        return cls(delta=delta, c=1.0 / inv)


@dataclass(frozen=True)
class ProtocolParams:
    """Shared protocol-level parameters.

    ``eta`` excludes internal beamsplitter losses (those live in the gains);
    ``p_dark`` is the per-detector, per-pulse-slot dark-click probability.
    """

    k: int
    n_bits: float
    ecc: ECCParams
    p_error: float
    eta: float = 1.0
    p_dark: float = 0.0
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.k < 2:
            raise ParameterError("need at least two users")
        if self.n_bits < 1:
            raise ParameterError("raw message length must be >= 1")
        if not 0.0 < self.p_error < 1.0:
            raise ParameterError("p_error must lie in (0, 1)")
        if not 0.0 < self.eta <= 1.0:
            raise ParameterError("eta must lie in (0, 1]")
        if not 0.0 <= self.p_dark < 1.0:
            raise ParameterError("p_dark must lie in [0, 1)")
        if not 0.0 < self.epsilon < 1.0:
            raise ParameterError("epsilon must lie in (0, 1)")

    @property
    def m_pulses(self) -> int:
        """Codeword length M = round(c * N), at least 1."""
        return max(1, round(self.ecc.c * self.n_bits))


@dataclass(frozen=True)
class BoundResult:
    """Photon-number bound, referee threshold, and qubit cost for one strategy."""

    strategy: str
    alpha2: float
    threshold_r: float
    m_pulses: int
    q_qubits: float
    delta_cap: float
    dominance_ratio: float = float("nan")
    feasible: bool = True

    def __post_init__(self):
        if self.alpha2 <= 0 and self.feasible:
            raise ParameterError("a feasible bound must carry a positive alpha2")
        # Sanity anchor in the long-codeword regime: the qubit count cannot
        # fall below half the standard alpha2 * log2(M) approximation.
        if self.m_pulses >= 1000 and self.q_qubits < 0.5 * self.alpha2 * math.log2(self.m_pulses):
            raise ParameterError("qubit count fell below the large-M sanity floor")

    @property
    def dominant_dark_term(self) -> bool:
        return self.dominance_ratio >= DOMINANCE_FACTOR

    def within_validity(self, k: int) -> bool:
        """Small-photon-regime check K * alpha2 / M < 0.1 for this result."""
        return k * self.alpha2 / self.m_pulses < PHOTON_REGIME_LIMIT


def ideal_alpha2(k: int, ecc: ECCParams, p_error: float) -> float:
    """Lossless, noiseless photon-number requirement, independent of M."""
    if k < 2:
        raise ParameterError("need at least two users")
    return k / (4.0 * (1.0 - ecc.delta) * (k - 1)) * math.log(1.0 / p_error)


def qubit_cost(alpha2: float, m_pulses: int, epsilon: float = 1e-6) -> tuple[float, float]:
    """Transmitted qubits per user for a coherent fingerprint of alpha2 photons.

    The slack parameter is the smallest positive solution of

        2 exp(-a) (e a / (a + d))^(a + d) <= (epsilon / 2)^2,   a = alpha2,

    found by bisection on the (monotone decreasing) logarithm of the left
    side; the qubit count is then
    (a + d) log2(M + a + d - 1) + log2(2 d).
    """
    if alpha2 <= 0:
        raise ParameterError("alpha2 must be positive")
    if m_pulses < 1:
        raise ParameterError("need at least one pulse")
    if not 0.0 < epsilon < 1.0:
        raise ParameterError("epsilon must lie in (0, 1)")
    a = float(alpha2)
    log_target = 2.0 * math.log(epsilon / 2.0)

    def log_lhs(d: float) -> float:
        return math.log(2.0) - a + (a + d) * (1.0 + math.log(a) - math.log(a + d))

    hi = 50.0 * (1.0 + a)
    for _ in range(200):
        if log_lhs(hi) <= log_target:
            break
        hi *= 2.0
    else:
        raise ConvergenceError("no bracket for the qubit-count slack parameter")
    lo = 0.0
    while hi - lo > 1e-9 * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        if log_lhs(mid) <= log_target:
            hi = mid
        else:
            lo = mid
    delta_cap = hi
    q = (a + delta_cap) * math.log2(m_pulses + a + delta_cap - 1.0) + math.log2(2.0 * delta_cap)
    return q, delta_cap


def _assemble(
    strategy: str,
    params: ProtocolParams,
    q: float,
    gain_diff: float,
    dark_weight: float,
    r_gain_sum: float,
    r_dark: float,
) -> BoundResult:
    """Shared tail-bound inversion for both realistic strategies.

    ``q`` and ``gain_diff`` parametrize the quadratic whose positive root is
    the detector-side photon number; ``dark_weight`` counts the detectors
    whose dark clicks enter the statistic.
    """
    delta = params.ecc.delta
    ln_inv_p = math.log(1.0 / params.p_error)
    denom = (1.0 - delta) ** 2 * gain_diff**2
    q2_addend = 4.0 * q * q
    dark_addend = 2.0 * denom * dark_weight * params.m_pulses * params.p_dark * ln_inv_p
    received = (4.0 * q + 2.0 * math.sqrt(q2_addend + dark_addend)) / denom
    alpha2 = received / params.eta
    threshold = 0.5 * received * r_gain_sum + r_dark
    qq, dcap = qubit_cost(alpha2, params.m_pulses, params.epsilon)
    return BoundResult(
        strategy=strategy,
        alpha2=alpha2,
        threshold_r=threshold,
        m_pulses=params.m_pulses,
        q_qubits=qq,
        delta_cap=dcap,
        dominance_ratio=dark_addend / q2_addend if q2_addend > 0 else float("inf"),
    )


def bound_first_detectors(params: ProtocolParams, gains: GainSet) -> BoundResult:
    """Strategy counting clicks on the K-1 photon-gaining detectors."""
    delta = params.ecc.delta
    diff = gains.g_d_first_min - gains.g_e_first
    if diff <= 0:
        raise FeasibilityError(
            "fingerprinting impossible for the first-detectors strategy: "
            f"min g_D[1,K-1] = {gains.g_d_first_min:.6g} must exceed "
            f"g_E[1,K-1] = {gains.g_e_first:.6g}"
        )
    q = (delta * gains.g_e_first + (1.0 - delta) * gains.g_d_first_min) * math.log(
        1.0 / params.p_error
    )
    return _assemble(
        STRATEGY_FIRST,
        params,
        q=q,
        gain_diff=diff,
        dark_weight=params.k - 1,
        r_gain_sum=(1.0 + delta) * gains.g_e_first + (1.0 - delta) * gains.g_d_first_min,
        r_dark=(params.k - 1) * params.m_pulses * params.p_dark,
    )


def bound_last_detector(params: ProtocolParams, gains: GainSet) -> BoundResult:
    """Strategy watching only the photon-losing detector."""
    delta = params.ecc.delta
    diff = gains.g_e_last - gains.g_d_last_max
    if diff <= 0:
        raise FeasibilityError(
            "fingerprinting impossible for the last-detector strategy: "
            f"g_E[K] = {gains.g_e_last:.6g} must exceed "
            f"max g_D[K] = {gains.g_d_last_max:.6g}"
        )
    q = gains.g_e_last * math.log(1.0 / params.p_error)
    return _assemble(
        STRATEGY_LAST,
        params,
        q=q,
        gain_diff=diff,
        dark_weight=1.0,
        r_gain_sum=(1.0 + delta) * gains.g_e_last + (1.0 - delta) * gains.g_d_last_max,
        r_dark=params.m_pulses * params.p_dark,
    )


def ideal_bound(params: ProtocolParams) -> BoundResult:
    """Defectless-circuit reference curve (any-click rule, threshold 0)."""
    alpha2 = ideal_alpha2(params.k, params.ecc, params.p_error)
    qq, dcap = qubit_cost(alpha2, params.m_pulses, params.epsilon)
    return BoundResult(
        strategy=STRATEGY_IDEAL,
        alpha2=alpha2,
        threshold_r=0.0,
        m_pulses=params.m_pulses,
        q_qubits=qq,
        delta_cap=dcap,
    )


# --------------------------------------------------------------------------
# Binomial inverse CDF


def _log_pmf_array(ks: np.ndarray, n: float, log_q: float, log_1mq: float) -> np.ndarray:
    lg = math.lgamma
    lgn = lg(n + 1.0)
    out = np.empty(len(ks))
    for i, k in enumerate(ks):
        out[i] = lgn - lg(k + 1.0) - lg(n - k + 1.0) + k * log_q + (n - k) * log_1mq
    return out


def _logsumexp(values: np.ndarray) -> float:
    m = values.max()
    if m == -math.inf:
        return -math.inf
    # fsum keeps the accumulation exactly rounded; the remaining error floor
    # (~1e-12 relative for huge n) comes from cancellations in lgamma.
    return m + math.log(math.fsum(np.exp(values - m)))


def _log_tail(
    lo: float, hi: float, n: float, log_q: float, log_1mq: float, from_top: bool
) -> float:
    """log of the pmf sum over the integer window [lo, hi].

    Terms are accumulated from the boundary nearest the mode and the window
    is widened until the last included term is negligible, so deep tails
    converge after a few hundred terms regardless of n.
    """
    width = 256
    while True:
        if from_top:
            a, b = max(lo, hi - width + 1), hi
        else:
            a, b = lo, min(hi, lo + width - 1)
        ks = np.arange(a, b + 1, dtype=float)
        logs = _log_pmf_array(ks, n, log_q, log_1mq)
        total = _logsumexp(logs)
        edge = logs[0] if from_top else logs[-1]
        if (a == lo and from_top) or (b == hi and not from_top) or edge - total < -42.0:
            return total
        width *= 4


def _binom_cdf(k: float, n: float, q: float) -> float:
    """CDF of a binomial, evaluated through the nearer tail in log space."""
    if k < 0:
        return 0.0
    if k >= n or q <= 0.0:
        return 1.0
    if q >= 1.0:
        return 0.0
    log_q, log_1mq = math.log(q), math.log1p(-q)
    if k < n * q:
        return math.exp(_log_tail(0.0, k, n, log_q, log_1mq, from_top=True))
    return 1.0 - math.exp(_log_tail(k + 1.0, n, n, log_q, log_1mq, from_top=False))


#: Relative comparison fuzz, above the ~1e-12 accuracy floor of the
#: lgamma-based tail sums, so exact-tie CDF values (for example the
#: symmetric-binomial midpoint) resolve like the exact arithmetic.
_TIE_FUZZ = 5e-12


def binomial_inv_cdf(p: float, n: int, q: float) -> int:
    """Smallest k with Binomial(n, q) CDF(k) >= p.

    Stable for very large n: a Cornish-Fisher starting point is refined by
    exact probability-mass steps, with tail masses summed in log space on
    whichever side of the distribution is smaller (the survival side for
    p > 1/2) so the comparison precision tracks the tail, not 1.
    """
    if n < 1:
        raise ParameterError("need at least one trial")
    if not 0.0 <= p <= 1.0 or not 0.0 <= q <= 1.0:
        raise ParameterError("probabilities must lie in [0, 1]")
    if p <= 0.0 or q <= 0.0:
        return 0
    if q >= 1.0:
        return n
    if p >= 1.0:
        return n

    log_q, log_1mq = math.log(q), math.log1p(-q)
    use_sf = p > 0.5
    # Survival target; the extra 2^-53 absorbs the rounding of 1 - p itself,
    # which dominates the tie tolerance once the survival drops below ~1e-7.
    s = 1.0 - p
    s_eff = s * (1.0 + _TIE_FUZZ) + 2.0**-53

    if n <= 2048:
        ks = np.arange(0, n + 1, dtype=float)
        pmfs = np.exp(_log_pmf_array(ks, float(n), log_q, log_1mq))
        if use_sf:
            # survival G(k) = sum_{j > k} pmf, strictly decreasing in k
            g = np.concatenate([np.cumsum(pmfs[::-1])[::-1][1:], [0.0]])
            hits = np.nonzero(g <= s_eff)[0]
            return int(hits[0])
        cdf = np.cumsum(pmfs)
        return min(int(np.searchsorted(cdf, p * (1.0 - _TIE_FUZZ))), n)

    mean = n * q
    sd = math.sqrt(n * q * (1.0 - q))
    z = _NORMAL.inv_cdf(min(max(p, 1e-300), 1.0 - 1e-16))
    guess = mean + z * sd + (z * z - 1.0) * (1.0 - 2.0 * q) / 6.0
    k = int(min(max(round(guess), 0), n))

    def pmf(kk: int) -> float:
        return math.exp(_log_pmf_array(np.array([float(kk)]), float(n), log_q, log_1mq)[0])

    if use_sf:
        if k >= n:
            g = 0.0
        else:
            g = math.exp(_log_tail(k + 1.0, float(n), float(n), log_q, log_1mq, from_top=False))
        if g <= s_eff:
            while k > 0:
                g_prev = g + pmf(k)  # G(k-1)
                if g_prev <= s_eff:
                    g = g_prev
                    k -= 1
                else:
                    return k
            return 0
        while k < n:
            g -= pmf(k + 1)
            k += 1
            if g <= s_eff:
                return k
        return n

    p_eff = p * (1.0 - _TIE_FUZZ)
    f = _binom_cdf(k, n, q)
    if f >= p_eff:
        while k > 0:
            f -= pmf(k)
            if f >= p_eff:
                k -= 1
            else:
                return k
        return 0
    while k < n:
        k += 1
        f += pmf(k)
        if f >= p_eff:
            return k
    return n


# --------------------------------------------------------------------------
# Iterative two-user threshold search and the naive multi-user composition


def _two_user_thresholds(
    alpha2: float,
    m: int,
    v: float,
    delta: float,
    p_dark: float,
    p_error_equal: float,
    p_error_diff: float,
) -> tuple[int, int]:
    p_e = min(1.0, -math.expm1(-2.0 * (1.0 - v) * alpha2 / m) + p_dark)
    p_d = min(1.0, -math.expm1(-2.0 * v * alpha2 / m) + p_dark)
    mix = min(1.0, (1.0 - delta) * p_d + delta * p_e)
    r_equal = binomial_inv_cdf(1.0 - p_error_equal, m, p_e)
    r_diff = binomial_inv_cdf(p_error_diff, m, mix) - 1
    return r_equal, r_diff


def algorithm_two_user(
    params: ProtocolParams,
    v: float,
    step: float = 1.0,
    alpha2_cap: float = 1e6,
    p_error_equal: float | None = None,
    p_error_diff: float | None = None,
) -> BoundResult:
    """Iterative two-user photon-number search with exact binomial quantiles.

    Raises the (detector-side) photon number from zero in increments of
    ``step`` until the equal-sequence and different-sequence thresholds
    meet; the returned ``alpha2`` is scaled to the transmitted number by
    the combined efficiency.  The crossing is located by bisection over the
    same step grid, which returns the first grid point whose
    different-sequence threshold has caught up with the equal one.
    """
    if params.k != 2:
        raise ParameterError("the iterative threshold search is a two-user method")
    if not 0.5 < v <= 1.0:
        raise ParameterError("visibility must lie in (1/2, 1]")
    if step <= 0:
        raise ParameterError("step must be positive")
    pe_eq = params.p_error if p_error_equal is None else p_error_equal
    pe_df = params.p_error if p_error_diff is None else p_error_diff
    m = params.m_pulses
    delta = params.ecc.delta

    def crossed(alpha2: float) -> tuple[bool, int, int]:
        r_e, r_d = _two_user_thresholds(alpha2, m, v, delta, params.p_dark, pe_eq, pe_df)
        return r_d >= r_e, r_e, r_d

    ok0, _, _ = crossed(0.0)
    if ok0:
        raise ConvergenceError("threshold search degenerate: crossing at zero photons")
    lo = 0.0
    hi = step
    while True:
        ok, r_e, r_d = crossed(hi)
        if ok:
            break
        if hi > alpha2_cap:
            raise ConvergenceError(
                f"no threshold crossing up to alpha2 = {hi:.4g}; "
                f"remaining gap r_E - r_D = {r_e - r_d}"
            )
        lo = hi
        hi *= 2.0
    while hi - lo > step * 1.0001:
        mid = lo + step * round((hi - lo) / (2.0 * step))
        mid = min(max(mid, lo + step), hi - step)
        ok, _, _ = crossed(mid)
        if ok:
            hi = mid
        else:
            lo = mid
    _, _, r_d = crossed(hi)
    alpha2 = hi / params.eta
    qq, dcap = qubit_cost(alpha2, m, params.epsilon)
    return BoundResult(
        strategy=STRATEGY_TWO_USER,
        alpha2=alpha2,
        threshold_r=float(r_d),
        m_pulses=m,
        q_qubits=qq,
        delta_cap=dcap,
    )


def naive_error_probability(k: int, p_error: float) -> float:
    """Per-pair error budget of the repeated-pairwise protocol."""
    if k < 2:
        raise ParameterError("need at least two users")
    return -math.expm1(math.log1p(-p_error) / (k - 1))


def naive_asymmetric_probs(k: int, p_error: float) -> tuple[float, float]:
    """Worst-case split (equal-case, different-case) per-pair error budgets."""
    if k < 2:
        raise ParameterError("need at least two users")
    p_equal = naive_error_probability(k, p_error)
    p_diff = p_error / (1.0 - p_error) ** ((k - 2) / (k - 1))
    return p_equal, p_diff


def naive_protocol(
    params: ProtocolParams,
    v: float,
    step: float = 1.0,
    p_error_equal: float | None = None,
    p_error_diff: float | None = None,
) -> BoundResult:
    """Repeated-pairwise multi-user protocol built from two-user runs.

    Runs the two-user search at the tightened per-pair error probability
    and scales the photon number by 2(K-1)/K because all interior users
    transmit their pulse train twice.
    """
    k = params.k
    if p_error_equal is None and p_error_diff is None:
        p_pair = naive_error_probability(k, params.p_error)
        p_error_equal = p_error_diff = p_pair
    two_user = replace(params, k=2)
    res = algorithm_two_user(
        two_user,
        v,
        step=step,
        p_error_equal=p_error_equal,
        p_error_diff=p_error_diff,
    )
    alpha2 = res.alpha2 * 2.0 * (k - 1) / k
    qq, dcap = qubit_cost(alpha2, params.m_pulses, params.epsilon)
    return BoundResult(
        strategy=STRATEGY_NAIVE,
        alpha2=alpha2,
        threshold_r=res.threshold_r,
        m_pulses=params.m_pulses,
        q_qubits=qq,
        delta_cap=dcap,
    )


def eta_scaling(alpha2_at_half: float, eta: float) -> float:
    """Rescale a photon number computed at combined efficiency 1/2."""
    if not 0.0 < eta <= 1.0:
        raise ParameterError("eta must lie in (0, 1]")
    return alpha2_at_half / (2.0 * eta)


def max_users_energy_advantage(
    ecc: ECCParams, v_last: float, p_error: float, mu_dark: float
) -> float:
    """Largest user count with an energy advantage over the classical limit.

    Valid in the dark-count-dominated long-message regime, for a fixed
    worst-case visibility of the photon-losing detector.
    """
    if not 0.0 < v_last <= 1.0:
        raise ParameterError("visibility must lie in (0, 1]")
    if mu_dark <= 0:
        raise ParameterError("mu_dark must be positive")
    num = (
        (1.0 - ecc.delta) ** 2
        * (2.0 * v_last - 1.0) ** 2
        * (1.0 - 2.0 * math.sqrt(p_error)) ** 2
    )
    return num / (2.0 * mu_dark * ecc.c * math.log(2.0 + 1.0 / p_error))
