"""Event-level click-sampling oracle.

Simulates complete protocol runs at the detector level: every pulse slot
produces an independent click per detector with the exact coherent-state
probability 1 - exp(-eta * mu), OR-ed with an independent dark click.
Because slots of one type are i.i.d., per-trial detector counts are drawn
directly from the matching binomials, which is distribution-identical to
slot-by-slot sampling and fast enough for thousands of trials.

The oracle knows nothing about the analytical tail bounds; feeding it a
bound's (alpha2, threshold) and checking the empirical error rate against
the target is the package's empirical gate on the bound mathematics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .bounds import (
    STRATEGY_FIRST,
    STRATEGY_LAST,
    PHOTON_REGIME_LIMIT,
    BoundResult,
    ProtocolParams,
    bound_first_detectors,
    bound_last_detector,
)
from .errors import ParameterError, ValidityError
from .gains import GainSet, find_last_label, output_photon_numbers
from . import gains as _gains

ALL_EQUAL = "all-equal"
WORST_DIFFERENT = "worst-different"
SCENARIOS = (ALL_EQUAL, WORST_DIFFERENT)

#: One-sided 95% normal quantile for the Wilson score bound.
_Z95 = 1.6448536269514722


def wilson_upper(errors: int, trials: int, z: float = _Z95) -> float:
    """One-sided Wilson score upper confidence bound on an error rate."""
    if trials < 1:
        raise ParameterError("need at least one trial")
    phat = errors / trials
    z2 = z * z
    center = phat + z2 / (2.0 * trials)
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials))
    return min(1.0, (center + half) / (1.0 + z2 / trials))


def default_trials(p_error: float) -> int:
    """Trial budget: enough resolution below p_error, capped for desk runs."""
    return int(min(5000, math.ceil(50.0 / p_error)))


@dataclass(frozen=True)
class SimConfig:
    """One simulation scenario.

    ``alpha2`` is the transmitted mean photon number per user; the combined
    efficiency in ``params`` is applied inside the click model.  When
    ``last_label`` or ``worst_pattern`` are omitted they are derived from
    the transfer matrix (photon-keeping output; adversarial single-flip
    pattern for the configured strategy).
    """

    trials: int
    scenario: str
    strategy: str
    params: ProtocolParams
    transfer: np.ndarray
    alpha2: float
    threshold_r: float
    last_label: int | None = None
    worst_pattern: tuple[int, ...] | None = None
    enforce_photon_regime: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError("need at least one trial")
        if self.scenario not in SCENARIOS:
            raise ParameterError(f"unknown scenario {self.scenario!r}")
        if self.strategy not in (STRATEGY_FIRST, STRATEGY_LAST):
            raise ParameterError(f"unknown strategy {self.strategy!r}")
        if self.alpha2 < 0:
            raise ParameterError("alpha2 must be nonnegative")


@dataclass(frozen=True)
class SimOutcome:
    """Empirical result of one simulated scenario."""

    scenario: str
    strategy: str
    trials: int
    errors: int
    error_rate: float
    wilson_upper_95: float
    click_histogram: dict[int, dict[str, float]]

    def to_json_dict(self, p_error: float | None = None) -> dict:
        out = {
            "strategy": self.strategy,
            "scenario": self.scenario,
            "trials": self.trials,
            "errors": self.errors,
            "error_rate": self.error_rate,
            "wilson_upper_95": self.wilson_upper_95,
        }
        if p_error is not None:
            out["pass"] = bool(self.wilson_upper_95 <= p_error)
        return out


def _worst_pattern(transfer: np.ndarray, strategy: str, last_label: int) -> tuple[int, ...]:
    gs = _gains.gain_set(transfer, last_label=last_label)
    if strategy == STRATEGY_FIRST:
        return gs.worst_pattern_first
    return gs.worst_pattern_last


def simulate(config: SimConfig, seed: int = 0) -> SimOutcome:
    """Run the click-level simulation for one scenario.

    Raises ``ValidityError`` when K * alpha2 / M reaches the small-photon
    limit the analytical model relies on, unless explicitly overridden
    (the sampling itself stays exact either way).
    """
    params = config.params
    k = params.k
    m = params.m_pulses
    mu_in = config.alpha2 / m
    if config.enforce_photon_regime and k * config.alpha2 / m >= PHOTON_REGIME_LIMIT:
        raise ValidityError(
            f"K * alpha2 / M = {k * config.alpha2 / m:.4g} is outside the "
            f"small-photon regime (< {PHOTON_REGIME_LIMIT}); pass "
            "enforce_photon_regime=False to sample anyway"
        )
    transfer = np.asarray(config.transfer, dtype=complex)
    if transfer.shape != (k, k):
        raise ParameterError(f"transfer matrix shape {transfer.shape} != ({k}, {k})")
    last_label = config.last_label or find_last_label(transfer)
    last = last_label - 1

    def photon_numbers(pattern) -> np.ndarray:
        if mu_in == 0.0:
            return np.zeros(k)
        return output_photon_numbers(transfer, pattern, mu_in)

    mu_equal = photon_numbers(None)
    if config.scenario == WORST_DIFFERENT:
        pattern = config.worst_pattern or _worst_pattern(transfer, config.strategy, last_label)
        mu_diff = photon_numbers(pattern)
        m_diff = math.floor((1.0 - params.ecc.delta) * m)
    else:
        mu_diff = mu_equal
        m_diff = 0
    m_equal = m - m_diff

    def click_prob(mu: np.ndarray) -> np.ndarray:
        p = -np.expm1(-params.eta * mu)
        return 1.0 - (1.0 - p) * (1.0 - params.p_dark)

    p_equal = click_prob(mu_equal)
    p_diff = click_prob(mu_diff)

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0))))
    counts = np.empty((k, config.trials), dtype=np.int64)
    for det in range(k):
        counts[det] = rng.binomial(m_equal, p_equal[det], size=config.trials)
        if m_diff:
            counts[det] += rng.binomial(m_diff, p_diff[det], size=config.trials)

    if config.strategy == STRATEGY_FIRST:
        stat = counts.sum(axis=0) - counts[last]
        says_different = stat > config.threshold_r
    else:
        stat = counts[last]
        says_different = stat <= config.threshold_r

    truly_different = config.scenario == WORST_DIFFERENT
    errors = int(np.count_nonzero(says_different != truly_different))
    hist = {
        det + 1: {
            "mean": float(counts[det].mean()),
            "std": float(counts[det].std()),
            "min": int(counts[det].min()),
            "max": int(counts[det].max()),
        }
        for det in range(k)
    }
    return SimOutcome(
        scenario=config.scenario,
        strategy=config.strategy,
        trials=config.trials,
        errors=errors,
        error_rate=errors / config.trials,
        wilson_upper_95=wilson_upper(errors, config.trials),
        click_histogram=hist,
    )


@dataclass(frozen=True)
class VerifyReport:
    """Outcome of checking one analytical bound against the oracle."""

    strategy: str
    bound: BoundResult
    outcomes: dict[str, SimOutcome]
    p_error: float

    @property
    def passed(self) -> bool:
        return all(o.wilson_upper_95 <= self.p_error for o in self.outcomes.values())

    def to_json(self) -> str:
        return json.dumps(
            {
                "strategy": self.strategy,
                "alpha2": self.bound.alpha2,
                "threshold_r": self.bound.threshold_r,
                "p_error": self.p_error,
                "pass": self.passed,
                "scenarios": [
                    self.outcomes[s].to_json_dict(self.p_error) for s in sorted(self.outcomes)
                ],
            },
            sort_keys=True,
        )


def verify_bound(
    strategy: str,
    params: ProtocolParams,
    gains: GainSet,
    transfer: np.ndarray,
    trials: int | None = None,
    seed: int = 0,
    alpha2_scale: float = 1.0,
    r_scale: float = 1.0,
    enforce_photon_regime: bool = True,
) -> VerifyReport:
    """Compute a strategy bound, then test it empirically in both scenarios.

    ``alpha2_scale`` and ``r_scale`` deliberately corrupt the bound (for
    power checks of the gate itself); the honest gate uses both at 1.
    """
    if strategy == STRATEGY_FIRST:
        bound = bound_first_detectors(params, gains)
    elif strategy == STRATEGY_LAST:
        bound = bound_last_detector(params, gains)
    else:
        raise ParameterError(f"unknown strategy {strategy!r}")
    if trials is None:
        trials = default_trials(params.p_error)
    if trials < 100:
        raise ParameterError("statistical gating needs at least 100 trials")
    bound = replace(
        bound,
        alpha2=bound.alpha2 * alpha2_scale,
        threshold_r=bound.threshold_r * r_scale,
    )
    outcomes = {}
    for i, scenario in enumerate(SCENARIOS):
        config = SimConfig(
            trials=trials,
            scenario=scenario,
            strategy=strategy,
            params=params,
            transfer=transfer,
            alpha2=bound.alpha2,
            threshold_r=bound.threshold_r,
            last_label=gains.last_label,
            worst_pattern=(
                gains.worst_pattern_first if strategy == STRATEGY_FIRST
                else gains.worst_pattern_last
            ),
            enforce_photon_regime=enforce_photon_regime,
        )
        outcomes[scenario] = simulate(config, seed=seed + i)
    return VerifyReport(strategy=strategy, bound=bound, outcomes=outcomes, p_error=params.p_error)
