"""Output photon numbers, gain families, and generalized visibilities.

A "gain" is the ratio of the mean photon number at an output detector (or
group of detectors) to the mean photon number of one input pulse.  Gains
are evaluated for the all-equal input pattern and for phase patterns with
one or more inputs sign-flipped; the worst case over single-flip patterns
drives the protocol bounds.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError, ParameterError

#: Sentinel accepted wherever a phase pattern is expected: all inputs equal.
EQUAL = None


@dataclass(frozen=True, slots=True)
class PhasePattern:
    """Vector of +/-1 input phase labels with its minority count L."""

    labels: tuple[int, ...]

    def __post_init__(self):
        if not self.labels or any(v not in (-1, 1) for v in self.labels):
            raise ParameterError("phase labels must be +1 or -1")

    @property
    def l_count(self) -> int:
        plus = sum(1 for v in self.labels if v == 1)
        return min(plus, len(self.labels) - plus)


@dataclass(frozen=True)
class GainSet:
    """The four gain aggregates of one circuit, plus the per-pattern table.

    ``last_label`` is the 1-based index of the photon-keeping output (the
    detector that loses photons when inputs differ); all "first" gains sum
    over the remaining K-1 outputs.  ``per_pattern`` maps each evaluated
    phase-label tuple to its (first-group, last-detector) gain pair.
    """

    k: int
    last_label: int
    g_e_first: float
    g_d_first_min: float
    g_e_last: float
    g_d_last_max: float
    per_pattern: dict[tuple[int, ...], tuple[float, float]]

    @property
    def worst_pattern_first(self) -> tuple[int, ...]:
        """Pattern minimizing the first-group difference gain."""
        return min(self.per_pattern, key=lambda p: self.per_pattern[p][0])

    @property
    def worst_pattern_last(self) -> tuple[int, ...]:
        """Pattern maximizing the last-detector difference gain."""
        return max(self.per_pattern, key=lambda p: self.per_pattern[p][1])


def output_photon_numbers(
    transfer: np.ndarray, pattern, mu_in: float
) -> np.ndarray:
    """Mean photon number at each output for +/-sqrt(mu_in) inputs."""
    t = np.asarray(transfer)
    k = t.shape[0]
    if mu_in <= 0:
        raise ParameterError("mu_in must be positive")
    if pattern is EQUAL:
        labels = np.ones(k)
    else:
        labels = np.asarray(getattr(pattern, "labels", pattern), dtype=float)
        if labels.shape != (k,):
            raise ParameterError(f"pattern length {labels.shape} != dimension {k}")
    amp = t @ (labels * math.sqrt(mu_in))
    return np.abs(amp) ** 2


def find_last_label(transfer: np.ndarray) -> int:
    """1-based index of the output that keeps photons for all-equal inputs."""
    t = np.asarray(transfer)
    return int(np.argmax(np.abs(t.sum(axis=1)))) + 1


def l1_patterns(k: int) -> list[tuple[int, ...]]:
    """The K single-flip phase patterns."""
    out = []
    for j in range(k):
        labels = [1] * k
        labels[j] = -1
        out.append(tuple(labels))
    return out


def gain_set(
    transfer: np.ndarray,
    last_label: int | None = None,
    extra_patterns: tuple[tuple[int, ...], ...] = (),
) -> GainSet:
    """Evaluate the four gain aggregates from the K single-flip patterns.

    ``extra_patterns`` (L > 1) are added to the per-pattern table for
    diagnostics but never enter the min/max extremization.
    """
    t = np.asarray(transfer, dtype=complex)
    k = t.shape[0]
    if last_label is None:
        last_label = find_last_label(t)
    if not 1 <= last_label <= k:
        raise ParameterError(f"last_label {last_label} out of range 1..{k}")
    last = last_label - 1

    patterns = l1_patterns(k)
    cols = np.ones((k, 1 + len(patterns) + len(extra_patterns)))
    for i, p in enumerate(patterns):
        cols[:, 1 + i] = p
    for i, p in enumerate(extra_patterns):
        cols[:, 1 + len(patterns) + i] = p
    mu = np.abs(t @ cols) ** 2  # per unit mu_in; gains are mu_in-independent

    total = mu.sum(axis=0)
    g_last = mu[last, :]
    g_first = total - g_last

    per_pattern = {}
    for i, p in enumerate(patterns + list(extra_patterns)):
        per_pattern[tuple(p)] = (float(g_first[1 + i]), float(g_last[1 + i]))
    l1_first = g_first[1 : 1 + len(patterns)]
    l1_last = g_last[1 : 1 + len(patterns)]
    return GainSet(
        k=k,
        last_label=last_label,
        g_e_first=float(g_first[0]),
        g_d_first_min=float(l1_first.min()),
        g_e_last=float(g_last[0]),
        g_d_last_max=float(l1_last.max()),
        per_pattern=per_pattern,
    )


def ideal_gain_set(k: int) -> GainSet:
    """Closed-form gains of any ideal lossless design: (0, 4(K-1)/K, K, (K-2)^2/K)."""
    if k < 2:
        raise InvalidDimensionError(f"need K >= 2, got {k}")
    g_d_first = 4.0 * (k - 1) / k
    g_d_last = (k - 2) ** 2 / k
    per = {p: (g_d_first, g_d_last) for p in l1_patterns(k)}
    return GainSet(
        k=k,
        last_label=k,
        g_e_first=0.0,
        g_d_first_min=g_d_first,
        g_e_last=float(k),
        g_d_last_max=g_d_last,
        per_pattern=per,
    )


def visibilities(gains: GainSet) -> tuple[float, float]:
    """Generalized visibilities (v_first, v_last) of a gain set.

    Both normalize the realistic gain difference by its ideal value
    4(K-1)/K, reducing to the standard two-detector contrast at K=2.
    """
    k = gains.k
    if k < 2:
        raise InvalidDimensionError(f"need K >= 2, got {k}")
    scale = k / (4.0 * (k - 1))
    v_first = 0.5 * (1.0 + scale * (gains.g_d_first_min - gains.g_e_first))
    v_last = 0.5 * (1.0 + scale * (gains.g_e_last - gains.g_d_last_max))
    return v_first, v_last


@dataclass(frozen=True)
class BatchGains:
    """Realization-averaged gains plus per-realization visibility spread.

    The headline visibilities are computed from the averaged gains; the
    per-realization visibilities (column 0: first group, column 1: last
    detector) only feed the standard deviations.
    """

    mean: GainSet
    v_first: float
    v_last: float
    v_first_sd: float
    v_last_sd: float
    per_realization: np.ndarray

    @property
    def n_realizations(self) -> int:
        return self.per_realization.shape[0]


def batch_gain_set(matrices: np.ndarray, last_label: int | None = None) -> BatchGains:
    """Average gain aggregates over a batch of realized transfer matrices.

    Each realization is extremized over its own K single-flip patterns
    before averaging, mirroring how a per-experiment worst case would be
    measured.
    """
    matrices = np.asarray(matrices)
    if matrices.ndim != 3:
        raise ParameterError("expected a (n, K, K) stack of matrices")
    n, k, _ = matrices.shape
    if last_label is None:
        last_label = find_last_label(matrices[0])

    sets = [gain_set(matrices[i], last_label=last_label) for i in range(n)]
    vis = np.array([visibilities(g) for g in sets])
    mean_per = {}
    for p in sets[0].per_pattern:
        firsts = [g.per_pattern[p][0] for g in sets]
        lasts = [g.per_pattern[p][1] for g in sets]
        mean_per[p] = (float(np.mean(firsts)), float(np.mean(lasts)))
    mean = GainSet(
        k=k,
        last_label=last_label,
        g_e_first=float(np.mean([g.g_e_first for g in sets])),
        g_d_first_min=float(np.mean([g.g_d_first_min for g in sets])),
        g_e_last=float(np.mean([g.g_e_last for g in sets])),
        g_d_last_max=float(np.mean([g.g_d_last_max for g in sets])),
        per_pattern=mean_per,
    )
    v_first, v_last = visibilities(mean)
    return BatchGains(
        mean=mean,
        v_first=v_first,
        v_last=v_last,
        v_first_sd=float(vis[:, 0].std(ddof=1)) if n > 1 else 0.0,
        v_last_sd=float(vis[:, 1].std(ddof=1)) if n > 1 else 0.0,
        per_realization=vis,
    )


def worst_case_pattern_scan(
    transfer: np.ndarray,
    last_label: int | None = None,
    max_l: int = 1,
    pattern_budget: int = 500_000,
) -> list[tuple[PhasePattern, float, float]]:
    """Gains for every pattern with minority count L <= max_l.

    Patterns are enumerated up to the global sign flip (the first label is
    pinned to +1), since opposite patterns produce identical photon
    statistics.  Refuses enumerations larger than ``pattern_budget``.
    """
    t = np.asarray(transfer, dtype=complex)
    k = t.shape[0]
    if last_label is None:
        last_label = find_last_label(t)
    last = last_label - 1
    if max_l < 1 or max_l > k // 2:
        raise ParameterError(f"max_l must be in 1..{k // 2}")
    total = sum(math.comb(k - 1, l) for l in range(1, max_l + 1))
    if total > pattern_budget:
        raise ParameterError(
            f"{total} patterns exceed the budget of {pattern_budget}; "
            "raise pattern_budget to force the scan"
        )

    rows = []
    for l in range(1, max_l + 1):
        for flips in itertools.combinations(range(1, k), l):
            labels = np.ones(k)
            labels[list(flips)] = -1.0
            mu = np.abs(t @ labels) ** 2
            g_last = float(mu[last])
            rows.append(
                (PhasePattern(tuple(int(v) for v in labels)), float(mu.sum() - g_last), g_last)
            )
    return rows
